#pragma once

#include "seqrex/checkpoint.hpp"
#include "seqrex/data.hpp"
#include "seqrex/evaluator.hpp"
#include "seqrex/nn.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace seqrex {

enum class Arch { kNarm, kSasrec, kBert4rec };

Arch arch_from_string(const std::string& s);
std::string arch_name(Arch a);

struct ModelConfig {
  Arch arch = Arch::kSasrec;
  int num_items = 0;
  int embed_dim = 64;
  int trm_layers = 2;
  int heads = 2;
  int gru_layers = 1;
  float dropout = 0.1f;
  float mask_prob = 0.2f;  // BERT4Rec masked-prediction rate
  int max_len = 50;

  std::vector<std::string> validate() const;  // empty when valid
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct VictimTrainOptions {
  int epochs = 100;
  float lr = 1e-3f;
  EvalProtocol val_protocol;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double val_ndcg10 = 0.0;
  double val_recall10 = 0.0;
};

// Serves both roles: black-box victim behind the oracle and white-box
// surrogate under distillation.
class SequentialRecommender {
 public:
  SequentialRecommender(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  Arch arch() const { return cfg_.arch; }
  uint64_t seed() const { return seed_; }
  ParameterStore& params() { return ps_; }
  const ParameterStore& params() const { return ps_; }

  // Deterministic eval-mode scores over all items. Longer prefixes keep the
  // most recent window; items already in the prefix are not excluded.
  std::vector<float> score_next(const std::vector<int>& prefix) const;

  // Eval-mode logits for every prefix of `items`: row j scores the prefix
  // items[0..j]. Requires items.size() <= max_len for the causal paths.
  Mat prefix_logit_matrix(const std::vector<int>& items) const;

  // Training-graph variant of the above on the caller's tape.
  Var prefix_logits(Tape& t, const std::vector<int>& items, bool train, Rng* rng);

  // Next-item training (NARM/SASRec: full-softmax cross-entropy over sliding
  // prefixes; BERT4Rec: masked-item prediction). Logs one JSON line per epoch
  // when `log` is non-null.
  std::vector<EpochLog> train_victim(const SplitDataset& split, const VictimTrainOptions& opts,
                                     uint64_t seed, std::ostream* log = nullptr);

  void save(const std::string& path) const;
  static SequentialRecommender load(const std::string& path,
                                    std::optional<Arch> expected = std::nullopt);

  ScoreFn scorer() const {
    return [this](const std::vector<int>& prefix) { return score_next(prefix); };
  }

  SequentialRecommender(const SequentialRecommender&) = default;

 private:
  ModelConfig cfg_;
  uint64_t seed_;
  ParameterStore ps_;

  // transformer stack (SASRec / BERT4Rec)
  std::vector<LayerNorm> ln_att_, ln_ffn_;
  std::vector<MultiHeadAttention> att_;
  std::vector<FeedForward> ffn_;
  LayerNorm ln_final_;
  // NARM
  std::vector<GruCell> gru_;

  void check_ids(const std::vector<int>& items) const;
  Var transformer_hidden(const ForwardCtx& c, const std::vector<int>& ids,
                         const Mat* mask) const;
  Var narm_logits(const ForwardCtx& c, const std::vector<int>& items) const;
  Var item_logits(const ForwardCtx& c, const Var& hidden) const;
  Var bert_hidden(const ForwardCtx& c, const std::vector<int>& ids) const;
  std::vector<int> window_tail(const std::vector<int>& prefix, int cap) const;
};

}  // namespace seqrex
