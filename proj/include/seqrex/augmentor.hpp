#pragma once

#include "seqrex/checkpoint.hpp"
#include "seqrex/data.hpp"
#include "seqrex/nn.hpp"
#include "seqrex/oracle.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace seqrex {

// Positional encoding exponent: kScaled uses 2m/dims (the conventional
// scaling); kPaperLiteral uses the bare 2m exponent, which flattens all but
// the first sine/cosine pair at rho_max = 1e4 and is kept for fidelity runs.
enum class PosMode { kScaled, kPaperLiteral };

PosMode pos_mode_from_string(const std::string& s);
std::string pos_mode_name(PosMode m);

Eigen::VectorXf positional_encoding(int j, int dims, PosMode mode, float rho_max = 1e4f);

struct SamplerConfig {
  int ctx_len = 10;   // history positions attended over (left-padded)
  int heads = 2;
  int head_dim = 0;   // 0 -> d_model / heads
  int d_model = 16;
  int item_dim = 16;  // metadata embedding width; also the user embedding width
  int pos_dim = 8;
  int ffn_hidden = 0;  // 0 -> d_model
  float dropout = 0.1f;
  float rho_max = 1e4f;
  PosMode pos_mode = PosMode::kScaled;
  bool threshold_signal = false;  // false: Bernoulli draw on the signal output

  int effective_head_dim() const { return head_dim > 0 ? head_dim : d_model / heads; }
  int effective_ffn_hidden() const { return ffn_hidden > 0 ? ffn_hidden : d_model; }
  std::vector<std::string> validate() const;
  nlohmann::json to_json() const;
  static SamplerConfig from_json(const nlohmann::json& j);
};

// One supervision pair for the sampler: the black-box list supplies one
// positive (the true next item) and k-1 negatives.
struct SamplerBatch {
  const std::vector<int>* prefix = nullptr;
  const TopKList* list = nullptr;
  int positive = -1;
};

struct AugmentorTrainReport {
  double auc_sampler = 0.0;  // positive vs negative candidate probabilities
  double auc_signal = 0.0;   // signal prediction vs exploit/explore label
  size_t exploit_pairs = 0;
  size_t explore_pairs = 0;
  std::vector<double> epoch_losses;
  bool sampler_trained = false;
};

// Probabilistic interaction sampler plus synthesis determinant signal over a
// shared parameter store.
class Augmentor {
 public:
  Augmentor(const SamplerConfig& cfg, int num_items, uint64_t seed);

  const SamplerConfig& config() const { return cfg_; }
  int num_items() const { return num_items_; }
  ParameterStore& params() { return ps_; }
  const ParameterStore& params() const { return ps_; }

  // Item embedding with positional encoding attached: concat(g_id, rho(j)).
  // The padding slot is addressed as item id == num_items().
  Eigen::VectorXf embed_item(int item_id, int position) const;

  // Attention context matrix C (ctx_len x d_model) over the prefix,
  // left-padded/truncated to ctx_len with padded keys masked out.
  Var attention_context(Tape& t, const std::vector<int>& prefix, bool train, Rng* rng);

  // e^u: affine map of the row-major flattening of C.
  Var user_embedding(Tape& t, const std::vector<int>& prefix, bool train, Rng* rng);

  // Dot products of e^u with candidate metadata embeddings, one row per
  // candidate (k x 1).
  Var candidate_scores(Tape& t, const Var& eu, const std::vector<int>& candidates);

  Var signal_logit(Tape& t, const Var& eu);

  // Eval-mode probability views: sigmoid per candidate (the loss branch) and
  // softmax across the list (the sampling branch).
  std::vector<float> candidate_probs(const std::vector<int>& prefix,
                                     const std::vector<int>& candidates) const;
  std::vector<float> sampling_distribution(const std::vector<int>& prefix,
                                           const std::vector<int>& candidates) const;
  float signal_predict(const std::vector<int>& prefix) const;

  // Mean over batches of the one-positive / (k-1)-negative binary
  // cross-entropy on sigmoid candidate probabilities.
  Var sampler_loss(Tape& t, const std::vector<SamplerBatch>& batches, bool train, Rng* rng);

  // Mean binary cross-entropy of the signal against 0/1 labels.
  Var signal_loss(Tape& t, const std::vector<const std::vector<int>*>& prefixes,
                  const std::vector<int>& labels, bool train, Rng* rng);

  // Joint Adam training of both heads; reports both AUCs measured in eval
  // mode over the full partition. An empty exploitation set skips sampler
  // training with a warning line in the log.
  AugmentorTrainReport train(const PartitionedRaw& partition, int epochs, float lr,
                             uint64_t seed, std::ostream* log = nullptr);

  void save(const std::string& path) const;
  static Augmentor load(const std::string& path);

 private:
  SamplerConfig cfg_;
  int num_items_;
  uint64_t seed_;
  ParameterStore ps_;
  Mat pos_table_;  // ctx_len x pos_dim, rows are rho(j)

  struct PaddedPrefix {
    std::vector<int> ids;  // length ctx_len, padding id = num_items
    int pad = 0;
  };
  PaddedPrefix pad_prefix(const std::vector<int>& prefix) const;
  Var pair_loss_terms(Tape& t, const Var& scores, int positive_index) const;
};

// Trapezoidal-ROC AUC (rank-sum with tie correction); labels are 0/1.
double auc_score(const std::vector<float>& scores, const std::vector<int>& labels);

std::vector<float> softmax_stable(const std::vector<float>& scores);

// ---- synthetic sequence generation ------------------------------------

enum class GenPolicy { kRandom, kAutoregressive, kFewShot };

GenPolicy gen_policy_from_string(const std::string& s);
std::string gen_policy_name(GenPolicy p);

struct GenerationPlan {
  GenPolicy policy = GenPolicy::kFewShot;
  int count = 5000;   // mu
  int length = 20;    // nu
  int k = 100;
  uint64_t seed = 0;
};

struct SyntheticSequence {
  std::vector<int> items;               // length nu
  std::vector<TopKList> step_lists;     // step_lists[j] answers prefix items[0..j]
  std::vector<uint8_t> exploit_steps;   // exploit_steps[j]: items[j] drawn from step_lists[j-1]
  GenPolicy policy = GenPolicy::kRandom;
};

struct GenerationResult {
  std::vector<SyntheticSequence> sequences;
  bool budget_exhausted = false;
  std::string error;
  int completed = 0;
};

// Generates plan.count sequences of plan.length items, caching the oracle's
// top-k list for every prefix (all policies; the distiller needs them).
// Budget exhaustion mid-sequence discards the partial sequence and surfaces
// the error with a progress count; completed sequences are kept.
GenerationResult generate_sequences(const GenerationPlan& plan, VictimOracle& oracle,
                                    const Augmentor* augmentor = nullptr);

void save_corpus(const std::string& path, const std::vector<SyntheticSequence>& sequences,
                 const GenerationPlan& plan, int num_items);

struct CorpusFile {
  GenerationPlan plan;
  int num_items = 0;
  std::vector<SyntheticSequence> sequences;
};

CorpusFile load_corpus(const std::string& path);

}  // namespace seqrex
