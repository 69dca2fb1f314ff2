#pragma once

#include "seqrex/augmentor.hpp"
#include "seqrex/models.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace seqrex {

// Margins and scale factors of the distillation objective. Margins gate the
// rank/repair hinges; the scale factors weight the two repair terms.
struct LossWeights {
  float margin_adjacent = 0.75f;  // lambda1
  float margin_negative = 1.5f;   // lambda2
  float margin_under = 0.5f;      // lambda3
  float margin_over = 0.5f;       // lambda4
  float weight_under = 1e-5f;     // lambda_low
  float weight_over = 1e-6f;      // lambda_high

  std::vector<std::string> validate() const;
  nlohmann::json to_json() const;
  static LossWeights from_json(const nlohmann::json& j);
};

// One distillation step's ingredients for a single prefix.
struct DistillBatch {
  std::vector<int> prefix;
  const TopKList* list = nullptr;   // black-box list B (length k)
  std::vector<int> negatives;       // k ids sampled outside B
};

// Aligned underestimated/overestimated items and their repair targets; all
// V entries come from the black list, all T entries from outside it.
struct RepairSets {
  std::vector<int> under_items;    // V_l
  std::vector<int> under_targets;  // T_l
  std::vector<int> over_items;     // V_h
  std::vector<int> over_targets;   // T_h

  bool empty() const {
    return under_items.empty() && over_items.empty();
  }
};

// Uniform sample without replacement from the pool minus `exclude`.
std::vector<int> sample_negatives(int k, int pool_size, const std::vector<int>& exclude,
                                  Rng& rng);

// Repair-set mining over the black list and the surrogate's full descending
// ranking (length n, id tie-break). Target search is bounded to the top-k
// white positions; out-of-range pairs are skipped.
RepairSets compute_repair_sets(const std::vector<int>& black_list,
                               const std::vector<int>& white_ranking);

// Hinge pair of Eq.-12 shape: adjacency term over consecutive list items plus
// a negative-dominance term, both margin-gated. `scores` is the surrogate's
// full score column (n x 1) for the batch's prefix.
Var pairwise_rank_loss(Tape& t, const Var& scores, const DistillBatch& batch,
                       float margin_adjacent, float margin_negative);

// (L_low, L_high): raise each underestimated item above its target, push each
// overestimated item below its target. Empty sets contribute zero.
std::pair<Var, Var> repair_losses(Tape& t, const Var& scores, const RepairSets& sets,
                                  float margin_under, float margin_over);

// L_total = L_extract + w_low * L_low + w_high * L_high. With both weights at
// zero the extract Var is returned unchanged (bit-identical path).
Var total_loss(Tape& t, const Var& extract, const Var& low, const Var& high,
               const LossWeights& weights);

struct DistillEpochLog {
  int epoch = 0;
  double loss = 0.0;
  double agreement_vs_cache = -1.0;  // -1 when not measured this epoch
};

struct DistillOptions {
  int epochs = 200;
  float lr = 1e-3f;
  int eval_every = 0;      // 0: agreement only at epoch 0 and after the last epoch
  int agreement_k = 10;
};

struct DistillReport {
  std::vector<DistillEpochLog> epochs;
  double initial_agreement = 0.0;
  double final_agreement = 0.0;
};

// Agreement@k between the surrogate's current top-k and the cached black-box
// lists, averaged over every (sequence, prefix) in the corpus.
double agreement_vs_cache(const SequentialRecommender& surrogate,
                          const std::vector<SyntheticSequence>& corpus, int k);

// Knowledge transfer from cached lists only: per epoch, per sequence, one
// Adam step over the summed per-prefix losses; repair sets are recomputed
// against the surrogate's in-graph scores every batch; negatives are redrawn
// per (sequence, epoch) from a derived seed.
DistillReport distill_train(SequentialRecommender& surrogate,
                            const std::vector<SyntheticSequence>& corpus,
                            const LossWeights& weights, const DistillOptions& opts,
                            uint64_t seed, std::ostream* log = nullptr);

}  // namespace seqrex
