#include "seqrex/distiller.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

namespace seqrex {

using nlohmann::json;

std::vector<std::string> LossWeights::validate() const {
  std::vector<std::string> issues;
  if (margin_adjacent < 0.0f) issues.push_back("margins must be >= 0 (lambda1)");
  if (margin_negative < 0.0f) issues.push_back("margins must be >= 0 (lambda2)");
  if (margin_under < 0.0f) issues.push_back("margins must be >= 0 (lambda3)");
  if (margin_over < 0.0f) issues.push_back("margins must be >= 0 (lambda4)");
  if (weight_under < 0.0f) issues.push_back("lambda_low must be >= 0");
  if (weight_over < 0.0f) issues.push_back("lambda_high must be >= 0");
  return issues;
}

json LossWeights::to_json() const {
  return {{"lambda1", margin_adjacent}, {"lambda2", margin_negative},
          {"lambda3", margin_under},    {"lambda4", margin_over},
          {"lambda_low", weight_under}, {"lambda_high", weight_over}};
}

LossWeights LossWeights::from_json(const json& j) {
  LossWeights w;
  w.margin_adjacent = j.value("lambda1", 0.75f);
  w.margin_negative = j.value("lambda2", 1.5f);
  w.margin_under = j.value("lambda3", 0.5f);
  w.margin_over = j.value("lambda4", 0.5f);
  w.weight_under = j.value("lambda_low", 1e-5f);
  w.weight_over = j.value("lambda_high", 1e-6f);
  return w;
}

std::vector<int> sample_negatives(int k, int pool_size, const std::vector<int>& exclude,
                                  Rng& rng) {
  std::unordered_set<int> banned(exclude.begin(), exclude.end());
  std::vector<int> allowed;
  allowed.reserve(static_cast<size_t>(pool_size));
  for (int v = 0; v < pool_size; ++v)
    if (!banned.count(v)) allowed.push_back(v);
  if (static_cast<int>(allowed.size()) < k)
    throw DataError("sample_negatives: pool too small (" + std::to_string(allowed.size()) +
                    " available, " + std::to_string(k) + " requested)");
  for (int i = 0; i < k; ++i) {
    int j = i + static_cast<int>(rng.uniform_uint(static_cast<uint32_t>(allowed.size() - i)));
    std::swap(allowed[static_cast<size_t>(i)], allowed[static_cast<size_t>(j)]);
  }
  allowed.resize(static_cast<size_t>(k));
  return allowed;
}

RepairSets compute_repair_sets(const std::vector<int>& black_list,
                               const std::vector<int>& white_ranking) {
  int k = static_cast<int>(black_list.size());
  std::unordered_map<int, int> white_rank;  // id -> 1-based rank
  white_rank.reserve(white_ranking.size() * 2);
  for (size_t p = 0; p < white_ranking.size(); ++p)
    white_rank[white_ranking[p]] = static_cast<int>(p) + 1;
  std::unordered_set<int> in_black(black_list.begin(), black_list.end());

  RepairSets sets;
  for (int idx = 0; idx < k; ++idx) {
    int item = black_list[static_cast<size_t>(idx)];
    int black_rank = idx + 1;
    auto it = white_rank.find(item);
    if (it == white_rank.end())
      throw DataError("compute_repair_sets: white ranking is not full (missing item " +
                      std::to_string(item) + ")");
    int wr = it->second;
    if (wr > black_rank) {
      // underestimated: earliest non-black item at white position >= black rank,
      // searching no deeper than the top-k positions
      for (int p = black_rank; p <= k; ++p) {
        int cand = white_ranking[static_cast<size_t>(p - 1)];
        if (!in_black.count(cand)) {
          sets.under_items.push_back(item);
          sets.under_targets.push_back(cand);
          break;
        }
      }
    } else if (wr < black_rank) {
      // overestimated: nearest non-black item at white position <= black rank
      for (int p = black_rank; p >= 1; --p) {
        int cand = white_ranking[static_cast<size_t>(p - 1)];
        if (!in_black.count(cand)) {
          sets.over_items.push_back(item);
          sets.over_targets.push_back(cand);
          break;
        }
      }
    }
  }
  return sets;
}

namespace {

Var column_from_ids(Tape& t, const Var& scores, const std::vector<int>& ids) {
  return gather_rows(scores, ids);
}

Var hinge_mean(Tape& t, const Var& diff_plus_margin) {
  (void)t;
  return mean_all(relu(diff_plus_margin));
}

}  // namespace

Var pairwise_rank_loss(Tape& t, const Var& scores, const DistillBatch& batch,
                       float margin_adjacent, float margin_negative) {
  if (!batch.list) throw StateError("pairwise_rank_loss: batch has no cached list");
  const std::vector<int>& list = batch.list->items;
  int k = static_cast<int>(list.size());
  if (k < 1) throw DataError("pairwise_rank_loss: empty black-box list");
  if (batch.negatives.size() != list.size())
    throw ShapeError("pairwise_rank_loss: negatives must pair up with the list (k of each)");
  if (scores.cols() != 1) throw ShapeError("pairwise_rank_loss: scores must be a column");

  Var list_scores = column_from_ids(t, scores, list);
  Var loss = t.scalar_constant(0.0f);
  if (k >= 2) {
    std::vector<int> tail(static_cast<size_t>(k - 1));
    std::vector<int> head(static_cast<size_t>(k - 1));
    std::iota(tail.begin(), tail.end(), 1);
    std::iota(head.begin(), head.end(), 0);
    Var later = gather_rows(list_scores, tail);   // \chi_{w+1}
    Var earlier = gather_rows(list_scores, head); // \chi_w
    loss = loss + hinge_mean(t, add_scalar(later - earlier, margin_adjacent));
  }
  Var neg_scores = column_from_ids(t, scores, batch.negatives);
  loss = loss + hinge_mean(t, add_scalar(neg_scores - list_scores, margin_negative));
  return loss;
}

std::pair<Var, Var> repair_losses(Tape& t, const Var& scores, const RepairSets& sets,
                                  float margin_under, float margin_over) {
  Var low = t.scalar_constant(0.0f);
  Var high = t.scalar_constant(0.0f);
  if (!sets.under_items.empty()) {
    Var items = column_from_ids(t, scores, sets.under_items);
    Var targets = column_from_ids(t, scores, sets.under_targets);
    // push the underestimated item above its target
    low = hinge_mean(t, add_scalar(targets - items, margin_under));
  }
  if (!sets.over_items.empty()) {
    Var items = column_from_ids(t, scores, sets.over_items);
    Var targets = column_from_ids(t, scores, sets.over_targets);
    // push the overestimated item below its target
    high = hinge_mean(t, add_scalar(items - targets, margin_over));
  }
  return {low, high};
}

Var total_loss(Tape& t, const Var& extract, const Var& low, const Var& high,
               const LossWeights& weights) {
  (void)t;
  if (weights.weight_under == 0.0f && weights.weight_over == 0.0f) return extract;
  return extract + scale(low, weights.weight_under) + scale(high, weights.weight_over);
}

double agreement_vs_cache(const SequentialRecommender& surrogate,
                          const std::vector<SyntheticSequence>& corpus, int k) {
  double total = 0.0;
  long long count = 0;
  int n = surrogate.config().num_items;
  for (const auto& seq : corpus) {
    Mat logits = surrogate.prefix_logit_matrix(seq.items);
    for (size_t j = 0; j < seq.items.size(); ++j) {
      const float* row = logits.data() + static_cast<size_t>(j) * static_cast<size_t>(n);
      std::vector<int> top = topk_ids(row, n, k);
      total += agreement_at_k(top, seq.step_lists[j].items, k);
      ++count;
    }
  }
  if (count == 0) throw DataError("agreement_vs_cache: empty corpus");
  return total / static_cast<double>(count);
}

DistillReport distill_train(SequentialRecommender& surrogate,
                            const std::vector<SyntheticSequence>& corpus,
                            const LossWeights& weights, const DistillOptions& opts,
                            uint64_t seed, std::ostream* log) {
  if (corpus.empty()) throw DataError("distill_train: empty corpus");
  {
    auto issues = weights.validate();
    if (!issues.empty()) throw ConfigError(issues);
  }
  int n = surrogate.config().num_items;
  int list_k = 0;
  for (const auto& seq : corpus) {
    if (seq.items.empty()) throw DataError("distill_train: empty synthetic sequence");
    if (seq.step_lists.size() != seq.items.size())
      throw DataError("distill_train: missing cached list for a prefix");
    if (static_cast<int>(seq.items.size()) > surrogate.config().max_len)
      throw ConfigError({"distill_train: sequence length exceeds surrogate max_len"});
    for (const auto& l : seq.step_lists) {
      if (l.items.empty()) throw DataError("distill_train: missing cached list for a prefix");
      if (list_k == 0) list_k = l.k();
    }
  }
  if (opts.agreement_k > list_k)
    throw ConfigError({"distill_train: agreement_k exceeds the cached list length"});
  if (n < 2 * list_k)
    throw ConfigError({"distill_train: item pool too small for k negatives outside the list"});

  DistillReport report;
  report.initial_agreement = agreement_vs_cache(surrogate, corpus, opts.agreement_k);
  {
    DistillEpochLog e0;
    e0.epoch = 0;
    e0.loss = std::nan("");
    e0.agreement_vs_cache = report.initial_agreement;
    report.epochs.push_back(e0);
    if (log)
      (*log) << json({{"epoch", 0}, {"agr_vs_cache", report.initial_agreement}}).dump() << "\n";
  }

  AdamState adam;
  adam.lr = opts.lr;
  Rng order(derive_seed(seed, "distill-order"));
  Rng drop(derive_seed(seed, "distill-dropout"));
  std::vector<size_t> indices(corpus.size());
  std::iota(indices.begin(), indices.end(), 0);

  bool repairs_active = weights.weight_under != 0.0f || weights.weight_over != 0.0f;

  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    order.shuffle(indices);
    double epoch_loss = 0.0;
    for (size_t idx : indices) {
      const SyntheticSequence& seq = corpus[idx];
      uint64_t neg_stream = (static_cast<uint64_t>(epoch) << 32) ^ static_cast<uint64_t>(idx);
      Rng neg_rng(derive_seed(seed, "distill-negatives", neg_stream));
      double step_loss = 0.0;
      try {
        Tape t(true);
        Var logits = surrogate.prefix_logits(t, seq.items, true, &drop);
        Var sum = t.scalar_constant(0.0f);
        for (size_t j = 0; j < seq.items.size(); ++j) {
          Var row = gather_rows(logits, {static_cast<int>(j)});
          Var scores = reshape(row, n, 1);
          DistillBatch batch;
          batch.prefix.assign(seq.items.begin(), seq.items.begin() + static_cast<long>(j) + 1);
          batch.list = &seq.step_lists[j];
          batch.negatives = sample_negatives(list_k, n, seq.step_lists[j].items, neg_rng);
          Var extract =
              pairwise_rank_loss(t, scores, batch, weights.margin_adjacent,
                                 weights.margin_negative);
          Var step;
          if (repairs_active) {
            const float* row_vals =
                logits.value().data() + j * static_cast<size_t>(n);
            std::vector<int> white = topk_ids(row_vals, n, n);
            RepairSets sets = compute_repair_sets(seq.step_lists[j].items, white);
            auto [low, high] =
                repair_losses(t, scores, sets, weights.margin_under, weights.margin_over);
            step = total_loss(t, extract, low, high, weights);
          } else {
            step = extract;
          }
          sum = sum + step;
        }
        Var loss = scale(sum, 1.0f / static_cast<float>(seq.items.size()));
        step_loss = loss.scalar();
        t.backward(loss);
      } catch (const NumericError& e) {
        throw NumericError("distillation diverged at epoch " + std::to_string(epoch) + ": " +
                           e.what());
      }
      adam_step(adam, surrogate.params());
      epoch_loss += step_loss;
    }
    DistillEpochLog entry;
    entry.epoch = epoch;
    entry.loss = epoch_loss / static_cast<double>(corpus.size());
    bool measure = (opts.eval_every > 0 && epoch % opts.eval_every == 0) || epoch == opts.epochs;
    if (measure)
      entry.agreement_vs_cache = agreement_vs_cache(surrogate, corpus, opts.agreement_k);
    report.epochs.push_back(entry);
    if (log) {
      json line = {{"epoch", entry.epoch}, {"loss", entry.loss}};
      if (measure) line["agr_vs_cache"] = entry.agreement_vs_cache;
      (*log) << line.dump() << "\n";
    }
  }
  report.final_agreement = opts.epochs == 0
                               ? report.initial_agreement
                               : report.epochs.back().agreement_vs_cache;
  return report;
}

}  // namespace seqrex
