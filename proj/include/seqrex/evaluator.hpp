#pragma once

#include "seqrex/data.hpp"

#include <json.hpp>

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace seqrex {

// Maps a prefix to a full score vector over all items.
using ScoreFn = std::function<std::vector<float>(const std::vector<int>&)>;

// 101-candidate protocol: ground truth plus `num_negatives` seeded negatives
// drawn outside the user's entire history.
struct EvalProtocol {
  std::vector<int> ks{1, 10};
  int num_negatives = 100;
  uint64_t seed = 0;
};

enum class EvalTarget { kVal, kTest };

struct RankMetrics {
  std::vector<int> ks;
  std::vector<double> ndcg;    // aligned with ks
  std::vector<double> recall;

  double ndcg_at(int k) const;
  double recall_at(int k) const;
};

// 1-based rank of target_id among candidates under (score desc, id asc).
int rank_of_candidate(const std::vector<float>& scores, const std::vector<int>& ids,
                      int target_id);

std::vector<int> sample_eval_negatives(const SplitDataset& split, int user, int ground_truth,
                                       int count, uint64_t protocol_seed);

RankMetrics rank_metrics(const ScoreFn& score, const SplitDataset& split,
                         const EvalProtocol& protocol, EvalTarget target);

// |first-K(a) ∩ first-K(b)| / K, order within the top-K ignored.
double agreement_at_k(const std::vector<int>& a, const std::vector<int>& b, int k);
double agreement_at_k(const TopKList& a, const TopKList& b, int k);

struct MetricReport {
  // model name -> (K -> value)
  std::map<std::string, std::map<int, double>> ndcg;
  std::map<std::string, std::map<int, double>> recall;
  std::map<int, double> agreement;
  nlohmann::json metadata;  // policy, budget, ratio, k, seeds, ...

  nlohmann::json to_json() const;
  static MetricReport from_json(const nlohmann::json& j);
  bool operator==(const MetricReport& other) const;
};

// Rank metrics for both models on the test target plus Agreement@K between
// per-user top-K lists computed on each test user's full training history.
MetricReport compare_models(const ScoreFn& victim, const ScoreFn& surrogate,
                            const SplitDataset& split, const EvalProtocol& protocol);

enum class ReportFormat { kJson, kCsv, kMdTable };

ReportFormat report_format_from_string(const std::string& s);

// Flat table emission; metric columns in the fixed order
// N@10, R@10, Agr@1, Agr@10 (victim reference columns precede them).
void emit_report(const std::vector<MetricReport>& reports, const std::string& path,
                 ReportFormat format);

std::vector<MetricReport> load_reports_json(const std::string& path);

// Grid emission for hyperparameter sweeps: rows/cols select reports by
// metadata values; cells are the agreement@10 of the matching report.
void emit_grid_csv(const std::vector<MetricReport>& reports, const std::string& row_key,
                   const std::string& col_key, const std::vector<double>& row_values,
                   const std::vector<double>& col_values, const std::string& path);

// Series emission (ratio or budget sweeps): one row per report, ordered by
// the numeric metadata key.
void emit_series_csv(const std::vector<MetricReport>& reports, const std::string& x_key,
                     const std::string& path);

}  // namespace seqrex
