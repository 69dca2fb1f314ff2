#include "seqrex/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_set>

namespace seqrex {

using nlohmann::json;

double RankMetrics::ndcg_at(int k) const {
  for (size_t i = 0; i < ks.size(); ++i)
    if (ks[i] == k) return ndcg[i];
  throw StateError("ndcg_at: K not evaluated: " + std::to_string(k));
}

double RankMetrics::recall_at(int k) const {
  for (size_t i = 0; i < ks.size(); ++i)
    if (ks[i] == k) return recall[i];
  throw StateError("recall_at: K not evaluated: " + std::to_string(k));
}

int rank_of_candidate(const std::vector<float>& scores, const std::vector<int>& ids,
                      int target_id) {
  if (scores.size() != ids.size()) throw ShapeError("rank_of_candidate: size mismatch");
  float ts = 0.0f;
  bool found = false;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == target_id) {
      ts = scores[i];
      found = true;
      break;
    }
  }
  if (!found) throw StateError("rank_of_candidate: target not among candidates");
  int rank = 1;
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == target_id) continue;
    if (scores[i] > ts || (scores[i] == ts && ids[i] < target_id)) ++rank;
  }
  return rank;
}

std::vector<int> sample_eval_negatives(const SplitDataset& split, int user, int ground_truth,
                                       int count, uint64_t protocol_seed) {
  std::unordered_set<int> excluded;
  for (int it : split.train[static_cast<size_t>(user)]) excluded.insert(it);
  excluded.insert(split.val[static_cast<size_t>(user)]);
  excluded.insert(split.test[static_cast<size_t>(user)]);
  excluded.insert(ground_truth);

  std::vector<int> pool;
  pool.reserve(static_cast<size_t>(split.num_items));
  for (int v = 0; v < split.num_items; ++v)
    if (!excluded.count(v)) pool.push_back(v);

  Rng rng(derive_seed(protocol_seed, "eval-negatives", static_cast<uint64_t>(user)));
  int take = std::min<int>(count, static_cast<int>(pool.size()));
  for (int i = 0; i < take; ++i) {
    int j = i + static_cast<int>(rng.uniform_uint(static_cast<uint32_t>(pool.size() - i)));
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
  }
  pool.resize(static_cast<size_t>(take));
  return pool;
}

RankMetrics rank_metrics(const ScoreFn& score, const SplitDataset& split,
                         const EvalProtocol& protocol, EvalTarget target) {
  if (split.num_users() == 0) throw DataError("rank_metrics: empty user set");
  RankMetrics out;
  out.ks = protocol.ks;
  out.ndcg.assign(protocol.ks.size(), 0.0);
  out.recall.assign(protocol.ks.size(), 0.0);

  for (int u = 0; u < split.num_users(); ++u) {
    std::vector<int> prefix = split.train[static_cast<size_t>(u)];
    int gt;
    if (target == EvalTarget::kVal) {
      gt = split.val[static_cast<size_t>(u)];
    } else {
      prefix.push_back(split.val[static_cast<size_t>(u)]);
      gt = split.test[static_cast<size_t>(u)];
    }
    std::vector<int> candidates = sample_eval_negatives(split, u, gt, protocol.num_negatives,
                                                        protocol.seed);
    candidates.push_back(gt);
    std::vector<float> all = score(prefix);
    std::vector<float> cand_scores(candidates.size());
    for (size_t i = 0; i < candidates.size(); ++i)
      cand_scores[i] = all[static_cast<size_t>(candidates[i])];
    int rank = rank_of_candidate(cand_scores, candidates, gt);
    for (size_t i = 0; i < protocol.ks.size(); ++i) {
      if (rank <= protocol.ks[i]) {
        out.recall[i] += 1.0;
        out.ndcg[i] += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
      }
    }
  }
  for (size_t i = 0; i < protocol.ks.size(); ++i) {
    out.ndcg[i] /= split.num_users();
    out.recall[i] /= split.num_users();
  }
  return out;
}

double agreement_at_k(const std::vector<int>& a, const std::vector<int>& b, int k) {
  if (k < 1) throw StateError("agreement_at_k: K must be >= 1");
  if (static_cast<int>(a.size()) < k || static_cast<int>(b.size()) < k)
    throw StateError("agreement_at_k: list shorter than K=" + std::to_string(k));
  std::unordered_set<int> first_a(a.begin(), a.begin() + k);
  std::unordered_set<int> first_b(b.begin(), b.begin() + k);
  int inter = 0;
  for (int v : first_b) inter += first_a.count(v) ? 1 : 0;
  return static_cast<double>(inter) / static_cast<double>(k);
}

double agreement_at_k(const TopKList& a, const TopKList& b, int k) {
  return agreement_at_k(a.items, b.items, k);
}

json MetricReport::to_json() const {
  json j;
  json metrics = json::object();
  for (const auto& [model, by_k] : ndcg) {
    json nd = json::object(), rc = json::object();
    for (const auto& [k, v] : by_k) nd[std::to_string(k)] = v;
    for (const auto& [k, v] : recall.at(model)) rc[std::to_string(k)] = v;
    metrics[model] = {{"ndcg", nd}, {"recall", rc}};
  }
  j["metrics"] = metrics;
  json agr = json::object();
  for (const auto& [k, v] : agreement) agr[std::to_string(k)] = v;
  j["agreement"] = agr;
  j["metadata"] = metadata;
  return j;
}

MetricReport MetricReport::from_json(const json& j) {
  MetricReport r;
  for (const auto& [model, m] : j.at("metrics").items()) {
    for (const auto& [k, v] : m.at("ndcg").items()) r.ndcg[model][std::stoi(k)] = v.get<double>();
    for (const auto& [k, v] : m.at("recall").items())
      r.recall[model][std::stoi(k)] = v.get<double>();
  }
  for (const auto& [k, v] : j.at("agreement").items())
    r.agreement[std::stoi(k)] = v.get<double>();
  r.metadata = j.value("metadata", json::object());
  return r;
}

bool MetricReport::operator==(const MetricReport& other) const {
  return ndcg == other.ndcg && recall == other.recall && agreement == other.agreement &&
         metadata == other.metadata;
}

MetricReport compare_models(const ScoreFn& victim, const ScoreFn& surrogate,
                            const SplitDataset& split, const EvalProtocol& protocol) {
  if (split.num_users() == 0) throw DataError("compare_models: empty user set");
  MetricReport report;
  RankMetrics vm = rank_metrics(victim, split, protocol, EvalTarget::kTest);
  RankMetrics sm = rank_metrics(surrogate, split, protocol, EvalTarget::kTest);
  for (size_t i = 0; i < protocol.ks.size(); ++i) {
    int k = protocol.ks[i];
    report.ndcg["victim"][k] = vm.ndcg[i];
    report.recall["victim"][k] = vm.recall[i];
    report.ndcg["surrogate"][k] = sm.ndcg[i];
    report.recall["surrogate"][k] = sm.recall[i];
  }

  int max_k = *std::max_element(protocol.ks.begin(), protocol.ks.end());
  std::vector<double> agr(protocol.ks.size(), 0.0);
  for (int u = 0; u < split.num_users(); ++u) {
    const std::vector<int>& prefix = split.train[static_cast<size_t>(u)];
    std::vector<int> v_top = topk_ids(victim(prefix), max_k);
    std::vector<int> s_top = topk_ids(surrogate(prefix), max_k);
    for (size_t i = 0; i < protocol.ks.size(); ++i)
      agr[i] += agreement_at_k(v_top, s_top, protocol.ks[i]);
  }
  for (size_t i = 0; i < protocol.ks.size(); ++i)
    report.agreement[protocol.ks[i]] = agr[i] / split.num_users();
  return report;
}

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "json") return ReportFormat::kJson;
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "md-table") return ReportFormat::kMdTable;
  throw StateError("unknown report format: " + s);
}

namespace {

std::string fmt_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string meta_str(const json& meta, const char* key) {
  if (!meta.contains(key)) return "";
  const json& v = meta.at(key);
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

double metric_or_nan(const std::map<int, double>& m, int k) {
  auto it = m.find(k);
  return it == m.end() ? std::nan("") : it->second;
}

std::string cell(double v) { return std::isnan(v) ? std::string() : fmt_metric(v); }

// Fixed column layout shared by csv and md-table so cells are identical.
std::vector<std::string> report_row(const MetricReport& r) {
  std::vector<std::string> row;
  for (const char* key : {"run_id", "policy", "ratio", "budget", "k", "seed"})
    row.push_back(meta_str(r.metadata, key));
  auto model_metric = [&](const char* model, bool nd) {
    if (nd) {
      auto it = r.ndcg.find(model);
      return it == r.ndcg.end() ? std::nan("") : metric_or_nan(it->second, 10);
    }
    auto it = r.recall.find(model);
    return it == r.recall.end() ? std::nan("") : metric_or_nan(it->second, 10);
  };
  row.push_back(cell(model_metric("victim", true)));
  row.push_back(cell(model_metric("victim", false)));
  row.push_back(cell(model_metric("surrogate", true)));
  row.push_back(cell(model_metric("surrogate", false)));
  row.push_back(cell(metric_or_nan(r.agreement, 1)));
  row.push_back(cell(metric_or_nan(r.agreement, 10)));
  return row;
}

const std::vector<std::string> kReportHeader = {
    "run_id", "policy", "ratio",       "budget",      "k",     "seed",
    "victim_N@10", "victim_R@10", "N@10", "R@10", "Agr@1", "Agr@10"};

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write report file: " + path);
  out << content;
  if (!out) throw DataError("short write on report file: " + path);
}

}  // namespace

void emit_report(const std::vector<MetricReport>& reports, const std::string& path,
                 ReportFormat format) {
  if (reports.empty()) throw StateError("emit_report: no reports");
  if (format == ReportFormat::kJson) {
    json arr = json::array();
    for (const auto& r : reports) arr.push_back(r.to_json());
    write_file(path, arr.dump(2) + "\n");
    return;
  }
  std::string out;
  if (format == ReportFormat::kCsv) {
    for (size_t i = 0; i < kReportHeader.size(); ++i)
      out += (i ? "," : "") + kReportHeader[i];
    out += "\n";
    for (const auto& r : reports) {
      auto row = report_row(r);
      for (size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + row[i];
      out += "\n";
    }
  } else {
    out += "|";
    for (const auto& h : kReportHeader) out += " " + h + " |";
    out += "\n|";
    for (size_t i = 0; i < kReportHeader.size(); ++i) out += " --- |";
    out += "\n";
    for (const auto& r : reports) {
      auto row = report_row(r);
      out += "|";
      for (const auto& c : row) out += " " + c + " |";
      out += "\n";
    }
  }
  write_file(path, out);
}

std::vector<MetricReport> load_reports_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report file: " + path);
  json arr = json::parse(in);
  std::vector<MetricReport> out;
  for (const auto& j : arr) out.push_back(MetricReport::from_json(j));
  return out;
}

void emit_grid_csv(const std::vector<MetricReport>& reports, const std::string& row_key,
                   const std::string& col_key, const std::vector<double>& row_values,
                   const std::vector<double>& col_values, const std::string& path) {
  auto find_cell = [&](double rv, double cv) -> std::string {
    for (const auto& r : reports) {
      if (!r.metadata.contains(row_key) || !r.metadata.contains(col_key)) continue;
      if (r.metadata.at(row_key).get<double>() == rv &&
          r.metadata.at(col_key).get<double>() == cv) {
        auto it = r.agreement.find(10);
        if (it != r.agreement.end()) return fmt_metric(it->second);
      }
    }
    return "";
  };
  std::string out = "Agr@10";
  for (double cv : col_values) out += "," + json(cv).dump();
  out += "\n";
  for (double rv : row_values) {
    out += json(rv).dump();
    for (double cv : col_values) out += "," + find_cell(rv, cv);
    out += "\n";
  }
  write_file(path, out);
}

void emit_series_csv(const std::vector<MetricReport>& reports, const std::string& x_key,
                     const std::string& path) {
  std::vector<const MetricReport*> ordered;
  for (const auto& r : reports)
    if (r.metadata.contains(x_key)) ordered.push_back(&r);
  std::stable_sort(ordered.begin(), ordered.end(), [&](const MetricReport* a, const MetricReport* b) {
    return a->metadata.at(x_key).get<double>() < b->metadata.at(x_key).get<double>();
  });
  std::string out = x_key + ",N@10,R@10,Agr@1,Agr@10\n";
  for (const MetricReport* r : ordered) {
    out += json(r->metadata.at(x_key)).dump();
    auto nd = r->ndcg.find("surrogate");
    auto rc = r->recall.find("surrogate");
    out += "," + (nd != r->ndcg.end() ? cell(metric_or_nan(nd->second, 10)) : std::string());
    out += "," + (rc != r->recall.end() ? cell(metric_or_nan(rc->second, 10)) : std::string());
    out += "," + cell(metric_or_nan(r->agreement, 1));
    out += "," + cell(metric_or_nan(r->agreement, 10));
    out += "\n";
  }
  write_file(path, out);
}

}  // namespace seqrex
