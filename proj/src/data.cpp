#include "seqrex/data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_map>

namespace seqrex {

uint64_t hash_prefix(const std::vector<int>& prefix, int k) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<uint64_t>(prefix.size()));
  for (int id : prefix) mix(static_cast<uint64_t>(static_cast<uint32_t>(id)));
  mix(static_cast<uint64_t>(static_cast<uint32_t>(k)));
  return h;
}

DataFormat data_format_from_string(const std::string& s) {
  if (s == "ml-ratings") return DataFormat::kMlRatings;
  if (s == "tsv") return DataFormat::kTsv;
  throw DataError("unknown dataset format: " + s);
}

std::string data_format_name(DataFormat f) {
  return f == DataFormat::kMlRatings ? "ml-ratings" : "tsv";
}

DatasetStats InteractionDataset::stats() const {
  DatasetStats s;
  s.num_users = num_users();
  s.num_items = num_items();
  for (const auto& seq : sequences) s.interactions += static_cast<long long>(seq.size());
  if (s.num_users > 0)
    s.avg_len = static_cast<double>(s.interactions) / static_cast<double>(s.num_users);
  if (s.num_users > 0 && s.num_items > 0)
    s.sparsity = 1.0 - static_cast<double>(s.interactions) /
                           (static_cast<double>(s.num_users) * static_cast<double>(s.num_items));
  return s;
}

namespace {

struct Record {
  std::string user;
  std::string item;
  long long ts;
  size_t order;  // ties in timestamp fall back to file order
};

std::vector<std::string> split_by(const std::string& line, const std::string& sep) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t next = line.find(sep, pos);
    if (next == std::string::npos) {
      out.push_back(line.substr(pos));
      break;
    }
    out.push_back(line.substr(pos, next - pos));
    pos = next + sep.size();
  }
  return out;
}

long long parse_ts(const std::string& s, const std::string& path, size_t line_no) {
  try {
    size_t idx = 0;
    long long v = std::stoll(s, &idx);
    if (idx != s.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw DataError(path + ":" + std::to_string(line_no) + ": malformed line (bad timestamp '" +
                    s + "')");
  }
}

}  // namespace

InteractionDataset load_dataset(const std::string& path, DataFormat format, LoadOptions opts) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file: " + path);
  int min_item_count = opts.min_item_count;
  if (min_item_count <= 0) min_item_count = (format == DataFormat::kMlRatings) ? 5 : 1;

  std::vector<Record> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Record rec;
    rec.order = records.size();
    if (format == DataFormat::kMlRatings) {
      auto f = split_by(line, "::");
      if (f.size() != 4 || f[0].empty() || f[1].empty())
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": malformed line (expected user::item::rating::timestamp)");
      rec.user = f[0];
      rec.item = f[1];
      rec.ts = parse_ts(f[3], path, line_no);
    } else {
      auto f = split_by(line, "\t");
      if (f.size() != 3 || f[0].empty() || f[1].empty())
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": malformed line (expected user<TAB>item<TAB>timestamp)");
      rec.user = f[0];
      rec.item = f[1];
      rec.ts = parse_ts(f[2], path, line_no);
    }
    records.push_back(std::move(rec));
  }

  // Drop rare items first, then users left with too-short histories.
  std::unordered_map<std::string, int> item_count;
  for (const auto& r : records) item_count[r.item]++;
  std::unordered_map<std::string, std::vector<const Record*>> by_user;
  std::vector<std::string> user_order;
  for (const auto& r : records) {
    if (item_count[r.item] < min_item_count) continue;
    auto [it, inserted] = by_user.try_emplace(r.user);
    if (inserted) user_order.push_back(r.user);
    it->second.push_back(&r);
  }

  InteractionDataset ds;
  ds.source = path;
  std::unordered_map<std::string, int> item_index;
  for (const auto& user : user_order) {
    auto& recs = by_user[user];
    if (static_cast<int>(recs.size()) < opts.min_seq_len) continue;
    std::stable_sort(recs.begin(), recs.end(), [](const Record* a, const Record* b) {
      if (a->ts != b->ts) return a->ts < b->ts;
      return a->order < b->order;
    });
    std::vector<int> seq;
    seq.reserve(recs.size());
    for (const Record* r : recs) {
      auto [it, inserted] = item_index.try_emplace(r->item, static_cast<int>(ds.item_labels.size()));
      if (inserted) ds.item_labels.push_back(r->item);
      seq.push_back(it->second);
    }
    ds.user_labels.push_back(user);
    ds.sequences.push_back(std::move(seq));
  }
  if (ds.sequences.empty()) throw DataError("empty dataset after filtering: " + path);
  return ds;
}

SplitDataset split_leave_last_two(const InteractionDataset& ds) {
  SplitDataset split;
  split.num_items = ds.num_items();
  split.train.reserve(ds.sequences.size());
  split.val.reserve(ds.sequences.size());
  split.test.reserve(ds.sequences.size());
  for (size_t u = 0; u < ds.sequences.size(); ++u) {
    const auto& seq = ds.sequences[u];
    if (seq.size() < 3)
      throw DataError("sequence shorter than 3 for user " + ds.user_labels[u] +
                      " (loader should have dropped it)");
    split.train.emplace_back(seq.begin(), seq.end() - 2);
    split.val.push_back(seq[seq.size() - 2]);
    split.test.push_back(seq.back());
  }
  return split;
}

FewShotSubset sample_few_shot(const SplitDataset& split, double ratio, uint64_t seed) {
  if (!(ratio > 0.0) || ratio > 1.0) throw DataError("few-shot ratio must be in (0, 1]");
  int m = split.num_users();
  int count = static_cast<int>(std::llround(ratio * m));
  if (count <= 0) throw DataError("few-shot ratio yields zero users");

  std::vector<int> ids(static_cast<size_t>(m));
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(derive_seed(seed, "few-shot-users"));
  rng.shuffle(ids);
  ids.resize(static_cast<size_t>(count));
  std::sort(ids.begin(), ids.end());

  FewShotSubset subset;
  subset.ratio = ratio;
  subset.users = ids;
  subset.sequences.reserve(ids.size());
  for (int u : ids) subset.sequences.push_back(split.train[static_cast<size_t>(u)]);
  return subset;
}

PartitionedRaw partition_exploit_explore(const FewShotSubset& subset, const TopKQueryFn& query,
                                         int k, int window) {
  if (k < 1) throw DataError("partition: k must be >= 1");
  if (window < 1) throw DataError("partition: window must be >= 1");
  PartitionedRaw out;
  for (size_t i = 0; i < subset.sequences.size(); ++i) {
    const auto& seq = subset.sequences[i];
    for (size_t j = 1; j < seq.size(); ++j) {
      size_t lo = j > static_cast<size_t>(window) ? j - static_cast<size_t>(window) : 0;
      RawPair pair;
      pair.user = subset.users[i];
      pair.prefix.assign(seq.begin() + static_cast<long>(lo), seq.begin() + static_cast<long>(j));
      pair.next_item = seq[j];
      pair.list = query(pair.prefix, k);
      pair.label = pair.list.contains(pair.next_item) ? 1 : 0;
      (pair.label ? out.exploit : out.explore).push_back(std::move(pair));
    }
  }
  return out;
}

}  // namespace seqrex
