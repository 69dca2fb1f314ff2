#pragma once

#include "seqrex/common.hpp"
#include "seqrex/topk.hpp"

#include <functional>
#include <string>
#include <vector>

namespace seqrex {

enum class DataFormat { kMlRatings, kTsv };

DataFormat data_format_from_string(const std::string& s);
std::string data_format_name(DataFormat f);

struct LoadOptions {
  // 0 means format default: 5 for ml-ratings (paper-style filtering), 1 for tsv.
  int min_item_count = 0;
  int min_seq_len = 3;
};

struct DatasetStats {
  int num_users = 0;
  int num_items = 0;
  long long interactions = 0;
  double avg_len = 0.0;
  double sparsity = 0.0;
};

// Chronological per-user item sequences over densely re-indexed ids.
struct InteractionDataset {
  std::vector<std::string> user_labels;           // dense id -> original id
  std::vector<std::string> item_labels;
  std::vector<std::vector<int>> sequences;        // dense user id -> item ids
  std::string source;

  int num_users() const { return static_cast<int>(sequences.size()); }
  int num_items() const { return static_cast<int>(item_labels.size()); }
  DatasetStats stats() const;
};

InteractionDataset load_dataset(const std::string& path, DataFormat format,
                                LoadOptions opts = {});

// Leave-last-two protocol: per user, test takes the last item, validation the
// second-to-last, training everything before.
struct SplitDataset {
  std::vector<std::vector<int>> train;
  std::vector<int> val;
  std::vector<int> test;
  int num_items = 0;

  int num_users() const { return static_cast<int>(train.size()); }
};

SplitDataset split_leave_last_two(const InteractionDataset& ds);

// The adversary's raw subset: whole training histories of a seeded uniform
// user sample. Validation/test items are never exposed here.
struct FewShotSubset {
  double ratio = 0.0;
  std::vector<int> users;                    // dense user ids, ascending
  std::vector<std::vector<int>> sequences;   // train views, aligned with users
};

FewShotSubset sample_few_shot(const SplitDataset& split, double ratio, uint64_t seed);

struct RawPair {
  int user = 0;
  std::vector<int> prefix;
  int next_item = 0;
  TopKList list;
  int label = 0;  // 1 when next_item is in list (exploitation)
};

struct PartitionedRaw {
  std::vector<RawPair> exploit;  // R1
  std::vector<RawPair> explore;  // R2

  size_t total() const { return exploit.size() + explore.size(); }
};

using TopKQueryFn = std::function<TopKList(const std::vector<int>& prefix, int k)>;

// For every (prefix, next) pair of each subset sequence, query the black box
// on the prefix (truncated to the most recent `window` items) and assign the
// pair to the exploitation set iff the next item appears in the returned list.
PartitionedRaw partition_exploit_explore(const FewShotSubset& subset, const TopKQueryFn& query,
                                         int k, int window);

}  // namespace seqrex
