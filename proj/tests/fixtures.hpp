#pragma once

// Seeded Markov-chain interaction fixture shared by unit and acceptance
// suites. Every user walks a fixed item-transition structure, so next-item
// prediction is learnable at desk scale.

#include "seqrex/data.hpp"

#include <fstream>
#include <string>

namespace seqrex::testing {

inline int markov_step(int current, int n, Rng& rng) {
  float u = rng.uniform_float();
  if (u < 0.45f) return (current * 7 + 3) % n;
  if (u < 0.75f) return (current * 13 + 5) % n;
  if (u < 0.90f) return (current + 1) % n;
  return static_cast<int>(rng.uniform_uint(static_cast<uint32_t>(n)));
}

inline InteractionDataset markov_dataset(int users, int items, uint64_t seed, int min_len = 10,
                                         int max_len = 24) {
  InteractionDataset ds;
  ds.source = "markov-fixture";
  Rng rng(derive_seed(seed, "markov-fixture"));
  for (int u = 0; u < users; ++u) {
    int len = min_len + static_cast<int>(rng.uniform_uint(
                            static_cast<uint32_t>(max_len - min_len + 1)));
    std::vector<int> seq;
    seq.reserve(static_cast<size_t>(len));
    int cur = static_cast<int>(rng.uniform_uint(static_cast<uint32_t>(items)));
    seq.push_back(cur);
    for (int i = 1; i < len; ++i) {
      cur = markov_step(cur, items, rng);
      seq.push_back(cur);
    }
    ds.user_labels.push_back("u" + std::to_string(u));
    ds.sequences.push_back(std::move(seq));
  }
  for (int v = 0; v < items; ++v) ds.item_labels.push_back("i" + std::to_string(v));
  return ds;
}

inline void write_tsv(const InteractionDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  for (size_t u = 0; u < ds.sequences.size(); ++u) {
    long long ts = 1000;
    for (int item : ds.sequences[u]) {
      out << ds.user_labels[u] << "\t" << ds.item_labels[static_cast<size_t>(item)] << "\t"
          << ts++ << "\n";
    }
  }
}

}  // namespace seqrex::testing
