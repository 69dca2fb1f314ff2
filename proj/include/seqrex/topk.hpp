#pragma once

#include "seqrex/common.hpp"

#include <vector>

namespace seqrex {

// Ordered, distinct item ids as returned by a black-box query. The hash
// identifies the originating (prefix, k) pair, order-sensitively.
struct TopKList {
  std::vector<int> items;
  uint64_t prefix_hash = 0;

  int k() const { return static_cast<int>(items.size()); }
  bool contains(int item) const {
    for (int v : items)
      if (v == item) return true;
    return false;
  }
};

uint64_t hash_prefix(const std::vector<int>& prefix, int k);

}  // namespace seqrex
