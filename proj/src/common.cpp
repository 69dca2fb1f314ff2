#include "seqrex/common.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace seqrex {

ConfigError::ConfigError(std::vector<std::string> issues)
    : Error([&] {
        std::ostringstream os;
        os << "invalid configuration (" << issues.size() << " issue(s)):";
        for (const auto& s : issues) os << "\n  - " << s;
        return os.str();
      }()),
      issues_(std::move(issues)) {}

BudgetExhausted::BudgetExhausted(std::string ledger, long long limit, long long used)
    : Error("budget exhausted on ledger '" + ledger + "': used " + std::to_string(used) +
            " of " + std::to_string(limit)),
      ledger_(std::move(ledger)),
      limit_(limit),
      used_(used) {}

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t derive_seed(uint64_t base, std::string_view tag) {
  return splitmix64(base ^ fnv1a64(tag));
}

uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index) {
  return splitmix64(derive_seed(base, tag) + 0x9e3779b97f4a7c15ULL * (index + 1));
}

uint32_t Rng::uniform_uint(uint32_t bound) {
  if (bound == 0) throw Error("uniform_uint: bound must be positive");
  return static_cast<uint32_t>((static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
}

int Rng::uniform_int(int lo, int hi) {
  if (hi < lo) throw Error("uniform_int: empty range");
  return lo + static_cast<int>(uniform_uint(static_cast<uint32_t>(hi - lo + 1)));
}

float Rng::uniform_float() {
  return static_cast<float>(next_u64() >> 40) * (1.0f / 16777216.0f);
}

float Rng::normal(float mean, float stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1 = 0.0;
  do {
    u1 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  } while (u1 <= 0.0);
  double u2 = static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * M_PI * u2;
  spare_ = static_cast<float>(r * std::sin(a));
  has_spare_ = true;
  return mean + stddev * static_cast<float>(r * std::cos(a));
}

std::vector<int> topk_ids(const float* scores, int n, int k) {
  if (k < 1) throw Error("topk_ids: k must be >= 1");
  if (k > n) throw Error("topk_ids: k exceeds item count");
  std::vector<int> ids(n);
  std::iota(ids.begin(), ids.end(), 0);
  auto better = [scores](int a, int b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  };
  std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), better);
  ids.resize(k);
  return ids;
}

std::vector<int> topk_ids(const std::vector<float>& scores, int k) {
  return topk_ids(scores.data(), static_cast<int>(scores.size()), k);
}

}  // namespace seqrex
