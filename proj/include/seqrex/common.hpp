#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace seqrex {

// All numeric state is 32-bit float, row-major. Reductions are single-threaded
// and therefore order-stable, which keeps reruns bit-identical.
using Mat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

// Aggregated configuration failures; `issues` holds one message per field path.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

class BudgetExhausted : public Error {
 public:
  BudgetExhausted(std::string ledger, long long limit, long long used);
  const std::string& ledger() const { return ledger_; }
  long long limit() const { return limit_; }
  long long used() const { return used_; }

 private:
  std::string ledger_;
  long long limit_;
  long long used_;
};

uint64_t splitmix64(uint64_t x);
uint64_t fnv1a64(std::string_view s);

// Stage- and purpose-scoped seed derivation: changing one consumer's tag never
// perturbs another consumer's stream.
uint64_t derive_seed(uint64_t base, std::string_view tag);
uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t index);

// mt19937_64 raw output is pinned by the standard; the distribution helpers
// below avoid std::uniform_* so sequences are identical across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(splitmix64(seed)) {}

  uint64_t next_u64() { return engine_(); }

  // [0, bound), bound > 0
  uint32_t uniform_uint(uint32_t bound);

  // [lo, hi] inclusive
  int uniform_int(int lo, int hi);

  // [0, 1) with 24 bits of precision
  float uniform_float();

  float normal(float mean = 0.0f, float stddev = 1.0f);

  bool bernoulli(float p) { return uniform_float() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_uint(static_cast<uint32_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  float spare_ = 0.0f;
};

// Top-k item ids by (score desc, id asc). Shared by the oracle, the evaluator
// and every test oracle so tie-breaking is identical everywhere.
std::vector<int> topk_ids(const float* scores, int n, int k);
std::vector<int> topk_ids(const std::vector<float>& scores, int k);

}  // namespace seqrex
