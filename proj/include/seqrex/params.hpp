#pragma once

#include "seqrex/common.hpp"

#include <string>
#include <unordered_map>
#include <vector>

namespace seqrex {

// Named parameters with same-shape gradient slots. Insertion order is the
// canonical iteration order (checkpoints, Adam), so identical construction
// yields identical bytes.
class ParameterStore {
 public:
  explicit ParameterStore(uint64_t seed) : rng_(seed), seed_(seed) {}

  Mat& add(const std::string& name, Mat init);
  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Mat& value(const std::string& name);
  const Mat& value(const std::string& name) const;
  Mat& grad(const std::string& name);
  const Mat& grad(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  long long total_values() const;

  void zero_grads();
  void mark_grads_populated() { grads_populated_ = true; }
  bool grads_populated() const { return grads_populated_; }
  void clear_grads_populated() { grads_populated_ = false; }

  Rng& rng() { return rng_; }
  uint64_t seed() const { return seed_; }

  // Dropout is active only when training; everything else ignores the flag.
  bool train_mode() const { return train_mode_; }
  void set_train_mode(bool on) { train_mode_ = on; }

  ParameterStore clone() const;

 private:
  struct Slot {
    Mat value;
    Mat grad;
  };
  std::vector<std::string> names_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<Slot> slots_;
  Rng rng_;
  uint64_t seed_;
  bool train_mode_ = false;
  bool grads_populated_ = false;

  size_t at(const std::string& name) const;
};

// RAII train-mode toggle.
class TrainModeGuard {
 public:
  TrainModeGuard(ParameterStore& ps, bool on) : ps_(ps), prev_(ps.train_mode()) {
    ps_.set_train_mode(on);
  }
  ~TrainModeGuard() { ps_.set_train_mode(prev_); }

 private:
  ParameterStore& ps_;
  bool prev_;
};

}  // namespace seqrex
