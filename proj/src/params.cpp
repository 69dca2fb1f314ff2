#include "seqrex/params.hpp"

namespace seqrex {

Mat& ParameterStore::add(const std::string& name, Mat init) {
  if (has(name)) throw StateError("parameter already registered: " + name);
  if (!init.allFinite()) throw NumericError("non-finite initializer for parameter " + name);
  index_[name] = slots_.size();
  names_.push_back(name);
  Slot s;
  s.grad = Mat::Zero(init.rows(), init.cols());
  s.value = std::move(init);
  slots_.push_back(std::move(s));
  return slots_.back().value;
}

size_t ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw StateError("unknown parameter: " + name);
  return it->second;
}

Mat& ParameterStore::value(const std::string& name) { return slots_[at(name)].value; }
const Mat& ParameterStore::value(const std::string& name) const { return slots_[at(name)].value; }
Mat& ParameterStore::grad(const std::string& name) { return slots_[at(name)].grad; }
const Mat& ParameterStore::grad(const std::string& name) const { return slots_[at(name)].grad; }

long long ParameterStore::total_values() const {
  long long n = 0;
  for (const auto& s : slots_) n += static_cast<long long>(s.value.size());
  return n;
}

void ParameterStore::zero_grads() {
  for (auto& s : slots_) s.grad.setZero();
  grads_populated_ = false;
}

ParameterStore ParameterStore::clone() const {
  ParameterStore out(seed_);
  out.names_ = names_;
  out.index_ = index_;
  out.slots_ = slots_;
  out.rng_ = rng_;
  out.train_mode_ = train_mode_;
  out.grads_populated_ = grads_populated_;
  return out;
}

}  // namespace seqrex
