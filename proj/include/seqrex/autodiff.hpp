#pragma once

#include "seqrex/common.hpp"
#include "seqrex/params.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace seqrex {

class Tape;

// Handle into a Tape node. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  float scalar() const;
  explicit operator bool() const { return tape != nullptr; }
};

// Reverse-mode tape over dense float matrices. Nodes are appended in forward
// order, so reverse iteration is a topological order of the graph. With
// gradients disabled the same ops run value-only (the eval/scoring path).
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  size_t size() const { return nodes_.size(); }

  Var constant(Mat v);
  Var scalar_constant(float v);

  // Trainable leaf if gradients are enabled, constant otherwise. Requesting
  // the same parameter twice returns the same node so gradients accumulate.
  Var param(ParameterStore& ps, const std::string& name);

  // Read-only parameter view; never receives gradients.
  Var frozen_param(const ParameterStore& ps, const std::string& name);

  // Backpropagate from a scalar loss. Gradients of parameter leaves are
  // accumulated into their stores' gradient slots.
  void backward(const Var& loss);

  // Gradient of a node from the last backward() (zeros if untouched).
  Mat grad_of(const Var& v) const;

  const Mat& value_of(int id) const { return nodes_[static_cast<size_t>(id)].value; }
  Mat& grad_ref(int id) { return nodes_[static_cast<size_t>(id)].grad; }
  bool node_requires_grad(int id) const { return nodes_[static_cast<size_t>(id)].requires_grad; }

  // back(tape, self_id, self_grad) accumulates into parents' grad_ref slots.
  using BackFn = std::function<void(Tape&, int, const Mat&)>;
  Var make(Mat value, bool requires_grad, const char* op, BackFn back);

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    std::function<void(Tape&)> backward;
  };

  struct ParamRef {
    ParameterStore* store;
    std::string name;
    int node;
  };

  std::vector<Node> nodes_;
  std::vector<ParamRef> param_refs_;
  std::map<std::pair<const void*, std::string>, int> param_lookup_;
  bool grad_enabled_;
};

// ---- primitive operations ------------------------------------------------

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var cmul(const Var& a, const Var& b);  // elementwise product
Var scale(const Var& a, float s);
Var operator*(float s, const Var& a);
Var add_scalar(const Var& a, float c);

// op(a) * op(b) with optional transposes
Var matmul(const Var& a, const Var& b, bool trans_a = false, bool trans_b = false);

// x + b broadcast over rows; b is 1 x cols
Var add_rowvec(const Var& x, const Var& b);

// Row gather (embedding lookup). Gradient scatter-adds.
Var gather_rows(const Var& src, std::vector<int> ids);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var block_cols(const Var& x, int start, int n);
Var reshape(const Var& x, Eigen::Index rows, Eigen::Index cols);

// Row-wise softmax; optional additive mask (use large negatives to exclude).
Var softmax_rows(const Var& x);
Var softmax_rows(const Var& x, const Mat& additive_mask);

Var sigmoid(const Var& x);
Var tanh_v(const Var& x);
Var relu(const Var& x);
Var log_v(const Var& x);
Var clamp_v(const Var& x, float lo, float hi);

Var sum_all(const Var& x);
Var mean_all(const Var& x);

// Per-row layer normalization with learned gain/bias (1 x cols each).
Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, float eps = 1e-5f);

// Inverted dropout; identity when train is false or rate is 0.
Var dropout(const Var& x, float rate, Rng& rng, bool train);

// Mean over rows of full-softmax cross-entropy against integer targets.
Var cross_entropy_mean(const Var& logits, const std::vector<int>& targets);

// Mean elementwise binary cross-entropy of probabilities against 0/1 labels;
// probabilities are clamped to [1e-7, 1 - 1e-7].
Var binary_cross_entropy_mean(const Var& probs, const Mat& labels);

}  // namespace seqrex
