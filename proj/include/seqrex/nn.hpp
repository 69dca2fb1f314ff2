#pragma once

#include "seqrex/autodiff.hpp"

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace seqrex {

// ---- initializers ----------------------------------------------------------

Mat glorot_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols);
Mat uniform_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, float lo, float hi);

// ---- parameter access for forward graphs -----------------------------------

// Trainable (mutable store) or frozen (read-only store) parameter source.
struct ParamSource {
  ParameterStore* mut = nullptr;
  const ParameterStore* ro = nullptr;

  static ParamSource trainable(ParameterStore& ps) { return {&ps, nullptr}; }
  static ParamSource frozen(const ParameterStore& ps) { return {nullptr, &ps}; }

  Var get(Tape& t, const std::string& name) const {
    return mut ? t.param(*mut, name) : t.frozen_param(*ro, name);
  }
  const ParameterStore& store() const { return mut ? *mut : *ro; }
};

// Everything a forward pass needs besides inputs.
struct ForwardCtx {
  Tape* tape;
  ParamSource src;
  Rng* rng = nullptr;  // only consulted by dropout in train mode
  bool train = false;

  Var p(const std::string& name) const { return src.get(*tape, name); }
  Var drop(const Var& x, float rate) const {
    return dropout(x, rate, rng ? *rng : dummy_rng(), train && rng != nullptr);
  }

 private:
  static Rng& dummy_rng();
};

// ---- layers ------------------------------------------------------------

// y = x * W + b with W stored (in x out), b (1 x out).
struct Linear {
  std::string w, b;
  static Linear create(ParameterStore& ps, const std::string& prefix, int in, int out, Rng& rng);
  Var apply(const ForwardCtx& c, const Var& x) const;
};

struct LayerNorm {
  std::string gain, bias;
  static LayerNorm create(ParameterStore& ps, const std::string& prefix, int dim);
  Var apply(const ForwardCtx& c, const Var& x) const;
};

// Two affine maps with a ReLU between them.
struct FeedForward {
  Linear inner, outer;
  static FeedForward create(ParameterStore& ps, const std::string& prefix, int in, int hidden,
                            int out, Rng& rng);
  Var apply(const ForwardCtx& c, const Var& x) const;
};

// Self-attention over x (len x dim) with `heads` heads and an optional
// additive mask (len x len); rows attend over columns.
struct MultiHeadAttention {
  Linear q, k, v, o;
  int heads = 1;
  int dim = 0;
  static MultiHeadAttention create(ParameterStore& ps, const std::string& prefix, int dim,
                                   int heads, Rng& rng);
  Var apply(const ForwardCtx& c, const Var& x, const Mat* additive_mask) const;
};

// Single GRU step: x (1 x in), h (1 x hidden) -> h' (1 x hidden).
struct GruCell {
  std::string wz, uz, bz, wr, ur, br, wh, uh, bh;
  int hidden = 0;
  static GruCell create(ParameterStore& ps, const std::string& prefix, int in, int hidden,
                        Rng& rng);
  Var step(const ForwardCtx& c, const Var& x, const Var& h) const;
};

// Lower-triangular-allowed additive mask (0 where key <= query, -1e9 above).
Mat causal_mask(int len);

// ---- optimizer ---------------------------------------------------------

struct AdamState {
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  long long t = 0;
  std::unordered_map<std::string, std::pair<Mat, Mat>> moments;
};

// Bias-corrected Adam update over every parameter in the store; clears
// gradients afterwards. Throws if no backward() populated gradients since the
// last step.
void adam_step(AdamState& state, ParameterStore& ps);

// ---- gradient verification ----------------------------------------------

struct GradCheckEntry {
  std::string name;
  float max_rel_err;
};

struct GradCheckReport {
  bool pass = false;
  float tolerance = 0.0f;
  float max_rel_err = 0.0f;
  std::string worst_param;
  std::vector<GradCheckEntry> per_param;
};

// Central-difference verification of reverse-mode gradients. `loss_fn` must
// deterministically map the store's current parameters to a scalar loss
// (dropout disabled); non-determinism is detected and reported as an error.
GradCheckReport finite_difference_check(ParameterStore& ps,
                                        const std::function<Var(Tape&)>& loss_fn,
                                        float tolerance = 1e-3f, float fd_step = 1e-3f);

}  // namespace seqrex
