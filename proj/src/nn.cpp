#include "seqrex/nn.hpp"

#include <cmath>

namespace seqrex {

Mat glorot_uniform(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  float limit = std::sqrt(6.0f / static_cast<float>(rows + cols));
  return uniform_init(rng, rows, cols, -limit, limit);
}

Mat uniform_init(Rng& rng, Eigen::Index rows, Eigen::Index cols, float lo, float hi) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = lo + (hi - lo) * rng.uniform_float();
  return m;
}

Rng& ForwardCtx::dummy_rng() {
  static Rng r(0);
  return r;
}

Linear Linear::create(ParameterStore& ps, const std::string& prefix, int in, int out, Rng& rng) {
  Linear l{prefix + ".w", prefix + ".b"};
  ps.add(l.w, glorot_uniform(rng, in, out));
  ps.add(l.b, Mat::Zero(1, out));
  return l;
}

Var Linear::apply(const ForwardCtx& c, const Var& x) const {
  return add_rowvec(matmul(x, c.p(w)), c.p(b));
}

LayerNorm LayerNorm::create(ParameterStore& ps, const std::string& prefix, int dim) {
  LayerNorm n{prefix + ".gain", prefix + ".bias"};
  ps.add(n.gain, Mat::Ones(1, dim));
  ps.add(n.bias, Mat::Zero(1, dim));
  return n;
}

Var LayerNorm::apply(const ForwardCtx& c, const Var& x) const {
  return layer_norm_rows(x, c.p(gain), c.p(bias));
}

FeedForward FeedForward::create(ParameterStore& ps, const std::string& prefix, int in, int hidden,
                                int out, Rng& rng) {
  FeedForward f;
  f.inner = Linear::create(ps, prefix + ".inner", in, hidden, rng);
  f.outer = Linear::create(ps, prefix + ".outer", hidden, out, rng);
  return f;
}

Var FeedForward::apply(const ForwardCtx& c, const Var& x) const {
  return outer.apply(c, relu(inner.apply(c, x)));
}

MultiHeadAttention MultiHeadAttention::create(ParameterStore& ps, const std::string& prefix,
                                              int dim, int heads, Rng& rng) {
  if (dim % heads != 0) throw ShapeError("attention: dim must be divisible by heads");
  MultiHeadAttention a;
  a.heads = heads;
  a.dim = dim;
  a.q = Linear::create(ps, prefix + ".q", dim, dim, rng);
  a.k = Linear::create(ps, prefix + ".k", dim, dim, rng);
  a.v = Linear::create(ps, prefix + ".v", dim, dim, rng);
  a.o = Linear::create(ps, prefix + ".o", dim, dim, rng);
  return a;
}

Var MultiHeadAttention::apply(const ForwardCtx& c, const Var& x, const Mat* mask) const {
  int dh = dim / heads;
  Var qv = q.apply(c, x);
  Var kv = k.apply(c, x);
  Var vv = v.apply(c, x);
  float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(dh));
  std::vector<Var> head_outs;
  head_outs.reserve(static_cast<size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Var qh = block_cols(qv, h * dh, dh);
    Var kh = block_cols(kv, h * dh, dh);
    Var vh = block_cols(vv, h * dh, dh);
    Var s = scale(matmul(qh, kh, false, true), inv_sqrt);
    Var a = mask ? softmax_rows(s, *mask) : softmax_rows(s);
    head_outs.push_back(matmul(a, vh));
  }
  return o.apply(c, concat_cols(head_outs));
}

GruCell GruCell::create(ParameterStore& ps, const std::string& prefix, int in, int hidden,
                        Rng& rng) {
  GruCell g;
  g.hidden = hidden;
  auto mk = [&](const char* tag, int r, int c2) {
    std::string name = prefix + "." + tag;
    ps.add(name, glorot_uniform(rng, r, c2));
    return name;
  };
  g.wz = mk("wz", in, hidden);
  g.uz = mk("uz", hidden, hidden);
  g.wr = mk("wr", in, hidden);
  g.ur = mk("ur", hidden, hidden);
  g.wh = mk("wh", in, hidden);
  g.uh = mk("uh", hidden, hidden);
  g.bz = prefix + ".bz";
  ps.add(g.bz, Mat::Zero(1, hidden));
  g.br = prefix + ".br";
  ps.add(g.br, Mat::Zero(1, hidden));
  g.bh = prefix + ".bh";
  ps.add(g.bh, Mat::Zero(1, hidden));
  return g;
}

Var GruCell::step(const ForwardCtx& c, const Var& x, const Var& h) const {
  Var z = sigmoid(add_rowvec(matmul(x, c.p(wz)) + matmul(h, c.p(uz)), c.p(bz)));
  Var r = sigmoid(add_rowvec(matmul(x, c.p(wr)) + matmul(h, c.p(ur)), c.p(br)));
  Var cand = tanh_v(add_rowvec(matmul(x, c.p(wh)) + matmul(cmul(r, h), c.p(uh)), c.p(bh)));
  Var one_minus_z = add_scalar(scale(z, -1.0f), 1.0f);
  return cmul(one_minus_z, h) + cmul(z, cand);
}

Mat causal_mask(int len) {
  Mat m = Mat::Zero(len, len);
  for (int i = 0; i < len; ++i)
    for (int j = i + 1; j < len; ++j) m(i, j) = -1e9f;
  return m;
}

void adam_step(AdamState& state, ParameterStore& ps) {
  if (!ps.grads_populated())
    throw StateError("adam_step: no gradients populated since last update");
  state.t += 1;
  float bc1 = 1.0f - std::pow(state.beta1, static_cast<float>(state.t));
  float bc2 = 1.0f - std::pow(state.beta2, static_cast<float>(state.t));
  for (const auto& name : ps.names()) {
    Mat& g = ps.grad(name);
    auto it = state.moments.find(name);
    if (it == state.moments.end()) {
      it = state.moments
               .emplace(name, std::make_pair(Mat::Zero(g.rows(), g.cols()),
                                             Mat::Zero(g.rows(), g.cols())))
               .first;
    }
    Mat& m = it->second.first;
    Mat& v = it->second.second;
    m = state.beta1 * m + (1.0f - state.beta1) * g;
    v = state.beta2 * v + (1.0f - state.beta2) * g.cwiseProduct(g);
    Mat m_hat = m / bc1;
    Mat v_hat = v / bc2;
    ps.value(name).array() -= state.lr * m_hat.array() / (v_hat.array().sqrt() + state.eps);
  }
  ps.zero_grads();
}

GradCheckReport finite_difference_check(ParameterStore& ps,
                                        const std::function<Var(Tape&)>& loss_fn,
                                        float tolerance, float fd_step) {
  auto eval = [&]() -> float {
    Tape t(false);
    return loss_fn(t).scalar();
  };
  float l0 = eval();
  float l1 = eval();
  if (l0 != l1)
    throw NumericError("finite_difference_check: non-deterministic closure (two evaluations differ)");

  ps.zero_grads();
  {
    Tape t(true);
    Var loss = loss_fn(t);
    t.backward(loss);
  }

  GradCheckReport report;
  report.tolerance = tolerance;
  report.pass = true;
  for (const auto& name : ps.names()) {
    const Mat analytic = ps.grad(name);
    Mat& value = ps.value(name);
    float worst = 0.0f;
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      float saved = value.data()[i];
      value.data()[i] = saved + fd_step;
      double lp = eval();
      value.data()[i] = saved - fd_step;
      double lm = eval();
      value.data()[i] = saved;
      float fd = static_cast<float>((lp - lm) / (2.0 * fd_step));
      float an = analytic.data()[i];
      float denom = std::max({1.0f, std::fabs(fd), std::fabs(an)});
      worst = std::max(worst, std::fabs(fd - an) / denom);
    }
    report.per_param.push_back({name, worst});
    if (worst > report.max_rel_err) {
      report.max_rel_err = worst;
      report.worst_param = name;
    }
    if (worst > tolerance) report.pass = false;
  }
  ps.zero_grads();
  return report;
}

}  // namespace seqrex
