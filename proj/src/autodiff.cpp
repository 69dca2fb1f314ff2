#include "seqrex/autodiff.hpp"

#include <cmath>
#include <sstream>

namespace seqrex {

namespace {

[[noreturn]] void shape_fail2(const char* op, const Var& a, const Var& b) {
  std::ostringstream os;
  os << op << ": incompatible shapes (" << a.rows() << "x" << a.cols() << ") vs ("
     << b.rows() << "x" << b.cols() << ")";
  throw ShapeError(os.str());
}

void check_same_tape(const char* op, const Var& a, const Var& b) {
  if (a.tape == nullptr || a.tape != b.tape)
    throw StateError(std::string(op) + ": operands from different tapes");
}

bool rg(const Var& v) { return v.tape->node_requires_grad(v.id); }

}  // namespace

const Mat& Var::value() const {
  if (!tape) throw StateError("use of empty Var");
  return tape->value_of(id);
}

float Var::scalar() const {
  const Mat& v = value();
  if (v.size() != 1) throw ShapeError("scalar() on non-1x1 value");
  return v(0, 0);
}

Var Tape::make(Mat value, bool requires_grad, const char* op, BackFn back) {
  if (!value.allFinite())
    throw NumericError(std::string("non-finite values produced by op '") + op + "'");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  nodes_.push_back(std::move(n));
  int id = static_cast<int>(nodes_.size() - 1);
  if (nodes_.back().requires_grad && back) {
    nodes_.back().backward = [id, fn = std::move(back)](Tape& t) {
      fn(t, id, t.grad_ref(id));
    };
  }
  return Var{this, id};
}

Var Tape::constant(Mat v) { return make(std::move(v), false, "constant", nullptr); }

Var Tape::scalar_constant(float v) {
  Mat m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Var Tape::param(ParameterStore& ps, const std::string& name) {
  auto key = std::make_pair(static_cast<const void*>(&ps), name);
  auto it = param_lookup_.find(key);
  if (it != param_lookup_.end()) return Var{this, it->second};
  Var v = make(ps.value(name), true, "param", nullptr);
  if (grad_enabled_) {
    param_refs_.push_back({&ps, name, v.id});
    param_lookup_[key] = v.id;
  }
  return v;
}

Var Tape::frozen_param(const ParameterStore& ps, const std::string& name) {
  return constant(ps.value(name));
}

void Tape::backward(const Var& loss) {
  if (loss.tape != this) throw StateError("backward: loss from another tape");
  const Node& ln = nodes_[static_cast<size_t>(loss.id)];
  if (ln.value.size() != 1) throw ShapeError("backward: loss must be scalar (1x1)");
  // Gradients are accumulated into every node slot; cheap at the array sizes
  // this artifact uses and it keeps the op closures branch-free.
  for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  if (ln.requires_grad) {
    grad_ref(loss.id)(0, 0) = 1.0f;
    for (int i = loss.id; i >= 0; --i) {
      Node& n = nodes_[static_cast<size_t>(i)];
      if (n.requires_grad && n.backward) n.backward(*this);
    }
  }
  for (const auto& ref : param_refs_) {
    ref.store->grad(ref.name) += nodes_[static_cast<size_t>(ref.node)].grad;
    ref.store->mark_grads_populated();
  }
}

Mat Tape::grad_of(const Var& v) const {
  const Node& n = nodes_[static_cast<size_t>(v.id)];
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

// ---- ops -------------------------------------------------------------------

Var operator+(const Var& a, const Var& b) {
  check_same_tape("add", a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail2("add", a, b);
  int ai = a.id, bi = b.id;
  return a.tape->make(a.value() + b.value(), rg(a) || rg(b), "add",
                      [ai, bi](Tape& t, int, const Mat& g) {
                        t.grad_ref(ai) += g;
                        t.grad_ref(bi) += g;
                      });
}

Var operator-(const Var& a, const Var& b) {
  check_same_tape("sub", a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail2("sub", a, b);
  int ai = a.id, bi = b.id;
  return a.tape->make(a.value() - b.value(), rg(a) || rg(b), "sub",
                      [ai, bi](Tape& t, int, const Mat& g) {
                        t.grad_ref(ai) += g;
                        t.grad_ref(bi) -= g;
                      });
}

Var cmul(const Var& a, const Var& b) {
  check_same_tape("cmul", a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail2("cmul", a, b);
  int ai = a.id, bi = b.id;
  return a.tape->make(a.value().cwiseProduct(b.value()), rg(a) || rg(b), "cmul",
                      [ai, bi](Tape& t, int, const Mat& g) {
                        t.grad_ref(ai) += g.cwiseProduct(t.value_of(bi));
                        t.grad_ref(bi) += g.cwiseProduct(t.value_of(ai));
                      });
}

Var scale(const Var& a, float s) {
  int ai = a.id;
  return a.tape->make(a.value() * s, rg(a), "scale",
                      [ai, s](Tape& t, int, const Mat& g) { t.grad_ref(ai) += g * s; });
}

Var operator*(float s, const Var& a) { return scale(a, s); }

Var add_scalar(const Var& a, float c) {
  int ai = a.id;
  return a.tape->make((a.value().array() + c).matrix(), rg(a), "add_scalar",
                      [ai](Tape& t, int, const Mat& g) { t.grad_ref(ai) += g; });
}

Var matmul(const Var& a, const Var& b, bool trans_a, bool trans_b) {
  check_same_tape("matmul", a, b);
  Eigen::Index ak = trans_a ? a.rows() : a.cols();
  Eigen::Index bk = trans_b ? b.cols() : b.rows();
  if (ak != bk) shape_fail2("matmul", a, b);
  Mat out;
  if (!trans_a && !trans_b) out = a.value() * b.value();
  else if (!trans_a && trans_b) out = a.value() * b.value().transpose();
  else if (trans_a && !trans_b) out = a.value().transpose() * b.value();
  else out = a.value().transpose() * b.value().transpose();
  int ai = a.id, bi = b.id;
  return a.tape->make(std::move(out), rg(a) || rg(b), "matmul",
                      [ai, bi, trans_a, trans_b](Tape& t, int, const Mat& g) {
                        const Mat& av = t.value_of(ai);
                        const Mat& bv = t.value_of(bi);
                        if (!trans_a && !trans_b) {
                          t.grad_ref(ai) += g * bv.transpose();
                          t.grad_ref(bi) += av.transpose() * g;
                        } else if (!trans_a && trans_b) {
                          t.grad_ref(ai) += g * bv;
                          t.grad_ref(bi) += g.transpose() * av;
                        } else if (trans_a && !trans_b) {
                          t.grad_ref(ai) += bv * g.transpose();
                          t.grad_ref(bi) += av * g;
                        } else {
                          t.grad_ref(ai) += (g * bv).transpose();
                          t.grad_ref(bi) += (av * g).transpose();
                        }
                      });
}

Var add_rowvec(const Var& x, const Var& b) {
  check_same_tape("add_rowvec", x, b);
  if (b.rows() != 1 || b.cols() != x.cols()) shape_fail2("add_rowvec", x, b);
  Mat out = x.value();
  out.rowwise() += b.value().row(0);
  int xi = x.id, bi = b.id;
  return x.tape->make(std::move(out), rg(x) || rg(b), "add_rowvec",
                      [xi, bi](Tape& t, int, const Mat& g) {
                        t.grad_ref(xi) += g;
                        t.grad_ref(bi) += g.colwise().sum();
                      });
}

Var gather_rows(const Var& src, std::vector<int> ids) {
  const Mat& v = src.value();
  Mat out(static_cast<Eigen::Index>(ids.size()), v.cols());
  for (size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || ids[i] >= v.rows())
      throw ShapeError("gather_rows: row index " + std::to_string(ids[i]) + " out of range [0, " +
                       std::to_string(v.rows()) + ")");
    out.row(static_cast<Eigen::Index>(i)) = v.row(ids[i]);
  }
  int si = src.id;
  return src.tape->make(std::move(out), rg(src), "gather_rows",
                        [si, ids = std::move(ids)](Tape& t, int, const Mat& g) {
                          Mat& gs = t.grad_ref(si);
                          for (size_t i = 0; i < ids.size(); ++i)
                            gs.row(ids[i]) += g.row(static_cast<Eigen::Index>(i));
                        });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no parts");
  Eigen::Index r = parts[0].rows(), c = 0;
  bool any = false;
  for (const auto& p : parts) {
    check_same_tape("concat_cols", parts[0], p);
    if (p.rows() != r) shape_fail2("concat_cols", parts[0], p);
    c += p.cols();
    any = any || rg(p);
  }
  Mat out(r, c);
  Eigen::Index off = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> widths;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
    ids.push_back(p.id);
    widths.push_back(p.cols());
  }
  return parts[0].tape->make(std::move(out), any, "concat_cols",
                             [ids, widths](Tape& t, int, const Mat& g) {
                               Eigen::Index off = 0;
                               for (size_t i = 0; i < ids.size(); ++i) {
                                 t.grad_ref(ids[i]) += g.middleCols(off, widths[i]);
                                 off += widths[i];
                               }
                             });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no parts");
  Eigen::Index c = parts[0].cols(), r = 0;
  bool any = false;
  for (const auto& p : parts) {
    check_same_tape("concat_rows", parts[0], p);
    if (p.cols() != c) shape_fail2("concat_rows", parts[0], p);
    r += p.rows();
    any = any || rg(p);
  }
  Mat out(r, c);
  Eigen::Index off = 0;
  std::vector<int> ids;
  std::vector<Eigen::Index> heights;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
    ids.push_back(p.id);
    heights.push_back(p.rows());
  }
  return parts[0].tape->make(std::move(out), any, "concat_rows",
                             [ids, heights](Tape& t, int, const Mat& g) {
                               Eigen::Index off = 0;
                               for (size_t i = 0; i < ids.size(); ++i) {
                                 t.grad_ref(ids[i]) += g.middleRows(off, heights[i]);
                                 off += heights[i];
                               }
                             });
}

Var block_cols(const Var& x, int start, int n) {
  if (start < 0 || n <= 0 || start + n > x.cols()) throw ShapeError("block_cols: range out of bounds");
  int xi = x.id;
  return x.tape->make(x.value().middleCols(start, n), rg(x), "block_cols",
                      [xi, start, n](Tape& t, int, const Mat& g) {
                        t.grad_ref(xi).middleCols(start, n) += g;
                      });
}

Var reshape(const Var& x, Eigen::Index r, Eigen::Index c) {
  if (r * c != x.rows() * x.cols()) throw ShapeError("reshape: element count mismatch");
  Mat out = Eigen::Map<const Mat>(x.value().data(), r, c);
  int xi = x.id;
  Eigen::Index xr = x.rows(), xc = x.cols();
  return x.tape->make(std::move(out), rg(x), "reshape",
                      [xi, xr, xc](Tape& t, int, const Mat& g) {
                        t.grad_ref(xi) += Eigen::Map<const Mat>(g.data(), xr, xc);
                      });
}

static Var softmax_rows_impl(const Var& x, const Mat* mask) {
  Mat z = x.value();
  if (mask) {
    if (mask->rows() != z.rows() || mask->cols() != z.cols())
      throw ShapeError("softmax_rows: mask shape mismatch");
    z += *mask;
  }
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    float m = z.row(i).maxCoeff();
    z.row(i) = (z.row(i).array() - m).exp();
    z.row(i) /= z.row(i).sum();
  }
  int xi = x.id;
  return x.tape->make(std::move(z), rg(x), "softmax_rows",
                      [xi](Tape& t, int self, const Mat& g) {
                        const Mat& y = t.value_of(self);
                        Mat gx = g.cwiseProduct(y);
                        Eigen::VectorXf dot = gx.rowwise().sum();
                        gx -= (dot * Eigen::RowVectorXf::Ones(y.cols())).cwiseProduct(y);
                        t.grad_ref(xi) += gx;
                      });
}

Var softmax_rows(const Var& x) { return softmax_rows_impl(x, nullptr); }
Var softmax_rows(const Var& x, const Mat& additive_mask) { return softmax_rows_impl(x, &additive_mask); }

Var sigmoid(const Var& x) {
  // 0.5 * (tanh(x/2) + 1): stable for large |x|
  Mat out = (0.5f * ((x.value().array() * 0.5f).tanh() + 1.0f)).matrix();
  int xi = x.id;
  return x.tape->make(std::move(out), rg(x), "sigmoid",
                      [xi](Tape& t, int self, const Mat& g) {
                        const auto y = t.value_of(self).array();
                        t.grad_ref(xi) += (g.array() * y * (1.0f - y)).matrix();
                      });
}

Var tanh_v(const Var& x) {
  int xi = x.id;
  return x.tape->make(x.value().array().tanh().matrix(), rg(x), "tanh",
                      [xi](Tape& t, int self, const Mat& g) {
                        const auto y = t.value_of(self).array();
                        t.grad_ref(xi) += (g.array() * (1.0f - y * y)).matrix();
                      });
}

Var relu(const Var& x) {
  int xi = x.id;
  return x.tape->make(x.value().cwiseMax(0.0f), rg(x), "relu",
                      [xi](Tape& t, int, const Mat& g) {
                        const auto xv = t.value_of(xi).array();
                        t.grad_ref(xi) += (g.array() * (xv > 0.0f).cast<float>()).matrix();
                      });
}

Var log_v(const Var& x) {
  int xi = x.id;
  return x.tape->make(x.value().array().log().matrix(), rg(x), "log",
                      [xi](Tape& t, int, const Mat& g) {
                        t.grad_ref(xi) += (g.array() / t.value_of(xi).array()).matrix();
                      });
}

Var clamp_v(const Var& x, float lo, float hi) {
  int xi = x.id;
  return x.tape->make(x.value().cwiseMax(lo).cwiseMin(hi), rg(x), "clamp",
                      [xi, lo, hi](Tape& t, int, const Mat& g) {
                        const auto xv = t.value_of(xi).array();
                        auto pass = (xv > lo && xv < hi).cast<float>();
                        t.grad_ref(xi) += (g.array() * pass).matrix();
                      });
}

Var sum_all(const Var& x) {
  Mat out(1, 1);
  out(0, 0) = x.value().sum();
  int xi = x.id;
  return x.tape->make(std::move(out), rg(x), "sum_all",
                      [xi](Tape& t, int, const Mat& g) {
                        t.grad_ref(xi).array() += g(0, 0);
                      });
}

Var mean_all(const Var& x) {
  Mat out(1, 1);
  out(0, 0) = x.value().mean();
  int xi = x.id;
  float inv = 1.0f / static_cast<float>(x.value().size());
  return x.tape->make(std::move(out), rg(x), "mean_all",
                      [xi, inv](Tape& t, int, const Mat& g) {
                        t.grad_ref(xi).array() += g(0, 0) * inv;
                      });
}

Var layer_norm_rows(const Var& x, const Var& gain, const Var& bias, float eps) {
  check_same_tape("layer_norm", x, gain);
  check_same_tape("layer_norm", x, bias);
  if (gain.rows() != 1 || gain.cols() != x.cols() || bias.rows() != 1 || bias.cols() != x.cols())
    throw ShapeError("layer_norm: gain/bias must be 1 x cols");
  const Mat& v = x.value();
  Eigen::Index r = v.rows(), c = v.cols();
  Mat norm(r, c);
  Eigen::VectorXf inv_sd(r);
  for (Eigen::Index i = 0; i < r; ++i) {
    float mu = v.row(i).mean();
    float var = (v.row(i).array() - mu).square().mean();
    float isd = 1.0f / std::sqrt(var + eps);
    inv_sd(i) = isd;
    norm.row(i) = ((v.row(i).array() - mu) * isd).matrix();
  }
  Mat out = norm;
  for (Eigen::Index i = 0; i < r; ++i)
    out.row(i) = out.row(i).cwiseProduct(gain.value().row(0)) + bias.value().row(0);
  int xi = x.id, gi = gain.id, bi = bias.id;
  return x.tape->make(std::move(out), rg(x) || rg(gain) || rg(bias), "layer_norm",
                      [xi, gi, bi, norm = std::move(norm), inv_sd = std::move(inv_sd)](
                          Tape& t, int, const Mat& g) {
                        const Mat& gainv = t.value_of(gi);
                        t.grad_ref(bi) += g.colwise().sum();
                        t.grad_ref(gi) += g.cwiseProduct(norm).colwise().sum();
                        Mat gy(g.rows(), g.cols());
                        for (Eigen::Index i = 0; i < g.rows(); ++i)
                          gy.row(i) = g.row(i).cwiseProduct(gainv.row(0));
                        Mat gx(g.rows(), g.cols());
                        for (Eigen::Index i = 0; i < g.rows(); ++i) {
                          float mg = gy.row(i).mean();
                          float mgy = gy.row(i).cwiseProduct(norm.row(i)).mean();
                          gx.row(i) = ((gy.row(i).array() - mg - norm.row(i).array() * mgy) *
                                       inv_sd(i))
                                          .matrix();
                        }
                        t.grad_ref(xi) += gx;
                      });
}

Var dropout(const Var& x, float rate, Rng& rng, bool train) {
  if (!train || rate <= 0.0f) return x;
  if (rate >= 1.0f) throw Error("dropout: rate must be < 1");
  float keep = 1.0f - rate;
  Mat mask(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      mask(i, j) = rng.uniform_float() < keep ? 1.0f / keep : 0.0f;
  int xi = x.id;
  Mat out = x.value().cwiseProduct(mask);
  return x.tape->make(std::move(out), rg(x), "dropout",
                      [xi, mask = std::move(mask)](Tape& t, int, const Mat& g) {
                        t.grad_ref(xi) += g.cwiseProduct(mask);
                      });
}

Var cross_entropy_mean(const Var& logits, const std::vector<int>& targets) {
  const Mat& v = logits.value();
  if (static_cast<Eigen::Index>(targets.size()) != v.rows())
    throw ShapeError("cross_entropy: one target per row required");
  Eigen::Index r = v.rows();
  Mat probs(v.rows(), v.cols());
  double total = 0.0;
  for (Eigen::Index i = 0; i < r; ++i) {
    int tgt = targets[static_cast<size_t>(i)];
    if (tgt < 0 || tgt >= v.cols()) throw ShapeError("cross_entropy: target id out of range");
    float m = v.row(i).maxCoeff();
    Eigen::RowVectorXf e = (v.row(i).array() - m).exp();
    float z = e.sum();
    probs.row(i) = e / z;
    total += (m + std::log(z)) - v(i, tgt);
  }
  Mat out(1, 1);
  out(0, 0) = static_cast<float>(total / static_cast<double>(r));
  int li = logits.id;
  return logits.tape->make(std::move(out), rg(logits), "cross_entropy",
                           [li, targets, probs = std::move(probs)](Tape& t, int, const Mat& g) {
                             float s = g(0, 0) / static_cast<float>(probs.rows());
                             Mat gx = probs;
                             for (Eigen::Index i = 0; i < gx.rows(); ++i)
                               gx(i, targets[static_cast<size_t>(i)]) -= 1.0f;
                             t.grad_ref(li) += gx * s;
                           });
}

Var binary_cross_entropy_mean(const Var& probs, const Mat& labels) {
  if (labels.rows() != probs.rows() || labels.cols() != probs.cols())
    throw ShapeError("binary_cross_entropy: label shape mismatch");
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    float y = labels.data()[i];
    if (y != 0.0f && y != 1.0f) throw Error("binary_cross_entropy: labels must be 0 or 1");
  }
  Var p = clamp_v(probs, 1e-7f, 1.0f - 1e-7f);
  Var one_minus_p = add_scalar(scale(p, -1.0f), 1.0f);
  Tape& t = *probs.tape;
  Var y = t.constant(labels);
  Var one_minus_y = t.constant((1.0f - labels.array()).matrix());
  Var ll = cmul(y, log_v(p)) + cmul(one_minus_y, log_v(one_minus_p));
  return scale(mean_all(ll), -1.0f);
}

}  // namespace seqrex
