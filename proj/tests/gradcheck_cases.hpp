#pragma once

// Gradient-check cases shared by the unit suite and the acceptance suite:
// every layer type in isolation, wired into a scalar loss with O(1)-scale
// gradients so central differences are meaningful in float32.

#include "seqrex/nn.hpp"

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace seqrex::testing {

struct GradCase {
  std::string name;
  std::shared_ptr<ParameterStore> ps;
  std::function<Var(Tape&)> loss;
};

inline GradCase make_case(std::string name, std::shared_ptr<ParameterStore> ps,
                          std::function<Var(Tape&)> loss) {
  return GradCase{std::move(name), std::move(ps), std::move(loss)};
}

inline std::vector<GradCase> substrate_grad_cases(uint64_t seed) {
  std::vector<GradCase> cases;
  Rng rng(seed);

  {  // matrix multiply + bias add
    auto ps = std::make_shared<ParameterStore>(seed);
    Linear lin = Linear::create(*ps, "lin", 5, 4, rng);
    Mat x = uniform_init(rng, 3, 5, -1.0f, 1.0f);
    cases.push_back(make_case("linear", ps, [ps, lin, x](Tape& t) {
      ForwardCtx c{&t, ParamSource::trainable(*ps)};
      Var y = lin.apply(c, t.constant(x));
      return mean_all(cmul(y, y));
    }));
  }
  {  // embedding lookup with repeated ids (exercises scatter-add)
    auto ps = std::make_shared<ParameterStore>(seed + 1);
    ps->add("table", uniform_init(rng, 7, 4, -1.0f, 1.0f));
    std::vector<int> ids{0, 3, 3, 6, 1};
    cases.push_back(make_case("embedding_lookup", ps, [ps, ids](Tape& t) {
      Var e = gather_rows(t.param(*ps, "table"), ids);
      return mean_all(cmul(e, e));
    }));
  }
  {  // concatenation
    auto ps = std::make_shared<ParameterStore>(seed + 2);
    ps->add("a", uniform_init(rng, 3, 2, -1.0f, 1.0f));
    ps->add("b", uniform_init(rng, 3, 4, -1.0f, 1.0f));
    cases.push_back(make_case("concat", ps, [ps](Tape& t) {
      Var y = concat_cols({t.param(*ps, "a"), t.param(*ps, "b")});
      Var z = concat_rows({y, y});
      return mean_all(cmul(z, z));
    }));
  }
  {  // softmax
    auto ps = std::make_shared<ParameterStore>(seed + 3);
    ps->add("logits", uniform_init(rng, 4, 6, -2.0f, 2.0f));
    Mat probe = uniform_init(rng, 4, 6, -1.0f, 1.0f);
    cases.push_back(make_case("softmax", ps, [ps, probe](Tape& t) {
      Var p = softmax_rows(t.param(*ps, "logits"));
      return sum_all(cmul(p, t.constant(probe)));
    }));
  }
  {  // sigmoid
    auto ps = std::make_shared<ParameterStore>(seed + 4);
    ps->add("x", uniform_init(rng, 3, 3, -2.0f, 2.0f));
    cases.push_back(make_case("sigmoid", ps, [ps](Tape& t) {
      return mean_all(sigmoid(t.param(*ps, "x")));
    }));
  }
  {  // layer normalization
    auto ps = std::make_shared<ParameterStore>(seed + 5);
    ps->add("x", uniform_init(rng, 4, 6, -1.0f, 1.0f));
    LayerNorm ln = LayerNorm::create(*ps, "ln", 6);
    Mat probe = uniform_init(rng, 4, 6, -1.0f, 1.0f);
    cases.push_back(make_case("layer_norm", ps, [ps, ln, probe](Tape& t) {
      ForwardCtx c{&t, ParamSource::trainable(*ps)};
      Var y = ln.apply(c, t.param(*ps, "x"));
      return mean_all(cmul(y, t.constant(probe)));
    }));
  }
  {  // feed-forward block
    auto ps = std::make_shared<ParameterStore>(seed + 6);
    FeedForward ffn = FeedForward::create(*ps, "ffn", 5, 8, 5, rng);
    Mat x = uniform_init(rng, 3, 5, -1.0f, 1.0f);
    cases.push_back(make_case("feed_forward", ps, [ps, ffn, x](Tape& t) {
      ForwardCtx c{&t, ParamSource::trainable(*ps)};
      Var y = ffn.apply(c, t.constant(x));
      return mean_all(cmul(y, y));
    }));
  }
  {  // GRU cell, three unrolled steps on a 2-dim state
    auto ps = std::make_shared<ParameterStore>(seed + 7);
    GruCell cell = GruCell::create(*ps, "gru", 3, 2, rng);
    Mat xs = uniform_init(rng, 3, 3, -1.0f, 1.0f);
    cases.push_back(make_case("gru_cell", ps, [ps, cell, xs](Tape& t) {
      ForwardCtx c{&t, ParamSource::trainable(*ps)};
      Var h = t.constant(Mat::Zero(1, 2));
      for (Eigen::Index i = 0; i < xs.rows(); ++i)
        h = cell.step(c, t.constant(Mat(xs.row(i))), h);
      return mean_all(cmul(h, h));
    }));
  }
  {  // multi-head attention with causal mask
    auto ps = std::make_shared<ParameterStore>(seed + 8);
    MultiHeadAttention mha = MultiHeadAttention::create(*ps, "mha", 8, 2, rng);
    Mat x = uniform_init(rng, 4, 8, -1.0f, 1.0f);
    Mat mask = causal_mask(4);
    cases.push_back(make_case("attention_causal", ps, [ps, mha, x, mask](Tape& t) {
      ForwardCtx c{&t, ParamSource::trainable(*ps)};
      Var y = mha.apply(c, t.constant(x), &mask);
      return mean_all(cmul(y, y));
    }));
  }
  {  // multi-head attention with a padding mask (first key masked everywhere)
    auto ps = std::make_shared<ParameterStore>(seed + 9);
    MultiHeadAttention mha = MultiHeadAttention::create(*ps, "mha", 8, 2, rng);
    Mat x = uniform_init(rng, 4, 8, -1.0f, 1.0f);
    Mat mask = Mat::Zero(4, 4);
    mask.col(0).setConstant(-1e9f);
    cases.push_back(make_case("attention_padding", ps, [ps, mha, x, mask](Tape& t) {
      ForwardCtx c{&t, ParamSource::trainable(*ps)};
      Var y = mha.apply(c, t.constant(x), &mask);
      return mean_all(cmul(y, y));
    }));
  }
  {  // hinge
    auto ps = std::make_shared<ParameterStore>(seed + 10);
    ps->add("x", uniform_init(rng, 5, 1, -1.0f, 1.0f));
    cases.push_back(make_case("hinge", ps, [ps](Tape& t) {
      return mean_all(relu(add_scalar(t.param(*ps, "x"), 0.3f)));
    }));
  }
  {  // binary cross-entropy through a sigmoid head
    auto ps = std::make_shared<ParameterStore>(seed + 11);
    Linear lin = Linear::create(*ps, "head", 4, 1, rng);
    Mat x = uniform_init(rng, 6, 4, -1.0f, 1.0f);
    Mat labels(6, 1);
    labels << 1, 0, 1, 1, 0, 0;
    cases.push_back(make_case("binary_cross_entropy", ps, [ps, lin, x, labels](Tape& t) {
      ForwardCtx c{&t, ParamSource::trainable(*ps)};
      Var p = sigmoid(lin.apply(c, t.constant(x)));
      return binary_cross_entropy_mean(p, labels);
    }));
  }
  {  // full-softmax cross-entropy
    auto ps = std::make_shared<ParameterStore>(seed + 12);
    Linear lin = Linear::create(*ps, "dec", 4, 9, rng);
    Mat x = uniform_init(rng, 5, 4, -1.0f, 1.0f);
    std::vector<int> targets{2, 0, 8, 3, 3};
    cases.push_back(make_case("cross_entropy", ps, [ps, lin, x, targets](Tape& t) {
      ForwardCtx c{&t, ParamSource::trainable(*ps)};
      return cross_entropy_mean(lin.apply(c, t.constant(x)), targets);
    }));
  }
  return cases;
}

}  // namespace seqrex::testing
