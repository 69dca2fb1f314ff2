#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "arch_grad_cases.hpp"
#include "fixtures.hpp"
#include "seqrex/models.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>

using namespace seqrex;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_cfg(Arch arch, int n = 6) {
  ModelConfig cfg;
  cfg.arch = arch;
  cfg.num_items = n;
  cfg.embed_dim = 4;
  cfg.trm_layers = 1;
  cfg.heads = 2;
  cfg.dropout = 0.0f;
  cfg.max_len = 8;
  return cfg;
}

}  // namespace

TEST_CASE("config validation: per-head dim, dropout range, mask prob") {
  ModelConfig cfg = tiny_cfg(Arch::kSasrec);
  cfg.embed_dim = 64;
  cfg.heads = 2;
  CHECK(cfg.validate().empty());
  CHECK(cfg.embed_dim / cfg.heads == 32);

  cfg.embed_dim = 63;
  CHECK_FALSE(cfg.validate().empty());

  ModelConfig narm = tiny_cfg(Arch::kNarm);
  narm.gru_layers = 1;
  narm.dropout = 0.1f;
  CHECK(narm.validate().empty());

  ModelConfig bert = tiny_cfg(Arch::kBert4rec);
  bert.mask_prob = 0.0f;
  CHECK_FALSE(bert.validate().empty());
  bert.mask_prob = 0.2f;
  CHECK(bert.validate().empty());

  ModelConfig bad = tiny_cfg(Arch::kSasrec);
  bad.dropout = 1.0f;
  CHECK_FALSE(bad.validate().empty());
  CHECK_THROWS_AS(SequentialRecommender(bad, 1), ConfigError);
}

TEST_CASE("identical config and seed build identical parameter bytes") {
  for (Arch arch : {Arch::kNarm, Arch::kSasrec, Arch::kBert4rec}) {
    SequentialRecommender a(tiny_cfg(arch), 77);
    SequentialRecommender b(tiny_cfg(arch), 77);
    REQUIRE(a.params().names() == b.params().names());
    for (const auto& n : a.params().names()) CHECK(a.params().value(n) == b.params().value(n));
    SequentialRecommender c(tiny_cfg(arch), 78);
    bool all_same = true;
    for (const auto& n : a.params().names())
      all_same = all_same && (a.params().value(n) == c.params().value(n));
    CHECK_FALSE(all_same);
  }
}

TEST_CASE("score_next: determinism, windowing, id validation") {
  for (Arch arch : {Arch::kNarm, Arch::kSasrec, Arch::kBert4rec}) {
    CAPTURE(arch_name(arch));
    SequentialRecommender m(tiny_cfg(arch), 5);
    std::vector<int> prefix{0, 1, 2, 3};
    auto s1 = m.score_next(prefix);
    auto s2 = m.score_next(prefix);
    CHECK(s1 == s2);
    CHECK(s1.size() == 6);

    // longer than the window: equals scoring the last-window suffix
    std::vector<int> long_prefix{5, 4, 3, 2, 1, 0, 1, 2, 3, 4, 5, 0};
    int cap = arch == Arch::kBert4rec ? m.config().max_len - 1 : m.config().max_len;
    std::vector<int> suffix(long_prefix.end() - cap, long_prefix.end());
    CHECK(m.score_next(long_prefix) == m.score_next(suffix));

    CHECK_THROWS_AS(m.score_next({}), DataError);
    CHECK_THROWS_AS(m.score_next({0, 99}), DataError);
  }
}

TEST_CASE("hand-evaluated SASRec forward pass (1 layer, 1 head, dim 2)") {
  ModelConfig cfg;
  cfg.arch = Arch::kSasrec;
  cfg.num_items = 5;
  cfg.embed_dim = 2;
  cfg.trm_layers = 1;
  cfg.heads = 1;
  cfg.dropout = 0.0f;
  cfg.max_len = 4;
  SequentialRecommender m(cfg, 9);
  auto& ps = m.params();

  std::vector<int> prefix{1, 3};
  auto got = m.score_next(prefix);

  // Independent double-precision evaluation of the same architecture.
  using Md = Eigen::MatrixXd;
  auto to_d = [&](const std::string& name) -> Md { return ps.value(name).cast<double>(); };
  auto layer_norm = [](const Md& x, const Md& gain, const Md& bias) {
    Md out = x;
    for (int i = 0; i < x.rows(); ++i) {
      double mu = x.row(i).mean();
      double var = (x.row(i).array() - mu).square().mean();
      out.row(i) =
          ((x.row(i).array() - mu) / std::sqrt(var + 1e-5)) * gain.row(0).array() +
          bias.row(0).array();
    }
    return out;
  };
  Md emb = to_d("item_emb"), pos = to_d("pos_emb");
  Md x(2, 2);
  x.row(0) = emb.row(1) + pos.row(0);
  x.row(1) = emb.row(3) + pos.row(1);

  Md a_in = layer_norm(x, to_d("layer0.ln_att.gain"), to_d("layer0.ln_att.bias"));
  Md q = a_in * to_d("layer0.att.q.w");
  q.rowwise() += to_d("layer0.att.q.b").row(0);
  Md k = a_in * to_d("layer0.att.k.w");
  k.rowwise() += to_d("layer0.att.k.b").row(0);
  Md v = a_in * to_d("layer0.att.v.w");
  v.rowwise() += to_d("layer0.att.v.b").row(0);
  Md s = q * k.transpose() / std::sqrt(2.0);
  s(0, 1) = -1e9;  // causal mask
  Md att(2, 2);
  for (int i = 0; i < 2; ++i) {
    Eigen::RowVectorXd e = (s.row(i).array() - s.row(i).maxCoeff()).exp();
    att.row(i) = e / e.sum();
  }
  Md o = (att * v) * to_d("layer0.att.o.w");
  o.rowwise() += to_d("layer0.att.o.b").row(0);
  x = x + o;

  Md f_in = layer_norm(x, to_d("layer0.ln_ffn.gain"), to_d("layer0.ln_ffn.bias"));
  Md f1 = f_in * to_d("layer0.ffn.inner.w");
  f1.rowwise() += to_d("layer0.ffn.inner.b").row(0);
  f1 = f1.cwiseMax(0.0);
  Md f2 = f1 * to_d("layer0.ffn.outer.w");
  f2.rowwise() += to_d("layer0.ffn.outer.b").row(0);
  x = x + f2;

  Md h = layer_norm(x, to_d("ln_final.gain"), to_d("ln_final.bias"));
  Eigen::RowVectorXd expected = h.row(1) * emb.transpose();

  REQUIRE(got.size() == 5);
  for (int i = 0; i < 5; ++i)
    CHECK(got[static_cast<size_t>(i)] == doctest::Approx(expected(i)).epsilon(1e-4));
}

TEST_CASE("causal architectures: per-position logits match per-prefix scoring and ignore appended items") {
  for (Arch arch : {Arch::kNarm, Arch::kSasrec}) {
    CAPTURE(arch_name(arch));
    SequentialRecommender m(tiny_cfg(arch), 21);
    std::vector<int> items{0, 2, 1, 4, 3};
    Mat logits = m.prefix_logit_matrix(items);
    REQUIRE(logits.rows() == 5);
    for (size_t j = 1; j <= items.size(); ++j) {
      std::vector<int> prefix(items.begin(), items.begin() + static_cast<long>(j));
      auto s = m.score_next(prefix);
      for (int v = 0; v < 6; ++v)
        CHECK(logits(static_cast<Eigen::Index>(j - 1), v) ==
              doctest::Approx(s[static_cast<size_t>(v)]).epsilon(1e-4));
    }
    std::vector<int> appended = items;
    appended.push_back(5);
    Mat logits2 = m.prefix_logit_matrix(appended);
    for (Eigen::Index r = 0; r < 5; ++r)
      for (int v = 0; v < 6; ++v)
        CHECK(logits2(r, v) == doctest::Approx(logits(r, v)).epsilon(1e-4));
  }
}

TEST_CASE("each architecture passes the finite-difference check on a tiny config") {
  for (auto& gc : seqrex::testing::all_arch_grad_cases(321)) {
    REQUIRE(gc.model->params().total_values() <= 1000);
    auto report = finite_difference_check(gc.model->params(), gc.loss, 1e-3f);
    CHECK_MESSAGE(report.pass, gc.name, ": worst param ", report.worst_param, " err ",
                  report.max_rel_err);
  }
}

TEST_CASE("victim training on a Markov toy set beats the random baseline") {
  auto ds = seqrex::testing::markov_dataset(20, 30, 12345, 12, 20);
  auto split = split_leave_last_two(ds);

  ModelConfig cfg;
  cfg.arch = Arch::kSasrec;
  cfg.num_items = 30;
  cfg.embed_dim = 16;
  cfg.trm_layers = 2;
  cfg.heads = 2;
  cfg.dropout = 0.0f;
  cfg.max_len = 20;
  SequentialRecommender victim(cfg, 1);

  VictimTrainOptions opts;
  opts.epochs = 100;
  opts.val_protocol.seed = 5;
  auto history = victim.train_victim(split, opts, 99);
  REQUIRE(history.size() == 100);

  // random baseline: 10 of the 30-item pool
  CHECK(history.back().val_recall10 > 10.0 / 30.0);

  // smoothed (window-5) training loss decreases
  std::vector<double> smooth;
  for (size_t i = 4; i < history.size(); ++i) {
    double s = 0;
    for (size_t j = i - 4; j <= i; ++j) s += history[j].loss;
    smooth.push_back(s / 5.0);
  }
  for (size_t i = 1; i < smooth.size(); ++i) {
    double cap = smooth[i - 1] + std::max(0.01, 0.01 * smooth[i - 1]);
    CHECK(smooth[i] <= cap);
  }
  CHECK(smooth.back() < 0.5 * smooth.front());
}

TEST_CASE("train_victim: zero epochs is a no-op; reruns are bit-identical") {
  auto ds = seqrex::testing::markov_dataset(8, 12, 5, 6, 10);
  auto split = split_leave_last_two(ds);
  ModelConfig cfg = tiny_cfg(Arch::kNarm, 12);
  cfg.max_len = 10;

  SequentialRecommender m(cfg, 3);
  SequentialRecommender before = m;
  VictimTrainOptions none;
  none.epochs = 0;
  m.train_victim(split, none, 7);
  for (const auto& n : m.params().names())
    CHECK(m.params().value(n) == before.params().value(n));

  auto run_loss = [&] {
    SequentialRecommender t(cfg, 3);
    VictimTrainOptions opts;
    opts.epochs = 3;
    auto h = t.train_victim(split, opts, 7);
    return h.back().loss;
  };
  CHECK(run_loss() == run_loss());
}

TEST_CASE("bert4rec trains masked prediction without error") {
  auto ds = seqrex::testing::markov_dataset(8, 12, 6, 6, 10);
  auto split = split_leave_last_two(ds);
  ModelConfig cfg = tiny_cfg(Arch::kBert4rec, 12);
  cfg.max_len = 10;
  cfg.mask_prob = 0.3f;
  SequentialRecommender m(cfg, 4);
  VictimTrainOptions opts;
  opts.epochs = 3;
  auto h = m.train_victim(split, opts, 8);
  CHECK(h.size() == 3);
  CHECK(std::isfinite(h.back().loss));
}

TEST_CASE("checkpoint round-trip preserves scores bit-for-bit") {
  for (Arch arch : {Arch::kNarm, Arch::kSasrec, Arch::kBert4rec}) {
    CAPTURE(arch_name(arch));
    SequentialRecommender m(tiny_cfg(arch), 31);
    auto path = (fs::temp_directory_path() / ("seqrex_model_" + arch_name(arch) + ".ckpt"))
                    .string();
    m.save(path);
    auto loaded = SequentialRecommender::load(path);
    Rng rng(8);
    for (int it = 0; it < 100; ++it) {
      int len = 1 + static_cast<int>(rng.uniform_uint(7));
      std::vector<int> prefix;
      for (int i = 0; i < len; ++i)
        prefix.push_back(static_cast<int>(rng.uniform_uint(6)));
      CHECK(m.score_next(prefix) == loaded.score_next(prefix));
    }
    fs::remove(path);
  }
}

TEST_CASE("cross-architecture checkpoint load errors name both tags") {
  SequentialRecommender m(tiny_cfg(Arch::kSasrec), 2);
  auto path = (fs::temp_directory_path() / "seqrex_cross.ckpt").string();
  m.save(path);
  CHECK_THROWS_WITH_AS(SequentialRecommender::load(path, Arch::kNarm),
                       doctest::Contains("sasrec"), DataError);
  try {
    SequentialRecommender::load(path, Arch::kNarm);
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("narm") != std::string::npos);
  }
  fs::remove(path);
}
