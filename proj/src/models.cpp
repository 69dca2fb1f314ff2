#include "seqrex/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace seqrex {

using nlohmann::json;

Arch arch_from_string(const std::string& s) {
  if (s == "narm") return Arch::kNarm;
  if (s == "sasrec") return Arch::kSasrec;
  if (s == "bert4rec") return Arch::kBert4rec;
  throw ConfigError({"unknown architecture: " + s});
}

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::kNarm: return "narm";
    case Arch::kSasrec: return "sasrec";
    case Arch::kBert4rec: return "bert4rec";
  }
  throw StateError("unreachable architecture tag");
}

std::vector<std::string> ModelConfig::validate() const {
  std::vector<std::string> issues;
  if (num_items <= 0) issues.push_back("num_items must be > 0");
  if (embed_dim <= 0) issues.push_back("embed_dim must be > 0");
  if (trm_layers <= 0) issues.push_back("trm_layers must be > 0");
  if (heads <= 0) issues.push_back("heads must be > 0");
  else if (embed_dim % heads != 0) issues.push_back("embed_dim must be divisible by heads");
  if (gru_layers <= 0) issues.push_back("gru_layers must be > 0");
  if (!(dropout >= 0.0f && dropout < 1.0f)) issues.push_back("dropout must be in [0, 1)");
  if (arch == Arch::kBert4rec && !(mask_prob > 0.0f && mask_prob < 1.0f))
    issues.push_back("mask_prob must be in (0, 1) for bert4rec");
  if (max_len <= 1) issues.push_back("max_len must be > 1");
  return issues;
}

json ModelConfig::to_json() const {
  return {{"arch", arch_name(arch)},   {"num_items", num_items}, {"embed_dim", embed_dim},
          {"trm_layers", trm_layers},  {"heads", heads},         {"gru_layers", gru_layers},
          {"dropout", dropout},        {"mask_prob", mask_prob}, {"max_len", max_len}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  c.arch = arch_from_string(j.value("arch", "sasrec"));
  c.num_items = j.value("num_items", 0);
  c.embed_dim = j.value("embed_dim", 64);
  c.trm_layers = j.value("trm_layers", 2);
  c.heads = j.value("heads", 2);
  c.gru_layers = j.value("gru_layers", 1);
  c.dropout = j.value("dropout", 0.1f);
  c.mask_prob = j.value("mask_prob", 0.2f);
  c.max_len = j.value("max_len", 50);
  return c;
}

SequentialRecommender::SequentialRecommender(const ModelConfig& cfg, uint64_t seed)
    : cfg_(cfg), seed_(seed), ps_(derive_seed(seed, "model-params")) {
  auto issues = cfg.validate();
  if (!issues.empty()) throw ConfigError(issues);
  Rng init(derive_seed(seed, "model-init"));
  int n = cfg_.num_items;
  int d = cfg_.embed_dim;
  switch (cfg_.arch) {
    case Arch::kSasrec: {
      ps_.add("item_emb", glorot_uniform(init, n, d));
      ps_.add("pos_emb", glorot_uniform(init, cfg_.max_len, d));
      for (int l = 0; l < cfg_.trm_layers; ++l) {
        std::string p = "layer" + std::to_string(l);
        ln_att_.push_back(LayerNorm::create(ps_, p + ".ln_att", d));
        att_.push_back(MultiHeadAttention::create(ps_, p + ".att", d, cfg_.heads, init));
        ln_ffn_.push_back(LayerNorm::create(ps_, p + ".ln_ffn", d));
        ffn_.push_back(FeedForward::create(ps_, p + ".ffn", d, d, d, init));
      }
      ln_final_ = LayerNorm::create(ps_, "ln_final", d);
      break;
    }
    case Arch::kBert4rec: {
      // extra vocabulary row for the mask token (id == num_items)
      ps_.add("item_emb", glorot_uniform(init, n + 1, d));
      ps_.add("pos_emb", glorot_uniform(init, cfg_.max_len, d));
      for (int l = 0; l < cfg_.trm_layers; ++l) {
        std::string p = "layer" + std::to_string(l);
        ln_att_.push_back(LayerNorm::create(ps_, p + ".ln_att", d));
        att_.push_back(MultiHeadAttention::create(ps_, p + ".att", d, cfg_.heads, init));
        ln_ffn_.push_back(LayerNorm::create(ps_, p + ".ln_ffn", d));
        ffn_.push_back(FeedForward::create(ps_, p + ".ffn", d, d, d, init));
      }
      ln_final_ = LayerNorm::create(ps_, "ln_final", d);
      break;
    }
    case Arch::kNarm: {
      ps_.add("item_emb", glorot_uniform(init, n, d));
      for (int l = 0; l < cfg_.gru_layers; ++l)
        gru_.push_back(GruCell::create(ps_, "gru" + std::to_string(l), d, d, init));
      ps_.add("attn.a1", glorot_uniform(init, d, d));
      ps_.add("attn.a2", glorot_uniform(init, d, d));
      ps_.add("attn.v", glorot_uniform(init, d, 1));
      // bilinear decoder: score_i = e_i . (B c)
      ps_.add("decode.b", glorot_uniform(init, 2 * d, d));
      break;
    }
  }
}

void SequentialRecommender::check_ids(const std::vector<int>& items) const {
  if (items.empty()) throw DataError("empty prefix");
  for (int id : items)
    if (id < 0 || id >= cfg_.num_items)
      throw DataError("unknown item id " + std::to_string(id) + " (n=" +
                      std::to_string(cfg_.num_items) + ")");
}

std::vector<int> SequentialRecommender::window_tail(const std::vector<int>& prefix,
                                                    int cap) const {
  if (static_cast<int>(prefix.size()) <= cap) return prefix;
  return {prefix.end() - cap, prefix.end()};
}

Var SequentialRecommender::transformer_hidden(const ForwardCtx& c, const std::vector<int>& ids,
                                              const Mat* mask) const {
  int len = static_cast<int>(ids.size());
  Var emb_table = c.p("item_emb");
  std::vector<int> pos(static_cast<size_t>(len));
  std::iota(pos.begin(), pos.end(), 0);
  Var x = gather_rows(emb_table, ids) + gather_rows(c.p("pos_emb"), pos);
  x = c.drop(x, cfg_.dropout);
  for (size_t l = 0; l < att_.size(); ++l) {
    Var a = att_[l].apply(c, ln_att_[l].apply(c, x), mask);
    x = x + c.drop(a, cfg_.dropout);
    Var f = ffn_[l].apply(c, ln_ffn_[l].apply(c, x));
    x = x + c.drop(f, cfg_.dropout);
  }
  return ln_final_.apply(c, x);
}

Var SequentialRecommender::item_logits(const ForwardCtx& c, const Var& hidden) const {
  Var emb = c.p("item_emb");
  if (cfg_.arch == Arch::kBert4rec) {
    std::vector<int> real(static_cast<size_t>(cfg_.num_items));
    std::iota(real.begin(), real.end(), 0);
    emb = gather_rows(emb, real);
  }
  return matmul(hidden, emb, false, true);
}

Var SequentialRecommender::narm_logits(const ForwardCtx& c, const std::vector<int>& items) const {
  Tape& t = *c.tape;
  int len = static_cast<int>(items.size());
  Var x = c.drop(gather_rows(c.p("item_emb"), items), cfg_.dropout);
  std::vector<Var> states;
  states.reserve(static_cast<size_t>(len));
  std::vector<Var> h(gru_.size(), t.constant(Mat::Zero(1, cfg_.embed_dim)));
  for (int i = 0; i < len; ++i) {
    Var inp = gather_rows(x, {i});
    for (size_t l = 0; l < gru_.size(); ++l) {
      h[l] = gru_[l].step(c, inp, h[l]);
      inp = h[l];
    }
    states.push_back(h.back());
  }
  Var hidden = concat_rows(states);
  Var q = matmul(hidden, c.p("attn.a1"));
  Var k = matmul(hidden, c.p("attn.a2"));
  Var v = c.p("attn.v");
  Var decode = c.p("decode.b");
  Var emb = c.p("item_emb");
  std::vector<Var> rows;
  rows.reserve(static_cast<size_t>(len));
  std::vector<int> upto;
  upto.reserve(static_cast<size_t>(len));
  for (int tpos = 0; tpos < len; ++tpos) {
    upto.push_back(tpos);
    Var keys = gather_rows(k, upto);
    Var weights = matmul(sigmoid(add_rowvec(keys, gather_rows(q, {tpos}))), v);
    Var local = matmul(weights, gather_rows(hidden, upto), true, false);
    Var ctx = concat_cols({gather_rows(hidden, {tpos}), local});
    ctx = c.drop(ctx, cfg_.dropout);
    rows.push_back(matmul(matmul(ctx, decode), emb, false, true));
  }
  return concat_rows(rows);
}

Var SequentialRecommender::bert_hidden(const ForwardCtx& c, const std::vector<int>& ids) const {
  return transformer_hidden(c, ids, nullptr);
}

Var SequentialRecommender::prefix_logits(Tape& t, const std::vector<int>& items, bool train,
                                         Rng* rng) {
  check_ids(items);
  if (static_cast<int>(items.size()) > cfg_.max_len)
    throw DataError("prefix_logits: sequence longer than max_len");
  ForwardCtx c{&t, t.grad_enabled() ? ParamSource::trainable(ps_) : ParamSource::frozen(ps_),
               rng, train};
  switch (cfg_.arch) {
    case Arch::kSasrec: {
      Mat mask = causal_mask(static_cast<int>(items.size()));
      return item_logits(c, transformer_hidden(c, items, &mask));
    }
    case Arch::kNarm:
      return narm_logits(c, items);
    case Arch::kBert4rec: {
      // Bidirectional encoder: each prefix needs its own pass with a mask
      // token appended at the query position.
      std::vector<Var> rows;
      for (size_t j = 0; j < items.size(); ++j) {
        std::vector<int> input(items.begin(),
                               items.begin() + static_cast<long>(j + 1));
        input = window_tail(input, cfg_.max_len - 1);
        input.push_back(cfg_.num_items);  // mask token
        Var h = bert_hidden(c, input);
        rows.push_back(item_logits(c, gather_rows(h, {static_cast<int>(input.size()) - 1})));
      }
      return concat_rows(rows);
    }
  }
  throw StateError("unreachable");
}

std::vector<float> SequentialRecommender::score_next(const std::vector<int>& prefix) const {
  check_ids(prefix);
  Tape t(false);
  ForwardCtx c{&t, ParamSource::frozen(ps_), nullptr, false};
  Var logits;
  switch (cfg_.arch) {
    case Arch::kSasrec: {
      std::vector<int> ids = window_tail(prefix, cfg_.max_len);
      Mat mask = causal_mask(static_cast<int>(ids.size()));
      Var h = transformer_hidden(c, ids, &mask);
      logits = item_logits(c, gather_rows(h, {static_cast<int>(ids.size()) - 1}));
      break;
    }
    case Arch::kNarm: {
      std::vector<int> ids = window_tail(prefix, cfg_.max_len);
      Var all = narm_logits(c, ids);
      logits = gather_rows(all, {static_cast<int>(ids.size()) - 1});
      break;
    }
    case Arch::kBert4rec: {
      std::vector<int> ids = window_tail(prefix, cfg_.max_len - 1);
      ids.push_back(cfg_.num_items);
      Var h = transformer_hidden(c, ids, nullptr);
      logits = item_logits(c, gather_rows(h, {static_cast<int>(ids.size()) - 1}));
      break;
    }
  }
  const Mat& row = logits.value();
  return {row.data(), row.data() + row.size()};
}

Mat SequentialRecommender::prefix_logit_matrix(const std::vector<int>& items) const {
  check_ids(items);
  Tape t(false);
  // const_cast is safe: with gradients disabled prefix_logits reads the store
  // through the frozen path only.
  auto* self = const_cast<SequentialRecommender*>(this);
  return self->prefix_logits(t, items, false, nullptr).value();
}

std::vector<EpochLog> SequentialRecommender::train_victim(const SplitDataset& split,
                                                          const VictimTrainOptions& opts,
                                                          uint64_t seed, std::ostream* log) {
  if (split.num_users() == 0) throw DataError("train_victim: empty training split");
  std::vector<EpochLog> history;
  AdamState adam;
  adam.lr = opts.lr;
  Rng order_rng(derive_seed(seed, "victim-order"));
  Rng drop_rng(derive_seed(seed, "victim-dropout"));
  Rng mask_rng(derive_seed(seed, "victim-mask"));

  std::vector<int> users;
  for (int u = 0; u < split.num_users(); ++u) {
    size_t need = cfg_.arch == Arch::kBert4rec ? 1 : 2;
    if (split.train[static_cast<size_t>(u)].size() >= need) users.push_back(u);
  }
  if (users.empty()) throw DataError("train_victim: no trainable sequences");

  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    order_rng.shuffle(users);
    double epoch_loss = 0.0;
    long long steps = 0;
    for (int u : users) {
      const auto& full = split.train[static_cast<size_t>(u)];
      double step_loss = 0.0;
      try {
        Tape t(true);
        Var loss;
        if (cfg_.arch == Arch::kBert4rec) {
          std::vector<int> ids = window_tail(full, cfg_.max_len);
          std::vector<int> input = ids;
          std::vector<int> positions;
          std::vector<int> targets;
          for (size_t i = 0; i < ids.size(); ++i) {
            if (mask_rng.uniform_float() < cfg_.mask_prob) {
              positions.push_back(static_cast<int>(i));
              targets.push_back(ids[i]);
              input[i] = cfg_.num_items;
            }
          }
          if (positions.empty()) {
            int i = static_cast<int>(mask_rng.uniform_uint(static_cast<uint32_t>(ids.size())));
            positions.push_back(i);
            targets.push_back(ids[static_cast<size_t>(i)]);
            input[static_cast<size_t>(i)] = cfg_.num_items;
          }
          ForwardCtx c{&t, ParamSource::trainable(ps_), &drop_rng, true};
          Var h = bert_hidden(c, input);
          loss = cross_entropy_mean(item_logits(c, gather_rows(h, positions)), targets);
        } else {
          std::vector<int> tail = window_tail(full, cfg_.max_len + 1);
          std::vector<int> inputs(tail.begin(), tail.end() - 1);
          std::vector<int> targets(tail.begin() + 1, tail.end());
          Var logits = prefix_logits(t, inputs, true, &drop_rng);
          loss = cross_entropy_mean(logits, targets);
        }
        step_loss = loss.scalar();
        t.backward(loss);
      } catch (const NumericError& e) {
        throw NumericError("victim training diverged at epoch " + std::to_string(epoch) + ": " +
                           e.what());
      }
      adam_step(adam, ps_);
      epoch_loss += step_loss;
      ++steps;
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.loss = epoch_loss / static_cast<double>(steps);
    EvalProtocol vp = opts.val_protocol;
    RankMetrics vm = rank_metrics(scorer(), split, vp, EvalTarget::kVal);
    entry.val_ndcg10 = vm.ndcg_at(10);
    entry.val_recall10 = vm.recall_at(10);
    history.push_back(entry);
    if (log) {
      json line = {{"epoch", entry.epoch},
                   {"loss", entry.loss},
                   {"val_n10", entry.val_ndcg10},
                   {"val_r10", entry.val_recall10}};
      (*log) << line.dump() << "\n";
    }
  }
  return history;
}

void SequentialRecommender::save(const std::string& path) const {
  CheckpointManifest man;
  man.architecture = arch_name(cfg_.arch);
  man.rng_seed = seed_;
  man.config = cfg_.to_json();
  save_checkpoint(path, ps_, man);
}

SequentialRecommender SequentialRecommender::load(const std::string& path,
                                                  std::optional<Arch> expected) {
  ParameterStore loaded(0);
  CheckpointManifest man = load_checkpoint(path, loaded);
  ModelConfig cfg = ModelConfig::from_json(man.config);
  if (expected && *expected != cfg.arch)
    throw DataError("checkpoint architecture '" + arch_name(cfg.arch) +
                    "' does not match requested architecture '" + arch_name(*expected) + "'");
  if (man.architecture != arch_name(cfg.arch))
    throw DataError("checkpoint manifest tag '" + man.architecture +
                    "' disagrees with config architecture '" + arch_name(cfg.arch) + "'");
  SequentialRecommender model(cfg, man.rng_seed);
  for (const auto& name : model.ps_.names()) {
    if (!loaded.has(name)) throw DataError("checkpoint missing parameter: " + name);
    const Mat& v = loaded.value(name);
    Mat& dst = model.ps_.value(name);
    if (v.rows() != dst.rows() || v.cols() != dst.cols())
      throw DataError("checkpoint shape mismatch for parameter " + name);
    dst = v;
  }
  return model;
}

}  // namespace seqrex
