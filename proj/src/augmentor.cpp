#include "seqrex/augmentor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

namespace seqrex {

using nlohmann::json;

PosMode pos_mode_from_string(const std::string& s) {
  if (s == "scaled") return PosMode::kScaled;
  if (s == "paper-literal") return PosMode::kPaperLiteral;
  throw ConfigError({"unknown positional encoding mode: " + s});
}

std::string pos_mode_name(PosMode m) {
  return m == PosMode::kScaled ? "scaled" : "paper-literal";
}

Eigen::VectorXf positional_encoding(int j, int dims, PosMode mode, float rho_max) {
  if (j < 0) throw DataError("positional_encoding: position must be >= 0");
  if (dims < 1) throw DataError("positional_encoding: dims must be >= 1");
  Eigen::VectorXf out(dims);
  for (int idx = 0; idx < dims; ++idx) {
    int m = idx / 2;
    double expo = mode == PosMode::kScaled
                      ? static_cast<double>(2 * m) / static_cast<double>(dims)
                      : static_cast<double>(2 * m);
    double angle = static_cast<double>(j) / std::pow(static_cast<double>(rho_max), expo);
    out(idx) = static_cast<float>((idx % 2 == 0) ? std::sin(angle) : std::cos(angle));
  }
  return out;
}

std::vector<std::string> SamplerConfig::validate() const {
  std::vector<std::string> issues;
  if (ctx_len < 1) issues.push_back("ctx_len must be >= 1");
  if (heads < 1) issues.push_back("heads must be >= 1");
  if (d_model < 1) issues.push_back("d_model must be >= 1");
  else if (head_dim <= 0 && d_model % heads != 0)
    issues.push_back("d_model must be divisible by heads");
  if (item_dim < 1) issues.push_back("item_dim must be >= 1");
  if (pos_dim < 1) issues.push_back("pos_dim must be >= 1");
  if (!(dropout >= 0.0f && dropout < 1.0f)) issues.push_back("dropout must be in [0, 1)");
  if (!(rho_max > 0.0f)) issues.push_back("rho_max must be positive");
  return issues;
}

json SamplerConfig::to_json() const {
  return {{"ctx_len", ctx_len},
          {"heads", heads},
          {"head_dim", head_dim},
          {"d_model", d_model},
          {"item_dim", item_dim},
          {"pos_dim", pos_dim},
          {"ffn_hidden", ffn_hidden},
          {"dropout", dropout},
          {"rho_max", rho_max},
          {"pos_mode", pos_mode_name(pos_mode)},
          {"threshold_signal", threshold_signal}};
}

SamplerConfig SamplerConfig::from_json(const json& j) {
  SamplerConfig c;
  c.ctx_len = j.value("ctx_len", 10);
  c.heads = j.value("heads", 2);
  c.head_dim = j.value("head_dim", 0);
  c.d_model = j.value("d_model", 16);
  c.item_dim = j.value("item_dim", 16);
  c.pos_dim = j.value("pos_dim", 8);
  c.ffn_hidden = j.value("ffn_hidden", 0);
  c.dropout = j.value("dropout", 0.1f);
  c.rho_max = j.value("rho_max", 1e4f);
  c.pos_mode = pos_mode_from_string(j.value("pos_mode", "scaled"));
  c.threshold_signal = j.value("threshold_signal", false);
  return c;
}

Augmentor::Augmentor(const SamplerConfig& cfg, int num_items, uint64_t seed)
    : cfg_(cfg), num_items_(num_items), seed_(seed), ps_(derive_seed(seed, "augmentor-params")) {
  auto issues = cfg_.validate();
  if (num_items_ < 1) issues.push_back("num_items must be >= 1");
  if (!issues.empty()) throw ConfigError(issues);

  Rng init(derive_seed(seed, "augmentor-init"));
  int e_dim = cfg_.item_dim + cfg_.pos_dim;
  int dh = cfg_.effective_head_dim();
  // padding embedding lives in the extra row (id == num_items)
  ps_.add("g", glorot_uniform(init, num_items_ + 1, cfg_.item_dim));
  for (int h = 0; h < cfg_.heads; ++h) {
    std::string p = "head" + std::to_string(h);
    ps_.add(p + ".q.w", glorot_uniform(init, e_dim, dh));
    ps_.add(p + ".q.b", Mat::Zero(1, dh));
    ps_.add(p + ".k.w", glorot_uniform(init, e_dim, dh));
    ps_.add(p + ".k.b", Mat::Zero(1, dh));
  }
  int concat_dim = cfg_.heads * cfg_.item_dim;
  int hidden = cfg_.effective_ffn_hidden();
  ps_.add("ffn.inner.w", glorot_uniform(init, concat_dim, hidden));
  ps_.add("ffn.inner.b", Mat::Zero(1, hidden));
  ps_.add("ffn.outer.w", glorot_uniform(init, hidden, cfg_.d_model));
  ps_.add("ffn.outer.b", Mat::Zero(1, cfg_.d_model));
  ps_.add("agg.w", glorot_uniform(init, cfg_.ctx_len * cfg_.d_model, cfg_.item_dim));
  ps_.add("agg.b", Mat::Zero(1, cfg_.item_dim));
  ps_.add("signal.w", glorot_uniform(init, cfg_.item_dim, 1));
  ps_.add("signal.b", Mat::Zero(1, 1));

  pos_table_ = Mat(cfg_.ctx_len, cfg_.pos_dim);
  for (int j = 0; j < cfg_.ctx_len; ++j)
    pos_table_.row(j) = positional_encoding(j, cfg_.pos_dim, cfg_.pos_mode, cfg_.rho_max)
                            .transpose();
}

Eigen::VectorXf Augmentor::embed_item(int item_id, int position) const {
  if (item_id < 0 || item_id > num_items_)
    throw DataError("embed_item: item id out of range (padding slot is id == num_items)");
  Eigen::VectorXf rho = positional_encoding(position, cfg_.pos_dim, cfg_.pos_mode, cfg_.rho_max);
  Eigen::VectorXf out(cfg_.item_dim + cfg_.pos_dim);
  out.head(cfg_.item_dim) = ps_.value("g").row(item_id).transpose();
  out.tail(cfg_.pos_dim) = rho;
  return out;
}

Augmentor::PaddedPrefix Augmentor::pad_prefix(const std::vector<int>& prefix) const {
  if (prefix.empty()) throw DataError("attention context over an all-padding prefix");
  for (int id : prefix)
    if (id < 0 || id >= num_items_)
      throw DataError("prefix item id out of range: " + std::to_string(id));
  PaddedPrefix out;
  int keep = std::min<int>(cfg_.ctx_len, static_cast<int>(prefix.size()));
  out.pad = cfg_.ctx_len - keep;
  out.ids.assign(static_cast<size_t>(out.pad), num_items_);
  out.ids.insert(out.ids.end(), prefix.end() - keep, prefix.end());
  return out;
}

Var Augmentor::attention_context(Tape& t, const std::vector<int>& prefix, bool train, Rng* rng) {
  PaddedPrefix padded = pad_prefix(prefix);
  ForwardCtx c{&t, t.grad_enabled() ? ParamSource::trainable(ps_) : ParamSource::frozen(ps_),
               rng, train};
  Var g_rows = gather_rows(c.p("g"), padded.ids);              // L x item_dim
  Var e = concat_cols({g_rows, t.constant(pos_table_)});       // L x (item_dim + pos_dim)

  Mat mask = Mat::Zero(cfg_.ctx_len, cfg_.ctx_len);
  for (int x = 0; x < padded.pad; ++x) mask.col(x).setConstant(-1e9f);

  float inv_scale = 1.0f / std::sqrt(static_cast<float>(cfg_.d_model));
  std::vector<Var> head_ctx;
  head_ctx.reserve(static_cast<size_t>(cfg_.heads));
  for (int h = 0; h < cfg_.heads; ++h) {
    std::string p = "head" + std::to_string(h);
    Var q = add_rowvec(matmul(e, c.p(p + ".q.w")), c.p(p + ".q.b"));
    Var k = add_rowvec(matmul(e, c.p(p + ".k.w")), c.p(p + ".k.b"));
    Var scores = scale(matmul(q, k, false, true), inv_scale);  // row y, col x
    Var attn = softmax_rows(scores, mask);
    head_ctx.push_back(matmul(attn, g_rows));  // aggregates metadata embeddings
  }
  Var concat = c.drop(concat_cols(head_ctx), cfg_.dropout);
  Var hidden = relu(add_rowvec(matmul(concat, c.p("ffn.inner.w")), c.p("ffn.inner.b")));
  return add_rowvec(matmul(hidden, c.p("ffn.outer.w")), c.p("ffn.outer.b"));
}

Var Augmentor::user_embedding(Tape& t, const std::vector<int>& prefix, bool train, Rng* rng) {
  Var ctx = attention_context(t, prefix, train, rng);
  Var flat = reshape(ctx, 1, cfg_.ctx_len * cfg_.d_model);
  ParamSource src =
      t.grad_enabled() ? ParamSource::trainable(ps_) : ParamSource::frozen(ps_);
  return add_rowvec(matmul(flat, src.get(t, "agg.w")), src.get(t, "agg.b"));
}

Var Augmentor::candidate_scores(Tape& t, const Var& eu, const std::vector<int>& candidates) {
  if (candidates.empty()) throw DataError("candidate_scores: empty candidate list");
  for (int id : candidates)
    if (id < 0 || id >= num_items_)
      throw DataError("candidate id out of range: " + std::to_string(id));
  ParamSource src =
      t.grad_enabled() ? ParamSource::trainable(ps_) : ParamSource::frozen(ps_);
  Var cand = gather_rows(src.get(t, "g"), candidates);
  return matmul(cand, eu, false, true);  // k x 1
}

Var Augmentor::signal_logit(Tape& t, const Var& eu) {
  ParamSource src =
      t.grad_enabled() ? ParamSource::trainable(ps_) : ParamSource::frozen(ps_);
  return add_rowvec(matmul(eu, src.get(t, "signal.w")), src.get(t, "signal.b"));
}

std::vector<float> Augmentor::candidate_probs(const std::vector<int>& prefix,
                                              const std::vector<int>& candidates) const {
  Tape t(false);
  auto* self = const_cast<Augmentor*>(this);
  Var eu = self->user_embedding(t, prefix, false, nullptr);
  Var p = sigmoid(self->candidate_scores(t, eu, candidates));
  const Mat& v = p.value();
  return {v.data(), v.data() + v.size()};
}

std::vector<float> Augmentor::sampling_distribution(const std::vector<int>& prefix,
                                                    const std::vector<int>& candidates) const {
  Tape t(false);
  auto* self = const_cast<Augmentor*>(this);
  Var eu = self->user_embedding(t, prefix, false, nullptr);
  Var scores = self->candidate_scores(t, eu, candidates);
  const Mat& v = scores.value();
  return softmax_stable({v.data(), v.data() + v.size()});
}

float Augmentor::signal_predict(const std::vector<int>& prefix) const {
  Tape t(false);
  auto* self = const_cast<Augmentor*>(this);
  Var eu = self->user_embedding(t, prefix, false, nullptr);
  Var y = sigmoid(self->signal_logit(t, eu));
  return y.scalar();
}

Var Augmentor::pair_loss_terms(Tape& t, const Var& scores, int positive_index) const {
  Var p = clamp_v(sigmoid(scores), 1e-7f, 1.0f - 1e-7f);
  int k = static_cast<int>(p.rows());
  std::vector<int> negs;
  negs.reserve(static_cast<size_t>(k - 1));
  for (int i = 0; i < k; ++i)
    if (i != positive_index) negs.push_back(i);
  Var pos_term = log_v(gather_rows(p, {positive_index}));
  if (negs.empty()) return scale(sum_all(pos_term), -1.0f);
  Var neg_p = gather_rows(p, negs);
  Var neg_term = log_v(add_scalar(scale(neg_p, -1.0f), 1.0f));
  return scale(sum_all(pos_term) + sum_all(neg_term), -1.0f);
}

Var Augmentor::sampler_loss(Tape& t, const std::vector<SamplerBatch>& batches, bool train,
                            Rng* rng) {
  if (batches.empty()) throw DataError("sampler_loss: empty exploitation set");
  Var total = t.scalar_constant(0.0f);
  for (const auto& b : batches) {
    if (!b.prefix || !b.list) throw StateError("sampler_loss: unset batch fields");
    int pos_idx = -1;
    for (size_t i = 0; i < b.list->items.size(); ++i)
      if (b.list->items[i] == b.positive) {
        pos_idx = static_cast<int>(i);
        break;
      }
    if (pos_idx < 0)
      throw StateError("sampler_loss: positive item is not in the cached list");
    Var eu = user_embedding(t, *b.prefix, train, rng);
    Var scores = candidate_scores(t, eu, b.list->items);
    total = total + pair_loss_terms(t, scores, pos_idx);
  }
  return scale(total, 1.0f / static_cast<float>(batches.size()));
}

Var Augmentor::signal_loss(Tape& t, const std::vector<const std::vector<int>*>& prefixes,
                           const std::vector<int>& labels, bool train, Rng* rng) {
  if (prefixes.empty()) throw DataError("signal_loss: empty batch");
  if (prefixes.size() != labels.size()) throw ShapeError("signal_loss: label count mismatch");
  Mat label_mat(static_cast<Eigen::Index>(labels.size()), 1);
  std::vector<Var> logits;
  logits.reserve(prefixes.size());
  for (size_t i = 0; i < prefixes.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw DataError("signal_loss: labels must be 0 or 1");
    label_mat(static_cast<Eigen::Index>(i), 0) = static_cast<float>(labels[i]);
    Var eu = user_embedding(t, *prefixes[i], train, rng);
    logits.push_back(signal_logit(t, eu));
  }
  Var preds = sigmoid(concat_rows(logits));
  return binary_cross_entropy_mean(preds, label_mat);
}

AugmentorTrainReport Augmentor::train(const PartitionedRaw& partition, int epochs, float lr,
                                      uint64_t seed, std::ostream* log) {
  AugmentorTrainReport report;
  report.exploit_pairs = partition.exploit.size();
  report.explore_pairs = partition.explore.size();
  if (partition.total() == 0) throw DataError("train: empty partition");
  report.sampler_trained = !partition.exploit.empty();
  if (!report.sampler_trained && log)
    (*log) << json({{"warning", "empty exploitation set; sampler training skipped"}}).dump()
           << "\n";

  std::vector<const RawPair*> pairs;
  for (const auto& p : partition.exploit) pairs.push_back(&p);
  for (const auto& p : partition.explore) pairs.push_back(&p);

  AdamState adam;
  adam.lr = lr;
  Rng order(derive_seed(seed, "augmentor-order"));
  Rng drop(derive_seed(seed, "augmentor-dropout"));
  const size_t batch_size = 16;

  for (int epoch = 1; epoch <= epochs; ++epoch) {
    order.shuffle(pairs);
    double epoch_loss = 0.0;
    size_t steps = 0;
    for (size_t off = 0; off < pairs.size(); off += batch_size) {
      size_t end = std::min(pairs.size(), off + batch_size);
      std::vector<const std::vector<int>*> prefixes;
      std::vector<int> labels;
      std::vector<SamplerBatch> exploit_batches;
      for (size_t i = off; i < end; ++i) {
        const RawPair* p = pairs[i];
        prefixes.push_back(&p->prefix);
        labels.push_back(p->label);
        if (p->label == 1) exploit_batches.push_back({&p->prefix, &p->list, p->next_item});
      }
      Tape t(true);
      Var loss = signal_loss(t, prefixes, labels, true, &drop);
      if (!exploit_batches.empty())
        loss = loss + sampler_loss(t, exploit_batches, true, &drop);
      epoch_loss += loss.scalar();
      ++steps;
      t.backward(loss);
      adam_step(adam, ps_);
    }
    double mean_loss = epoch_loss / static_cast<double>(steps);
    report.epoch_losses.push_back(mean_loss);
    if (log) (*log) << json({{"epoch", epoch}, {"loss", mean_loss}}).dump() << "\n";
  }

  // AUC of the sampler: pooled positive-vs-negative candidate probabilities
  // over the exploitation set.
  if (report.sampler_trained) {
    std::vector<float> scores;
    std::vector<int> labels;
    for (const auto& p : partition.exploit) {
      auto probs = candidate_probs(p.prefix, p.list.items);
      for (size_t i = 0; i < probs.size(); ++i) {
        scores.push_back(probs[i]);
        labels.push_back(p.list.items[i] == p.next_item ? 1 : 0);
      }
    }
    report.auc_sampler = auc_score(scores, labels);
  }
  {
    std::vector<float> scores;
    std::vector<int> labels;
    for (const auto& p : partition.exploit) {
      scores.push_back(signal_predict(p.prefix));
      labels.push_back(1);
    }
    for (const auto& p : partition.explore) {
      scores.push_back(signal_predict(p.prefix));
      labels.push_back(0);
    }
    if (!partition.exploit.empty() && !partition.explore.empty())
      report.auc_signal = auc_score(scores, labels);
    else
      report.auc_signal = 0.5;
  }
  if (log)
    (*log) << json({{"auc1", report.auc_sampler}, {"auc2", report.auc_signal}}).dump() << "\n";
  return report;
}

void Augmentor::save(const std::string& path) const {
  CheckpointManifest man;
  man.architecture = "augmentor";
  man.rng_seed = seed_;
  man.config = cfg_.to_json();
  man.config["num_items"] = num_items_;
  save_checkpoint(path, ps_, man);
}

Augmentor Augmentor::load(const std::string& path) {
  ParameterStore loaded(0);
  CheckpointManifest man = load_checkpoint(path, loaded);
  if (man.architecture != "augmentor")
    throw DataError("checkpoint architecture '" + man.architecture +
                    "' is not an augmentor checkpoint");
  SamplerConfig cfg = SamplerConfig::from_json(man.config);
  int n = man.config.value("num_items", 0);
  Augmentor aug(cfg, n, man.rng_seed);
  for (const auto& name : aug.ps_.names()) {
    if (!loaded.has(name)) throw DataError("augmentor checkpoint missing parameter: " + name);
    const Mat& v = loaded.value(name);
    Mat& dst = aug.ps_.value(name);
    if (v.rows() != dst.rows() || v.cols() != dst.cols())
      throw DataError("augmentor checkpoint shape mismatch for " + name);
    dst = v;
  }
  return aug;
}

double auc_score(const std::vector<float>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc_score: size mismatch");
  size_t n = scores.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  long long pos = 0, neg = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j));
    for (size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) {
        rank_sum_pos += avg_rank;
        ++pos;
      } else {
        ++neg;
      }
    }
    i = j;
  }
  if (pos == 0 || neg == 0) throw DataError("auc_score: needs both classes");
  return (rank_sum_pos - 0.5 * static_cast<double>(pos) * (static_cast<double>(pos) + 1.0)) /
         (static_cast<double>(pos) * static_cast<double>(neg));
}

std::vector<float> softmax_stable(const std::vector<float>& scores) {
  if (scores.empty()) throw DataError("softmax over empty scores");
  float m = *std::max_element(scores.begin(), scores.end());
  std::vector<float> out(scores.size());
  double z = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    out[i] = std::exp(scores[i] - m);
    z += out[i];
  }
  for (auto& v : out) v = static_cast<float>(v / z);
  return out;
}

// ---- generation -------------------------------------------------------

GenPolicy gen_policy_from_string(const std::string& s) {
  if (s == "random") return GenPolicy::kRandom;
  if (s == "autoregressive") return GenPolicy::kAutoregressive;
  if (s == "few-shot-augmented") return GenPolicy::kFewShot;
  throw ConfigError({"unknown generation policy: " + s});
}

std::string gen_policy_name(GenPolicy p) {
  switch (p) {
    case GenPolicy::kRandom: return "random";
    case GenPolicy::kAutoregressive: return "autoregressive";
    case GenPolicy::kFewShot: return "few-shot-augmented";
  }
  throw StateError("unreachable policy tag");
}

namespace {

int sample_from_distribution(const std::vector<float>& probs, Rng& rng) {
  float u = rng.uniform_float();
  float acc = 0.0f;
  for (size_t i = 0; i < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size()) - 1;
}

int uniform_excluding(int n, const std::vector<uint8_t>& used, int used_count, Rng& rng) {
  if (used_count >= n) return -1;
  int idx = static_cast<int>(rng.uniform_uint(static_cast<uint32_t>(n - used_count)));
  for (int v = 0; v < n; ++v) {
    if (used[static_cast<size_t>(v)]) continue;
    if (idx == 0) return v;
    --idx;
  }
  return -1;
}

}  // namespace

GenerationResult generate_sequences(const GenerationPlan& plan, VictimOracle& oracle,
                                    const Augmentor* augmentor) {
  if (plan.count < 1 || plan.length < 1 || plan.k < 1)
    throw ConfigError({"generation plan: count, length and k must be >= 1"});
  if (plan.policy == GenPolicy::kFewShot && augmentor == nullptr)
    throw StateError("few-shot generation requires a trained augmentor");
  int n = oracle.num_items();

  GenerationResult result;
  result.sequences.reserve(static_cast<size_t>(plan.count));
  for (int i = 0; i < plan.count; ++i) {
    Rng rng(derive_seed(plan.seed, "generation-sequence", static_cast<uint64_t>(i)));
    SyntheticSequence seq;
    seq.policy = plan.policy;
    seq.items.reserve(static_cast<size_t>(plan.length));
    seq.exploit_steps.assign(static_cast<size_t>(plan.length), 0);
    std::vector<uint8_t> used(static_cast<size_t>(n), 0);
    int used_count = 0;

    try {
      std::string token;
      bool per_seq = oracle.mode() == ChargeMode::kPerSequence;
      if (per_seq) token = oracle.open_sequence();
      const std::string* token_ptr = per_seq ? &token : nullptr;

      if (plan.policy == GenPolicy::kRandom) {
        for (int j = 0; j < plan.length; ++j)
          seq.items.push_back(static_cast<int>(rng.uniform_uint(static_cast<uint32_t>(n))));
      } else {
        seq.items.push_back(static_cast<int>(rng.uniform_uint(static_cast<uint32_t>(n))));
        used[static_cast<size_t>(seq.items[0])] = 1;
        ++used_count;
      }

      for (int j = 0; j < plan.length; ++j) {
        std::vector<int> prefix(seq.items.begin(),
                                seq.items.begin() + std::min<long>(j + 1, (long)seq.items.size()));
        TopKList list = oracle.query_topk(prefix, plan.k, Ledger::kAttack, token_ptr);
        seq.step_lists.push_back(list);
        if (j + 1 >= plan.length) break;

        switch (plan.policy) {
          case GenPolicy::kRandom:
            break;  // items pre-drawn
          case GenPolicy::kAutoregressive: {
            int idx = static_cast<int>(
                rng.uniform_uint(static_cast<uint32_t>(list.items.size())));
            seq.items.push_back(list.items[static_cast<size_t>(idx)]);
            seq.exploit_steps[static_cast<size_t>(j + 1)] = 1;
            break;
          }
          case GenPolicy::kFewShot: {
            float y_hat = augmentor->signal_predict(prefix);
            bool exploit = augmentor->config().threshold_signal ? (y_hat >= 0.5f)
                                                                : rng.bernoulli(y_hat);
            int next = -1;
            if (!exploit) {
              next = uniform_excluding(n, used, used_count, rng);
              // pool exhausted within this sequence: fall back to the list
              if (next < 0) exploit = true;
            }
            if (exploit) {
              auto dist = augmentor->sampling_distribution(prefix, list.items);
              next = list.items[static_cast<size_t>(sample_from_distribution(dist, rng))];
              seq.exploit_steps[static_cast<size_t>(j + 1)] = 1;
            }
            seq.items.push_back(next);
            if (!used[static_cast<size_t>(next)]) {
              used[static_cast<size_t>(next)] = 1;
              ++used_count;
            }
            break;
          }
        }
      }
      if (per_seq) oracle.close_sequence(token);
    } catch (const BudgetExhausted& e) {
      result.budget_exhausted = true;
      result.error = std::string(e.what()) + " after " + std::to_string(result.completed) +
                     " of " + std::to_string(plan.count) + " sequences";
      break;  // partial sequence discarded
    }
    result.sequences.push_back(std::move(seq));
    ++result.completed;
  }
  return result;
}

void save_corpus(const std::string& path, const std::vector<SyntheticSequence>& sequences,
                 const GenerationPlan& plan, int num_items) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write corpus: " + path);
  json meta = {{"policy", gen_policy_name(plan.policy)},
               {"count", plan.count},
               {"length", plan.length},
               {"k", plan.k},
               {"seed", plan.seed},
               {"num_items", num_items}};
  out << json({{"meta", meta}}).dump() << "\n";
  for (const auto& s : sequences) {
    json lists = json::array();
    for (const auto& l : s.step_lists) lists.push_back(l.items);
    json line = {{"items", s.items},
                 {"exploit", std::vector<int>(s.exploit_steps.begin(), s.exploit_steps.end())},
                 {"lists", lists}};
    out << line.dump() << "\n";
  }
  if (!out) throw DataError("short write on corpus: " + path);
}

CorpusFile load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("corpus is empty: " + path);
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.contains("meta"))
    throw DataError("corpus missing meta header: " + path);
  const json& meta = header.at("meta");
  CorpusFile corpus;
  corpus.plan.policy = gen_policy_from_string(meta.at("policy").get<std::string>());
  corpus.plan.count = meta.at("count").get<int>();
  corpus.plan.length = meta.at("length").get<int>();
  corpus.plan.k = meta.at("k").get<int>();
  corpus.plan.seed = meta.at("seed").get<uint64_t>();
  corpus.num_items = meta.at("num_items").get<int>();
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      throw DataError(path + ":" + std::to_string(line_no) + ": malformed corpus line");
    SyntheticSequence s;
    s.policy = corpus.plan.policy;
    s.items = j.at("items").get<std::vector<int>>();
    auto exploit = j.at("exploit").get<std::vector<int>>();
    s.exploit_steps.assign(exploit.begin(), exploit.end());
    for (size_t idx = 0; idx < j.at("lists").size(); ++idx) {
      TopKList l;
      l.items = j.at("lists")[idx].get<std::vector<int>>();
      std::vector<int> prefix(s.items.begin(), s.items.begin() + static_cast<long>(idx) + 1);
      l.prefix_hash = hash_prefix(prefix, corpus.plan.k);
      s.step_lists.push_back(std::move(l));
    }
    corpus.sequences.push_back(std::move(s));
  }
  return corpus;
}

}  // namespace seqrex
