#include "seqrex/pipeline.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace seqrex {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Profile {
  float dropout;
  float mask_prob;
  float lambda1;
  float lambda2;
};

Profile profile_for_tag(const std::string& tag) {
  if (tag == "steam") return {0.2f, 0.2f, 0.5f, 1.0f};
  if (tag == "beauty") return {0.5f, 0.6f, 0.5f, 0.5f};
  return {0.1f, 0.2f, 0.75f, 1.5f};  // ml-1m profile is the fallback
}

class ConfigReader {
 public:
  ConfigReader(const json& doc, std::string path, std::vector<std::string>& issues)
      : doc_(doc), path_(std::move(path)), issues_(issues) {
    if (!doc_.is_object()) {
      issues_.push_back(path_.empty() ? "config must be a JSON object"
                                      : path_ + ": must be a JSON object");
    }
  }

  ~ConfigReader() {
    if (!doc_.is_object()) return;
    for (const auto& [key, value] : doc_.items()) {
      (void)value;
      if (!seen_.count(key)) issues_.push_back(field(key) + ": unknown field");
    }
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!doc_.is_object() || !doc_.contains(key)) return fallback;
    try {
      return doc_.at(key).get<T>();
    } catch (const json::exception&) {
      issues_.push_back(field(key) + ": wrong type");
      return fallback;
    }
  }

  json sub(const std::string& key) {
    seen_.insert(key);
    if (!doc_.is_object() || !doc_.contains(key)) return json::object();
    if (!doc_.at(key).is_object()) {
      issues_.push_back(field(key) + ": must be an object");
      return json::object();
    }
    return doc_.at(key);
  }

  bool has(const std::string& key) const { return doc_.is_object() && doc_.contains(key); }

  std::string field(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& doc_;
  std::string path_;
  std::vector<std::string>& issues_;
  std::set<std::string> seen_;
};

ModelConfig read_model_config(const json& doc, const std::string& path, const Profile& profile,
                              std::vector<std::string>& issues, const std::string& default_arch,
                              int* epochs_out, int default_epochs) {
  ConfigReader r(doc, path, issues);
  ModelConfig cfg;
  try {
    cfg.arch = arch_from_string(r.get<std::string>("arch", default_arch));
  } catch (const ConfigError& e) {
    issues.push_back(path + ".arch: " + e.issues().front());
  }
  cfg.embed_dim = r.get<int>("embed_dim", 64);
  cfg.trm_layers = r.get<int>("trm_layers", 2);
  cfg.heads = r.get<int>("heads", 2);
  cfg.gru_layers = r.get<int>("gru_layers", 1);
  cfg.dropout = r.get<float>("dropout", profile.dropout);
  cfg.mask_prob = r.get<float>("mask_prob", profile.mask_prob);
  cfg.max_len = r.get<int>("max_len", 50);
  cfg.num_items = 0;  // discovered from the prepared dataset
  *epochs_out = r.get<int>("epochs", default_epochs);
  if (*epochs_out < 0) issues.push_back(path + ".epochs: must be >= 0");
  ModelConfig probe = cfg;
  probe.num_items = 1;
  for (const auto& issue : probe.validate()) issues.push_back(path + ": " + issue);
  return cfg;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << content;
  if (!out) throw DataError("short write on " + path);
}

json read_json_file(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw StateError("missing artifact " + path + "; run " + what + " first");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw DataError("corrupt artifact (not JSON): " + path);
  return j;
}

void require_artifact(const std::string& path, const std::string& producer) {
  if (!fs::exists(path))
    throw StateError("missing artifact " + path + "; run " + producer + " first");
}

uint64_t stage_seed(const RunConfig& cfg, const std::string& stage) {
  return derive_seed(cfg.seed, "stage:" + stage);
}

}  // namespace

json RunConfig::to_json() const {
  json victim_j = victim.to_json();
  victim_j.erase("num_items");
  victim_j["epochs"] = victim_epochs;
  json surrogate_j = surrogate.to_json();
  surrogate_j.erase("num_items");
  surrogate_j["epochs"] = distill_epochs;
  json sampler_j = sampler.to_json();
  sampler_j["epochs"] = sampler_epochs;
  return {
      {"run_id", run_id},
      {"seed", seed},
      {"dataset",
       {{"path", dataset.path},
        {"format", data_format_name(dataset.format)},
        {"tag", dataset.tag},
        {"min_item_count", dataset.min_item_count}}},
      {"victim", victim_j},
      {"surrogate", surrogate_j},
      {"sampler", sampler_j},
      {"lr", lr},
      {"generation",
       {{"policy", gen_policy_name(generation.policy)},
        {"count", generation.count},
        {"length", generation.length},
        {"k", generation.k}}},
      {"loss", loss.to_json()},
      {"eval", {{"ks", eval.ks}, {"negatives", eval.num_negatives}}},
      {"budget",
       {{"attack_limit", budget.attack_limit},
        {"supervision_limit", budget.supervision_limit},
        {"charging", charge_mode_name(budget.mode)}}},
      {"few_shot_ratio", few_shot_ratio},
      {"partition_window", partition_window},
      {"oracle_bind", oracle_bind},
      {"distill_eval_every", distill_eval_every},
  };
}

RunConfig validate_config(const json& doc) {
  std::vector<std::string> issues;
  RunConfig cfg;
  {
    ConfigReader top(doc, "", issues);
    cfg.run_id = top.get<std::string>("run_id", "run");
    cfg.seed = top.get<uint64_t>("seed", 0);

    {
      json d = top.sub("dataset");
      ConfigReader r(d, "dataset", issues);
      cfg.dataset.path = r.get<std::string>("path", "");
      std::string fmt = r.get<std::string>("format", "tsv");
      try {
        cfg.dataset.format = data_format_from_string(fmt);
      } catch (const DataError& e) {
        issues.push_back(std::string("dataset.format: ") + e.what());
      }
      cfg.dataset.tag = r.get<std::string>("tag", "ml-1m");
      cfg.dataset.min_item_count = r.get<int>("min_item_count", 0);
      if (cfg.dataset.min_item_count < 0)
        issues.push_back("dataset.min_item_count: must be >= 0");
    }
    Profile profile = profile_for_tag(cfg.dataset.tag);

    {
      json v = top.sub("victim");
      cfg.victim =
          read_model_config(v, "victim", profile, issues, "sasrec", &cfg.victim_epochs, 100);
    }
    {
      json s = top.sub("surrogate");
      cfg.surrogate = read_model_config(s, "surrogate", profile, issues,
                                        arch_name(cfg.victim.arch), &cfg.distill_epochs, 200);
    }
    {
      json s = top.sub("sampler");
      ConfigReader r(s, "sampler", issues);
      SamplerConfig sc;
      sc.ctx_len = r.get<int>("ctx_len", 10);
      sc.heads = r.get<int>("heads", 2);
      sc.head_dim = r.get<int>("head_dim", 0);
      sc.d_model = r.get<int>("d_model", 16);
      sc.item_dim = r.get<int>("item_dim", 16);
      sc.pos_dim = r.get<int>("pos_dim", 8);
      sc.ffn_hidden = r.get<int>("ffn_hidden", 0);
      sc.dropout = r.get<float>("dropout", 0.1f);
      sc.rho_max = r.get<float>("rho_max", 1e4f);
      try {
        sc.pos_mode = pos_mode_from_string(r.get<std::string>("pos_mode", "scaled"));
      } catch (const ConfigError& e) {
        issues.push_back("sampler.pos_mode: " + e.issues().front());
      }
      sc.threshold_signal = r.get<bool>("threshold_signal", false);
      cfg.sampler_epochs = r.get<int>("epochs", 50);
      if (cfg.sampler_epochs < 0) issues.push_back("sampler.epochs: must be >= 0");
      for (const auto& issue : sc.validate()) issues.push_back("sampler: " + issue);
      cfg.sampler = sc;
    }
    cfg.lr = top.get<float>("lr", 1e-3f);
    if (!(cfg.lr > 0.0f)) issues.push_back("lr: must be > 0");
    {
      json g = top.sub("generation");
      ConfigReader r(g, "generation", issues);
      try {
        cfg.generation.policy =
            gen_policy_from_string(r.get<std::string>("policy", "few-shot-augmented"));
      } catch (const ConfigError& e) {
        issues.push_back("generation.policy: " + e.issues().front());
      }
      cfg.generation.count = r.get<int>("count", 5000);
      cfg.generation.length = r.get<int>("length", 20);
      cfg.generation.k = r.get<int>("k", 100);
      if (cfg.generation.count < 1) issues.push_back("generation.count: must be >= 1");
      if (cfg.generation.length < 1) issues.push_back("generation.length: must be >= 1");
      if (cfg.generation.k < 1) issues.push_back("generation.k: must be >= 1");
    }
    {
      json l = top.sub("loss");
      ConfigReader r(l, "loss", issues);
      LossWeights w;
      w.margin_adjacent = r.get<float>("lambda1", profile.lambda1);
      w.margin_negative = r.get<float>("lambda2", profile.lambda2);
      w.margin_under = r.get<float>("lambda3", 0.5f);
      w.margin_over = r.get<float>("lambda4", 0.5f);
      w.weight_under = r.get<float>("lambda_low", 1e-5f);
      w.weight_over = r.get<float>("lambda_high", 1e-6f);
      for (const auto& issue : w.validate()) issues.push_back("loss: " + issue);
      cfg.loss = w;
    }
    {
      json e = top.sub("eval");
      ConfigReader r(e, "eval", issues);
      cfg.eval.ks = r.get<std::vector<int>>("ks", {1, 10});
      cfg.eval.num_negatives = r.get<int>("negatives", 100);
      if (cfg.eval.ks.empty()) issues.push_back("eval.ks: must not be empty");
      for (int k : cfg.eval.ks)
        if (k < 1) issues.push_back("eval.ks: entries must be >= 1");
      if (cfg.eval.num_negatives < 1) issues.push_back("eval.negatives: must be >= 1");
    }
    {
      json b = top.sub("budget");
      ConfigReader r(b, "budget", issues);
      cfg.budget.attack_limit = r.get<long long>("attack_limit", 5000);
      cfg.budget.supervision_limit = r.get<long long>("supervision_limit", 1'000'000'000);
      try {
        cfg.budget.mode = charge_mode_from_string(r.get<std::string>("charging", "per-sequence"));
      } catch (const ConfigError& e2) {
        issues.push_back("budget.charging: " + e2.issues().front());
      }
      if (cfg.budget.attack_limit < 0) issues.push_back("budget.attack_limit: must be >= 0");
      if (cfg.budget.supervision_limit < 0)
        issues.push_back("budget.supervision_limit: must be >= 0");
    }
    cfg.few_shot_ratio = top.get<double>("few_shot_ratio", 0.1);
    if (!(cfg.few_shot_ratio > 0.0) || cfg.few_shot_ratio > 1.0)
      issues.push_back("few_shot_ratio: must be in (0, 1]");
    cfg.partition_window = top.get<int>("partition_window", 20);
    if (cfg.partition_window < 1) issues.push_back("partition_window: must be >= 1");
    cfg.oracle_bind = top.get<std::string>("oracle_bind", "127.0.0.1:0");
    cfg.distill_eval_every = top.get<int>("distill_eval_every", 0);
    if (cfg.distill_eval_every < 0) issues.push_back("distill_eval_every: must be >= 0");

    // plan must fit the attack budget under the configured charging mode
    long long required = cfg.budget.mode == ChargeMode::kPerSequence
                             ? static_cast<long long>(cfg.generation.count)
                             : static_cast<long long>(cfg.generation.count) *
                                   static_cast<long long>(cfg.generation.length);
    if (required > cfg.budget.attack_limit)
      issues.push_back("generation: plan requires " + std::to_string(required) +
                       " attack-budget units but budget.attack_limit is " +
                       std::to_string(cfg.budget.attack_limit));
  }
  if (!issues.empty()) throw ConfigError(issues);
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  json doc;
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    doc = json::object();  // empty file falls back to the defaults profile
  } else {
    doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) throw ConfigError({"config file is not valid JSON: " + path});
  }
  if (const char* v = std::getenv("SEQREX_ATTACK_BUDGET")) {
    doc["budget"]["attack_limit"] = std::stoll(v);
  }
  if (const char* v = std::getenv("SEQREX_SUPERVISION_BUDGET")) {
    doc["budget"]["supervision_limit"] = std::stoll(v);
  }
  if (const char* v = std::getenv("SEQREX_ORACLE_BIND")) {
    doc["oracle_bind"] = std::string(v);
  }
  return validate_config(doc);
}

Stage stage_from_string(const std::string& s) {
  if (s == "prepare") return Stage::kPrepare;
  if (s == "train-victim") return Stage::kTrainVictim;
  if (s == "serve") return Stage::kServe;
  if (s == "train-augmentor") return Stage::kTrainAugmentor;
  if (s == "generate") return Stage::kGenerate;
  if (s == "distill") return Stage::kDistill;
  if (s == "evaluate") return Stage::kEvaluate;
  if (s == "report") return Stage::kReport;
  throw ConfigError({"unknown stage: " + s});
}

std::string stage_name(Stage s) {
  switch (s) {
    case Stage::kPrepare: return "prepare";
    case Stage::kTrainVictim: return "train-victim";
    case Stage::kServe: return "serve";
    case Stage::kTrainAugmentor: return "train-augmentor";
    case Stage::kGenerate: return "generate";
    case Stage::kDistill: return "distill";
    case Stage::kEvaluate: return "evaluate";
    case Stage::kReport: return "report";
  }
  throw StateError("unreachable stage tag");
}

std::vector<Stage> batch_stage_order() {
  return {Stage::kPrepare,  Stage::kTrainVictim, Stage::kTrainAugmentor, Stage::kGenerate,
          Stage::kDistill,  Stage::kEvaluate,    Stage::kReport};
}

RunPaths RunPaths::at(const std::string& run_dir) {
  RunPaths p;
  p.dir = run_dir;
  auto join = [&](const char* name) { return (fs::path(run_dir) / name).string(); };
  p.config = join("config.json");
  p.prepared = join("prepared.json");
  p.victim_ckpt = join("victim.ckpt");
  p.victim_log = join("victim_log.jsonl");
  p.augmentor_ckpt = join("augmentor.ckpt");
  p.augmentor_log = join("augmentor_log.jsonl");
  p.corpus = join("corpus.jsonl");
  p.surrogate_ckpt = join("surrogate.ckpt");
  p.distill_log = join("distill_log.jsonl");
  p.report_json = join("report.json");
  p.report_csv = join("report.csv");
  p.report_md = join("report.md");
  return p;
}

namespace {

struct PreparedData {
  DatasetStats stats;
  SplitDataset split;
  FewShotSubset subset;
};

void stage_prepare(const RunConfig& cfg, const RunPaths& paths) {
  if (cfg.dataset.path.empty())
    throw ConfigError({"dataset.path: required for the prepare stage"});
  LoadOptions opts;
  opts.min_item_count = cfg.dataset.min_item_count;
  InteractionDataset ds = load_dataset(cfg.dataset.path, cfg.dataset.format, opts);
  DatasetStats stats = ds.stats();
  SplitDataset split = split_leave_last_two(ds);
  FewShotSubset subset =
      sample_few_shot(split, cfg.few_shot_ratio, stage_seed(cfg, "prepare"));

  json j;
  j["stats"] = {{"num_users", stats.num_users},
                {"num_items", stats.num_items},
                {"interactions", stats.interactions},
                {"avg_len", stats.avg_len},
                {"sparsity", stats.sparsity}};
  j["num_items"] = split.num_items;
  j["train"] = split.train;
  j["val"] = split.val;
  j["test"] = split.test;
  j["few_shot"] = {{"ratio", subset.ratio}, {"users", subset.users}};
  write_text(paths.prepared, j.dump() + "\n");
}

PreparedData load_prepared(const RunPaths& paths) {
  json j = read_json_file(paths.prepared, "prepare");
  PreparedData out;
  out.split.num_items = j.at("num_items").get<int>();
  out.split.train = j.at("train").get<std::vector<std::vector<int>>>();
  out.split.val = j.at("val").get<std::vector<int>>();
  out.split.test = j.at("test").get<std::vector<int>>();
  out.subset.ratio = j.at("few_shot").at("ratio").get<double>();
  out.subset.users = j.at("few_shot").at("users").get<std::vector<int>>();
  for (int u : out.subset.users)
    out.subset.sequences.push_back(out.split.train.at(static_cast<size_t>(u)));
  out.stats.num_users = j.at("stats").at("num_users").get<int>();
  out.stats.num_items = j.at("stats").at("num_items").get<int>();
  out.stats.interactions = j.at("stats").at("interactions").get<long long>();
  out.stats.avg_len = j.at("stats").at("avg_len").get<double>();
  out.stats.sparsity = j.at("stats").at("sparsity").get<double>();
  return out;
}

void stage_train_victim(const RunConfig& cfg, const RunPaths& paths) {
  PreparedData prep = load_prepared(paths);
  ModelConfig mc = cfg.victim;
  mc.num_items = prep.split.num_items;
  SequentialRecommender victim(mc, stage_seed(cfg, "train-victim-init"));
  VictimTrainOptions opts;
  opts.epochs = cfg.victim_epochs;
  opts.lr = cfg.lr;
  opts.val_protocol = cfg.eval;
  opts.val_protocol.seed = stage_seed(cfg, "train-victim-val");
  std::ofstream log(paths.victim_log, std::ios::trunc);
  victim.train_victim(prep.split, opts, stage_seed(cfg, "train-victim"), &log);
  victim.save(paths.victim_ckpt);
}

void stage_train_augmentor(const RunConfig& cfg, const RunPaths& paths) {
  PreparedData prep = load_prepared(paths);
  require_artifact(paths.victim_ckpt, "train-victim");
  auto victim =
      std::make_shared<SequentialRecommender>(SequentialRecommender::load(paths.victim_ckpt));
  BudgetConfig supervision_budget = cfg.budget;
  auto oracle = VictimOracle::over_model(victim, supervision_budget);
  TopKQueryFn query = [&oracle](const std::vector<int>& prefix, int k) {
    return oracle->query_topk(prefix, k, Ledger::kSupervision);
  };
  PartitionedRaw partition =
      partition_exploit_explore(prep.subset, query, cfg.generation.k, cfg.partition_window);

  Augmentor augmentor(cfg.sampler, prep.split.num_items, stage_seed(cfg, "train-augmentor-init"));
  std::ofstream log(paths.augmentor_log, std::ios::trunc);
  log << json({{"exploit_pairs", partition.exploit.size()},
               {"explore_pairs", partition.explore.size()},
               {"supervision_queries", oracle->budget().supervision_used}})
             .dump()
      << "\n";
  augmentor.train(partition, cfg.sampler_epochs, cfg.lr, stage_seed(cfg, "train-augmentor"),
                  &log);
  augmentor.save(paths.augmentor_ckpt);
}

void stage_generate(const RunConfig& cfg, const RunPaths& paths) {
  PreparedData prep = load_prepared(paths);
  require_artifact(paths.victim_ckpt, "train-victim");
  auto victim =
      std::make_shared<SequentialRecommender>(SequentialRecommender::load(paths.victim_ckpt));
  auto oracle = VictimOracle::over_model(victim, cfg.budget);

  std::optional<Augmentor> augmentor;
  if (cfg.generation.policy == GenPolicy::kFewShot) {
    require_artifact(paths.augmentor_ckpt, "train-augmentor");
    augmentor = Augmentor::load(paths.augmentor_ckpt);
  }
  GenerationPlan plan = cfg.generation;
  plan.seed = stage_seed(cfg, "generate");
  GenerationResult result =
      generate_sequences(plan, *oracle, augmentor ? &*augmentor : nullptr);
  if (result.budget_exhausted)
    throw BudgetExhausted("attack", oracle->budget().attack_limit,
                          oracle->budget().attack_used);
  save_corpus(paths.corpus, result.sequences, plan, prep.split.num_items);
}

void stage_distill(const RunConfig& cfg, const RunPaths& paths) {
  require_artifact(paths.corpus, "generate");
  CorpusFile corpus = load_corpus(paths.corpus);
  ModelConfig mc = cfg.surrogate;
  mc.num_items = corpus.num_items;
  SequentialRecommender surrogate(mc, stage_seed(cfg, "distill-init"));
  DistillOptions opts;
  opts.epochs = cfg.distill_epochs;
  opts.lr = cfg.lr;
  opts.eval_every = cfg.distill_eval_every;
  opts.agreement_k = std::min(10, corpus.plan.k);
  std::ofstream log(paths.distill_log, std::ios::trunc);
  distill_train(surrogate, corpus.sequences, cfg.loss, opts, stage_seed(cfg, "distill"), &log);
  surrogate.save(paths.surrogate_ckpt);
}

void stage_evaluate(const RunConfig& cfg, const RunPaths& paths) {
  PreparedData prep = load_prepared(paths);
  require_artifact(paths.victim_ckpt, "train-victim");
  require_artifact(paths.surrogate_ckpt, "distill");
  SequentialRecommender victim = SequentialRecommender::load(paths.victim_ckpt);
  SequentialRecommender surrogate = SequentialRecommender::load(paths.surrogate_ckpt);
  EvalProtocol protocol = cfg.eval;
  protocol.seed = stage_seed(cfg, "evaluate");
  MetricReport report =
      compare_models(victim.scorer(), surrogate.scorer(), prep.split, protocol);
  report.metadata = {{"run_id", cfg.run_id},
                     {"policy", gen_policy_name(cfg.generation.policy)},
                     {"ratio", cfg.few_shot_ratio},
                     {"budget", cfg.budget.attack_limit},
                     {"k", cfg.generation.k},
                     {"seed", cfg.seed},
                     {"victim_arch", arch_name(victim.arch())},
                     {"surrogate_arch", arch_name(surrogate.arch())},
                     {"lambda_low", cfg.loss.weight_under},
                     {"lambda_high", cfg.loss.weight_over}};
  emit_report({report}, paths.report_json, ReportFormat::kJson);
}

void stage_report(const RunConfig& cfg, const RunPaths& paths) {
  (void)cfg;
  require_artifact(paths.report_json, "evaluate");
  auto reports = load_reports_json(paths.report_json);
  emit_report(reports, paths.report_csv, ReportFormat::kCsv);
  emit_report(reports, paths.report_md, ReportFormat::kMdTable);
}

}  // namespace

void run_stage(const RunConfig& cfg, Stage stage, const std::string& run_dir) {
  RunPaths paths = RunPaths::at(run_dir);
  fs::create_directories(run_dir);
  switch (stage) {
    case Stage::kPrepare: stage_prepare(cfg, paths); return;
    case Stage::kTrainVictim: stage_train_victim(cfg, paths); return;
    case Stage::kTrainAugmentor: stage_train_augmentor(cfg, paths); return;
    case Stage::kGenerate: stage_generate(cfg, paths); return;
    case Stage::kDistill: stage_distill(cfg, paths); return;
    case Stage::kEvaluate: stage_evaluate(cfg, paths); return;
    case Stage::kReport: stage_report(cfg, paths); return;
    case Stage::kServe:
      throw StateError("serve runs interactively until interrupted; use the serve subcommand");
  }
}

void run_pipeline(const RunConfig& cfg, const std::vector<Stage>& stages,
                  const std::string& run_dir) {
  for (Stage s : stages)
    if (s == Stage::kServe)
      throw StateError("serve is excluded from batch mode; use the serve subcommand");
  fs::create_directories(run_dir);
  RunPaths paths = RunPaths::at(run_dir);
  write_text(paths.config, cfg.to_json().dump(2) + "\n");
  std::set<Stage> requested(stages.begin(), stages.end());
  for (Stage s : batch_stage_order())
    if (requested.count(s)) run_stage(cfg, s, run_dir);
}

std::unique_ptr<OracleServer> make_oracle_server(const RunConfig& cfg,
                                                 const std::string& run_dir) {
  RunPaths paths = RunPaths::at(run_dir);
  require_artifact(paths.victim_ckpt, "train-victim");
  auto victim =
      std::make_shared<SequentialRecommender>(SequentialRecommender::load(paths.victim_ckpt));
  auto oracle = VictimOracle::over_model(victim, cfg.budget);
  auto server = std::make_unique<OracleServer>(oracle);
  auto [host, port] = parse_bind_address(cfg.oracle_bind);
  server->start(host, port);
  return server;
}

}  // namespace seqrex
