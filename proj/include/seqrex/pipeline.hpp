#pragma once

#include "seqrex/augmentor.hpp"
#include "seqrex/distiller.hpp"
#include "seqrex/evaluator.hpp"
#include "seqrex/models.hpp"
#include "seqrex/oracle.hpp"
#include "seqrex/wire.hpp"

#include <json.hpp>

#include <memory>
#include <string>
#include <vector>

namespace seqrex {

struct DatasetConfig {
  std::string path;
  DataFormat format = DataFormat::kTsv;
  std::string tag = "ml-1m";  // selects the hyperparameter profile
  int min_item_count = 0;     // 0 = format default
};

// One validated experiment description; everything a rerun needs.
struct RunConfig {
  std::string run_id = "run";
  uint64_t seed = 0;
  DatasetConfig dataset;
  ModelConfig victim;
  int victim_epochs = 100;
  ModelConfig surrogate;
  int distill_epochs = 200;
  SamplerConfig sampler;
  int sampler_epochs = 50;
  float lr = 1e-3f;
  GenerationPlan generation;  // seed field is ignored; stage seeds derive from `seed`
  LossWeights loss;
  EvalProtocol eval;          // seed field is ignored; derived per stage
  BudgetConfig budget;
  double few_shot_ratio = 0.1;
  int partition_window = 20;
  std::string oracle_bind = "127.0.0.1:0";
  int distill_eval_every = 0;

  nlohmann::json to_json() const;
};

// Parses and validates a config document, filling defaults from the dataset
// tag's hyperparameter profile. Collects every violation before throwing.
RunConfig validate_config(const nlohmann::json& doc);

// Reads a config file, applies environment overrides (SEQREX_ATTACK_BUDGET,
// SEQREX_SUPERVISION_BUDGET, SEQREX_ORACLE_BIND), then validates.
RunConfig load_config_file(const std::string& path);

enum class Stage {
  kPrepare,
  kTrainVictim,
  kServe,
  kTrainAugmentor,
  kGenerate,
  kDistill,
  kEvaluate,
  kReport,
};

Stage stage_from_string(const std::string& s);
std::string stage_name(Stage s);

// Batch order; serve is interactive-only and excluded.
std::vector<Stage> batch_stage_order();

struct RunPaths {
  std::string dir;
  std::string config;
  std::string prepared;
  std::string victim_ckpt;
  std::string victim_log;
  std::string augmentor_ckpt;
  std::string augmentor_log;
  std::string corpus;
  std::string surrogate_ckpt;
  std::string distill_log;
  std::string report_json;
  std::string report_csv;
  std::string report_md;

  static RunPaths at(const std::string& run_dir);
};

// Runs one stage against the artifacts already in the run directory.
void run_stage(const RunConfig& cfg, Stage stage, const std::string& run_dir);

// Runs the requested batch stages in canonical order after persisting the
// config snapshot. `serve` is rejected here.
void run_pipeline(const RunConfig& cfg, const std::vector<Stage>& stages,
                  const std::string& run_dir);

// Builds the oracle service over the victim checkpoint in the run directory.
// The caller owns the server lifetime (start/stop).
std::unique_ptr<OracleServer> make_oracle_server(const RunConfig& cfg,
                                                 const std::string& run_dir);

}  // namespace seqrex
