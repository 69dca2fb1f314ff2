// Command-line driver for the extraction pipeline. Every failure exits
// nonzero with a machine-readable JSON error on stderr.

#include "seqrex/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <csignal>
#include <iostream>
#include <thread>

namespace {

volatile std::sig_atomic_t g_interrupted = 0;

void handle_signal(int) { g_interrupted = 1; }

struct CommonArgs {
  std::string config_path;
  std::string run_dir = "runs/default";
  int64_t seed_override = -1;
};

seqrex::RunConfig load_config(const CommonArgs& args) {
  seqrex::RunConfig cfg = seqrex::load_config_file(args.config_path);
  if (args.seed_override >= 0) cfg.seed = static_cast<uint64_t>(args.seed_override);
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Run configuration JSON file")->required();
  cmd->add_option("--run-dir", args.run_dir, "Directory for run artifacts");
  cmd->add_option("--seed", args.seed_override, "Override the config's global seed");
}

int error_out(const std::string& kind, const std::string& detail) {
  nlohmann::json err = {{"error", kind}, {"detail", detail}};
  std::cerr << err.dump() << std::endl;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot extraction of sequential recommenders"};
  app.require_subcommand(1);

  std::map<std::string, CommonArgs> args;
  std::string stages_csv = "";
  std::string bind_override;

  for (const char* name : {"prepare", "train-victim", "train-augmentor", "generate", "distill",
                           "evaluate", "report", "all", "serve", "validate"}) {
    CLI::App* cmd = app.add_subcommand(name, "");
    add_common(cmd, args[name]);
    if (std::string(name) == "all")
      cmd->add_option("--stages", stages_csv,
                      "Comma-separated subset of the batch stages to run");
    if (std::string(name) == "serve")
      cmd->add_option("--bind", bind_override, "host:port to listen on (overrides config)");
  }

  CLI11_PARSE(app, argc, argv);
  std::string sub = app.get_subcommands().front()->get_name();

  try {
    CommonArgs& a = args[sub];
    seqrex::RunConfig cfg = load_config(a);

    if (sub == "validate") {
      std::cout << cfg.to_json().dump(2) << std::endl;
      return 0;
    }
    if (sub == "serve") {
      if (!bind_override.empty()) cfg.oracle_bind = bind_override;
      auto server = seqrex::make_oracle_server(cfg, a.run_dir);
      std::signal(SIGINT, handle_signal);
      std::signal(SIGTERM, handle_signal);
      std::cout << "oracle listening on port " << server->port() << std::endl;
      while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server->stop();
      return 0;
    }
    if (sub == "all") {
      std::vector<seqrex::Stage> stages;
      if (stages_csv.empty()) {
        stages = seqrex::batch_stage_order();
      } else {
        size_t pos = 0;
        while (pos <= stages_csv.size()) {
          size_t next = stages_csv.find(',', pos);
          std::string tok = stages_csv.substr(
              pos, next == std::string::npos ? std::string::npos : next - pos);
          if (!tok.empty()) stages.push_back(seqrex::stage_from_string(tok));
          if (next == std::string::npos) break;
          pos = next + 1;
        }
      }
      seqrex::run_pipeline(cfg, stages, a.run_dir);
      return 0;
    }
    // single-stage subcommands share names with the stages
    seqrex::run_pipeline(cfg, {seqrex::stage_from_string(sub)}, a.run_dir);
    return 0;
  } catch (const seqrex::ConfigError& e) {
    nlohmann::json issues = e.issues();
    std::cerr << nlohmann::json({{"error", "config"}, {"issues", issues}}).dump() << std::endl;
    return 2;
  } catch (const seqrex::BudgetExhausted& e) {
    return error_out("budget_exhausted", e.what());
  } catch (const seqrex::StateError& e) {
    return error_out("state", e.what());
  } catch (const seqrex::DataError& e) {
    return error_out("data", e.what());
  } catch (const std::exception& e) {
    return error_out("internal", e.what());
  }
}
