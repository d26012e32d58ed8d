// maflow: batch driver for the flow lab.
//
//   maflow run --preset cy_t2_n1 [--out runs] [--checkpoint-every 1]
//   maflow run --config exp.json
//   maflow resume --checkpoint runs/<id>/checkpoint_final.bin [--t-end 10]
//   maflow oracle --config exp.json
//   maflow check --diagnostics runs/<id>/diagnostics.csv

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "maflow/checkpoint.hpp"
#include "maflow/errors.hpp"
#include "maflow/experiment.hpp"

namespace fs = std::filesystem;
using namespace maflow;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError({"cannot read " + p.string()});
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_checks(const std::vector<CheckReport>& checks) {
  for (const auto& c : checks) {
    std::printf("  %-24s %-13s margin=%.3e", c.name.c_str(), to_string(c.verdict).c_str(),
                c.margin);
    if (!c.detail.empty()) std::printf("  (%s)", c.detail.c_str());
    std::printf("\n");
  }
}

int report_and_exit(const RunReport& r) {
  std::printf("run %s\n", r.run_id.c_str());
  if (!r.dir.empty()) std::printf("  dir         %s\n", r.dir.c_str());
  if (r.termination) {
    std::printf("  termination %s at t=%.6g after %ld steps (%ld rejected), %.2fs\n",
                to_string(*r.termination).c_str(), r.final_t, r.steps, r.rejected,
                r.wall_seconds);
  }
  if (!r.message.empty()) std::printf("  message     %s\n", r.message.c_str());
  if (r.oracle_gap) std::printf("  oracle gap  %.3e\n", *r.oracle_gap);
  if (r.uniqueness_gap) std::printf("  uniq gap    %.3e\n", *r.uniqueness_gap);
  if (r.class_T) {
    std::printf("  T           %.17g\n", *r.class_T);
    std::printf("  T bisection %.17g\n", *r.class_T_bisect);
  }
  print_checks(r.checks);
  std::printf("exit %d\n", r.exit_code);
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parabolic complex Monge-Ampere flows on flat tori"};
  app.require_subcommand(1);

  std::string config_path, preset_name, out_dir, checkpoint_path, csv_path;
  double checkpoint_every = -1.0, t_end = -1.0;

  auto* run = app.add_subcommand("run", "run an experiment");
  auto* cfg_opt = run->add_option("--config", config_path, "JSON configuration")->check(CLI::ExistingFile);
  auto* pre_opt = run->add_option("--preset", preset_name, "shipped preset");
  cfg_opt->excludes(pre_opt);
  run->add_option("--out", out_dir, "output root");
  run->add_option("--checkpoint-every", checkpoint_every, "checkpoint interval in time units");

  auto* resume = app.add_subcommand("resume", "continue from a checkpoint");
  resume->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required()->check(CLI::ExistingFile);
  resume->add_option("--t-end", t_end, "new end time");
  resume->add_option("--out", out_dir, "output root (default: next to the original run)");

  auto* oracle = app.add_subcommand("oracle", "stationary solve only");
  oracle->add_option("--config", config_path, "JSON configuration")->required()->check(CLI::ExistingFile);

  auto* check = app.add_subcommand("check", "re-run monitors on a stored series");
  check->add_option("--diagnostics", csv_path, "diagnostics CSV")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      ExperimentConfig cfg;
      if (!config_path.empty()) {
        cfg = parse_config(slurp(config_path));
      } else if (!preset_name.empty()) {
        cfg = parse_config(nlohmann::json{{"preset", preset_name}});
      } else {
        std::cerr << "run needs --config or --preset\n";
        return kExitConfigError;
      }
      if (!out_dir.empty()) cfg.out_dir = out_dir;
      if (checkpoint_every >= 0.0) cfg.checkpoint_every = checkpoint_every;
      return report_and_exit(run_experiment(cfg));
    }
    if (*resume) {
      const fs::path ck = fs::absolute(checkpoint_path);
      const fs::path run_dir = ck.parent_path();
      ExperimentConfig cfg = parse_config(slurp(run_dir / "config.json"));
      cfg.out_dir = out_dir.empty() ? run_dir.parent_path().string() : out_dir;
      if (t_end > 0.0) cfg.stepper.t_end = t_end;
      ExperimentOptions opts;
      opts.resume_from = ck;
      return report_and_exit(run_experiment(cfg, opts));
    }
    if (*oracle) {
      const ExperimentConfig cfg = parse_config(slurp(config_path));
      std::cout << run_oracle(cfg).dump(2) << "\n";
      return kExitPass;
    }
    if (*check) {
      const fs::path csv = fs::absolute(csv_path);
      const ExperimentConfig cfg = parse_config(slurp(csv.parent_path() / "config.json"));
      const auto checks = series_checks(cfg, read_diagnostics_csv(csv));
      nlohmann::json out = nlohmann::json::array();
      for (const auto& c : checks) out.push_back(to_json(c));
      std::cout << out.dump(2) << "\n";
      for (const auto& c : checks)
        if (c.verdict == Verdict::Fail) return kExitCheckFailure;
      return kExitPass;
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfigError;
  } catch (const CheckpointError& e) {
    std::cerr << "checkpoint: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const NonConvergence& e) {
    std::cerr << "solver: " << e.what() << "\n";
    return kExitSolverFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolverFailure;
  }
  return kExitPass;
}
