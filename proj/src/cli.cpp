#include "cps/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/ostream.h>

#include "cps/adversary.hpp"
#include "cps/error.hpp"
#include "cps/io.hpp"
#include "cps/metrics.hpp"
#include "cps/presets.hpp"
#include "cps/simulation.hpp"

namespace cps {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOptions {
  std::string config_path;
  std::string preset_name;
  std::optional<std::uint64_t> seed;
  std::optional<Round> horizon;
  std::optional<Round> big_k;
  std::string record;
  std::string out_dir = ".";
  bool override_assumptions = false;
};

void add_common(CLI::App& cmd, CommonOptions& opt) {
  cmd.add_option("--config", opt.config_path, "Scenario JSON (or a run manifest)");
  cmd.add_option("--preset", opt.preset_name, "Built-in scenario preset")
      ->check(CLI::IsMember(preset_names()));
  cmd.add_option("--seed", opt.seed, "Root seed (falls back to $CPS_SEED)");
  cmd.add_option("--horizon", opt.horizon, "Number of rounds");
  cmd.add_option("--big-k", opt.big_k, "Randomization horizon K");
  cmd.add_option("--record", opt.record, "Transcript retention")
      ->check(CLI::IsMember({"full", "states-only"}));
  cmd.add_option("--out", opt.out_dir, "Output directory");
  cmd.add_flag("--override-assumptions", opt.override_assumptions,
               "Run even if the schedule fails the connectivity checks");
}

struct Loaded {
  ScenarioConfig config;
  std::optional<Preset> preset;
};

Loaded load_config(const CommonOptions& opt) {
  Loaded loaded;
  if (!opt.config_path.empty() && !opt.preset_name.empty()) {
    throw Error(ErrorKind::configuration, "pass either --config or --preset, not both");
  }
  if (!opt.preset_name.empty()) {
    loaded.preset = preset(opt.preset_name);
    loaded.config = loaded.preset->config;
  } else if (!opt.config_path.empty()) {
    json doc = read_json_file(opt.config_path);
    // A run manifest carries the resolved scenario under "config".
    if (doc.contains("config") && doc["config"].is_object()) doc = doc["config"];
    loaded.config = scenario_from_json(doc);
  } else {
    throw Error(ErrorKind::configuration, "one of --config or --preset is required");
  }

  auto& c = loaded.config;
  if (opt.seed) {
    c.seed = *opt.seed;
  } else if (const char* env = std::getenv("CPS_SEED"); env != nullptr && *env != '\0') {
    try {
      c.seed = std::stoull(env);
    } catch (const std::exception&) {
      throw Error(ErrorKind::configuration, fmt::format("CPS_SEED '{}' is not a u64", env));
    }
  }
  if (opt.horizon) c.horizon = *opt.horizon;
  if (opt.big_k) c.params.big_k = *opt.big_k;
  if (!opt.record.empty()) c.record = parse_record_mode(opt.record);
  if (opt.override_assumptions) c.override_assumptions = true;
  return loaded;
}

class ArtifactSet {
 public:
  void add(std::string name, std::string contents) {
    files_.emplace_back(std::move(name), std::move(contents));
  }

  // Writes every artifact plus manifest.json; nothing touches disk before
  // this call.
  void commit(const fs::path& dir, const std::vector<std::string>& args,
              const ScenarioConfig& config, std::chrono::steady_clock::time_point started,
              json extra = json::object()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
      throw Error(ErrorKind::io, fmt::format("cannot create '{}': {}", dir.string(), ec.message()));
    }
    json outputs = json::object();
    for (const auto& [name, contents] : files_) {
      write_file_atomic(dir / name, contents);
      outputs[name] = {{"path", (dir / name).string()}, {"sha256", sha256_hex(contents)}};
    }
    json manifest;
    std::string command;
    for (const auto& a : args) command += (command.empty() ? "" : " ") + a;
    manifest["command"] = command;
    manifest["config"] = scenario_to_json(config);
    manifest["seed"] = config.seed;
    manifest["outputs"] = std::move(outputs);
    for (auto& [key, value] : extra.items()) manifest[key] = value;
    manifest["duration_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  std::vector<std::pair<std::string, std::string>> files_;
};

int cmd_run(const CommonOptions& opt, std::optional<double> epsilon,
            const std::vector<std::string>& args, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  Loaded loaded = load_config(opt);
  if (epsilon) loaded.config.params.epsilon = *epsilon;
  const Transcript t = run(loaded.config);
  const ConvergenceReport report = convergence_report(t);

  ArtifactSet artifacts;
  artifacts.add("errors.csv", errors_csv(t));
  artifacts.add("states.csv", states_csv(t));
  if (t.record == RecordMode::full) artifacts.add("messages.json", message_log(t).dump() + "\n");
  artifacts.add("report.json", to_json(report).dump(2) + "\n");
  artifacts.commit(opt.out_dir, args, loaded.config, started);

  fmt::print(out, "rounds: {}\n", t.n_rounds());
  fmt::print(out, "final_error: {}\n", t.errors.back());
  fmt::print(out, "converged_at: {}\n",
             report.converged_at ? std::to_string(*report.converged_at) : "none");
  fmt::print(out, "gamma_hat: {}\n", report.gamma_hat ? format_double(*report.gamma_hat) : "none");
  fmt::print(out, "violations: {}\n", report.invariant_violations.size());
  return report.invariant_violations.empty() ? kExitOk : kExitFailure;
}

int cmd_sweep(const CommonOptions& opt, std::vector<double> grid, std::optional<std::size_t> trials,
              const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  Loaded loaded = load_config(opt);
  if (grid.empty()) {
    if (loaded.preset && !loaded.preset->epsilon_grid.empty()) {
      grid = loaded.preset->epsilon_grid;
    } else {
      grid = {loaded.config.params.epsilon};
    }
  }
  const std::size_t n_trials = trials ? *trials : (loaded.preset ? loaded.preset->trials : 1);

  const auto rows = epsilon_sweep(loaded.config, grid, n_trials);
  std::string csv = "epsilon,gamma_mean,gamma_var,trials\n";
  for (const auto& row : rows) {
    if (!row.feasible) {
      fmt::print(err, "warning: epsilon {} infeasible for this schedule, row reported as nan\n", row.epsilon);
    }
    csv += fmt::format("{},{},{},{}\n", row.epsilon, row.gamma_mean, row.gamma_var, row.trials);
  }
  ArtifactSet artifacts;
  artifacts.add("sweep.csv", csv);
  artifacts.commit(opt.out_dir, args, loaded.config, started,
                   {{"epsilon_grid", grid}, {"trials", n_trials}});
  out << csv;
  return kExitOk;
}

int cmd_attack(const CommonOptions& opt, AgentId target, std::vector<AgentId> adversaries,
               const std::vector<std::string>& args, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  Loaded loaded = load_config(opt);
  auto& config = loaded.config;
  if (!adversaries.empty()) config.adversaries = adversaries;
  if (std::find(config.adversaries.begin(), config.adversaries.end(), target) !=
      config.adversaries.end()) {
    throw Error(ErrorKind::invalid_query, fmt::format("target {} is an adversary", target));
  }
  config.record = RecordMode::full;
  const Transcript t = run(config);
  const AdversaryView view = observe(t, config.adversaries);
  const double truth = t.initial_values.at(target - 1);

  json report;
  report["target"] = target;
  report["adversaries"] = config.adversaries;
  report["algorithm"] = to_string(config.algorithm);
  std::optional<double> recovered;
  if (config.algorithm == Algorithm::conventional) {
    try {
      recovered = attack_conventional(view, target);
      report["verdict"] = "vulnerable";
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::attack_infeasible) throw;
      report["verdict"] = "unknown";
      report["note"] = e.what();
    }
  } else {
    const PrivacyVerdict verdict =
        privacy_condition(*config.schedule, config.adversaries, target, config.params);
    report["verdict"] = to_string(verdict.verdict);
    if (verdict.witness) {
      report["witness"] = {{"neighbor", verdict.witness->first},
                           {"round", verdict.witness->second}};
    }
    if (verdict.verdict == Verdict::vulnerable) recovered = attack_reconstruct(view, target);
  }
  if (recovered) {
    report["recovered_value"] = *recovered;
    report["ground_truth"] = truth;
    report["abs_error"] = std::abs(*recovered - truth);
  }

  ArtifactSet artifacts;
  artifacts.add("attack.json", report.dump(2) + "\n");
  artifacts.commit(opt.out_dir, args, config, started);
  out << report.dump(2) << "\n";
  return kExitOk;
}

int cmd_privacy_test(const CommonOptions& opt, AgentId target, AgentId partner, double shift,
                     std::size_t trials, double alpha, std::vector<AgentId> adversaries,
                     const std::vector<std::string>& args, std::ostream& out) {
  const auto started = std::chrono::steady_clock::now();
  Loaded loaded = load_config(opt);
  if (!adversaries.empty()) loaded.config.adversaries = adversaries;
  const auto result =
      indistinguishability_test(loaded.config, target, partner, shift, trials, alpha);

  std::string csv = "statistic_id,p_value\n";
  for (const auto& [id, p] : result.p_values) csv += fmt::format("{},{}\n", id, p);
  json report = {{"target", target},
                 {"partner", partner},
                 {"shift", shift},
                 {"trials", trials},
                 {"alpha", alpha},
                 {"statistics", result.statistics},
                 {"rejections", result.rejections},
                 {"allowed_rejections", result.allowed_rejections},
                 {"rejection_fraction", result.rejection_fraction},
                 {"pass", result.pass}};
  ArtifactSet artifacts;
  artifacts.add("pvalues.csv", csv);
  artifacts.add("privacy.json", report.dump(2) + "\n");
  artifacts.commit(opt.out_dir, args, loaded.config, started);

  fmt::print(out, "{}\n", result.pass ? "pass" : "fail");
  fmt::print(out, "rejections: {}/{} (allowed {}), fraction {}\n", result.rejections,
             result.statistics, result.allowed_rejections, result.rejection_fraction);
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Confidential push-sum simulator"};
  app.require_subcommand(1);

  CommonOptions run_opt;
  std::optional<double> run_eps;
  auto* run_cmd = app.add_subcommand("run", "Run one scenario and write error/state CSVs");
  add_common(*run_cmd, run_opt);
  run_cmd->add_option("--epsilon", run_eps, "Weight lower bound epsilon");

  CommonOptions sweep_opt;
  std::vector<double> sweep_grid;
  std::optional<std::size_t> sweep_trials;
  auto* sweep_cmd = app.add_subcommand("sweep", "Fitted rate statistics over an epsilon grid");
  add_common(*sweep_cmd, sweep_opt);
  sweep_cmd->add_option("--epsilon", sweep_grid, "Epsilon grid (comma separated)")
      ->delimiter(',');
  sweep_cmd->add_option("--trials", sweep_trials, "Trials per epsilon");

  CommonOptions attack_opt;
  AgentId attack_target = 0;
  std::vector<AgentId> attack_adv;
  auto* attack_cmd = app.add_subcommand("attack", "Privacy verdict and reconstruction attack");
  add_common(*attack_cmd, attack_opt);
  attack_cmd->add_option("--target", attack_target, "Target agent (1-based)")->required();
  attack_cmd->add_option("--adversaries", attack_adv, "Colluding agents (comma separated)")
      ->delimiter(',');

  CommonOptions priv_opt;
  AgentId priv_target = 0;
  AgentId priv_partner = 0;
  double priv_shift = 5.0;
  std::size_t priv_trials = 2000;
  double priv_alpha = 0.01;
  std::vector<AgentId> priv_adv;
  auto* priv_cmd = app.add_subcommand("privacy-test", "Empirical indistinguishability test");
  add_common(*priv_cmd, priv_opt);
  priv_cmd->add_option("--target", priv_target, "Target agent")->required();
  priv_cmd->add_option("--partner", priv_partner, "Honest neighbor absorbing the shift")
      ->required();
  priv_cmd->add_option("--shift", priv_shift, "Shift applied to the target's value");
  priv_cmd->add_option("--trials", priv_trials, "Trials per population");
  priv_cmd->add_option("--alpha", priv_alpha, "Per-statistic significance");
  priv_cmd->add_option("--adversaries", priv_adv, "Colluding agents (comma separated)")
      ->delimiter(',');

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run_opt, run_eps, args, out);
    if (*sweep_cmd) return cmd_sweep(sweep_opt, sweep_grid, sweep_trials, args, out, err);
    if (*attack_cmd) return cmd_attack(attack_opt, attack_target, attack_adv, args, out);
    if (*priv_cmd) {
      return cmd_privacy_test(priv_opt, priv_target, priv_partner, priv_shift, priv_trials,
                              priv_alpha, priv_adv, args, out);
    }
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    switch (e.kind()) {
      case ErrorKind::io:
      case ErrorKind::configuration:
      case ErrorKind::unknown_schedule:
      case ErrorKind::invalid_edge:
      case ErrorKind::out_of_range:
      case ErrorKind::assumption:
      case ErrorKind::invalid_query:
      case ErrorKind::invalid_pair:
        return kExitUsage;
      default:
        return kExitFailure;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace cps
