// Command-line front end: validate, analyze, simulate, drift-check, oracle.
// JSON reports go to stdout; diagnostics to stderr. Exit codes: 0 success or
// analytic pass, 1 analytic negative (not stabilizable, drift failure,
// validation failure), 2 input error, 3 simulation budget exceeded before the
// first return.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cbnet/analyze.hpp"
#include "cbnet/json_io.hpp"
#include "cbnet/oracle.hpp"
#include "cbnet/simulate.hpp"

namespace {

using namespace cbnet;

constexpr int kExitOk = 0;
constexpr int kExitAnalyticNegative = 1;
constexpr int kExitInputError = 2;
constexpr int kExitBudgetExceeded = 3;

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open file");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, e.what());
  }
}

Network<Rational> load_network(const std::string& path) {
  return network_from_json(load_json(path));
}

void emit(const Json& doc) { std::cout << doc.dump(2) << "\n"; }

int require_valid(const Network<Rational>& net) {
  const auto report = validate(net);
  if (report.ok()) return kExitOk;
  Json out;
  out["validation"] = validation_to_json(report);
  emit(out);
  return kExitAnalyticNegative;
}

// Synthesized static scheduler, or an explanation of why none exists.
std::optional<StaticScheduler<Rational>> synthesize_for(const Network<Rational>& net,
                                                        std::string& why_not) {
  const auto r = is_stabilizable(net);
  if (r.stabilizable) return synthesize_scheduler(net, r.lp, r.solution);
  why_not = r.solution.status == LpStatus::kOptimal
                ? "traffic LP optimum delta* >= 1"
                : std::string("traffic LP status: ") + to_string(r.solution.status);
  return std::nullopt;
}

// Controlled inputs are reduced to the purely stochastic network induced by
// the synthesized scheduler; pure inputs pass through unchanged.
std::optional<PureNetwork<Rational>> as_pure_or_induced(const Network<Rational>& net, Json& note,
                                                        std::string& why_not) {
  if (auto pure = PureNetwork<Rational>::from(net)) return pure;
  auto sched = synthesize_for(net, why_not);
  if (!sched) return std::nullopt;
  note = scheduler_to_json(net, *sched);
  return induce_pure_network(net, *sched);
}

int cmd_validate(const std::string& path) {
  const auto net = load_network(path);
  const auto report = validate(net);
  Json out;
  out["validation"] = validation_to_json(report);
  emit(out);
  return report.ok() ? kExitOk : kExitAnalyticNegative;
}

struct AnalyzeFlags {
  std::string mode = "rational";
  bool exact_regions = false;
  bool apply_uniformize = false;
  bool allow_k_increase = false;
};

int cmd_analyze(const std::string& path, const AnalyzeFlags& flags) {
  Network<Rational> net = load_network(path);
  if (flags.apply_uniformize) {
    const auto u = uniformize(net, flags.allow_k_increase);
    if (!u.ok) {
      Json violations = Json::array();
      for (const auto& v : u.violations)
        violations.push_back({{"where", v.where}, {"message", v.message}});
      Json out;
      out["uniformize"] = {{"ok", false}, {"violations", std::move(violations)}};
      emit(out);
      return kExitAnalyticNegative;
    }
    net = u.network;
  }
  AnalyzeOptions options;
  options.drift.exact_regions = flags.exact_regions;
  Json out;
  Verdict verdict;
  bool valid;
  if (flags.mode == "float") {
    const auto net_f = network_cast<double>(net);
    const auto report = analyze(net_f, options);
    out = analysis_to_json(net_f, report);
    verdict = report.verdict;
    valid = report.validation.ok();
  } else {
    const auto report = analyze(net, options);
    out = analysis_to_json(net, report);
    verdict = report.verdict;
    valid = report.validation.ok();
  }
  emit(out);
  if (!valid) return kExitAnalyticNegative;
  return verdict == Verdict::kStabilizable ? kExitOk : kExitAnalyticNegative;
}

struct SimulateFlags {
  std::string scheduler = "synth";
  std::uint64_t cycles = 100000;
  std::uint64_t seed = 1;
  int replicas = 1;
  double time_budget = 1e6;
  std::string csv_dir;
};

void write_csv(const std::string& dir, const SimReport& report) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream out(fs::path(dir) / "trace.csv");
    out << "replica,bucket_start,bucket_width,mean_total_size\n";
    for (std::size_t rep = 0; rep < report.traces.size(); ++rep) {
      const auto& trace = report.traces[rep];
      for (std::size_t b = 0; b < trace.weighted_size.size(); ++b) {
        if (trace.covered[b] <= 0) continue;
        out << rep << ',' << trace.bucket_width * static_cast<double>(b) << ','
            << trace.bucket_width << ',' << trace.weighted_size[b] / trace.covered[b] << "\n";
      }
    }
  }
  {
    std::ofstream out(fs::path(dir) / "occupancy.csv");
    out << "state,fraction\n";
    for (const auto& [state, frac] : report.occupancy) {
      std::string key;
      for (std::size_t i = 0; i < state.size(); ++i)
        key += (i ? ";" : "") + std::to_string(state[i]);
      out << key << ',' << frac << "\n";
    }
  }
  {
    std::ofstream out(fs::path(dir) / "tail.csv");
    out << "total_size,fraction\n";
    for (std::size_t k = 0; k < report.tail.size(); ++k) out << k << ',' << report.tail[k] << "\n";
  }
}

int cmd_simulate(const std::string& path, const SimulateFlags& flags) {
  const auto net = load_network(path);
  if (const int code = require_valid(net); code != kExitOk) return code;

  StaticScheduler<Rational> sched;
  if (flags.scheduler == "synth") {
    std::string why_not;
    auto synthesized = synthesize_for(net, why_not);
    if (!synthesized) {
      std::cerr << "cannot synthesize a stabilizing scheduler: " << why_not << "\n";
      return kExitAnalyticNegative;
    }
    sched = std::move(*synthesized);
  } else {
    sched = scheduler_from_json(load_json(flags.scheduler), net);
    const auto check = validate_scheduler(net, sched);
    if (!check.ok())
      throw ParseError(check.violations.front().where, check.violations.front().message);
  }

  SimOptions options;
  options.seed = flags.seed;
  options.cycle_budget = flags.cycles;
  options.time_budget = flags.time_budget;
  options.replicas = flags.replicas;
  const auto report =
      run_cycles(network_cast<double>(net), StaticPolicy(scheduler_cast<double>(sched)), options);

  Json out = sim_report_to_json(report);
  out["scheduler"] = scheduler_to_json(net, sched);
  emit(out);
  if (!flags.csv_dir.empty()) write_csv(flags.csv_dir, report);
  return report.status == SimStatus::kBudgetExceededBeforeFirstReturn ? kExitBudgetExceeded
                                                                      : kExitOk;
}

template <class S>
int drift_check_impl(const PureNetwork<S>& pure, bool exact_regions, Json& out) {
  const auto traffic = solve_traffic(pure, {.restrict_to_reachable = true});
  out["traffic"] = traffic_to_json(traffic);
  if (traffic.status != TrafficStatus::kOk) return kExitAnalyticNegative;
  const auto ld = make_lyapunov(*traffic.data);
  const auto cert = certify_drift(ld, {.exact_regions = exact_regions});
  out["drift"] = drift_certificate_to_json(ld, cert);
  return cert.status == DriftStatus::kPass ? kExitOk : kExitAnalyticNegative;
}

int cmd_drift_check(const std::string& path, const std::string& mode, bool exact_regions) {
  const auto net = load_network(path);
  if (const int code = require_valid(net); code != kExitOk) return code;
  Json out;
  Json scheduler_note;
  std::string why_not;
  const auto pure = as_pure_or_induced(net, scheduler_note, why_not);
  if (!pure) {
    out["error"] = "no stabilizing scheduler to induce a pure network: " + why_not;
    emit(out);
    return kExitAnalyticNegative;
  }
  if (!scheduler_note.is_null()) out["scheduler"] = scheduler_note;
  int code;
  if (mode == "float")
    code = drift_check_impl(network_cast<double>(*pure), exact_regions, out);
  else
    code = drift_check_impl(*pure, exact_regions, out);
  emit(out);
  return code;
}

struct OracleFlags {
  std::string bound = "auto";
  std::string mode = "float";
  double shell_target = 1e-6;
};

int cmd_oracle(const std::string& path, const OracleFlags& flags) {
  const auto net = load_network(path);
  if (const int code = require_valid(net); code != kExitOk) return code;
  Json out;
  Json scheduler_note;
  std::string why_not;
  const auto pure = as_pure_or_induced(net, scheduler_note, why_not);
  if (!pure) {
    out["error"] = "no stabilizing scheduler to induce a pure network: " + why_not;
    emit(out);
    return kExitAnalyticNegative;
  }
  if (!scheduler_note.is_null()) out["scheduler"] = scheduler_note;

  int bound = 0;
  if (flags.bound == "auto") {
    AutoBoundOptions options;
    options.shell_target = flags.shell_target;
    const auto found = auto_bound(network_cast<double>(*pure), options);
    if (!found.converged) {
      out["error"] = "auto bound did not reach the shell-mass target; the chain may be unstable";
      if (found.bound > 0) {
        out["last_bound"] = found.bound;
        out["last_shell_mass"] = found.shell_mass;
      }
      emit(out);
      return kExitAnalyticNegative;
    }
    bound = found.bound;
    if (flags.mode != "rational") {
      out["stationary"] =
          stationary_to_json(found.chain, found.pi, truncation_mass(found.chain, found.pi.pi));
      emit(out);
      return kExitOk;
    }
  } else {
    try {
      bound = std::stoi(flags.bound);
    } catch (const std::exception&) {
      throw ParseError("--bound", "expected an integer or \"auto\"");
    }
  }

  if (flags.mode == "rational") {
    const auto tc = build_truncated(*pure, bound);
    const auto result = stationary(tc);
    out["stationary"] =
        stationary_to_json(tc, result, result.ok ? truncation_mass(tc, result.pi) : Rational(0));
    emit(out);
    return result.ok ? kExitOk : kExitAnalyticNegative;
  }
  const auto tc = build_truncated(network_cast<double>(*pure), bound);
  const auto result = stationary(tc);
  out["stationary"] =
      stationary_to_json(tc, result, result.ok ? truncation_mass(tc, result.pi) : 0.0);
  emit(out);
  return result.ok ? kExitOk : kExitAnalyticNegative;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"controlled branching queueing networks: stability analysis toolkit"};
  app.require_subcommand(1);

  std::string net_path;
  AnalyzeFlags analyze_flags;
  SimulateFlags simulate_flags;
  OracleFlags oracle_flags;
  std::string drift_mode = "rational";
  bool drift_exact_regions = false;

  auto* validate_cmd = app.add_subcommand("validate", "check a network description");
  validate_cmd->add_option("network", net_path, "network JSON file")->required();

  auto* analyze_cmd =
      app.add_subcommand("analyze", "decide stabilizability, synthesize and certify a scheduler");
  analyze_cmd->add_option("network", net_path, "network JSON file")->required();
  analyze_cmd->add_option("--mode", analyze_flags.mode, "rational (exact, default) or float")
      ->check(CLI::IsMember({"rational", "float"}));
  analyze_cmd->add_flag("--exact-regions", analyze_flags.exact_regions,
                        "determine drift-certificate attaining sets by LP feasibility");
  analyze_cmd->add_flag("--uniformize", analyze_flags.apply_uniformize,
                        "equalize per-action rates before analysis");
  analyze_cmd->add_flag("--allow-k-increase", analyze_flags.allow_k_increase,
                        "let uniformize raise the branching factor for self-loops");

  auto* simulate_cmd = app.add_subcommand("simulate", "event simulation with cycle statistics");
  simulate_cmd->add_option("network", net_path, "network JSON file")->required();
  simulate_cmd->add_option("--scheduler", simulate_flags.scheduler,
                           "\"synth\" or a scheduler JSON file (default synth)");
  simulate_cmd->add_option("--cycles", simulate_flags.cycles, "regeneration-cycle budget");
  simulate_cmd->add_option("--seed", simulate_flags.seed, "RNG seed");
  simulate_cmd->add_option("--replicas", simulate_flags.replicas, "parallel replicas");
  simulate_cmd->add_option("--time-budget", simulate_flags.time_budget,
                           "simulated-time budget per replica");
  simulate_cmd->add_option("--csv", simulate_flags.csv_dir,
                           "directory for trace/occupancy/tail CSV files");

  auto* drift_cmd = app.add_subcommand("drift-check", "certify negative Lyapunov drift");
  drift_cmd->add_option("network", net_path, "network JSON file")->required();
  drift_cmd->add_option("--mode", drift_mode, "rational (default) or float")
      ->check(CLI::IsMember({"rational", "float"}));
  drift_cmd->add_flag("--exact-regions", drift_exact_regions,
                      "determine attaining sets by LP feasibility");

  auto* oracle_cmd =
      app.add_subcommand("oracle", "stationary distribution on a truncated state space");
  oracle_cmd->add_option("network", net_path, "network JSON file")->required();
  oracle_cmd->add_option("--bound", oracle_flags.bound, "lattice bound, or \"auto\" (default)");
  oracle_cmd->add_option("--mode", oracle_flags.mode, "float (default) or rational")
      ->check(CLI::IsMember({"rational", "float"}));
  oracle_cmd->add_option("--shell-target", oracle_flags.shell_target,
                         "shell-mass target for --bound auto");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate_cmd->parsed()) return cmd_validate(net_path);
    if (analyze_cmd->parsed()) return cmd_analyze(net_path, analyze_flags);
    if (simulate_cmd->parsed()) return cmd_simulate(net_path, simulate_flags);
    if (drift_cmd->parsed()) return cmd_drift_check(net_path, drift_mode, drift_exact_regions);
    if (oracle_cmd->parsed()) return cmd_oracle(net_path, oracle_flags);
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}
