#pragma once

#include <optional>
#include <utility>

#include "cbnet/json_io.hpp"
#include "cbnet/lp.hpp"
#include "cbnet/lyapunov.hpp"
#include "cbnet/network.hpp"
#include "cbnet/traffic.hpp"

namespace cbnet {

enum class Verdict { kStabilizable, kNotStabilizable, kDivergent };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kStabilizable: return "stabilizable";
    case Verdict::kNotStabilizable: return "not-stabilizable";
    case Verdict::kDivergent: return "divergent";
  }
  return "?";
}

template <class S>
struct AnalysisReport {
  ValidationReport validation;
  TrafficLp<S> lp;
  LpSolution<S> solution;
  std::optional<StaticScheduler<S>> scheduler;
  std::optional<TrafficResult<S>> traffic;  // of the induced pure network
  std::optional<LyapunovData<S>> lyapunov;
  std::optional<DriftCertificate<S>> certificate;
  Verdict verdict = Verdict::kNotStabilizable;
};

struct AnalyzeOptions {
  DriftOptions drift;
};

// Full decision pipeline: traffic LP, scheduler synthesis, induced network,
// traffic solution, Lyapunov drift certificate. The input must be valid; the
// validation report is included for reference.
template <class S>
AnalysisReport<S> analyze(const Network<S>& net, const AnalyzeOptions& options = {}) {
  AnalysisReport<S> report;
  report.validation = validate(net);
  if (!report.validation.ok()) return report;

  report.lp = build_lp(net);
  report.solution = solve_lp(report.lp);
  if (report.solution.status != LpStatus::kOptimal || !(report.solution.delta_star < S(1))) {
    report.verdict = Verdict::kNotStabilizable;
    return report;
  }

  report.scheduler = synthesize_scheduler(net, report.lp, report.solution);
  const auto pure = induce_pure_network(net, *report.scheduler);
  // Queues the optimal scheduler starves are legitimately dead; solve the
  // traffic system on the reachable part (they keep lambda = 0).
  report.traffic = solve_traffic(pure, {.restrict_to_reachable = true});
  if (report.traffic->status != TrafficStatus::kOk) {
    report.verdict = Verdict::kDivergent;
    return report;
  }

  report.lyapunov = make_lyapunov(*report.traffic->data);
  report.certificate = certify_drift(*report.lyapunov, options.drift);
  report.verdict = report.certificate->status == DriftStatus::kPass ? Verdict::kStabilizable
                                                                    : Verdict::kDivergent;
  return report;
}

template <class S>
Json analysis_to_json(const Network<S>& net, const AnalysisReport<S>& report) {
  Json out;
  out["mode"] = ScalarTraits<S>::mode_name();
  out["validation"] = validation_to_json(report.validation);
  if (!report.validation.ok()) {
    out["verdict"] = nullptr;
    return out;
  }
  out["lp"] = lp_to_json(report.lp, report.solution);
  if (report.solution.status == LpStatus::kInfeasible)
    out["lp_infeasible_note"] =
        "traffic LP infeasible: no nonnegative action rates balance the flow equations";
  if (report.scheduler) out["scheduler"] = scheduler_to_json(net, *report.scheduler);
  if (report.traffic) out["traffic"] = traffic_to_json(*report.traffic);
  if (report.lyapunov && report.certificate)
    out["lyapunov"] = drift_certificate_to_json(*report.lyapunov, *report.certificate);
  out["verdict"] = to_string(report.verdict);
  return out;
}

}  // namespace cbnet
