#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cbnet/network.hpp"
#include "cbnet/simplex.hpp"
#include "cbnet/traffic.hpp"

namespace cbnet {

// The traffic LP over per-action firing rates:
//
//   min delta  s.t.  sum_{xi in S_j} lambda_xi = alpha_j + sum_zeta lambda_zeta A_{zeta j}
//                    delta >= sum_{xi in S_j} lambda_xi / mu_j
//                    lambda_xi >= 0
//
// Variables are ordered [delta, lambda_xi...] with actions sorted by queue
// index then action id, which pins down the simplex tie-breaking and makes
// synthesized schedulers reproducible. Utilization rows are stored in the
// scaled form mu_j*delta - sum lambda_xi >= 0 to stay rational.
template <class S>
struct TrafficLp {
  struct ActionRef {
    int queue;   // 0-based
    int action;  // index into queues[queue].actions
    std::string id;
  };
  std::vector<ActionRef> actions;
  Matrix<S> eq_coeff;
  RowVector<S> eq_rhs;
  Matrix<S> ineq_coeff;
  RowVector<S> mu;

  int variable_count() const { return 1 + static_cast<int>(actions.size()); }
};

template <class S>
struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  S delta_star = ScalarTraits<S>::zero();
  RowVector<S> lambda_bar;  // aligned with TrafficLp::actions
  std::vector<int> basis;
};

template <class S>
TrafficLp<S> build_lp(const Network<S>& net) {
  const int n = net.queue_count();
  TrafficLp<S> lp;
  for (int i = 0; i < n; ++i) {
    std::vector<int> order(net.queues[i].actions.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      return net.queues[i].actions[a].id < net.queues[i].actions[b].id;
    });
    for (int k : order) lp.actions.push_back({i, k, net.queues[i].actions[k].id});
  }

  const int nv = lp.variable_count();
  lp.eq_coeff = Matrix<S>::Constant(n, nv, ScalarTraits<S>::zero());
  lp.eq_rhs = RowVector<S>::Constant(n, ScalarTraits<S>::zero());
  lp.ineq_coeff = Matrix<S>::Constant(n, nv, ScalarTraits<S>::zero());
  lp.mu = RowVector<S>::Constant(n, ScalarTraits<S>::zero());

  RowVector<S> alpha = net.arrival_production.mean_offspring(n);
  for (int j = 0; j < n; ++j) {
    lp.eq_rhs(j) = net.arrival_rate * alpha(j);
    lp.mu(j) = net.queues[j].rate;
    lp.ineq_coeff(j, 0) = net.queues[j].rate;
  }

  for (int v = 0; v < static_cast<int>(lp.actions.size()); ++v) {
    const auto& ref = lp.actions[v];
    const auto& action = net.queues[ref.queue].actions[ref.action];
    const RowVector<S> mean = action.production.mean_offspring(n);
    for (int j = 0; j < n; ++j) {
      if (ref.queue == j) lp.eq_coeff(j, 1 + v) += S(1);
      lp.eq_coeff(j, 1 + v) -= mean(j);
    }
    lp.ineq_coeff(ref.queue, 1 + v) = S(-1);
  }
  return lp;
}

// delta is bounded below by zero and the paper's flow-balance argument rules
// out unboundedness, so only Optimal and Infeasible are expected here; the
// other states indicate a solver defect and are passed through.
//
// The optimum can be attained on a face: circulation flows may shift rate
// between actions without moving delta. A second stage pins delta at the
// optimum and minimizes the total firing rate, so the reported lambda_bar
// (and the scheduler built from it) is the least-work optimum and identical
// across runs.
template <class S>
LpSolution<S> solve_lp(const TrafficLp<S>& lp) {
  const int n = static_cast<int>(lp.eq_rhs.size());
  const int nv = lp.variable_count();

  StandardLp<S> std_lp;
  std_lp.a = Matrix<S>::Constant(2 * n, nv + n, ScalarTraits<S>::zero());
  std_lp.b = RowVector<S>::Constant(2 * n, ScalarTraits<S>::zero());
  std_lp.a.topLeftCorner(n, nv) = lp.eq_coeff;
  std_lp.b.head(n) = lp.eq_rhs;
  std_lp.a.bottomLeftCorner(n, nv) = lp.ineq_coeff;
  for (int j = 0; j < n; ++j) std_lp.a(n + j, nv + j) = S(-1);  // surplus
  std_lp.c = RowVector<S>::Constant(nv + n, ScalarTraits<S>::zero());
  std_lp.c(0) = S(1);

  const auto res = solve_standard_lp(std_lp);
  LpSolution<S> out;
  out.status = res.status;
  if (res.status != LpStatus::kOptimal) return out;

  StandardLp<S> stage2;
  stage2.a = Matrix<S>::Constant(2 * n + 1, nv + n, ScalarTraits<S>::zero());
  stage2.b = RowVector<S>::Constant(2 * n + 1, ScalarTraits<S>::zero());
  stage2.a.topRows(2 * n) = std_lp.a;
  stage2.b.head(2 * n) = std_lp.b;
  stage2.a(2 * n, 0) = S(1);
  stage2.b(2 * n) = res.x(0);
  stage2.c = RowVector<S>::Constant(nv + n, ScalarTraits<S>::zero());
  for (int v = 1; v < nv; ++v) stage2.c(v) = S(1);

  const auto refined = solve_standard_lp(stage2);
  const auto& x = refined.status == LpStatus::kOptimal ? refined : res;
  out.delta_star = x.x(0);
  out.lambda_bar = x.x.segment(1, nv - 1);
  out.basis = x.basis;
  return out;
}

template <class S>
struct StabilizabilityResult {
  bool stabilizable = false;
  TrafficLp<S> lp;
  LpSolution<S> solution;
};

// Theorem: some ergodic scheduler exists iff the traffic LP attains
// min delta < 1 (strictly; delta = 1 exactly is not stabilizable).
template <class S>
StabilizabilityResult<S> is_stabilizable(const Network<S>& net) {
  StabilizabilityResult<S> r;
  r.lp = build_lp(net);
  r.solution = solve_lp(r.lp);
  r.stabilizable = r.solution.status == LpStatus::kOptimal && r.solution.delta_star < S(1);
  return r;
}

// P_xi = lambda_xi / sum of the queue's lambda. Queues whose actions all
// carry zero rate never receive jobs; they get the lexicographically-first
// action with probability one so the state space keeps its dimension.
template <class S>
StaticScheduler<S> synthesize_scheduler(const Network<S>& net, const TrafficLp<S>& lp,
                                        const LpSolution<S>& sol) {
  const int n = net.queue_count();
  StaticScheduler<S> sched;
  sched.probs.resize(n);
  for (int i = 0; i < n; ++i)
    sched.probs[i].assign(net.queues[i].actions.size(), ScalarTraits<S>::zero());

  RowVector<S> totals = RowVector<S>::Constant(n, ScalarTraits<S>::zero());
  for (int v = 0; v < static_cast<int>(lp.actions.size()); ++v)
    totals(lp.actions[v].queue) += sol.lambda_bar(v);

  const auto fallback = first_action_scheduler(net);
  for (int v = 0; v < static_cast<int>(lp.actions.size()); ++v) {
    const auto& ref = lp.actions[v];
    if (totals(ref.queue) > ScalarTraits<S>::zero())
      sched.probs[ref.queue][ref.action] = sol.lambda_bar(v) / totals(ref.queue);
  }
  for (int i = 0; i < n; ++i)
    if (!(totals(i) > ScalarTraits<S>::zero())) sched.probs[i] = fallback.probs[i];
  return sched;
}

}  // namespace cbnet
