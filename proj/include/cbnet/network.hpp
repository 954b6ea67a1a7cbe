#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cbnet/scalar.hpp"

namespace cbnet {

inline bool lex_less(const StateVector& a, const StateVector& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// One branching rule: fire `offspring` new jobs with probability `prob`.
template <class S>
struct ProductionEntry {
  StateVector offspring;
  S prob;
};

// Finite distribution over offspring vectors. Entries are kept sorted
// lexicographically with pairwise-distinct offspring, so equality of
// production functions is structural equality.
template <class S>
struct ProductionFunction {
  std::vector<ProductionEntry<S>> entries;

  void canonicalize() {
    std::sort(entries.begin(), entries.end(),
              [](const ProductionEntry<S>& a, const ProductionEntry<S>& b) {
                return lex_less(a.offspring, b.offspring);
              });
    std::vector<ProductionEntry<S>> merged;
    for (auto& e : entries) {
      if (!merged.empty() && merged.back().offspring == e.offspring) {
        merged.back().prob += e.prob;
      } else {
        merged.push_back(std::move(e));
      }
    }
    entries = std::move(merged);
  }

  S total_probability() const {
    S sum = ScalarTraits<S>::zero();
    for (const auto& e : entries) sum += e.prob;
    return sum;
  }

  // Expected number of jobs produced for each queue.
  RowVector<S> mean_offspring(int n) const {
    RowVector<S> m = RowVector<S>::Constant(n, ScalarTraits<S>::zero());
    for (const auto& e : entries)
      for (int j = 0; j < n; ++j) m(j) += e.prob * S(e.offspring(j));
    return m;
  }
};

template <class S>
struct Action {
  std::string id;
  ProductionFunction<S> production;
  // Only set in the extended pre-uniformization form where actions carry
  // their own service rates.
  std::optional<S> rate;
};

template <class S>
struct Queue {
  S rate;
  std::vector<Action<S>> actions;
};

// Controlled branching network: n queues, branching factor K, Poisson
// arrival stream with its own production function, and per-queue finite
// action sets. Immutable after construction by convention.
template <class S>
struct Network {
  int branching_factor = 0;
  S arrival_rate = ScalarTraits<S>::zero();
  ProductionFunction<S> arrival_production;
  std::vector<Queue<S>> queues;

  int queue_count() const { return static_cast<int>(queues.size()); }
};

// Per-queue probability distribution over that queue's actions, aligned with
// Network::queues[i].actions by index.
template <class S>
struct StaticScheduler {
  std::vector<std::vector<S>> probs;
};

// A network in which every queue has exactly one action.
template <class S>
struct PureNetwork {
  Network<S> net;

  static std::optional<PureNetwork> from(Network<S> n) {
    for (const auto& q : n.queues)
      if (q.actions.size() != 1) return std::nullopt;
    return PureNetwork{std::move(n)};
  }

  int queue_count() const { return net.queue_count(); }
  const ProductionFunction<S>& production(int i) const { return net.queues[i].actions[0].production; }
  const S& rate(int i) const { return net.queues[i].rate; }
};

template <class To, class From>
ProductionFunction<To> production_cast(const ProductionFunction<From>& p) {
  ProductionFunction<To> out;
  out.entries.reserve(p.entries.size());
  for (const auto& e : p.entries)
    out.entries.push_back({e.offspring, ScalarTraits<To>::from_rational(e.prob)});
  return out;
}

template <class To>
Network<To> network_cast(const Network<Rational>& n) {
  Network<To> out;
  out.branching_factor = n.branching_factor;
  out.arrival_rate = ScalarTraits<To>::from_rational(n.arrival_rate);
  out.arrival_production = production_cast<To>(n.arrival_production);
  out.queues.reserve(n.queues.size());
  for (const auto& q : n.queues) {
    Queue<To> qc;
    qc.rate = ScalarTraits<To>::from_rational(q.rate);
    for (const auto& a : q.actions) {
      Action<To> ac;
      ac.id = a.id;
      ac.production = production_cast<To>(a.production);
      if (a.rate) ac.rate = ScalarTraits<To>::from_rational(*a.rate);
      qc.actions.push_back(std::move(ac));
    }
    out.queues.push_back(std::move(qc));
  }
  return out;
}

template <class To>
PureNetwork<To> network_cast(const PureNetwork<Rational>& n) {
  return PureNetwork<To>{network_cast<To>(n.net)};
}

template <class To>
StaticScheduler<To> scheduler_cast(const StaticScheduler<Rational>& s) {
  StaticScheduler<To> out;
  for (const auto& row : s.probs) {
    std::vector<To> r;
    r.reserve(row.size());
    for (const auto& p : row) r.push_back(ScalarTraits<To>::from_rational(p));
    out.probs.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Validation. Violations are data, not failures.

struct Violation {
  std::string where;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

namespace detail {

// Edges i -> j between queues along which jobs can propagate under *some*
// action; for pure networks this is exactly {(i,j) : A_ij > 0}.
template <class S>
std::vector<int> reachable_from_arrivals(const Network<S>& net) {
  const int n = net.queue_count();
  std::vector<char> seen(n, 0);
  std::vector<int> stack;
  for (const auto& e : net.arrival_production.entries)
    for (int j = 0; j < n; ++j)
      if (e.offspring(j) > 0 && !seen[j]) {
        seen[j] = 1;
        stack.push_back(j);
      }
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (const auto& a : net.queues[i].actions)
      for (const auto& e : a.production.entries)
        for (int j = 0; j < n; ++j)
          if (e.offspring(j) > 0 && !seen[j]) {
            seen[j] = 1;
            stack.push_back(j);
          }
  }
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (seen[i]) out.push_back(i);
  return out;
}

template <class S>
void validate_production(const ProductionFunction<S>& p, int n, int K,
                         const std::string& where, std::vector<Violation>& out) {
  if (p.entries.empty()) {
    out.push_back({where, "production function has no entries"});
    return;
  }
  std::set<std::vector<int>> offspring_seen;
  for (std::size_t k = 0; k < p.entries.size(); ++k) {
    const auto& e = p.entries[k];
    const std::string entry_where = where + ".production[" + std::to_string(k) + "]";
    if (e.offspring.size() != n) {
      out.push_back({entry_where, "offspring vector has length " +
                                      std::to_string(e.offspring.size()) + ", expected " +
                                      std::to_string(n)});
      continue;
    }
    long long total = 0;
    bool negative = false;
    for (int j = 0; j < n; ++j) {
      if (e.offspring(j) < 0) negative = true;
      total += e.offspring(j);
    }
    if (negative) out.push_back({entry_where, "offspring components must be nonnegative"});
    if (total > K)
      out.push_back({entry_where, "total offspring " + std::to_string(total) +
                                      " exceeds branching factor " + std::to_string(K)});
    if (!(e.prob > ScalarTraits<S>::zero()))
      out.push_back({entry_where, "entry probability must be positive"});
    std::vector<int> key(e.offspring.begin(), e.offspring.end());
    if (!offspring_seen.insert(key).second)
      out.push_back({entry_where, "duplicate offspring vector"});
  }
  const S sum = p.total_probability();
  const S one = S(1);
  const S tol = ScalarTraits<S>::prob_sum_tolerance();
  if (abs(sum - one) > tol)
    out.push_back({where, "production probabilities sum != 1"});
}

}  // namespace detail

// Checks every structural invariant plus queue reachability (a queue must be
// reachable from the arrival stream through the offspring of some action
// chain; unreachable queues are a modelling mistake, not removed silently).
template <class S>
ValidationReport validate(const Network<S>& net) {
  ValidationReport report;
  auto& out = report.violations;
  const int n = net.queue_count();
  const int K = net.branching_factor;

  if (n < 1) out.push_back({"network", "network needs at least one queue"});
  if (K < 0) out.push_back({"network", "branching factor must be nonnegative"});
  if (!(net.arrival_rate > ScalarTraits<S>::zero()))
    out.push_back({"arrival.rate", "arrival rate must be positive"});
  if (n < 1) return report;

  detail::validate_production(net.arrival_production, n, K, "arrival", out);
  bool arrival_nonzero = false;
  for (const auto& e : net.arrival_production.entries)
    if (e.offspring.size() == n && e.offspring.sum() > 0) arrival_nonzero = true;
  if (!arrival_nonzero)
    out.push_back({"arrival", "nonzero arrival stream required"});

  for (int i = 0; i < n; ++i) {
    const std::string qwhere = "queue " + std::to_string(i + 1);
    const auto& q = net.queues[i];
    if (!(q.rate > ScalarTraits<S>::zero()))
      out.push_back({qwhere, "queue rate must be positive"});
    if (q.actions.empty()) {
      out.push_back({qwhere, "queue needs at least one action"});
      continue;
    }
    std::set<std::string> ids;
    for (const auto& a : q.actions) {
      const std::string awhere = qwhere + ".action \"" + a.id + "\"";
      if (!ids.insert(a.id).second)
        out.push_back({awhere, "duplicate action id within queue"});
      detail::validate_production(a.production, n, K, awhere, out);
      if (a.rate) {
        if (!(*a.rate > ScalarTraits<S>::zero()))
          out.push_back({awhere, "action rate must be positive"});
        else if (*a.rate != q.rate)
          out.push_back({awhere, "action rate differs from queue rate; apply uniformize first"});
      }
    }
  }

  if (report.ok()) {
    const auto reach = detail::reachable_from_arrivals(net);
    if (static_cast<int>(reach.size()) != n) {
      std::vector<char> seen(n, 0);
      for (int i : reach) seen[i] = 1;
      for (int i = 0; i < n; ++i)
        if (!seen[i])
          out.push_back({"queue " + std::to_string(i + 1), "queue is not reachable from the arrival stream"});
    }
  }
  return report;
}

template <class S>
ValidationReport validate(const PureNetwork<S>& net) {
  return validate(net.net);
}

// Queues i with (alpha A^j)_i != 0 for some j >= 0, computed as graph
// reachability from the support of alpha along edges {(i,j) : A_ij > 0}.
template <class S>
std::vector<int> reachable_queues(const PureNetwork<S>& net) {
  return detail::reachable_from_arrivals(net.net);
}

// Scheduler whose support is contained in the network's action sets and whose
// per-queue rows are probability distributions.
template <class S>
ValidationReport validate_scheduler(const Network<S>& net, const StaticScheduler<S>& sched) {
  ValidationReport report;
  const int n = net.queue_count();
  if (static_cast<int>(sched.probs.size()) != n) {
    report.violations.push_back({"scheduler", "expected one distribution per queue"});
    return report;
  }
  for (int i = 0; i < n; ++i) {
    const std::string where = "scheduler.queue " + std::to_string(i + 1);
    if (sched.probs[i].size() != net.queues[i].actions.size()) {
      report.violations.push_back({where, "distribution length does not match the action set"});
      continue;
    }
    S sum = ScalarTraits<S>::zero();
    for (const auto& p : sched.probs[i]) {
      if (p < ScalarTraits<S>::zero())
        report.violations.push_back({where, "negative action probability"});
      sum += p;
    }
    if (abs(sum - S(1)) > ScalarTraits<S>::prob_sum_tolerance())
      report.violations.push_back({where, "action probabilities sum != 1"});
  }
  return report;
}

// Scheduler that plays the lexicographically-first action of every queue.
template <class S>
StaticScheduler<S> first_action_scheduler(const Network<S>& net) {
  StaticScheduler<S> s;
  for (const auto& q : net.queues) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < q.actions.size(); ++k)
      if (q.actions[k].id < q.actions[best].id) best = k;
    std::vector<S> row(q.actions.size(), ScalarTraits<S>::zero());
    row[best] = S(1);
    s.probs.push_back(std::move(row));
  }
  return s;
}

// Fixes the scheduler and mixes each queue's production functions into one,
// merging duplicate offspring vectors. Actions with zero probability drop out
// of the mixture.
template <class S>
PureNetwork<S> induce_pure_network(const Network<S>& net, const StaticScheduler<S>& sched) {
  const auto check = validate_scheduler(net, sched);
  if (!check.ok())
    throw std::invalid_argument("induce_pure_network: " + check.violations.front().where + ": " +
                                check.violations.front().message);
  Network<S> out;
  out.branching_factor = net.branching_factor;
  out.arrival_rate = net.arrival_rate;
  out.arrival_production = net.arrival_production;
  out.queues.reserve(net.queues.size());
  for (int i = 0; i < net.queue_count(); ++i) {
    const auto& q = net.queues[i];
    ProductionFunction<S> mix;
    for (std::size_t k = 0; k < q.actions.size(); ++k) {
      const S& p = sched.probs[i][k];
      if (p == ScalarTraits<S>::zero()) continue;
      for (const auto& e : q.actions[k].production.entries)
        mix.entries.push_back({e.offspring, p * e.prob});
    }
    mix.canonicalize();
    Queue<S> qo;
    qo.rate = q.rate;
    qo.actions.push_back(Action<S>{"mixed", std::move(mix), std::nullopt});
    out.queues.push_back(std::move(qo));
  }
  return PureNetwork<S>{std::move(out)};
}

// ---------------------------------------------------------------------------
// Uniformization of per-action service rates.

template <class S>
struct UniformizeResult {
  bool ok = false;
  Network<S> network;
  std::vector<Violation> violations;
};

// Equalizes action rates within each queue: mu_i becomes the fastest action
// rate, and a slower action fires its own production with probability
// mu_xi/mu_i and re-enqueues one i-job (offspring e^(i)) otherwise. Raising
// the branching factor to fit the self-loop entry is only done when
// allow_k_increase is set.
template <class S>
UniformizeResult<S> uniformize(const Network<S>& net, bool allow_k_increase = false) {
  UniformizeResult<S> result;
  result.network = net;
  const int n = net.queue_count();
  int needed_k = net.branching_factor;

  for (int i = 0; i < n; ++i) {
    auto& q = result.network.queues[i];
    const std::string qwhere = "queue " + std::to_string(i + 1);
    S mu = ScalarTraits<S>::zero();
    for (const auto& a : q.actions) {
      const S r = a.rate ? *a.rate : q.rate;
      if (!(r > ScalarTraits<S>::zero())) {
        result.violations.push_back({qwhere + ".action \"" + a.id + "\"", "action rate must be positive"});
        return result;
      }
      mu = max(mu, r);
    }
    for (auto& a : q.actions) {
      const S r = a.rate ? *a.rate : q.rate;
      a.rate.reset();
      if (r == mu) continue;
      const S keep = r / mu;
      StateVector self_loop = StateVector::Zero(n);
      self_loop(i) = 1;
      ProductionFunction<S> remapped;
      for (const auto& e : a.production.entries)
        remapped.entries.push_back({e.offspring, keep * e.prob});
      remapped.entries.push_back({self_loop, S(1) - keep});
      remapped.canonicalize();
      for (const auto& e : remapped.entries)
        needed_k = std::max(needed_k, static_cast<int>(e.offspring.sum()));
      a.production = std::move(remapped);
    }
    q.rate = mu;
  }

  if (needed_k > net.branching_factor) {
    if (!allow_k_increase) {
      result.violations.push_back(
          {"network", "self-loop offspring exceeds branching factor " +
                          std::to_string(net.branching_factor) + "; rerun allowing K = " +
                          std::to_string(needed_k)});
      return result;
    }
    result.network.branching_factor = needed_k;
  }
  result.ok = true;
  return result;
}

}  // namespace cbnet
