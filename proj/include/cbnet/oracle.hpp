#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbnet/linalg.hpp"
#include "cbnet/network.hpp"
#include "cbnet/scalar.hpp"

namespace cbnet {

// CTMC restricted to {x : ||x|| <= bound} with the Reject boundary policy:
// transitions that would leave the lattice are suppressed and their rate
// removed from the row, which keeps a proper generator and makes the
// boundary-shell mass an interpretable truncation diagnostic.
template <class S>
struct TruncatedChain {
  int bound = 0;
  int branching_factor = 0;
  std::vector<StateVector> states;                   // graded lex order; index 0 = origin
  std::vector<std::vector<std::pair<int, S>>> rates;  // off-diagonal, sorted by target
  std::vector<S> exit_rate;

  int state_count() const { return static_cast<int>(states.size()); }
};

namespace detail {

inline void enumerate_states(int n, int bound, std::vector<StateVector>& out) {
  StateVector cur = StateVector::Zero(n);
  auto rec = [&](auto&& self, int pos, int left) -> void {
    if (pos == n) {
      out.push_back(cur);
      return;
    }
    for (int c = 0; c <= left; ++c) {
      cur(pos) = c;
      self(self, pos + 1, left - c);
      cur(pos) = 0;
    }
  };
  rec(rec, 0, bound);
  std::sort(out.begin(), out.end(), [](const StateVector& a, const StateVector& b) {
    const int sa = a.sum(), sb = b.sum();
    if (sa != sb) return sa < sb;
    return lex_less(a, b);
  });
}

}  // namespace detail

template <class S>
TruncatedChain<S> build_truncated(const PureNetwork<S>& net, int bound) {
  const int n = net.queue_count();
  const int k = net.net.branching_factor;
  if (bound < k)
    throw std::invalid_argument("build_truncated: bound " + std::to_string(bound) +
                                " is smaller than the branching factor " + std::to_string(k) +
                                "; a single event could overshoot the lattice");

  TruncatedChain<S> tc;
  tc.bound = bound;
  tc.branching_factor = k;
  detail::enumerate_states(n, bound, tc.states);

  std::map<std::vector<int>, int> index;
  for (int s = 0; s < tc.state_count(); ++s) {
    std::vector<int> key(tc.states[s].begin(), tc.states[s].end());
    index[key] = s;
  }

  tc.rates.resize(tc.state_count());
  tc.exit_rate.assign(tc.state_count(), ScalarTraits<S>::zero());
  for (int s = 0; s < tc.state_count(); ++s) {
    const StateVector& x = tc.states[s];
    std::map<int, S> row;
    auto add = [&](const StateVector& y, const S& rate) {
      if (y.sum() > bound) return;  // Reject: suppressed, not redirected
      std::vector<int> key(y.begin(), y.end());
      const int t = index.at(key);
      if (t == s) return;  // self-loops do not affect the generator
      row[t] += rate;
    };
    for (const auto& e : net.net.arrival_production.entries)
      add(x + e.offspring, net.net.arrival_rate * e.prob);
    for (int i = 0; i < n; ++i) {
      if (x(i) == 0) continue;
      StateVector base = x;
      base(i) -= 1;
      for (const auto& e : net.production(i).entries)
        add(base + e.offspring, net.rate(i) * e.prob);
    }
    for (const auto& [t, rate] : row) {
      tc.rates[s].push_back({t, rate});
      tc.exit_rate[s] += rate;
    }
  }
  return tc;
}

// ---------------------------------------------------------------------------
// Stationary distribution.

template <class S>
struct StationaryResult {
  bool ok = false;
  std::string error;
  RowVector<S> pi;        // over all chain states; zero off the solved class
  bool reducible = false;  // solved on the recurrent class of the origin only
  std::vector<int> solved_class;
};

struct StationaryOptions {
  // Direct elimination is used up to this many states (exact in rational
  // mode); beyond it, float mode falls back to power iteration on the
  // uniformized kernel.
  int dense_limit = 2000;
  double power_tolerance = 1e-12;
  long power_iteration_cap = 500000;
};

namespace detail {

// Kosaraju on the reachable part would need the reverse graph anyway, so just
// compute: the recurrent class of the origin is the set of states that are
// reachable from 0 and can reach 0 back; it must be closed.
template <class S>
std::vector<int> origin_class(const TruncatedChain<S>& tc, bool& closed, bool& proper_subset) {
  const int m = tc.state_count();
  std::vector<char> forward(m, 0);
  std::vector<int> stack{0};
  forward[0] = 1;
  while (!stack.empty()) {
    const int s = stack.back();
    stack.pop_back();
    for (const auto& [t, rate] : tc.rates[s])
      if (!forward[t]) {
        forward[t] = 1;
        stack.push_back(t);
      }
  }
  std::vector<std::vector<int>> reverse(m);
  for (int s = 0; s < m; ++s)
    for (const auto& [t, rate] : tc.rates[s]) reverse[t].push_back(s);
  std::vector<char> backward(m, 0);
  backward[0] = 1;
  stack.push_back(0);
  while (!stack.empty()) {
    const int s = stack.back();
    stack.pop_back();
    for (int t : reverse[s])
      if (!backward[t]) {
        backward[t] = 1;
        stack.push_back(t);
      }
  }
  std::vector<int> cls;
  int reachable = 0;
  for (int s = 0; s < m; ++s) {
    if (forward[s]) ++reachable;
    if (forward[s] && backward[s]) cls.push_back(s);
  }
  closed = true;
  std::vector<char> in_class(m, 0);
  for (int s : cls) in_class[s] = 1;
  for (int s : cls)
    for (const auto& [t, rate] : tc.rates[s])
      if (!in_class[t]) closed = false;
  proper_subset = static_cast<int>(cls.size()) != m;
  return cls;
}

}  // namespace detail

template <class S>
StationaryResult<S> stationary(const TruncatedChain<S>& tc, const StationaryOptions& options = {}) {
  StationaryResult<S> result;
  bool closed = false, proper = false;
  const auto cls = detail::origin_class(tc, closed, proper);
  if (!closed) {
    result.error = "origin is transient in the truncated chain; no stationary distribution";
    return result;
  }
  result.reducible = proper;
  result.solved_class = cls;
  const int c = static_cast<int>(cls.size());
  std::vector<int> local(tc.state_count(), -1);
  for (int i = 0; i < c; ++i) local[cls[i]] = i;

  result.pi = RowVector<S>::Constant(tc.state_count(), ScalarTraits<S>::zero());

  if (c == 1) {
    result.pi(cls[0]) = S(1);
    result.ok = true;
    return result;
  }

  if (c <= options.dense_limit) {
    // pi Q = 0 with one balance equation replaced by normalization.
    Matrix<S> m = Matrix<S>::Constant(c, c, ScalarTraits<S>::zero());
    for (int i = 0; i < c; ++i) {
      const int s = cls[i];
      m(i, i) -= tc.exit_rate[s];
      for (const auto& [t, rate] : tc.rates[s]) m(local[t], i) += rate;
    }
    for (int j = 0; j < c; ++j) m(c - 1, j) = S(1);
    Matrix<S> rhs = Matrix<S>::Constant(c, 1, ScalarTraits<S>::zero());
    rhs(c - 1, 0) = S(1);
    const auto solved = ge_solve<S>(m, rhs);
    if (!solved) {
      result.error = "singular balance system on the recurrent class";
      return result;
    }
    for (int i = 0; i < c; ++i) result.pi(cls[i]) = (*solved)(i, 0);
    result.ok = true;
    return result;
  }

  if constexpr (ScalarTraits<S>::is_exact) {
    result.error = "state count exceeds the exact-elimination limit; use float mode";
    return result;
  } else {
    // Power iteration on P = I + Q/L.
    double max_exit = 0;
    for (int s : cls) max_exit = std::max(max_exit, ScalarTraits<S>::to_double(tc.exit_rate[s]));
    const double uniform_rate = 1.01 * max_exit;
    std::vector<double> pi(c, 1.0 / c), next(c, 0.0);
    for (long it = 0; it < options.power_iteration_cap; ++it) {
      std::fill(next.begin(), next.end(), 0.0);
      for (int i = 0; i < c; ++i) {
        const int s = cls[i];
        const double mass = pi[i];
        next[i] += mass * (1.0 - ScalarTraits<S>::to_double(tc.exit_rate[s]) / uniform_rate);
        for (const auto& [t, rate] : tc.rates[s])
          next[local[t]] += mass * ScalarTraits<S>::to_double(rate) / uniform_rate;
      }
      double diff = 0, total = 0;
      for (int i = 0; i < c; ++i) {
        diff += std::abs(next[i] - pi[i]);
        total += next[i];
      }
      for (int i = 0; i < c; ++i) pi[i] = next[i] / total;
      if (diff <= options.power_tolerance) break;
    }
    for (int i = 0; i < c; ++i) result.pi(cls[i]) = pi[i];
    result.ok = true;
    return result;
  }
}

// Stationary mass on the outermost shell {bound-K+1, ..., bound}; the
// truncation-error diagnostic.
template <class S>
S truncation_mass(const TruncatedChain<S>& tc, const RowVector<S>& pi) {
  S mass = ScalarTraits<S>::zero();
  const int lo = tc.bound - tc.branching_factor + 1;
  for (int s = 0; s < tc.state_count(); ++s)
    if (tc.states[s].sum() >= lo) mass += pi(s);
  return mass;
}

// ---------------------------------------------------------------------------
// Automatic bound selection: double from 4K until the shell mass drops under
// the target.

struct AutoBoundResult {
  bool converged = false;
  int bound = 0;
  TruncatedChain<double> chain;
  StationaryResult<double> pi;
  double shell_mass = 0;
};

struct AutoBoundOptions {
  double shell_target = 1e-6;
  int max_states = 2000000;
  StationaryOptions stationary;
};

inline AutoBoundResult auto_bound(const PureNetwork<double>& net,
                                  const AutoBoundOptions& options = {}) {
  AutoBoundResult result;
  int bound = std::max(4 * net.net.branching_factor, net.net.branching_factor);
  for (;; bound *= 2) {
    TruncatedChain<double> tc = build_truncated(net, bound);
    if (tc.state_count() > options.max_states) return result;  // last attempt kept
    auto pi = stationary(tc, options.stationary);
    if (!pi.ok) return result;
    const double mass = truncation_mass(tc, pi.pi);
    result.bound = bound;
    result.chain = std::move(tc);
    result.pi = std::move(pi);
    result.shell_mass = mass;
    if (mass <= options.shell_target) {
      result.converged = true;
      return result;
    }
  }
}

}  // namespace cbnet
