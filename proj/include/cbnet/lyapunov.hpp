#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "cbnet/simplex.hpp"
#include "cbnet/traffic.hpp"

namespace cbnet {

// Piecewise-linear Lyapunov data: q^(i) is the i-th column of A* normalized
// by its column sum, V(x) = max_i x.q^(i)T, and gamma is the certified drift
// margin min_i (mu_i - lambda_i)/||a^(i)||. All quantities live on the
// reachable queue set of the underlying traffic data.
template <class S>
struct LyapunovData {
  TrafficData<S> traffic;
  Matrix<S> q;  // row i = q^(i), reduced coordinates
  S gamma = ScalarTraits<S>::zero();

  int dim() const { return static_cast<int>(traffic.queue_index.size()); }
};

template <class S>
LyapunovData<S> make_lyapunov(TrafficData<S> traffic) {
  LyapunovData<S> ld;
  const int m = static_cast<int>(traffic.queue_index.size());
  ld.q = Matrix<S>(m, m);
  for (int i = 0; i < m; ++i)
    ld.q.row(i) = traffic.star.col(i).transpose() / traffic.col_norms(i);
  bool first = true;
  for (int i = 0; i < m; ++i) {
    const int g = traffic.queue_index[i];
    const S margin = (traffic.mu(g) - traffic.lambda(g)) / traffic.col_norms(i);
    if (first || margin < ld.gamma) ld.gamma = margin;
    first = false;
  }
  ld.traffic = std::move(traffic);
  return ld;
}

// gamma, or nullopt when the traffic solution is not deficient.
template <class S>
std::optional<S> drift_bound(const LyapunovData<S>& ld) {
  if (!ld.traffic.deficient) return std::nullopt;
  return ld.gamma;
}

template <class S>
struct LyapunovValue {
  S value;
  std::vector<int> argmax;  // global queue indices attaining the max
};

// V(x) = max_i x.q^(i)T with the full argmax set (exact ties in rational
// mode). x is given in full dimension; states carrying jobs on queues outside
// the reachable set are outside V's domain.
template <class S>
LyapunovValue<S> lyapunov_value(const LyapunovData<S>& ld, const StateVector& x) {
  const int m = ld.dim();
  const int n = static_cast<int>(ld.traffic.alpha.size());
  std::vector<char> covered(n, 0);
  for (int i : ld.traffic.queue_index) covered[i] = 1;
  for (int j = 0; j < n; ++j)
    if (x(j) != 0 && !covered[j])
      throw std::invalid_argument("lyapunov_value: state has jobs on a queue outside the reachable set");

  RowVector<S> xr(m);
  for (int i = 0; i < m; ++i) xr(i) = S(x(ld.traffic.queue_index[i]));

  LyapunovValue<S> out;
  out.value = ScalarTraits<S>::zero();
  for (int i = 0; i < m; ++i) {
    const S v = xr.dot(ld.q.row(i));
    if (i == 0 || v > out.value) out.value = v;
  }
  for (int i = 0; i < m; ++i)
    if (xr.dot(ld.q.row(i)) == out.value) out.argmax.push_back(ld.traffic.queue_index[i]);
  return out;
}

// Mean velocity Delta(x) = alpha + sum_{i: x_i != 0} mu_i (-e^(i) + A_i);
// depends on x only through its support pattern.
template <class S>
RowVector<S> mean_velocity(const PureNetwork<S>& net, const StateVector& x) {
  const auto moments = compute_moments(net);
  const int n = net.queue_count();
  RowVector<S> delta = moments.alpha;
  for (int i = 0; i < n; ++i) {
    if (x(i) == 0) continue;
    delta += net.rate(i) * moments.mean_matrix.row(i);
    delta(i) -= net.rate(i);
  }
  return delta;
}

// ---------------------------------------------------------------------------
// Lemma-style max property: if x != 0 and x_i = 0 then x.q^(i)T < V(x).
// Checked per index by an LP feasibility probe for a counterexample
// x >= 0, 1.x = 1, x_i = 0, x.q^(i)T >= x.q^(j)T for all j. The property is a
// theorem, so a feasible witness flags a defect.

template <class S>
struct MaxPropertyEntry {
  int queue;  // global index
  bool holds;
  RowVector<S> witness;  // reduced coordinates, only set when violated
};

template <class S>
StandardLp<S> max_property_witness_lp(const LyapunovData<S>& ld, int i) {
  const int m = ld.dim();
  // Variables: x_0..x_{m-1}, then m-1 surplus vars for the dominance rows.
  const int nv = m + (m - 1);
  Matrix<S> a = Matrix<S>::Constant(m + 1, nv, ScalarTraits<S>::zero());
  RowVector<S> b = RowVector<S>::Constant(m + 1, ScalarTraits<S>::zero());
  for (int j = 0; j < m; ++j) a(0, j) = S(1);
  b(0) = S(1);
  a(1, i) = S(1);  // x_i = 0
  int row = 2;
  for (int j = 0; j < m; ++j) {
    if (j == i) continue;
    for (int k = 0; k < m; ++k) a(row, k) = ld.q(i, k) - ld.q(j, k);
    a(row, m + (row - 2)) = S(-1);
    ++row;
  }
  return {std::move(a), std::move(b), RowVector<S>::Constant(nv, ScalarTraits<S>::zero())};
}

template <class S>
std::vector<MaxPropertyEntry<S>> check_max_property(const LyapunovData<S>& ld) {
  const int m = ld.dim();
  std::vector<MaxPropertyEntry<S>> out;
  out.reserve(m);
  for (int i = 0; i < m; ++i) {
    const auto res = solve_standard_lp(max_property_witness_lp(ld, i));
    MaxPropertyEntry<S> e;
    e.queue = ld.traffic.queue_index[i];
    e.holds = res.status != LpStatus::kOptimal;
    if (!e.holds) e.witness = res.x.head(m);
    out.push_back(std::move(e));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cancellation identities (-e^(i) + A_i).q^(j)T = -[i==j]/||a^(j)||.

template <class S>
struct CancellationReport {
  Matrix<S> values;     // (i,j) -> (-e^(i) + A_i).q^(j)T
  Matrix<S> residuals;  // values minus the identity's right-hand side
  bool ok = false;
};

template <class S>
CancellationReport<S> cancellation_identities(const LyapunovData<S>& ld) {
  const int m = ld.dim();
  CancellationReport<S> rep;
  rep.values = Matrix<S>(m, m);
  rep.residuals = Matrix<S>(m, m);
  rep.ok = true;
  const S slack = ScalarTraits<S>::drift_slack();
  for (int i = 0; i < m; ++i) {
    RowVector<S> row(m);
    for (int k = 0; k < m; ++k)
      row(k) = ld.traffic.mean_matrix(ld.traffic.queue_index[i], ld.traffic.queue_index[k]);
    row(i) -= S(1);
    for (int j = 0; j < m; ++j) {
      rep.values(i, j) = row.dot(ld.q.row(j));
      const S expected = i == j ? S(-1) / ld.traffic.col_norms(j) : ScalarTraits<S>::zero();
      rep.residuals(i, j) = rep.values(i, j) - expected;
      if (abs(rep.residuals(i, j)) > slack) rep.ok = false;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Drift certificate: enumerate every nonempty support pattern and check
// Delta(x_S).q^(i)T <= -gamma for every index i that can attain the max of V
// somewhere on that support region.

enum class DriftStatus { kPass, kNotDeficient, kFailed };

inline const char* to_string(DriftStatus s) {
  switch (s) {
    case DriftStatus::kPass: return "pass";
    case DriftStatus::kNotDeficient: return "not-deficient";
    case DriftStatus::kFailed: return "failed";
  }
  return "?";
}

template <class S>
struct DriftCheck {
  std::uint32_t pattern;  // bitmask over reduced indices
  int queue;              // global index whose q-vector was checked
  S margin;
};

template <class S>
struct DriftCertificate {
  DriftStatus status = DriftStatus::kNotDeficient;
  S gamma = ScalarTraits<S>::zero();
  std::vector<DriftCheck<S>> checks;
};

struct DriftOptions {
  // Default checks all i in the support pattern (sound superset per the max
  // property; indices whose exclusion probe finds a witness are added too).
  // exact_regions determines the attaining set per pattern by LP feasibility.
  bool exact_regions = false;
};

namespace detail {

// Feasibility of {x_j >= 1 on S, x_j = 0 off S, x.(q^(i)-q^(j))T >= 0 all j}:
// nonemptiness of the part of the support region where q^(i) attains V.
// Off-pattern coordinates are dropped; on-pattern ones are shifted by 1.
template <class S>
bool attains_on_pattern(const LyapunovData<S>& ld, std::uint32_t pattern, int i) {
  const int m = ld.dim();
  std::vector<int> support;
  for (int j = 0; j < m; ++j)
    if (pattern & (1u << j)) support.push_back(j);
  const int s = static_cast<int>(support.size());
  const int rows = m - 1;
  if (rows == 0) return true;
  // Variables: y_k (shifted support coords), one surplus per dominance row.
  const int nv = s + rows;
  Matrix<S> a = Matrix<S>::Constant(rows, nv, ScalarTraits<S>::zero());
  RowVector<S> b = RowVector<S>::Constant(rows, ScalarTraits<S>::zero());
  int row = 0;
  for (int j = 0; j < m; ++j) {
    if (j == i) continue;
    S base = ScalarTraits<S>::zero();
    for (int k = 0; k < s; ++k) {
      const S coeff = ld.q(i, support[k]) - ld.q(j, support[k]);
      a(row, k) = coeff;
      base += coeff;
    }
    a(row, s + row) = S(-1);
    b(row) = -base;
    ++row;
  }
  return lp_feasible(a, b);
}

}  // namespace detail

template <class S>
DriftCertificate<S> certify_drift(const LyapunovData<S>& ld, const DriftOptions& options = {}) {
  DriftCertificate<S> cert;
  cert.gamma = ld.gamma;
  if (!ld.traffic.deficient) {
    cert.status = DriftStatus::kNotDeficient;
    return cert;
  }

  const int m = ld.dim();
  if (m > 20) throw std::invalid_argument("certify_drift: support enumeration over >20 queues");

  // Reduced mean velocity per pattern; coordinates off the reachable set are
  // identically zero there.
  RowVector<S> alpha_r(m);
  Matrix<S> rows(m, m);
  RowVector<S> mu_r(m);
  for (int i = 0; i < m; ++i) {
    const int gi = ld.traffic.queue_index[i];
    alpha_r(i) = ld.traffic.alpha(gi);
    mu_r(i) = ld.traffic.mu(gi);
    for (int k = 0; k < m; ++k)
      rows(i, k) = ld.traffic.mean_matrix(gi, ld.traffic.queue_index[k]);
  }

  std::vector<char> excluded_safe(m, 1);
  if (!options.exact_regions) {
    // Indices i with x_i = 0 can never attain V unless the max-property probe
    // finds a witness; compute the probe once per index.
    const auto max_prop = check_max_property(ld);
    for (int i = 0; i < m; ++i) excluded_safe[i] = max_prop[i].holds ? 1 : 0;
  }

  const S slack = ScalarTraits<S>::drift_slack();
  cert.status = DriftStatus::kPass;
  for (std::uint32_t pattern = 1; pattern < (1u << m); ++pattern) {
    RowVector<S> delta = alpha_r;
    for (int i = 0; i < m; ++i) {
      if (!(pattern & (1u << i))) continue;
      delta += mu_r(i) * rows.row(i);
      delta(i) -= mu_r(i);
    }
    for (int i = 0; i < m; ++i) {
      const bool in_pattern = (pattern & (1u << i)) != 0;
      bool check;
      if (options.exact_regions) {
        check = detail::attains_on_pattern(ld, pattern, i);
      } else {
        check = in_pattern || !excluded_safe[i];
      }
      if (!check) continue;
      DriftCheck<S> c{pattern, ld.traffic.queue_index[i], delta.dot(ld.q.row(i))};
      if (c.margin > -ld.gamma + slack) cert.status = DriftStatus::kFailed;
      cert.checks.push_back(std::move(c));
    }
  }
  return cert;
}

}  // namespace cbnet
