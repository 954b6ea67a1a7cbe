#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "cbnet/linalg.hpp"
#include "cbnet/network.hpp"
#include "cbnet/scalar.hpp"

namespace cbnet {

template <class S>
struct Moments {
  RowVector<S> alpha;     // expected external arrivals per unit time, per queue
  Matrix<S> mean_matrix;  // A_ij: expected j-jobs produced when queue i fires
};

template <class S>
Moments<S> compute_moments(const PureNetwork<S>& net) {
  const int n = net.queue_count();
  Moments<S> m;
  m.alpha = net.net.arrival_production.mean_offspring(n);
  for (int j = 0; j < n; ++j) m.alpha(j) *= net.net.arrival_rate;
  m.mean_matrix = Matrix<S>::Constant(n, n, ScalarTraits<S>::zero());
  for (int i = 0; i < n; ++i) m.mean_matrix.row(i) = net.production(i).mean_offspring(n);
  return m;
}

// A* = sum_k A^k = (I-A)^{-1}, accepted iff I-A is nonsingular and the
// inverse is entrywise nonnegative; for nonnegative A this matches spectral
// radius < 1 without computing eigenvalues, and is exact in rational mode.
// nullopt means the series diverges.
template <class S>
std::optional<Matrix<S>> star_matrix(const Matrix<S>& a) {
  const Eigen::Index n = a.rows();
  auto inv = ge_inverse<S>(Matrix<S>::Identity(n, n) - a);
  if (!inv) return std::nullopt;
  const S floor = -ScalarTraits<S>::nonneg_slack();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (inv->operator()(i, j) < floor) return std::nullopt;
  return inv;
}

enum class TrafficStatus { kOk, kDivergent, kUnreachable };

inline const char* to_string(TrafficStatus s) {
  switch (s) {
    case TrafficStatus::kOk: return "ok";
    case TrafficStatus::kDivergent: return "divergent";
    case TrafficStatus::kUnreachable: return "unreachable";
  }
  return "?";
}

// Solution of the traffic equations lambda = alpha + lambda A plus the
// derived quantities the Lyapunov construction needs. `queue_index` lists the
// queues covered by `star` and `col_norms`; it is every queue unless the
// reachable-part restriction was requested.
template <class S>
struct TrafficData {
  RowVector<S> alpha;
  Matrix<S> mean_matrix;
  RowVector<S> mu;
  RowVector<S> lambda;
  std::vector<int> queue_index;
  Matrix<S> star;
  RowVector<S> col_norms;
  bool deficient = false;
};

template <class S>
struct TrafficResult {
  TrafficStatus status = TrafficStatus::kDivergent;
  std::optional<TrafficData<S>> data;
  std::vector<int> unreachable;
};

struct TrafficOptions {
  // Solve on the reachable part and extend by lambda = 0 on dead queues.
  // Used for networks induced by partial-support schedulers, where queues
  // that never receive jobs are kept at dimension parity; plain user inputs
  // go through the strict path and fail on unreachable queues instead.
  bool restrict_to_reachable = false;
};

template <class S>
TrafficResult<S> solve_traffic(const PureNetwork<S>& net, const TrafficOptions& options = {}) {
  const int n = net.queue_count();
  TrafficResult<S> result;

  const auto moments = compute_moments(net);
  const auto reachable = reachable_queues(net);
  if (static_cast<int>(reachable.size()) != n && !options.restrict_to_reachable) {
    result.status = TrafficStatus::kUnreachable;
    std::vector<char> seen(n, 0);
    for (int i : reachable) seen[i] = 1;
    for (int i = 0; i < n; ++i)
      if (!seen[i]) result.unreachable.push_back(i);
    return result;
  }

  const int m = static_cast<int>(reachable.size());
  Matrix<S> a_reduced(m, m);
  for (int r = 0; r < m; ++r)
    for (int c = 0; c < m; ++c) a_reduced(r, c) = moments.mean_matrix(reachable[r], reachable[c]);

  auto star = star_matrix<S>(a_reduced);
  if (!star) {
    result.status = TrafficStatus::kDivergent;
    return result;
  }

  TrafficData<S> data;
  data.alpha = moments.alpha;
  data.mean_matrix = moments.mean_matrix;
  data.mu = RowVector<S>::Constant(n, ScalarTraits<S>::zero());
  for (int i = 0; i < n; ++i) data.mu(i) = net.rate(i);
  data.queue_index = reachable;
  data.star = *star;
  data.col_norms = RowVector<S>::Constant(m, ScalarTraits<S>::zero());
  for (int c = 0; c < m; ++c) data.col_norms(c) = star->col(c).sum();

  RowVector<S> alpha_reduced(m);
  for (int c = 0; c < m; ++c) alpha_reduced(c) = moments.alpha(reachable[c]);
  const RowVector<S> lambda_reduced = alpha_reduced * (*star);
  data.lambda = RowVector<S>::Constant(n, ScalarTraits<S>::zero());
  for (int c = 0; c < m; ++c) data.lambda(reachable[c]) = lambda_reduced(c);

  data.deficient = true;
  for (int i = 0; i < n; ++i)
    if (!(data.lambda(i) < data.mu(i))) data.deficient = false;

  result.status = TrafficStatus::kOk;
  result.data = std::move(data);
  return result;
}

}  // namespace cbnet
