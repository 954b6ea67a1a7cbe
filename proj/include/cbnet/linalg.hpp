#pragma once

#include <optional>

#include <Eigen/Core>

#include "cbnet/scalar.hpp"

namespace cbnet {

// Gauss-Jordan solve of A X = B, templated over the scalar mode. Exact mode
// pivots on the first nonzero entry; float mode uses partial pivoting and
// declares singularity below the documented 1e-12 threshold.
template <class S>
std::optional<Matrix<S>> ge_solve(Matrix<S> a, Matrix<S> b) {
  const Eigen::Index n = a.rows();
  for (Eigen::Index c = 0; c < n; ++c) {
    Eigen::Index pivot = -1;
    if constexpr (ScalarTraits<S>::is_exact) {
      for (Eigen::Index r = c; r < n; ++r)
        if (!(a(r, c) == ScalarTraits<S>::zero())) {
          pivot = r;
          break;
        }
    } else {
      S best = ScalarTraits<S>::pivot_tolerance();
      for (Eigen::Index r = c; r < n; ++r)
        if (abs(a(r, c)) > best) {
          best = abs(a(r, c));
          pivot = r;
        }
    }
    if (pivot < 0) return std::nullopt;
    if (pivot != c) {
      a.row(c).swap(a.row(pivot));
      b.row(c).swap(b.row(pivot));
    }
    const S d = a(c, c);
    a.row(c) /= d;
    b.row(c) /= d;
    for (Eigen::Index r = 0; r < n; ++r) {
      if (r == c || a(r, c) == ScalarTraits<S>::zero()) continue;
      const S f = a(r, c);
      a.row(r) -= f * a.row(c);
      b.row(r) -= f * b.row(c);
    }
  }
  return b;
}

template <class S>
std::optional<Matrix<S>> ge_inverse(const Matrix<S>& a) {
  return ge_solve<S>(a, Matrix<S>::Identity(a.rows(), a.cols()));
}

}  // namespace cbnet
