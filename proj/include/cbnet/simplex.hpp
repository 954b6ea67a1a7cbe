#pragma once

#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "cbnet/scalar.hpp"

namespace cbnet {

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

inline const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
    case LpStatus::kIterationLimit: return "iteration-limit";
  }
  return "?";
}

// min c.x  subject to  A x = b, x >= 0.
template <class S>
struct StandardLp {
  Matrix<S> a;
  RowVector<S> b;
  RowVector<S> c;
};

template <class S>
struct SimplexResult {
  LpStatus status = LpStatus::kIterationLimit;
  RowVector<S> x;
  S objective = ScalarTraits<S>::zero();
  std::vector<int> basis;  // basic variable per row, certificate of the optimum
};

namespace detail {

// Dense simplex tableau with an explicit reduced-cost row. Pivot selection is
// Bland's rule (lowest eligible index), which cannot cycle; determinism of
// the returned basis follows from the fixed variable order.
template <class S>
class Tableau {
 public:
  Tableau(const Matrix<S>& a, const RowVector<S>& b) : t_(a.rows(), a.cols() + 1) {
    t_.leftCols(a.cols()) = a;
    t_.col(a.cols()) = b.transpose();
  }

  Eigen::Index rows() const { return t_.rows(); }
  Eigen::Index cols() const { return t_.cols() - 1; }
  const S& rhs(Eigen::Index r) const { return t_(r, t_.cols() - 1); }
  const S& at(Eigen::Index r, Eigen::Index c) const { return t_(r, c); }

  void set_basis(std::vector<int> basis) { basis_ = std::move(basis); }
  const std::vector<int>& basis() const { return basis_; }

  // Resets the reduced-cost row for objective `cost`, assuming the tableau
  // rows are already in basic form for the current basis.
  void price(const RowVector<S>& cost) {
    reduced_ = RowVector<S>::Constant(t_.cols(), ScalarTraits<S>::zero());
    reduced_.head(cost.size()) = cost;
    objective_ = ScalarTraits<S>::zero();
    for (Eigen::Index r = 0; r < rows(); ++r) {
      const S f = reduced_(basis_[r]);
      if (f == ScalarTraits<S>::zero()) continue;
      reduced_ -= f * t_.row(r);
      objective_ += f * rhs(r);
    }
  }

  S objective() const { return objective_; }
  const S& reduced_cost(Eigen::Index j) const { return reduced_(j); }

  void pivot(Eigen::Index row, Eigen::Index col) {
    t_.row(row) /= t_(row, col);
    for (Eigen::Index r = 0; r < rows(); ++r) {
      if (r == row || t_(r, col) == ScalarTraits<S>::zero()) continue;
      const S f = t_(r, col);
      t_.row(r) -= f * t_.row(row);
    }
    const S g = reduced_(col);
    if (!(g == ScalarTraits<S>::zero())) {
      reduced_ -= g * t_.row(row);
      objective_ += g * rhs(row);
    }
    basis_[row] = static_cast<int>(col);
  }

  void drop_row(Eigen::Index row) {
    const Eigen::Index last = rows() - 1;
    if (row != last) {
      t_.row(row) = t_.row(last);
      basis_[row] = basis_[last];
    }
    t_.conservativeResize(last, Eigen::NoChange);
    basis_.resize(last);
  }

  // Runs Bland-rule iterations until optimality, unboundedness, or the cap.
  // `eligible` bounds the variables allowed to enter (excludes artificials in
  // phase two).
  LpStatus iterate(Eigen::Index eligible, long cap) {
    const S tol = ScalarTraits<S>::lp_tolerance();
    for (long it = 0; it < cap; ++it) {
      Eigen::Index entering = -1;
      for (Eigen::Index j = 0; j < eligible; ++j)
        if (reduced_(j) < -tol) {
          entering = j;
          break;
        }
      if (entering < 0) return LpStatus::kOptimal;

      Eigen::Index leaving = -1;
      S best_ratio = ScalarTraits<S>::zero();
      for (Eigen::Index r = 0; r < rows(); ++r) {
        if (!(t_(r, entering) > tol)) continue;
        const S ratio = rhs(r) / t_(r, entering);
        if (leaving < 0 || ratio < best_ratio ||
            (ratio == best_ratio && basis_[r] < basis_[leaving])) {
          leaving = r;
          best_ratio = ratio;
        }
      }
      if (leaving < 0) return LpStatus::kUnbounded;
      pivot(leaving, entering);
    }
    return LpStatus::kIterationLimit;
  }

 private:
  Matrix<S> t_;
  RowVector<S> reduced_;
  S objective_ = ScalarTraits<S>::zero();
  std::vector<int> basis_;
};

}  // namespace detail

// Two-phase primal simplex. Exact and reproducible in rational mode; float
// mode uses the 1e-9 pivot tolerance and a 10*(rows+cols)^2 iteration cap.
template <class S>
SimplexResult<S> solve_standard_lp(const StandardLp<S>& lp) {
  const Eigen::Index m = lp.a.rows();
  const Eigen::Index nv = lp.a.cols();
  SimplexResult<S> result;

  // Phase one: minimize the sum of one artificial variable per row.
  Matrix<S> a1(m, nv + m);
  a1.leftCols(nv) = lp.a;
  a1.rightCols(m) = Matrix<S>::Identity(m, m);
  RowVector<S> b1 = lp.b;
  for (Eigen::Index r = 0; r < m; ++r)
    if (b1(r) < ScalarTraits<S>::zero()) {
      a1.row(r) = -a1.row(r);
      b1(r) = -b1(r);
    }

  detail::Tableau<S> tab(a1, b1);
  std::vector<int> basis(m);
  std::iota(basis.begin(), basis.end(), static_cast<int>(nv));
  tab.set_basis(std::move(basis));

  RowVector<S> phase1_cost = RowVector<S>::Constant(nv + m, ScalarTraits<S>::zero());
  for (Eigen::Index j = nv; j < nv + m; ++j) phase1_cost(j) = S(1);
  tab.price(phase1_cost);

  const long cap = ScalarTraits<S>::is_exact
                       ? 1000000L
                       : 10L * static_cast<long>((m + nv) * (m + nv));
  LpStatus st = tab.iterate(nv + m, cap);
  if (st == LpStatus::kIterationLimit) {
    result.status = st;
    return result;
  }
  if (tab.objective() > ScalarTraits<S>::lp_tolerance()) {
    result.status = LpStatus::kInfeasible;
    return result;
  }

  // Pivot leftover artificials out of the basis; a row where no structural
  // column is available is linearly dependent and gets dropped.
  for (Eigen::Index r = 0; r < tab.rows();) {
    if (tab.basis()[r] < nv) {
      ++r;
      continue;
    }
    Eigen::Index col = -1;
    for (Eigen::Index j = 0; j < nv; ++j)
      if (!(abs(tab.at(r, j)) <= ScalarTraits<S>::lp_tolerance())) {
        col = j;
        break;
      }
    if (col < 0) {
      tab.drop_row(r);
    } else {
      tab.pivot(r, col);
      ++r;
    }
  }

  // Phase two on the original objective.
  RowVector<S> phase2_cost = RowVector<S>::Constant(nv + m, ScalarTraits<S>::zero());
  phase2_cost.head(nv) = lp.c;
  tab.price(phase2_cost);
  st = tab.iterate(nv, cap);
  if (st != LpStatus::kOptimal) {
    result.status = st;
    return result;
  }

  result.status = LpStatus::kOptimal;
  result.x = RowVector<S>::Constant(nv, ScalarTraits<S>::zero());
  for (Eigen::Index r = 0; r < tab.rows(); ++r)
    if (tab.basis()[r] < nv) result.x(tab.basis()[r]) = tab.rhs(r);
  result.objective = tab.objective();
  result.basis = tab.basis();
  return result;
}

// Feasibility of A x = b, x >= 0 (phase one only).
template <class S>
bool lp_feasible(const Matrix<S>& a, const RowVector<S>& b) {
  StandardLp<S> lp{a, b, RowVector<S>::Constant(a.cols(), ScalarTraits<S>::zero())};
  return solve_standard_lp(lp).status == LpStatus::kOptimal;
}

}  // namespace cbnet
