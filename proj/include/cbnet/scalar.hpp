#pragma once

#include <cmath>
#include <string>

#include <Eigen/Core>

#include "cbnet/rational.hpp"

namespace cbnet {

template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using RowVector = Eigen::Matrix<S, 1, Eigen::Dynamic>;

using StateVector = Eigen::Matrix<int, 1, Eigen::Dynamic>;

// Numeric-mode knobs. Exact mode runs every comparison at zero tolerance;
// float mode uses the documented binary64 tolerances.
template <class S>
struct ScalarTraits;

template <>
struct ScalarTraits<Rational> {
  static constexpr bool is_exact = true;
  static Rational zero() { return Rational(0); }
  static Rational prob_sum_tolerance() { return Rational(0); }
  static Rational pivot_tolerance() { return Rational(0); }
  static Rational lp_tolerance() { return Rational(0); }
  static Rational drift_slack() { return Rational(0); }
  static Rational nonneg_slack() { return Rational(0); }
  static Rational from_rational(const Rational& r) { return r; }
  static double to_double(const Rational& r) { return r.to_double(); }
  static std::string mode_name() { return "rational"; }
};

template <>
struct ScalarTraits<double> {
  static constexpr bool is_exact = false;
  static double zero() { return 0.0; }
  static double prob_sum_tolerance() { return 1e-12; }
  static double pivot_tolerance() { return 1e-12; }
  static double lp_tolerance() { return 1e-9; }
  static double drift_slack() { return 1e-9; }
  static double nonneg_slack() { return 1e-9; }
  static double from_rational(const Rational& r) { return r.to_double(); }
  static double to_double(double v) { return v; }
  static std::string mode_name() { return "float"; }
};

}  // namespace cbnet
