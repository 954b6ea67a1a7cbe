#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <sstream>
#include <string>
#include <utility>

#include <boost/multiprecision/cpp_int.hpp>

#include <Eigen/Core>

namespace cbnet {

// Exact rational scalar used by all analytic code paths. Thin wrapper around
// boost::multiprecision::cpp_rational with tightly controlled conversions so
// it can serve as an Eigen scalar type (the raw boost type trips Eigen's
// scalar-promotion SFINAE).
class Rational {
 public:
  using rep_type = boost::multiprecision::cpp_rational;
  using int_type = boost::multiprecision::cpp_int;

  Rational() = default;
  Rational(int v) : v_(v) {}                                  // NOLINT
  Rational(long v) : v_(v) {}                                 // NOLINT
  Rational(long long v) : v_(v) {}                            // NOLINT
  Rational(long long num, long long den) : v_(num, den) {}
  explicit Rational(rep_type v) : v_(std::move(v)) {}
  Rational(int_type num, int_type den) : v_(std::move(num), std::move(den)) {}

  const rep_type& rep() const { return v_; }
  int_type numerator() const { return boost::multiprecision::numerator(v_); }
  int_type denominator() const { return boost::multiprecision::denominator(v_); }

  double to_double() const { return v_.convert_to<double>(); }

  bool is_zero() const { return v_.is_zero(); }
  int sign() const { return v_.sign(); }

  friend Rational operator+(const Rational& a, const Rational& b) { return Rational(a.v_ + b.v_); }
  friend Rational operator-(const Rational& a, const Rational& b) { return Rational(a.v_ - b.v_); }
  friend Rational operator*(const Rational& a, const Rational& b) { return Rational(a.v_ * b.v_); }
  friend Rational operator/(const Rational& a, const Rational& b) { return Rational(a.v_ / b.v_); }
  Rational operator-() const { return Rational(-v_); }
  Rational operator+() const { return *this; }

  Rational& operator+=(const Rational& o) { v_ += o.v_; return *this; }
  Rational& operator-=(const Rational& o) { v_ -= o.v_; return *this; }
  Rational& operator*=(const Rational& o) { v_ *= o.v_; return *this; }
  Rational& operator/=(const Rational& o) { v_ /= o.v_; return *this; }

  friend bool operator==(const Rational& a, const Rational& b) { return a.v_ == b.v_; }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    if (a.v_ < b.v_) return std::strong_ordering::less;
    if (a.v_ > b.v_) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

  friend Rational abs(const Rational& r) { return r.v_.sign() < 0 ? -r : r; }

  friend std::ostream& operator<<(std::ostream& os, const Rational& r) {
    return os << r.v_;
  }

 private:
  rep_type v_;
};

inline Rational min(const Rational& a, const Rational& b) { return a < b ? a : b; }
inline Rational max(const Rational& a, const Rational& b) { return a < b ? b : a; }

// Renders "p/q", or just "p" for integers. parse_rational accepts both forms
// plus decimal literals ("0.2" -> 1/5).
inline std::string to_string(const Rational& r) {
  std::ostringstream os;
  os << r;
  return os.str();
}

namespace detail {

inline bool parse_big_int(const std::string& s, Rational::int_type& out) {
  if (s.empty()) return false;
  std::size_t k = 0;
  bool neg = false;
  if (s[0] == '+' || s[0] == '-') {
    neg = s[0] == '-';
    k = 1;
  }
  if (k == s.size()) return false;
  Rational::int_type acc = 0;
  for (; k < s.size(); ++k) {
    if (s[k] < '0' || s[k] > '9') return false;
    acc = acc * 10 + (s[k] - '0');
  }
  out = neg ? -acc : acc;
  return true;
}

}  // namespace detail

// Parses "p/q", "p", or a decimal literal like "-12.5e-3" into an exact
// rational. Returns nullopt on malformed input or zero denominator.
inline std::optional<Rational> parse_rational(const std::string& text) {
  using Int = Rational::int_type;
  if (text.empty()) return std::nullopt;

  if (auto slash = text.find('/'); slash != std::string::npos) {
    Int num, den;
    if (!detail::parse_big_int(text.substr(0, slash), num)) return std::nullopt;
    if (!detail::parse_big_int(text.substr(slash + 1), den)) return std::nullopt;
    if (den == 0) return std::nullopt;
    return Rational(std::move(num), std::move(den));
  }

  // Decimal form: [sign] digits [. digits] [e|E exponent]
  std::string mantissa = text;
  long exp10 = 0;
  if (auto e = text.find_first_of("eE"); e != std::string::npos) {
    mantissa = text.substr(0, e);
    const std::string exp_str = text.substr(e + 1);
    Int exp_big;
    if (!detail::parse_big_int(exp_str, exp_big)) return std::nullopt;
    if (exp_big > 18 || exp_big < -1000) return std::nullopt;
    exp10 = exp_big.convert_to<long>();
  }
  std::string digits = mantissa;
  if (auto dot = mantissa.find('.'); dot != std::string::npos) {
    digits = mantissa.substr(0, dot) + mantissa.substr(dot + 1);
    exp10 -= static_cast<long>(mantissa.size() - dot - 1);
  }
  Int num;
  if (!detail::parse_big_int(digits, num)) return std::nullopt;
  Int den = 1;
  for (long i = 0; i < (exp10 > 0 ? exp10 : -exp10); ++i) den *= 10;
  if (exp10 >= 0) return Rational(num * den, Int(1));
  return Rational(std::move(num), std::move(den));
}

}  // namespace cbnet

namespace Eigen {

template <>
struct NumTraits<cbnet::Rational> : GenericNumTraits<cbnet::Rational> {
  using Real = cbnet::Rational;
  using NonInteger = cbnet::Rational;
  using Literal = cbnet::Rational;
  using Nested = cbnet::Rational;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 8,
    AddCost = 100,
    MulCost = 100,
  };
  static inline Real epsilon() { return cbnet::Rational(0); }
  static inline Real dummy_precision() { return cbnet::Rational(0); }
  static inline int digits10() { return 0; }
};

}  // namespace Eigen
