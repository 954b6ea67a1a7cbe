#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cbnet/rational.hpp"

using cbnet::Rational;
using cbnet::parse_rational;
using cbnet::to_string;

TEST_CASE("arithmetic and normalization") {
  CHECK(Rational(2, 4) == Rational(1, 2));
  CHECK(Rational(1, 3) + Rational(1, 6) == Rational(1, 2));
  CHECK(Rational(7, 30) * Rational(5, 7) == Rational(1, 6));
  CHECK(Rational(1) / Rational(30, 23) == Rational(23, 30));
  CHECK(-Rational(3, 4) < Rational(0));
  CHECK(abs(Rational(-3, 4)) == Rational(3, 4));
}

TEST_CASE("string round trips") {
  CHECK(to_string(Rational(35, 138)) == "35/138");
  CHECK(to_string(Rational(5)) == "5");
  CHECK(to_string(Rational(-1, 8)) == "-1/8");

  CHECK(*parse_rational("35/138") == Rational(35, 138));
  CHECK(*parse_rational("-7/30") == Rational(-7, 30));
  CHECK(*parse_rational("4") == Rational(4));
  CHECK(*parse_rational("0.2") == Rational(1, 5));
  CHECK(*parse_rational("1.25e2") == Rational(125));
  CHECK(*parse_rational("2.5e-3") == Rational(1, 400));
}

TEST_CASE("malformed input is rejected") {
  CHECK_FALSE(parse_rational("1/0").has_value());
  CHECK_FALSE(parse_rational("").has_value());
  CHECK_FALSE(parse_rational("a/b").has_value());
  CHECK_FALSE(parse_rational("1/").has_value());
  CHECK_FALSE(parse_rational("1.2.3").has_value());
}

TEST_CASE("double conversion") {
  CHECK(Rational(1, 2).to_double() == 0.5);
  CHECK(Rational(14, 23).to_double() == doctest::Approx(14.0 / 23.0));
}
