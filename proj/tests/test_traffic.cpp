#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cbnet/traffic.hpp"
#include "corpus.hpp"
#include "helpers.hpp"

using namespace cbnet;
using namespace cbnet::testing;

TEST_CASE("figure-1 moments") {
  const auto m = compute_moments(fig1_pure());
  CHECK(m.alpha(0) == Rational(7, 30));
  CHECK(m.alpha(1) == Rational(0));
  CHECK(m.mean_matrix(0, 0) == Rational(0));
  CHECK(m.mean_matrix(0, 1) == Rational(2, 5));
  CHECK(m.mean_matrix(1, 0) == Rational(1, 6));
  CHECK(m.mean_matrix(1, 1) == Rational(1, 6));
}

TEST_CASE("no-product-form moments") {
  const auto m = compute_moments(npf_pure());
  CHECK(m.alpha(0) == Rational(1));
  CHECK(m.alpha(1) == Rational(1));
  CHECK(m.mean_matrix.isConstant(Rational(0)));
}

TEST_CASE("empty production row gives a zero mean row") {
  const auto m = compute_moments(overloaded_pure());
  CHECK(m.mean_matrix(0, 0) == Rational(0));
}

TEST_CASE("figure-1 star matrix, exact") {
  const auto m = compute_moments(fig1_pure());
  const auto star = star_matrix<Rational>(m.mean_matrix);
  REQUIRE(star.has_value());
  CHECK((*star)(0, 0) == Rational(25, 23));
  CHECK((*star)(0, 1) == Rational(12, 23));
  CHECK((*star)(1, 0) == Rational(5, 23));
  CHECK((*star)(1, 1) == Rational(30, 23));
}

TEST_CASE("zero matrix has identity star") {
  const auto star = star_matrix<Rational>(Matrix<Rational>::Constant(3, 3, Rational(0)));
  REQUIRE(star.has_value());
  CHECK(star->isIdentity());
}

TEST_CASE("critical single queue diverges") {
  Matrix<Rational> a(1, 1);
  a(0, 0) = Rational(1);
  CHECK_FALSE(star_matrix<Rational>(a).has_value());
}

TEST_CASE("supercritical matrix diverges via the negative-inverse criterion") {
  Matrix<Rational> a(1, 1);
  a(0, 0) = Rational(2);  // (I-A)^{-1} = -1
  CHECK_FALSE(star_matrix<Rational>(a).has_value());
}

TEST_CASE("figure-1 traffic solution") {
  const auto result = solve_traffic(fig1_pure());
  REQUIRE(result.status == TrafficStatus::kOk);
  const auto& d = *result.data;
  CHECK(d.lambda(0) == Rational(35, 138));
  CHECK(d.lambda(1) == Rational(14, 115));
  CHECK(d.deficient);
  CHECK(d.col_norms(0) == Rational(30, 23));
  CHECK(d.col_norms(1) == Rational(42, 23));
  // Oracle: substitute back into lambda = alpha + lambda A.
  const RowVector<Rational> residual = d.lambda - d.alpha - d.lambda * d.mean_matrix;
  CHECK(residual(0) == Rational(0));
  CHECK(residual(1) == Rational(0));
}

TEST_CASE("no-product-form traffic solution") {
  const auto result = solve_traffic(npf_pure());
  REQUIRE(result.status == TrafficStatus::kOk);
  CHECK(result.data->lambda(0) == Rational(1));
  CHECK(result.data->lambda(1) == Rational(1));
  CHECK(result.data->deficient);
}

TEST_CASE("deficiency is strict") {
  auto net = npf_network();
  net.queues[0].rate = Rational(1);  // lambda_1 == mu_1
  const auto result = solve_traffic(*PureNetwork<Rational>::from(net));
  REQUIRE(result.status == TrafficStatus::kOk);
  CHECK_FALSE(result.data->deficient);
}

TEST_CASE("unreachable queues stop the strict solve") {
  Network<Rational> net;
  net.branching_factor = 1;
  net.arrival_rate = Rational(1);
  net.arrival_production = production<Rational>({{sv({1, 0}), Rational(1)}});
  for (int i = 0; i < 2; ++i) {
    Queue<Rational> q;
    q.rate = Rational(2);
    q.actions.push_back({"serve", production<Rational>({{sv({0, 0}), Rational(1)}}), std::nullopt});
    net.queues.push_back(q);
  }
  const auto pure = *PureNetwork<Rational>::from(net);
  const auto strict = solve_traffic(pure);
  CHECK(strict.status == TrafficStatus::kUnreachable);
  CHECK(strict.unreachable == std::vector<int>{1});

  const auto restricted = solve_traffic(pure, {.restrict_to_reachable = true});
  REQUIRE(restricted.status == TrafficStatus::kOk);
  CHECK(restricted.data->lambda(0) == Rational(1));
  CHECK(restricted.data->lambda(1) == Rational(0));
  CHECK(restricted.data->deficient);
  CHECK(restricted.data->queue_index == std::vector<int>{0});
}

TEST_CASE("fixed-point residual is zero on random solvable instances") {
  std::mt19937_64 rng(1234);
  int solved = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto pure = random_pure_network(rng);
    const auto result = solve_traffic(pure);
    if (result.status != TrafficStatus::kOk) continue;
    ++solved;
    const auto& d = *result.data;
    const RowVector<Rational> residual = d.lambda - d.alpha - d.lambda * d.mean_matrix;
    for (int i = 0; i < residual.size(); ++i) CHECK(residual(i) == Rational(0));
    // Column norms are at least one: A* = I + A A*.
    for (int i = 0; i < d.col_norms.size(); ++i) CHECK(d.col_norms(i) >= Rational(1));
  }
  CHECK(solved > 100);
}

TEST_CASE("float mode residual stays under 1e-10") {
  std::mt19937_64 rng(555);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pure = random_pure_network(rng);
    const auto exact = solve_traffic(pure);
    const auto approx = solve_traffic(network_cast<double>(pure));
    if (exact.status != TrafficStatus::kOk || approx.status != TrafficStatus::kOk) continue;
    const auto& d = *approx.data;
    const RowVector<double> residual = d.lambda - d.alpha - d.lambda * d.mean_matrix;
    for (int i = 0; i < residual.size(); ++i) CHECK(std::abs(residual(i)) <= 1e-10);
  }
}

TEST_CASE("star matrix matches the truncated Neumann sum") {
  std::mt19937_64 rng(777);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = static_cast<int>(draw(rng, 1, 6));
    // Random nonnegative matrix scaled to row sums <= 0.9, hence rho <= 0.9.
    Matrix<double> a(n, n);
    for (int i = 0; i < n; ++i) {
      double row_sum = 0;
      for (int j = 0; j < n; ++j) {
        a(i, j) = static_cast<double>(draw(rng, 0, 100)) / 100.0;
        row_sum += a(i, j);
      }
      if (row_sum > 0) a.row(i) *= (0.9 * static_cast<double>(draw(rng, 1, 100)) / 100.0) / row_sum;
    }
    const auto star = star_matrix<double>(a);
    REQUIRE(star.has_value());
    Matrix<double> neumann = Matrix<double>::Identity(n, n);
    Matrix<double> power = Matrix<double>::Identity(n, n);
    for (int k = 1; k <= 200; ++k) {
      power = power * a;
      neumann += power;
    }
    CHECK(((*star - neumann).cwiseAbs().maxCoeff()) <= 1e-8);
  }
}

TEST_CASE("lambda is monotone in the production means") {
  std::mt19937_64 rng(31337);
  int compared = 0;
  for (int trial = 0; trial < 200 && compared < 60; ++trial) {
    const auto pure = random_pure_network(rng);
    const auto base = solve_traffic(pure);
    if (base.status != TrafficStatus::kOk) continue;

    // Bump one offspring component of one production entry by one.
    auto bumped = pure;
    auto& q = bumped.net.queues[draw(rng, 0, bumped.queue_count() - 1)];
    auto& prod = q.actions[0].production;
    auto& entry = prod.entries[draw(rng, 0, static_cast<long>(prod.entries.size()) - 1)];
    entry.offspring(draw(rng, 0, bumped.queue_count() - 1)) += 1;
    bumped.net.branching_factor += 1;
    prod.canonicalize();

    const auto more = solve_traffic(bumped, {.restrict_to_reachable = true});
    if (more.status != TrafficStatus::kOk) continue;  // may have gone critical
    ++compared;
    for (int i = 0; i < pure.queue_count(); ++i)
      CHECK(more.data->lambda(i) >= base.data->lambda(i));
  }
  CHECK(compared >= 40);
}
