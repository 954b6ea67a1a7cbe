#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "cbnet/network.hpp"
#include "cbnet/traffic.hpp"
#include "corpus.hpp"
#include "helpers.hpp"

using namespace cbnet;
using namespace cbnet::testing;

namespace {

// Independent reachability oracle: i is reachable iff (alpha A^j)_i != 0 for
// some j <= n, evaluated by explicit matrix powers.
std::vector<int> reachable_by_matrix_powers(const PureNetwork<Rational>& net) {
  const auto m = compute_moments(net);
  const int n = net.queue_count();
  std::vector<char> hit(n, 0);
  RowVector<Rational> v = m.alpha;
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i < n; ++i)
      if (!(v(i) == Rational(0))) hit[i] = 1;
    v = v * m.mean_matrix;
  }
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (hit[i]) out.push_back(i);
  return out;
}

}  // namespace

TEST_CASE("figure-1 network validates") {
  CHECK(validate(fig1_network()).ok());
  CHECK(validate(npf_network()).ok());
  CHECK(validate(ctrl_network()).ok());
  CHECK(validate(overloaded_network()).ok());
}

TEST_CASE("probability sum violation is reported with its queue") {
  auto net = fig1_network();
  net.queues[0].actions[0].production.entries[0].prob = Rational(1, 10);  // sums to 0.9
  const auto report = validate(net);
  REQUIRE_FALSE(report.ok());
  bool found = false;
  for (const auto& v : report.violations)
    if (v.where.find("queue 1") != std::string::npos &&
        v.message.find("sum != 1") != std::string::npos)
      found = true;
  CHECK(found);
}

TEST_CASE("empty arrival production violates the nonzero-arrival assumption") {
  auto net = fig1_network();
  net.arrival_production = production<Rational>({{sv({0, 0}), Rational(1)}});
  const auto report = validate(net);
  REQUIRE_FALSE(report.ok());
  CHECK(report.violations[0].message == "nonzero arrival stream required");
}

TEST_CASE("unreachable queue violates validation") {
  // Arrivals only reach queue 1 and queue 1 produces nothing.
  Network<Rational> net;
  net.branching_factor = 1;
  net.arrival_rate = Rational(1);
  net.arrival_production = production<Rational>({{sv({1, 0}), Rational(1)}});
  for (int i = 0; i < 2; ++i) {
    Queue<Rational> q;
    q.rate = Rational(1);
    q.actions.push_back({"serve", production<Rational>({{sv({0, 0}), Rational(1)}}), std::nullopt});
    net.queues.push_back(q);
  }
  const auto report = validate(net);
  REQUIRE_FALSE(report.ok());
  CHECK(report.violations[0].where == "queue 2");

  const auto reach = reachable_queues(*PureNetwork<Rational>::from(net));
  CHECK(reach == std::vector<int>{0});
}

TEST_CASE("reachability on the bundled fixtures") {
  CHECK(reachable_queues(fig1_pure()) == std::vector<int>{0, 1});
  CHECK(reachable_queues(npf_pure()) == std::vector<int>{0, 1});
}

TEST_CASE("reachability agrees with the matrix-power oracle on random networks") {
  std::mt19937_64 rng(20240811);
  for (int trial = 0; trial < 200; ++trial) {
    CorpusOptions options;
    options.max_queues = 5;
    options.bias_subcritical = false;
    auto net = random_network(rng, options);
    // Rewire arrivals to a random subset so unreachable queues can occur.
    const int n = net.queue_count();
    ProductionFunction<Rational> arrivals;
    StateVector target = StateVector::Zero(n);
    target(draw(rng, 0, n - 1)) = 1;
    arrivals.entries.push_back({target, Rational(1)});
    net.arrival_production = arrivals;
    const auto pure = induce_pure_network(net, first_action_scheduler(net));
    CHECK(reachable_queues(pure) == reachable_by_matrix_powers(pure));
  }
}

TEST_CASE("inducing a deterministic scheduler picks those production functions") {
  const auto net = ctrl_network();
  StaticScheduler<Rational> pure_a{{{Rational(1), Rational(0)}, {Rational(1)}}};
  const auto induced = induce_pure_network(net, pure_a);
  CHECK(induced.production(0).entries.size() == 1);
  CHECK(induced.production(0).entries[0].offspring == sv({0, 1}));
  CHECK(induced.production(0).entries[0].prob == Rational(1));
}

TEST_CASE("inducing a 50/50 mixture of disjoint productions") {
  // a: {(0,1)} -> 1 and b: {eps} -> 1 under P = (1/2, 1/2).
  const auto net = ctrl_network();
  StaticScheduler<Rational> mix{{{Rational(1, 2), Rational(1, 2)}, {Rational(1)}}};
  const auto induced = induce_pure_network(net, mix);
  const auto& entries = induced.production(0).entries;
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].offspring == sv({0, 0}));
  CHECK(entries[0].prob == Rational(1, 2));
  CHECK(entries[1].offspring == sv({0, 1}));
  CHECK(entries[1].prob == Rational(1, 2));
}

TEST_CASE("inducing merges duplicate offspring vectors") {
  // a: {(0,1) -> 1}, b: {(0,1) -> 1/2, eps -> 1/2}, P = (1/2, 1/2)
  // => {(0,1) -> 3/4, eps -> 1/4}.
  auto net = ctrl_network();
  net.queues[0].actions[1].production = production<Rational>(
      {{sv({0, 1}), Rational(1, 2)}, {sv({0, 0}), Rational(1, 2)}});
  StaticScheduler<Rational> mix{{{Rational(1, 2), Rational(1, 2)}, {Rational(1)}}};
  const auto induced = induce_pure_network(net, mix);
  const auto& entries = induced.production(0).entries;
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].offspring == sv({0, 0}));
  CHECK(entries[0].prob == Rational(1, 4));
  CHECK(entries[1].offspring == sv({0, 1}));
  CHECK(entries[1].prob == Rational(3, 4));
}

TEST_CASE("inducing rejects schedulers that do not match the action sets") {
  const auto net = ctrl_network();
  StaticScheduler<Rational> bad{{{Rational(1)}, {Rational(1)}}};
  CHECK_THROWS_AS(induce_pure_network(net, bad), std::invalid_argument);
}

TEST_CASE("induced networks of full-support schedulers validate") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto net = random_network(rng);
    StaticScheduler<Rational> sched;
    for (const auto& q : net.queues) {
      std::vector<Rational> row;
      Rational total(0);
      for (std::size_t k = 0; k < q.actions.size(); ++k) {
        row.push_back(Rational(draw(rng, 1, 5)));
        total += row.back();
      }
      for (auto& p : row) p /= total;
      sched.probs.push_back(std::move(row));
    }
    CHECK(validate(induce_pure_network(net, sched)).ok());
  }
}

TEST_CASE("inducing is affine in the scheduler") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const auto net = random_network(rng);
    auto random_sched = [&]() {
      StaticScheduler<Rational> s;
      for (const auto& q : net.queues) {
        std::vector<Rational> row;
        Rational total(0);
        for (std::size_t k = 0; k < q.actions.size(); ++k) {
          row.push_back(Rational(draw(rng, 1, 5)));
          total += row.back();
        }
        for (auto& p : row) p /= total;
        s.probs.push_back(std::move(row));
      }
      return s;
    };
    const auto s1 = random_sched();
    const auto s2 = random_sched();
    const Rational w(draw(rng, 0, 4), 4);

    StaticScheduler<Rational> blend;
    for (std::size_t i = 0; i < s1.probs.size(); ++i) {
      std::vector<Rational> row;
      for (std::size_t k = 0; k < s1.probs[i].size(); ++k)
        row.push_back(w * s1.probs[i][k] + (Rational(1) - w) * s2.probs[i][k]);
      blend.probs.push_back(std::move(row));
    }

    const auto mixed = induce_pure_network(net, blend);
    const auto p1 = induce_pure_network(net, s1);
    const auto p2 = induce_pure_network(net, s2);
    // Mixture of the induced production functions, entry by entry.
    for (int i = 0; i < net.queue_count(); ++i) {
      ProductionFunction<Rational> expected;
      for (const auto& e : p1.production(i).entries)
        expected.entries.push_back({e.offspring, w * e.prob});
      for (const auto& e : p2.production(i).entries)
        expected.entries.push_back({e.offspring, (Rational(1) - w) * e.prob});
      expected.canonicalize();
      REQUIRE(expected.entries.size() == mixed.production(i).entries.size());
      for (std::size_t k = 0; k < expected.entries.size(); ++k) {
        CHECK(expected.entries[k].offspring == mixed.production(i).entries[k].offspring);
        CHECK(expected.entries[k].prob == mixed.production(i).entries[k].prob);
      }
    }
  }
}

TEST_CASE("uniformize leaves equal-rate actions alone") {
  auto net = ctrl_network();
  net.queues[0].actions[0].rate = net.queues[0].rate;
  net.queues[0].actions[1].rate = net.queues[0].rate;
  const auto result = uniformize(net);
  REQUIRE(result.ok);
  for (int i = 0; i < net.queue_count(); ++i) {
    CHECK(result.network.queues[i].rate == net.queues[i].rate);
    for (std::size_t k = 0; k < net.queues[i].actions.size(); ++k) {
      const auto& before = net.queues[i].actions[k].production.entries;
      const auto& after = result.network.queues[i].actions[k].production.entries;
      REQUIRE(before.size() == after.size());
      for (std::size_t e = 0; e < before.size(); ++e) CHECK(before[e].prob == after[e].prob);
    }
  }
}

TEST_CASE("uniformize adds the self-loop at rate ratio") {
  // One action at half the queue rate, production {eps -> 1}. The transformed
  // action serves at mu with {eps -> 1/2, e -> 1/2}.
  Network<Rational> net;
  net.branching_factor = 1;
  net.arrival_rate = Rational(1);
  net.arrival_production = production<Rational>({{sv({1}), Rational(1)}});
  Queue<Rational> q;
  q.rate = Rational(6);
  q.actions.push_back({"serve", production<Rational>({{sv({0}), Rational(1)}}), Rational(3)});
  q.actions.push_back({"fast", production<Rational>({{sv({0}), Rational(1)}}), Rational(6)});
  net.queues.push_back(q);

  const auto result = uniformize(net);
  REQUIRE(result.ok);
  CHECK(validate(result.network).ok());
  CHECK(result.network.queues[0].rate == Rational(6));
  const auto& slow = result.network.queues[0].actions[0].production.entries;
  REQUIRE(slow.size() == 2);
  CHECK(slow[0].offspring == sv({0}));
  CHECK(slow[0].prob == Rational(1, 2));
  CHECK(slow[1].offspring == sv({1}));
  CHECK(slow[1].prob == Rational(1, 2));
  const auto& fast = result.network.queues[0].actions[1].production.entries;
  REQUIRE(fast.size() == 1);
  CHECK(fast[0].prob == Rational(1));

  // Oracle: expected holding time until a true departure. Original action:
  // one Exp(3) epoch, mean 1/3. Transformed: geometric number of Exp(6)
  // epochs with success 1/2, mean sum_k k (1/2)^k / 6 = 2/6 = 1/3.
  Rational mean(0);
  Rational level(1, 2);
  for (int k = 1; k <= 64; ++k) {
    mean += Rational(k) * level / Rational(6);
    level /= Rational(2);
  }
  const double original = 1.0 / 3.0;
  CHECK(std::abs(mean.to_double() - original) < 1e-12);
}

TEST_CASE("uniformize preserves expected offspring per unit time") {
  // mu_xi A_xi_j == mu_i A'_xi_j - mu_i (1 - mu_xi/mu_i) [j == i], exactly.
  std::mt19937_64 rng(4242);
  for (int trial = 0; trial < 50; ++trial) {
    CorpusOptions options;
    options.bias_subcritical = false;
    auto net = random_network(rng, options);
    for (int i = 0; i < net.queue_count(); ++i) {
      Rational mu(0);
      for (auto& a : net.queues[i].actions) {
        a.rate = draw_positive_rational(rng, 6, 3);
        mu = max(mu, *a.rate);
      }
      net.queues[i].rate = mu;
    }
    auto before = net;  // uniformize clears action rates
    const auto result = uniformize(net, true);
    REQUIRE(result.ok);
    for (int i = 0; i < net.queue_count(); ++i) {
      const Rational mu = result.network.queues[i].rate;
      for (std::size_t k = 0; k < net.queues[i].actions.size(); ++k) {
        const Rational rate_xi = *before.queues[i].actions[k].rate;
        const auto original = before.queues[i].actions[k].production.mean_offspring(net.queue_count());
        const auto transformed =
            result.network.queues[i].actions[k].production.mean_offspring(net.queue_count());
        for (int j = 0; j < net.queue_count(); ++j) {
          Rational rhs = mu * transformed(j);
          if (j == i) rhs -= mu * (Rational(1) - rate_xi / mu);
          CHECK(rate_xi * original(j) == rhs);
        }
      }
    }
  }
}

TEST_CASE("uniformize self-loop overflow is flag-controlled") {
  // Branching factor 0 cannot absorb the re-enqueued job.
  Network<Rational> net;
  net.branching_factor = 0;
  net.arrival_rate = Rational(1);
  net.arrival_production = production<Rational>({{sv({0}), Rational(1)}});
  Queue<Rational> q;
  q.rate = Rational(2);
  q.actions.push_back({"slow", production<Rational>({{sv({0}), Rational(1)}}), Rational(1)});
  q.actions.push_back({"fast", production<Rational>({{sv({0}), Rational(1)}}), Rational(2)});
  net.queues.push_back(q);

  const auto rejected = uniformize(net);
  CHECK_FALSE(rejected.ok);
  REQUIRE_FALSE(rejected.violations.empty());

  const auto raised = uniformize(net, true);
  REQUIRE(raised.ok);
  CHECK(raised.network.branching_factor == 1);
}
