#pragma once

// Shared fixture networks. These mirror the JSON files under fixtures/ so
// library-level tests do not depend on the parser.

#include <string>
#include <vector>

#include "cbnet/network.hpp"

namespace cbnet::testing {

inline StateVector sv(std::initializer_list<int> values) {
  StateVector v(static_cast<int>(values.size()));
  int k = 0;
  for (int x : values) v(k++) = x;
  return v;
}

template <class S>
ProductionFunction<S> production(std::vector<ProductionEntry<S>> entries) {
  ProductionFunction<S> p{std::move(entries)};
  p.canonicalize();
  return p;
}

// Two queues, arrivals 0 -> {1} at rate 7/30; queue 1 (mu = 5/12) spawns two
// 2-jobs with probability 1/5, queue 2 (mu = 7/20) spawns a 1-job and a 2-job
// with probability 1/6. Rates sum to 1.
inline Network<Rational> fig1_network() {
  Network<Rational> net;
  net.branching_factor = 2;
  net.arrival_rate = Rational(7, 30);
  net.arrival_production = production<Rational>({{sv({1, 0}), Rational(1)}});
  Queue<Rational> q1;
  q1.rate = Rational(5, 12);
  q1.actions.push_back({"serve",
                        production<Rational>({{sv({0, 2}), Rational(1, 5)},
                                              {sv({0, 0}), Rational(4, 5)}}),
                        std::nullopt});
  Queue<Rational> q2;
  q2.rate = Rational(7, 20);
  q2.actions.push_back({"serve",
                        production<Rational>({{sv({1, 1}), Rational(1, 6)},
                                              {sv({0, 0}), Rational(5, 6)}}),
                        std::nullopt});
  net.queues = {q1, q2};
  return net;
}

inline PureNetwork<Rational> fig1_pure() { return *PureNetwork<Rational>::from(fig1_network()); }

// Every arrival creates one job for each of the two queues; both queues only
// consume. No product form despite per-queue M/M/1 marginals.
inline Network<Rational> npf_network() {
  Network<Rational> net;
  net.branching_factor = 2;
  net.arrival_rate = Rational(1);
  net.arrival_production = production<Rational>({{sv({1, 1}), Rational(1)}});
  for (int i = 0; i < 2; ++i) {
    Queue<Rational> q;
    q.rate = Rational(3);
    q.actions.push_back({"serve", production<Rational>({{sv({0, 0}), Rational(1)}}), std::nullopt});
    net.queues.push_back(q);
  }
  return net;
}

inline PureNetwork<Rational> npf_pure() { return *PureNetwork<Rational>::from(npf_network()); }

// Controlled 2-queue network: queue 1 can forward to queue 2 (action "a") or
// drop (action "b"); queue 2 is slow. Only pure-b is stable.
inline Network<Rational> ctrl_network() {
  Network<Rational> net;
  net.branching_factor = 1;
  net.arrival_rate = Rational(1);
  net.arrival_production = production<Rational>({{sv({1, 0}), Rational(1)}});
  Queue<Rational> q1;
  q1.rate = Rational(4);
  q1.actions.push_back({"a", production<Rational>({{sv({0, 1}), Rational(1)}}), std::nullopt});
  q1.actions.push_back({"b", production<Rational>({{sv({0, 0}), Rational(1)}}), std::nullopt});
  Queue<Rational> q2;
  q2.rate = Rational(1, 2);
  q2.actions.push_back({"serve", production<Rational>({{sv({0, 0}), Rational(1)}}), std::nullopt});
  net.queues = {q1, q2};
  return net;
}

// Single queue with arrival job rate 2 against service rate 1.
inline Network<Rational> overloaded_network() {
  Network<Rational> net;
  net.branching_factor = 1;
  net.arrival_rate = Rational(2);
  net.arrival_production = production<Rational>({{sv({1}), Rational(1)}});
  Queue<Rational> q;
  q.rate = Rational(1);
  q.actions.push_back({"serve", production<Rational>({{sv({0}), Rational(1)}}), std::nullopt});
  net.queues = {q};
  return net;
}

inline PureNetwork<Rational> overloaded_pure() {
  return *PureNetwork<Rational>::from(overloaded_network());
}

// M/M/1 with arrival rate `lambda` and service rate `mu`.
inline PureNetwork<Rational> mm1_network(Rational lambda, Rational mu) {
  Network<Rational> net;
  net.branching_factor = 1;
  net.arrival_rate = lambda;
  net.arrival_production = production<Rational>({{sv({1}), Rational(1)}});
  Queue<Rational> q;
  q.rate = mu;
  q.actions.push_back({"serve", production<Rational>({{sv({0}), Rational(1)}}), std::nullopt});
  net.queues = {q};
  return *PureNetwork<Rational>::from(std::move(net));
}

}  // namespace cbnet::testing
