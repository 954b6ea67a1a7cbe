#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cbnet/lp.hpp"
#include "cbnet/lyapunov.hpp"
#include "cbnet/network.hpp"
#include "cbnet/oracle.hpp"
#include "cbnet/simulate.hpp"
#include "cbnet/traffic.hpp"

namespace cbnet {

using Json = nlohmann::ordered_json;

// Input problem: malformed document, wrong type, unparsable rational. The
// `where` path names the offending field.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& where, const std::string& message)
      : std::runtime_error(where + ": " + message), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

namespace detail {

inline Rational rational_field(const Json& v, const std::string& where) {
  std::optional<Rational> parsed;
  if (v.is_string()) {
    parsed = parse_rational(v.get<std::string>());
  } else if (v.is_number_integer()) {
    parsed = Rational(v.get<long long>());
  } else if (v.is_number_float()) {
    // Decimal-literal semantics: the shortest round-trip form of the number.
    parsed = parse_rational(Json(v.get<double>()).dump());
  }
  if (!parsed) throw ParseError(where, "expected a rational (\"p/q\", integer, or decimal)");
  return *parsed;
}

inline const Json& field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key))
    throw ParseError(where, std::string("missing field \"") + key + "\"");
  return obj.at(key);
}

inline ProductionFunction<Rational> production_from_json(const Json& arr, int n,
                                                         const std::string& where) {
  if (!arr.is_array() || arr.empty())
    throw ParseError(where, "production must be a nonempty array of entries");
  ProductionFunction<Rational> p;
  for (std::size_t k = 0; k < arr.size(); ++k) {
    const std::string entry_where = where + "[" + std::to_string(k) + "]";
    const Json& entry = arr.at(k);
    const Json& off = field(entry, "offspring", entry_where);
    if (!off.is_array())
      throw ParseError(entry_where + ".offspring", "expected an array of counts");
    StateVector offspring(static_cast<int>(off.size()));
    for (std::size_t j = 0; j < off.size(); ++j) {
      if (!off.at(j).is_number_integer())
        throw ParseError(entry_where + ".offspring", "counts must be integers");
      offspring(static_cast<int>(j)) = off.at(j).get<int>();
    }
    (void)n;  // length mismatches are reported by validate(), with context
    p.entries.push_back(
        {offspring, rational_field(field(entry, "prob", entry_where), entry_where + ".prob")});
  }
  p.canonicalize();
  return p;
}

inline Json production_to_json(const ProductionFunction<Rational>& p) {
  Json arr = Json::array();
  for (const auto& e : p.entries) {
    Json entry;
    entry["offspring"] = std::vector<int>(e.offspring.begin(), e.offspring.end());
    entry["prob"] = to_string(e.prob);
    arr.push_back(std::move(entry));
  }
  return arr;
}

}  // namespace detail

// Network description document; see docs/format.md. Structural problems
// throw ParseError; semantic ones are validate()'s job.
inline Network<Rational> network_from_json(const Json& doc) {
  Network<Rational> net;
  const Json& n_field = detail::field(doc, "n", "network");
  if (!n_field.is_number_integer() || n_field.get<int>() < 1)
    throw ParseError("n", "queue count must be a positive integer");
  const int n = n_field.get<int>();
  const Json& k_field = detail::field(doc, "K", "network");
  if (!k_field.is_number_integer() || k_field.get<int>() < 0)
    throw ParseError("K", "branching factor must be a nonnegative integer");
  net.branching_factor = k_field.get<int>();

  const Json& arrival = detail::field(doc, "arrival", "network");
  net.arrival_rate = detail::rational_field(detail::field(arrival, "rate", "arrival"), "arrival.rate");
  net.arrival_production =
      detail::production_from_json(detail::field(arrival, "production", "arrival"), n, "arrival.production");

  const Json& queues = detail::field(doc, "queues", "network");
  if (!queues.is_array() || static_cast<int>(queues.size()) != n)
    throw ParseError("queues", "expected an array of exactly n = " + std::to_string(n) + " queues");
  for (int i = 0; i < n; ++i) {
    const std::string qwhere = "queues[" + std::to_string(i) + "]";
    const Json& qj = queues.at(i);
    Queue<Rational> q;
    const Json& actions = detail::field(qj, "actions", qwhere);
    if (!actions.is_array() || actions.empty())
      throw ParseError(qwhere + ".actions", "expected a nonempty array of actions");
    bool all_rated = true;
    for (std::size_t k = 0; k < actions.size(); ++k) {
      const std::string awhere = qwhere + ".actions[" + std::to_string(k) + "]";
      const Json& aj = actions.at(k);
      Action<Rational> a;
      const Json& id = detail::field(aj, "id", awhere);
      if (!id.is_string()) throw ParseError(awhere + ".id", "action id must be a string");
      a.id = id.get<std::string>();
      a.production =
          detail::production_from_json(detail::field(aj, "production", awhere), n, awhere + ".production");
      if (aj.contains("rate"))
        a.rate = detail::rational_field(aj.at("rate"), awhere + ".rate");
      else
        all_rated = false;
      q.actions.push_back(std::move(a));
    }
    if (qj.contains("rate")) {
      q.rate = detail::rational_field(qj.at("rate"), qwhere + ".rate");
    } else if (all_rated) {
      // Extended pre-uniformization form: the queue rate defaults to the
      // fastest action.
      q.rate = *q.actions[0].rate;
      for (const auto& a : q.actions) q.rate = max(q.rate, *a.rate);
    } else {
      throw ParseError(qwhere, "missing field \"rate\"");
    }
    net.queues.push_back(std::move(q));
  }
  return net;
}

inline Json network_to_json(const Network<Rational>& net) {
  Json doc;
  doc["n"] = net.queue_count();
  doc["K"] = net.branching_factor;
  doc["arrival"] = {{"rate", to_string(net.arrival_rate)},
                    {"production", detail::production_to_json(net.arrival_production)}};
  Json queues = Json::array();
  for (const auto& q : net.queues) {
    Json qj;
    qj["rate"] = to_string(q.rate);
    Json actions = Json::array();
    for (const auto& a : q.actions) {
      Json aj;
      aj["id"] = a.id;
      if (a.rate) aj["rate"] = to_string(*a.rate);
      aj["production"] = detail::production_to_json(a.production);
      actions.push_back(std::move(aj));
    }
    qj["actions"] = std::move(actions);
    queues.push_back(std::move(qj));
  }
  doc["queues"] = std::move(queues);
  return doc;
}

// Scheduler document: {"scheduler": {"<queue>": {"<action id>": prob}}} or the
// bare inner mapping; queues are 1-based, omitted actions get probability 0.
// analyze reports can be fed back in unchanged.
inline StaticScheduler<Rational> scheduler_from_json(const Json& doc_in,
                                                     const Network<Rational>& net) {
  const Json& doc = doc_in.is_object() && doc_in.contains("scheduler") ? doc_in.at("scheduler") : doc_in;
  if (!doc.is_object()) throw ParseError("scheduler", "expected an object keyed by queue index");
  StaticScheduler<Rational> sched;
  for (int i = 0; i < net.queue_count(); ++i)
    sched.probs.emplace_back(net.queues[i].actions.size(), Rational(0));
  for (const auto& [key, value] : doc.items()) {
    int queue = 0;
    try {
      queue = std::stoi(key);
    } catch (const std::exception&) {
      throw ParseError("scheduler", "queue key \"" + key + "\" is not an index");
    }
    if (queue < 1 || queue > net.queue_count())
      throw ParseError("scheduler", "queue index " + key + " out of range");
    if (!value.is_object())
      throw ParseError("scheduler." + key, "expected {action id: probability}");
    for (const auto& [action_id, prob] : value.items()) {
      const auto& actions = net.queues[queue - 1].actions;
      int found = -1;
      for (std::size_t k = 0; k < actions.size(); ++k)
        if (actions[k].id == action_id) found = static_cast<int>(k);
      if (found < 0)
        throw ParseError("scheduler." + key, "unknown action id \"" + action_id + "\"");
      sched.probs[queue - 1][found] =
          detail::rational_field(prob, "scheduler." + key + "." + action_id);
    }
  }
  return sched;
}

// ---------------------------------------------------------------------------
// Report serialization. Exact scalars render as "p/q" strings, float mode as
// numbers.

template <class S>
Json scalar_json(const S& v) {
  if constexpr (ScalarTraits<S>::is_exact)
    return to_string(v);
  else
    return v;
}

template <class S>
Json row_json(const RowVector<S>& v) {
  Json arr = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(scalar_json(v(i)));
  return arr;
}

template <class S>
Json matrix_json(const Matrix<S>& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(row_json<S>(m.row(i)));
  return rows;
}

inline Json validation_to_json(const ValidationReport& report) {
  Json out;
  out["ok"] = report.ok();
  Json violations = Json::array();
  for (const auto& v : report.violations)
    violations.push_back({{"where", v.where}, {"message", v.message}});
  out["violations"] = std::move(violations);
  return out;
}

template <class S>
Json traffic_to_json(const TrafficResult<S>& result) {
  Json out;
  out["status"] = to_string(result.status);
  if (result.status == TrafficStatus::kUnreachable) {
    Json q = Json::array();
    for (int i : result.unreachable) q.push_back(i + 1);
    out["unreachable_queues"] = std::move(q);
    return out;
  }
  if (!result.data) return out;
  const auto& d = *result.data;
  out["alpha"] = row_json(d.alpha);
  out["mean_matrix"] = matrix_json(d.mean_matrix);
  Json covered = Json::array();
  for (int i : d.queue_index) covered.push_back(i + 1);
  out["star_queues"] = std::move(covered);
  out["star"] = matrix_json(d.star);
  out["col_norms"] = row_json(d.col_norms);
  out["lambda"] = row_json(d.lambda);
  out["mu"] = row_json(d.mu);
  out["deficient"] = d.deficient;
  return out;
}

template <class S>
Json scheduler_to_json(const Network<S>& net, const StaticScheduler<S>& sched) {
  Json out;
  for (int i = 0; i < net.queue_count(); ++i) {
    Json row;
    for (std::size_t k = 0; k < net.queues[i].actions.size(); ++k)
      row[net.queues[i].actions[k].id] = scalar_json(sched.probs[i][k]);
    out[std::to_string(i + 1)] = std::move(row);
  }
  return out;
}

template <class S>
Json lp_to_json(const TrafficLp<S>& lp, const LpSolution<S>& sol) {
  Json out;
  out["status"] = to_string(sol.status);
  if (sol.status != LpStatus::kOptimal) return out;
  out["delta_star"] = scalar_json(sol.delta_star);
  Json lambda_bar;
  for (int v = 0; v < static_cast<int>(lp.actions.size()); ++v) {
    const auto& ref = lp.actions[v];
    lambda_bar[std::to_string(ref.queue + 1)][ref.id] = scalar_json(sol.lambda_bar(v));
  }
  out["lambda_bar"] = std::move(lambda_bar);
  out["basis"] = sol.basis;
  return out;
}

template <class S>
Json drift_certificate_to_json(const LyapunovData<S>& ld, const DriftCertificate<S>& cert) {
  Json out;
  out["status"] = to_string(cert.status);
  out["gamma"] = scalar_json(cert.gamma);
  out["q"] = matrix_json(ld.q);
  Json covered = Json::array();
  for (int i : ld.traffic.queue_index) covered.push_back(i + 1);
  out["queues"] = std::move(covered);
  Json checks = Json::array();
  for (const auto& c : cert.checks) {
    Json pattern = Json::array();
    for (int b = 0; b < ld.dim(); ++b)
      if (c.pattern & (1u << b)) pattern.push_back(ld.traffic.queue_index[b] + 1);
    checks.push_back(
        {{"support", std::move(pattern)}, {"queue", c.queue + 1}, {"margin", scalar_json(c.margin)}});
  }
  out["checks"] = std::move(checks);
  return out;
}

inline Json sim_report_to_json(const SimReport& report) {
  Json out;
  out["status"] = to_string(report.status);
  out["seed"] = report.seed;
  out["replicas"] = report.replicas;
  out["cycles"] = report.cycles;
  out["events"] = report.events;
  out["total_time"] = report.total_time;
  out["mean_return_time"] = report.cycles > 0 ? Json(report.mean_return_time) : Json(nullptr);
  out["utilization"] = report.utilization;
  Json freq;
  for (std::size_t i = 0; i < report.firing_freq.size(); ++i) {
    Json row;
    for (std::size_t k = 0; k < report.firing_freq[i].size(); ++k)
      row[report.action_ids[i][k]] = report.firing_freq[i][k];
    freq[std::to_string(i + 1)] = std::move(row);
  }
  out["firing_freq"] = std::move(freq);
  Json ci;
  ci["mean_return_time"] =
      std::isnan(report.ci.mean_return_time) ? Json(nullptr) : Json(report.ci.mean_return_time);
  Json ci_util = Json::array();
  for (double v : report.ci.utilization) ci_util.push_back(std::isnan(v) ? Json(nullptr) : Json(v));
  ci["utilization"] = std::move(ci_util);
  Json ci_freq;
  for (std::size_t i = 0; i < report.ci.firing_freq.size(); ++i) {
    Json row;
    for (std::size_t k = 0; k < report.ci.firing_freq[i].size(); ++k) {
      const double v = report.ci.firing_freq[i][k];
      row[report.action_ids[i][k]] = std::isnan(v) ? Json(nullptr) : Json(v);
    }
    ci_freq[std::to_string(i + 1)] = std::move(row);
  }
  ci["firing_freq"] = std::move(ci_freq);
  out["ci"] = std::move(ci);
  out["batches"] = report.batches.size();

  Json occupancy;
  for (const auto& [state, frac] : report.occupancy) {
    std::string key;
    for (std::size_t i = 0; i < state.size(); ++i)
      key += (i ? "," : "") + std::to_string(state[i]);
    occupancy[key] = frac;
  }
  out["occupancy"] = std::move(occupancy);
  out["tail"] = report.tail;
  Json fit;
  fit["ok"] = report.tail_fit.ok;
  fit["rate"] = report.tail_fit.rate;
  fit["log_intercept"] = report.tail_fit.log_intercept;
  fit["k_begin"] = report.tail_fit.k_begin;
  fit["k_end"] = report.tail_fit.k_end;
  out["tail_fit"] = std::move(fit);
  out["final_total_size"] = report.final_total_size;
  return out;
}

template <class S>
Json stationary_to_json(const TruncatedChain<S>& tc, const StationaryResult<S>& result,
                        const S& shell_mass) {
  Json out;
  out["ok"] = result.ok;
  if (!result.ok) {
    out["error"] = result.error;
    return out;
  }
  out["bound"] = tc.bound;
  out["states"] = tc.state_count();
  out["reducible"] = result.reducible;
  out["shell_mass"] = scalar_json(shell_mass);
  const int n = tc.states.empty() ? 0 : static_cast<int>(tc.states[0].size());
  Json busy = Json::array();
  for (int i = 0; i < n; ++i) {
    S mass = ScalarTraits<S>::zero();
    for (int s = 0; s < tc.state_count(); ++s)
      if (tc.states[s](i) > 0) mass += result.pi(s);
    busy.push_back(scalar_json(mass));
  }
  out["busy_probability"] = std::move(busy);
  Json pi;
  for (int s = 0; s < tc.state_count(); ++s) {
    std::string key;
    for (int i = 0; i < n; ++i) key += (i ? "," : "") + std::to_string(tc.states[s](i));
    pi[key] = scalar_json(result.pi(s));
  }
  out["pi"] = std::move(pi);
  return out;
}

}  // namespace cbnet
