#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <limits>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cbnet/network.hpp"
#include "cbnet/rng.hpp"

namespace cbnet {

// Exact CTMDP state: queue sizes plus elapsed simulated time.
struct SimState {
  StateVector queues;
  double clock = 0;
};

// One transition. source 0 is the external arrival stream, source i >= 1 is
// queue i; action indexes into that queue's action list (-1 for arrivals).
struct EventRecord {
  double time = 0;
  int source = 0;
  int action = -1;
  StateVector offspring;
};

// Scheduler interface for the simulator. Policies are stateless and receive
// whatever history they declared via window(); the action for the winning
// queue is drawn when that queue wins the race, which is distributionally
// equivalent to drawing per epoch for static and memoryless policies since
// only the winner's action affects the transition.
class SchedulerPolicy {
 public:
  enum class Kind { kStatic, kMemoryless, kPathDependent };

  virtual ~SchedulerPolicy() = default;
  virtual Kind kind() const = 0;
  virtual int window() const { return 0; }
  virtual void action_distribution(int queue, const SimState& state,
                                   std::span<const EventRecord> history,
                                   std::vector<double>& out) const = 0;
};

class StaticPolicy final : public SchedulerPolicy {
 public:
  explicit StaticPolicy(StaticScheduler<double> sched) : sched_(std::move(sched)) {}
  Kind kind() const override { return Kind::kStatic; }
  void action_distribution(int queue, const SimState&, std::span<const EventRecord>,
                           std::vector<double>& out) const override {
    out = sched_.probs[queue];
  }
  const StaticScheduler<double>& scheduler() const { return sched_; }

 private:
  StaticScheduler<double> sched_;
};

class MemorylessPolicy final : public SchedulerPolicy {
 public:
  using Fn = std::function<std::vector<double>(int queue, const StateVector& state)>;
  explicit MemorylessPolicy(Fn fn) : fn_(std::move(fn)) {}
  Kind kind() const override { return Kind::kMemoryless; }
  void action_distribution(int queue, const SimState& state, std::span<const EventRecord>,
                           std::vector<double>& out) const override {
    out = fn_(queue, state.queues);
  }

 private:
  Fn fn_;
};

// History-dependent policy over a bounded window of recent events (most
// recent last). Window 0 requests the full history; such policies are
// accepted but hold the whole run in memory.
class PathDependentPolicy final : public SchedulerPolicy {
 public:
  using Fn = std::function<std::vector<double>(int queue, const StateVector& state,
                                               std::span<const EventRecord> history)>;
  PathDependentPolicy(Fn fn, int window) : fn_(std::move(fn)), window_(window) {}
  Kind kind() const override { return Kind::kPathDependent; }
  int window() const override { return window_; }
  void action_distribution(int queue, const SimState& state, std::span<const EventRecord> history,
                           std::vector<double>& out) const override {
    out = fn_(queue, state.queues, history);
  }

 private:
  Fn fn_;
  int window_;
};

// ---------------------------------------------------------------------------
// Reports.

enum class SimStatus { kCompleted, kPartialCycles, kBudgetExceededBeforeFirstReturn };

inline const char* to_string(SimStatus s) {
  switch (s) {
    case SimStatus::kCompleted: return "completed";
    case SimStatus::kPartialCycles: return "partial-cycles";
    case SimStatus::kBudgetExceededBeforeFirstReturn: return "budget-exceeded-before-first-return";
  }
  return "?";
}

// Aggregates over a contiguous block of regeneration cycles; basis of the
// batch-means confidence intervals.
struct SimBatch {
  std::uint64_t cycles = 0;
  double time = 0;
  std::vector<double> busy_time;
  std::vector<std::vector<double>> firings;
};

struct TailFit {
  bool ok = false;
  double rate = 0;           // geometric decay: mass at total size k ~ exp(-rate*k)
  double log_intercept = 0;  // fitted log-mass at k = 0
  int k_begin = 0;
  int k_end = 0;
};

struct SimCi {
  double mean_return_time = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> utilization;
  std::vector<std::vector<double>> firing_freq;
};

struct SimTrace {
  double bucket_width = 1.0;
  std::vector<double> weighted_size;  // integral of ||x|| dt per bucket
  std::vector<double> covered;        // time covered per bucket
};

struct SimReport {
  SimStatus status = SimStatus::kCompleted;
  std::uint64_t seed = 0;
  int replicas = 1;
  std::uint64_t cycles = 0;
  double total_time = 0;  // over completed cycles
  std::uint64_t events = 0;
  double mean_return_time = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> utilization;
  std::vector<std::vector<double>> firing_freq;  // per queue, per action
  std::vector<std::vector<std::string>> action_ids;
  std::map<std::vector<int>, double> occupancy;  // state -> fraction of time
  std::vector<double> tail;                      // fraction of time at total size k
  TailFit tail_fit;
  SimCi ci;
  std::vector<SimBatch> batches;
  std::vector<SimTrace> traces;  // one per replica
  double final_total_size = 0;
};

struct SimOptions {
  std::uint64_t seed = 1;
  std::uint64_t cycle_budget = 100000;
  double time_budget = 1e6;  // simulated time
  int replicas = 1;
  std::size_t trace_buckets = 512;
  double occupancy_prune = 1e-12;
};

// ---------------------------------------------------------------------------
// Engine.

namespace detail {

struct CompiledAction {
  std::vector<double> cum_prob;
  std::vector<StateVector> offspring;
};

struct CompiledQueue {
  double rate = 0;
  std::vector<CompiledAction> actions;
  std::vector<double> static_cum;  // cumulative action probabilities (static policies)
};

struct CompiledNet {
  int n = 0;
  double arrival_rate = 0;
  CompiledAction arrival;
  std::vector<CompiledQueue> queues;
};

inline CompiledAction compile_production(const ProductionFunction<double>& p) {
  CompiledAction out;
  double acc = 0;
  for (const auto& e : p.entries) {
    acc += e.prob;
    out.cum_prob.push_back(acc);
    out.offspring.push_back(e.offspring);
  }
  return out;
}

inline CompiledNet compile(const Network<double>& net, const SchedulerPolicy& policy) {
  CompiledNet out;
  out.n = net.queue_count();
  out.arrival_rate = net.arrival_rate;
  out.arrival = compile_production(net.arrival_production);
  for (int i = 0; i < out.n; ++i) {
    CompiledQueue q;
    q.rate = net.queues[i].rate;
    for (const auto& a : net.queues[i].actions) q.actions.push_back(compile_production(a.production));
    if (policy.kind() == SchedulerPolicy::Kind::kStatic) {
      SimState dummy{StateVector::Zero(out.n), 0};
      std::vector<double> probs;
      policy.action_distribution(i, dummy, {}, probs);
      if (probs.size() != net.queues[i].actions.size())
        throw std::invalid_argument("scheduler does not match the network's action sets");
      double acc = 0;
      for (double p : probs) {
        acc += p;
        q.static_cum.push_back(acc);
      }
    }
    out.queues.push_back(std::move(q));
  }
  return out;
}

inline std::size_t pick_cumulative(std::span<const double> cum, double u) {
  // cum is nondecreasing with final entry ~1; u in [0,1).
  const double target = u * cum.back();
  for (std::size_t i = 0; i + 1 < cum.size(); ++i)
    if (target < cum[i]) return i;
  return cum.size() - 1;
}

// One race: sample the sojourn, the winner, the winner's action, and the
// offspring, in that fixed draw order. Returns the event; applies the state
// change to `queues` in place and advances `clock`.
inline EventRecord advance(const CompiledNet& net, const SchedulerPolicy& policy,
                           std::span<const EventRecord> history, StateVector& queues,
                           double& clock, SimRng& rng, std::vector<double>& weights_scratch,
                           std::vector<double>& probs_scratch) {
  auto& w = weights_scratch;
  w.clear();
  w.push_back(net.arrival_rate);
  double total = net.arrival_rate;
  for (int i = 0; i < net.n; ++i)
    if (queues(i) > 0) {
      w.push_back(net.queues[i].rate);
      total += net.queues[i].rate;
    }
  clock += rng.exponential(total);

  std::size_t pick = rng.categorical(w, total);
  int source = 0;
  if (pick > 0) {
    int active = 0;
    for (int i = 0; i < net.n; ++i)
      if (queues(i) > 0 && ++active == static_cast<int>(pick)) {
        source = i + 1;
        break;
      }
  }

  EventRecord ev;
  ev.time = clock;
  ev.source = source;
  const CompiledAction* production = &net.arrival;
  if (source > 0) {
    const auto& q = net.queues[source - 1];
    std::size_t action = 0;
    if (q.actions.size() > 1) {
      if (!q.static_cum.empty()) {
        action = pick_cumulative(q.static_cum, rng.uniform());
      } else {
        SimState view{queues, clock};
        policy.action_distribution(source - 1, view, history, probs_scratch);
        double acc = 0;
        for (double& p : probs_scratch) {
          acc += p;
          p = acc;
        }
        if (std::abs(acc - 1.0) > 1e-9)
          throw std::invalid_argument("policy returned a non-distribution");
        action = pick_cumulative(probs_scratch, rng.uniform());
      }
    }
    ev.action = static_cast<int>(action);
    production = &q.actions[action];
    queues(source - 1) -= 1;
  }
  std::size_t entry = 0;
  if (production->cum_prob.size() > 1) entry = pick_cumulative(production->cum_prob, rng.uniform());
  ev.offspring = production->offspring[entry];
  queues += ev.offspring;
  return ev;
}

}  // namespace detail

// Single CTMDP transition from `state`; the race between arrivals (rate mu0)
// and the nonempty queues, with the winner's production applied.
inline std::pair<SimState, EventRecord> step(const Network<double>& net,
                                             const SchedulerPolicy& policy, const SimState& state,
                                             SimRng& rng) {
  const auto compiled = detail::compile(net, policy);
  SimState next = state;
  std::vector<double> w, p;
  EventRecord ev = detail::advance(compiled, policy, {}, next.queues, next.clock, rng, w, p);
  return {std::move(next), std::move(ev)};
}

namespace detail {

struct ReplicaResult {
  SimStatus status = SimStatus::kCompleted;
  std::uint64_t cycles = 0;
  double cycle_time = 0;  // simulated time covered by completed cycles
  std::uint64_t events = 0;
  std::vector<double> busy_time;
  std::vector<std::vector<double>> firings;
  std::map<std::vector<int>, double> occupancy;
  std::vector<double> tail;
  std::vector<SimBatch> batches;
  SimTrace trace;
  double final_total_size = 0;
  double raw_time = 0;  // includes any trailing partial cycle
};

// Streaming batch means: up to 128 slots; when full, adjacent slots merge and
// the batch size doubles. Deterministic for a fixed cycle sequence.
class BatchCollector {
 public:
  BatchCollector(int queues, const std::vector<std::size_t>& actions) {
    pending_ = make_empty(queues, actions);
    accum_ = make_empty(queues, actions);
  }

  SimBatch& pending() { return pending_; }

  void finish_cycle() {
    add_into(accum_, pending_);
    pending_ = zero_of(pending_);
    if (++accum_count_ == batch_size_) {
      slots_.push_back(accum_);
      accum_ = zero_of(accum_);
      accum_count_ = 0;
      if (slots_.size() == 128) {
        std::vector<SimBatch> merged;
        merged.reserve(64);
        for (std::size_t i = 0; i < slots_.size(); i += 2) {
          add_into(slots_[i], slots_[i + 1]);
          merged.push_back(std::move(slots_[i]));
        }
        slots_ = std::move(merged);
        batch_size_ *= 2;
      }
    }
  }

  // Unfinished sub-batch cycles are appended as a final (smaller) batch.
  std::vector<SimBatch> take() {
    if (accum_.cycles > 0) slots_.push_back(accum_);
    return std::move(slots_);
  }

 private:
  static SimBatch make_empty(int queues, const std::vector<std::size_t>& actions) {
    SimBatch b;
    b.busy_time.assign(queues, 0.0);
    b.firings.resize(queues);
    for (int i = 0; i < queues; ++i) b.firings[i].assign(actions[i], 0.0);
    return b;
  }
  static SimBatch zero_of(const SimBatch& like) {
    SimBatch b = like;
    b.cycles = 0;
    b.time = 0;
    for (auto& v : b.busy_time) v = 0;
    for (auto& row : b.firings)
      for (auto& v : row) v = 0;
    return b;
  }
  static void add_into(SimBatch& dst, const SimBatch& src) {
    dst.cycles += src.cycles;
    dst.time += src.time;
    for (std::size_t i = 0; i < dst.busy_time.size(); ++i) dst.busy_time[i] += src.busy_time[i];
    for (std::size_t i = 0; i < dst.firings.size(); ++i)
      for (std::size_t k = 0; k < dst.firings[i].size(); ++k) dst.firings[i][k] += src.firings[i][k];
  }

  SimBatch pending_;
  SimBatch accum_;
  std::uint64_t accum_count_ = 0;
  std::uint64_t batch_size_ = 1;
  std::vector<SimBatch> slots_;
};

inline void trace_add(SimTrace& trace, std::size_t max_buckets, double t0, double t1, double size) {
  while (t1 >= trace.bucket_width * static_cast<double>(max_buckets)) {
    // Halve the resolution: merge adjacent buckets.
    std::vector<double> ws, cov;
    for (std::size_t i = 0; i < trace.weighted_size.size(); i += 2) {
      const bool has2 = i + 1 < trace.weighted_size.size();
      ws.push_back(trace.weighted_size[i] + (has2 ? trace.weighted_size[i + 1] : 0.0));
      cov.push_back(trace.covered[i] + (has2 ? trace.covered[i + 1] : 0.0));
    }
    trace.weighted_size = std::move(ws);
    trace.covered = std::move(cov);
    trace.bucket_width *= 2;
  }
  double t = t0;
  while (t < t1) {
    const auto b = static_cast<std::size_t>(t / trace.bucket_width);
    const double bucket_end = (static_cast<double>(b) + 1.0) * trace.bucket_width;
    const double dt = std::min(t1, bucket_end) - t;
    if (trace.weighted_size.size() <= b) {
      trace.weighted_size.resize(b + 1, 0.0);
      trace.covered.resize(b + 1, 0.0);
    }
    trace.weighted_size[b] += size * dt;
    trace.covered[b] += dt;
    t = std::min(t1, bucket_end);
  }
}

inline ReplicaResult run_replica(const CompiledNet& net, const SchedulerPolicy& policy,
                                 const SimOptions& options, std::uint64_t replica) {
  const int n = net.n;
  std::vector<std::size_t> action_counts;
  for (const auto& q : net.queues) action_counts.push_back(q.actions.size());

  ReplicaResult r;
  r.busy_time.assign(n, 0.0);
  r.firings.resize(n);
  for (int i = 0; i < n; ++i) r.firings[i].assign(action_counts[i], 0.0);

  SimRng rng(options.seed, replica);
  StateVector x = StateVector::Zero(n);
  double clock = 0;
  bool left_zero = false;

  BatchCollector batches(n, action_counts);
  // Per-cycle occupancy and tail go straight to the totals; they are
  // normalized by raw elapsed time at report time.
  std::map<std::vector<int>, double> occupancy;
  std::vector<double> tail;
  std::vector<EventRecord> history;
  const int window = policy.kind() == SchedulerPolicy::Kind::kPathDependent ? policy.window() : -1;

  std::vector<double> weights_scratch, probs_scratch;
  std::vector<int> state_key(n);

  auto dwell = [&](const StateVector& s, double t0, double t1) {
    const double dt = t1 - t0;
    if (dt <= 0) return;
    for (int i = 0; i < n; ++i) state_key[i] = s(i);
    occupancy[state_key] += dt;
    const auto total = static_cast<std::size_t>(s.sum());
    if (tail.size() <= total) tail.resize(total + 1, 0.0);
    tail[total] += dt;
    for (int i = 0; i < n; ++i)
      if (s(i) > 0) batches.pending().busy_time[i] += dt;
    trace_add(r.trace, options.trace_buckets, t0, t1, static_cast<double>(total));
  };

  StateVector x_before = x;
  while (r.cycles < options.cycle_budget) {
    const double t_before = clock;
    x_before = x;
    EventRecord ev = advance(net, policy, history, x, clock, rng, weights_scratch, probs_scratch);
    if (ev.time > options.time_budget) {
      // Clip the final dwell interval at the budget boundary; the event past
      // the boundary never happens.
      dwell(x_before, t_before, options.time_budget);
      x = x_before;
      clock = options.time_budget;
      break;
    }
    dwell(x_before, t_before, ev.time);
    if (ev.source > 0) batches.pending().firings[ev.source - 1][ev.action] += 1;
    ++r.events;
    if (window >= 0) {
      history.push_back(ev);
      if (window > 0 && static_cast<int>(history.size()) > window)
        history.erase(history.begin());
    }

    if (x.sum() == 0) {
      if (left_zero) {
        ++r.cycles;
        batches.pending().cycles = 1;
        batches.pending().time = ev.time - r.cycle_time;
        r.cycle_time = ev.time;
        for (int i = 0; i < n; ++i) r.busy_time[i] += batches.pending().busy_time[i];
        for (int i = 0; i < n; ++i)
          for (std::size_t k = 0; k < action_counts[i]; ++k)
            r.firings[i][k] += batches.pending().firings[i][k];
        batches.finish_cycle();
        left_zero = false;
      }
    } else {
      left_zero = true;
    }
  }

  r.raw_time = clock;
  r.status = r.cycles == 0 ? SimStatus::kBudgetExceededBeforeFirstReturn
             : r.cycles < options.cycle_budget ? SimStatus::kPartialCycles
                                               : SimStatus::kCompleted;
  if (r.cycles == 0) {
    // Nothing regenerated: expose the raw partial-cycle aggregates so the
    // report still carries usable diagnostics.
    r.busy_time = batches.pending().busy_time;
    r.firings = batches.pending().firings;
    r.cycle_time = 0;
  }
  r.occupancy = std::move(occupancy);
  r.tail = std::move(tail);
  r.batches = batches.take();
  r.final_total_size = static_cast<double>(x.sum());
  return r;
}

inline TailFit fit_tail(const std::vector<double>& tail, double total_time) {
  TailFit fit;
  if (tail.empty() || total_time <= 0) return fit;
  // Weighted least squares on log h(k), weights h(k), from just past the mode.
  std::size_t mode = 0;
  for (std::size_t k = 0; k < tail.size(); ++k)
    if (tail[k] > tail[mode]) mode = k;
  const std::size_t k0 = mode + 1;
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  int points = 0;
  std::size_t last = 0;
  for (std::size_t k = k0; k < tail.size(); ++k) {
    if (tail[k] <= 0) continue;
    const double h = tail[k] / total_time;
    const double w = tail[k];
    const double y = std::log(h);
    const auto xk = static_cast<double>(k);
    sw += w;
    swx += w * xk;
    swy += w * y;
    swxx += w * xk * xk;
    swxy += w * xk * y;
    ++points;
    last = k;
  }
  if (points < 3) return fit;
  const double det = sw * swxx - swx * swx;
  if (det == 0) return fit;
  const double slope = (sw * swxy - swx * swy) / det;
  fit.rate = -slope;
  fit.log_intercept = (swy * swxx - swx * swxy) / det;
  fit.k_begin = static_cast<int>(k0);
  fit.k_end = static_cast<int>(last);
  fit.ok = fit.rate > 0;
  return fit;
}

}  // namespace detail

// Simulates regeneration cycles (returns to the all-empty state) until the
// cycle budget is met or simulated time runs out. Deterministic for fixed
// (network, policy, seed, budgets, replicas): replicas use derived streams
// (seed, replica index) and merge in index order.
inline SimReport run_cycles(const Network<double>& net, const SchedulerPolicy& policy,
                            const SimOptions& options) {
  if (options.replicas < 1) throw std::invalid_argument("run_cycles: replicas must be >= 1");
  const auto compiled = detail::compile(net, policy);

  std::vector<detail::ReplicaResult> results(options.replicas);
  if (options.replicas == 1) {
    results[0] = detail::run_replica(compiled, policy, options, 0);
  } else {
    std::vector<std::future<detail::ReplicaResult>> futures;
    futures.reserve(options.replicas);
    for (int rep = 0; rep < options.replicas; ++rep)
      futures.push_back(std::async(std::launch::async, [&, rep] {
        return detail::run_replica(compiled, policy, options, static_cast<std::uint64_t>(rep));
      }));
    for (int rep = 0; rep < options.replicas; ++rep) results[rep] = futures[rep].get();
  }

  const int n = net.queue_count();
  SimReport report;
  report.seed = options.seed;
  report.replicas = options.replicas;
  report.utilization.assign(n, 0.0);
  report.firing_freq.resize(n);
  for (int i = 0; i < n; ++i) report.firing_freq[i].assign(net.queues[i].actions.size(), 0.0);
  for (int i = 0; i < n; ++i) {
    std::vector<std::string> ids;
    for (const auto& a : net.queues[i].actions) ids.push_back(a.id);
    report.action_ids.push_back(std::move(ids));
  }

  double raw_time = 0;
  double stat_time = 0;  // denominator for busy/firing rates
  std::vector<double> busy(n, 0.0);
  bool all_completed = true;
  for (const auto& r : results) {
    report.cycles += r.cycles;
    report.total_time += r.cycle_time;
    report.events += r.events;
    raw_time += r.raw_time;
    stat_time += r.cycles > 0 ? r.cycle_time : r.raw_time;
    for (int i = 0; i < n; ++i) busy[i] += r.busy_time[i];
    for (int i = 0; i < n; ++i)
      for (std::size_t k = 0; k < report.firing_freq[i].size(); ++k)
        report.firing_freq[i][k] += r.firings[i][k];
    for (const auto& [state, t] : r.occupancy) report.occupancy[state] += t;
    if (report.tail.size() < r.tail.size()) report.tail.resize(r.tail.size(), 0.0);
    for (std::size_t k = 0; k < r.tail.size(); ++k) report.tail[k] += r.tail[k];
    for (const auto& b : r.batches) report.batches.push_back(b);
    report.traces.push_back(r.trace);
    report.final_total_size = r.final_total_size;  // last replica's endpoint
    if (r.status != SimStatus::kCompleted) all_completed = false;
  }
  report.status = all_completed ? SimStatus::kCompleted
                  : report.cycles == 0 ? SimStatus::kBudgetExceededBeforeFirstReturn
                                       : SimStatus::kPartialCycles;

  // Cycle-averaged statistics over completed cycles; occupancy and the tail
  // histogram are raw time averages over the whole run.
  if (report.cycles > 0) report.mean_return_time = report.total_time / static_cast<double>(report.cycles);
  if (stat_time > 0) {
    for (int i = 0; i < n; ++i) report.utilization[i] = busy[i] / stat_time;
    for (int i = 0; i < n; ++i)
      for (auto& f : report.firing_freq[i]) f /= stat_time;
  }
  if (raw_time > 0) {
    for (auto it = report.occupancy.begin(); it != report.occupancy.end();) {
      it->second /= raw_time;
      it = it->second < options.occupancy_prune ? report.occupancy.erase(it) : std::next(it);
    }
    for (auto& t : report.tail) t /= raw_time;
  }
  report.tail_fit = detail::fit_tail(report.tail, 1.0);

  // Batch-means 95% half-widths (normal approximation) on the ratio
  // estimators; NaN when there are too few batches.
  const auto& batches = report.batches;
  report.ci.utilization.assign(n, std::numeric_limits<double>::quiet_NaN());
  report.ci.firing_freq.resize(n);
  for (int i = 0; i < n; ++i)
    report.ci.firing_freq[i].assign(report.firing_freq[i].size(),
                                    std::numeric_limits<double>::quiet_NaN());
  if (batches.size() >= 8) {
    const auto bcount = static_cast<double>(batches.size());
    auto half_width = [&](auto&& value) {
      double mean = 0;
      for (const auto& b : batches) mean += value(b);
      mean /= bcount;
      double var = 0;
      for (const auto& b : batches) {
        const double d = value(b) - mean;
        var += d * d;
      }
      var /= (bcount - 1.0);
      return 1.96 * std::sqrt(var / bcount);
    };
    report.ci.mean_return_time = half_width(
        [](const SimBatch& b) { return b.cycles > 0 ? b.time / static_cast<double>(b.cycles) : 0.0; });
    for (int i = 0; i < n; ++i)
      report.ci.utilization[i] = half_width(
          [i](const SimBatch& b) { return b.time > 0 ? b.busy_time[i] / b.time : 0.0; });
    for (int i = 0; i < n; ++i)
      for (std::size_t k = 0; k < report.ci.firing_freq[i].size(); ++k)
        report.ci.firing_freq[i][k] = half_width(
            [i, k](const SimBatch& b) { return b.time > 0 ? b.firings[i][k] / b.time : 0.0; });
  }
  return report;
}

// ---------------------------------------------------------------------------
// Exponential moment sum exp(delta ||x||) pi(x), over the observed occupancy
// plus a geometric extrapolation of the unobserved mass past the histogram.

struct MomentEstimate {
  bool diverged = false;
  double value = 0;
};

inline MomentEstimate estimate_exponential_moment(const SimReport& report, double delta) {
  MomentEstimate out;
  if (!report.tail_fit.ok || delta >= report.tail_fit.rate) {
    out.diverged = true;
    return out;
  }
  double observed_mass = 0;
  for (const auto& [state, frac] : report.occupancy) {
    long total = 0;
    for (int v : state) total += v;
    out.value += std::exp(delta * static_cast<double>(total)) * frac;
    observed_mass += frac;
  }
  const double unobserved = std::max(0.0, 1.0 - observed_mass);
  if (unobserved > 0 && !report.tail.empty()) {
    // Spread the missing mass geometrically past the last observed size.
    const double beta = report.tail_fit.rate;
    const auto k0 = static_cast<double>(report.tail.size());
    // sum_{k>=k0} e^{delta k - beta k} / sum_{k>=k0} e^{-beta k}
    const double boost = std::exp(delta * k0) * (1.0 - std::exp(-beta)) /
                         (1.0 - std::exp(delta - beta));
    out.value += unobserved * boost;
  }
  return out;
}

}  // namespace cbnet
