#pragma once

// Period-based fluid simulator. Each period injects the chain rates, services
// element buffers with the shares chosen by the per-VM schedulers, charges
// inter-VM hops, and lets the scaler react to buffer overflow.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "coco/graph.hpp"
#include "coco/placement.hpp"
#include "coco/profile.hpp"
#include "coco/scaler.hpp"
#include "coco/scheduler.hpp"
#include "coco/solver.hpp"

namespace coco {

enum class Policy { kCoco, kTraditional, kGreedyPlace, kRandomPlace };

inline std::string_view policy_name(Policy p) {
  switch (p) {
    case Policy::kCoco: return "coco";
    case Policy::kTraditional: return "traditional";
    case Policy::kGreedyPlace: return "greedy";
    case Policy::kRandomPlace: return "random";
  }
  return "unknown";
}

inline std::optional<Policy> parse_policy(std::string_view s) {
  for (const auto p : {Policy::kCoco, Policy::kTraditional, Policy::kGreedyPlace, Policy::kRandomPlace}) {
    if (policy_name(p) == s) return p;
  }
  return std::nullopt;
}

class InfeasiblePlacement : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrafficStep {
  double time_s = 0.0;
  ChainId chain;  // origin chain
  double throughput_MBps = 0.0;
};

struct SimScenario {
  ProcessingGraph graph;
  std::size_t num_vms = 1;
  CostModel cost;
  double period_s = 0.01;
  double buffer_capacity_MB = 1.0;
  double share_floor = 0.001;
  double smoothing = 0.0;
  double duration_s = 1.0;
  std::vector<TrafficStep> traffic;
  double migration_penalty_s = 2e-3;
  double sync_penalty_s = 5e-4;  // per period, cohorts through a runtime replica
  double headroom = 1.1;
  std::size_t cooldown_periods = 100;
  bool scaling = true;
  std::optional<Placement> initial_placement;
  std::uint64_t seed = 0;

  [[nodiscard]] std::vector<std::string> validate() const {
    std::vector<std::string> out;
    for (const auto& v : graph.validate()) out.push_back(v.message);
    if (num_vms == 0) out.emplace_back("num_vms must be at least 1");
    if (!cost.valid()) out.emplace_back("cost model needs t_d > t_intra >= 0");
    if (!(period_s > 0.0)) out.emplace_back("period must be positive");
    if (!(buffer_capacity_MB > 0.0)) out.emplace_back("buffer capacity must be positive");
    if (!(share_floor >= 0.0 && share_floor < 1.0)) out.emplace_back("share floor outside [0, 1)");
    if (!(smoothing >= 0.0 && smoothing < 1.0)) out.emplace_back("smoothing outside [0, 1)");
    if (!(duration_s >= 0.0)) out.emplace_back("duration must be non-negative");
    if (!(headroom >= 1.0)) out.emplace_back("headroom must be at least 1");
    if (!(migration_penalty_s >= 0.0) || !(sync_penalty_s >= 0.0)) {
      out.emplace_back("penalties must be non-negative");
    }
    double last = 0.0;
    for (const auto& s : traffic) {
      if (!(s.time_s >= last)) out.emplace_back("traffic step times must be non-decreasing");
      last = s.time_s;
      if (!(s.throughput_MBps >= 0.0)) out.emplace_back("traffic throughput must be non-negative");
      if (!graph.has_chain(s.chain)) out.emplace_back("traffic step refers to an unknown chain");
    }
    if (initial_placement) {
      try {
        require_complete(graph, *initial_placement);
      } catch (const std::exception& e) {
        out.emplace_back(e.what());
      }
    }
    return out;
  }
};

struct LatencyRecord {
  std::size_t period = 0;
  double time_s = 0.0;
  ChainId chain;  // origin chain
  double latency_ms = 0.0;
  double queueing_ms = 0.0;
};

struct ShareRecord {
  std::size_t period = 0;
  double time_s = 0.0;
  VmId vm;
  ElementId element;
  double share = 0.0;  // for the next period
  double buffer_MB = 0.0;
  double arrival_MBps = 0.0;
  double c = 0.0;
};

struct VmCountRecord {
  std::size_t period = 0;
  double time_s = 0.0;
  std::size_t vms = 0;
};

struct ScalingEvent {
  std::size_t period = 0;
  double time_s = 0.0;
  std::string kind;  // push_aside, scale_out, new_vm
  ElementId target;
  std::vector<Migration> migrations;
  std::optional<ElementId> replica;
  std::optional<VmId> vm;
  double share = 0.0;
  double required = 0.0;
};

struct ElementTotals {
  double injected_MB = 0.0;
  double serviced_MB = 0.0;
  double buffered_MB = 0.0;
  double dropped_MB = 0.0;
};

struct PathSummary {
  ChainId chain;
  ChainId origin;
  std::string name;
  double throughput_MBps = 0.0;
  int inter_hops = 0;
  int intra_hops = 0;
};

struct SimMetrics {
  std::string policy;
  std::size_t periods = 0;
  double period_s = 0.0;
  std::vector<LatencyRecord> latency;
  std::vector<ShareRecord> shares;
  std::vector<VmCountRecord> vm_count;
  std::vector<ScalingEvent> events;
  double accumulated_db = 0.0;  // MB*s, sum over periods of bytes * hops * t_d
  double initial_total_db = 0.0;
  double final_total_db = 0.0;
  double dropped_MB = 0.0;
  std::vector<std::string> element_names;
  std::vector<ElementTotals> elements;
  std::vector<PathSummary> paths;
  std::map<std::string, double> steady_latency_ms;  // by origin chain name
  double steady_latency_mean_ms = 0.0;
  std::size_t final_vms = 0;
  Placement final_placement;
};

// Queueing delay of a buffer drained at `rate`, in seconds.
inline double queueing_delay_s(double buffer_MB, double rate_MBps) {
  if (buffer_MB <= 0.0) return 0.0;
  if (rate_MBps <= 0.0) return std::numeric_limits<double>::infinity();
  return buffer_MB / rate_MBps;
}

// Latency of bytes admitted to chain j: fluid queueing at every element plus
// the transfer cost of each hop plus any penalty in effect.
inline double chain_latency_s(const ProcessingGraph& g, const Placement& p, const CostModel& cost,
                              ChainId j, std::span<const double> buffer_MB,
                              std::span<const double> rate_MBps, double penalty_s,
                              double* queueing_out = nullptr) {
  double queue = 0.0;
  for (const auto i : g.chain(j).elements) {
    queue += queueing_delay_s(buffer_MB[i.index()], rate_MBps[i.index()]);
  }
  const auto hops = chain_hops(g, p, j);
  if (queueing_out) *queueing_out = queue;
  return queue + hops.inter * cost.t_d_inter_vm + hops.intra * cost.t_intra_vm + penalty_s;
}

namespace detail {

inline Placement initial_placement_for(const SimScenario& s, Policy policy) {
  if (s.initial_placement) {
    auto p = *s.initial_placement;
    p.num_vms = std::max(p.num_vms, s.num_vms);
    return p;
  }
  std::optional<Placement> p;
  switch (policy) {
    case Policy::kCoco:
    case Policy::kTraditional: p = optimize_placement(s.graph, s.num_vms, s.cost); break;
    case Policy::kGreedyPlace: p = greedy_place(s.graph, s.num_vms); break;
    case Policy::kRandomPlace: p = random_place(s.graph, s.num_vms, s.seed); break;
  }
  if (!p) {
    throw InfeasiblePlacement("no placement of " + std::to_string(s.graph.num_elements()) +
                              " elements on " + std::to_string(s.num_vms) + " VMs fits");
  }
  return *p;
}

}  // namespace detail

class Simulator {
 public:
  Simulator(SimScenario scenario, Policy policy) : sc_(std::move(scenario)), policy_(policy) {
    const auto problems = sc_.validate();
    if (!problems.empty()) throw std::invalid_argument("invalid scenario: " + problems.front());
    origin_rate_.assign(sc_.graph.num_chains(), 0.0);
    for (const auto& c : sc_.graph.chains()) origin_rate_[c.origin.index()] += c.throughput_MBps;
    apply_traffic(0.0, sc_.graph);
    auto placement = detail::initial_placement_for(sc_, policy_);
    state_ = make_deployment(sc_.graph, std::move(placement), sc_.share_floor);
    periods_ = static_cast<std::size_t>(std::llround(sc_.duration_s / sc_.period_s));
    metrics_.policy = std::string(policy_name(policy_));
    metrics_.period_s = sc_.period_s;
    metrics_.initial_total_db = total_delayed_bytes(state_.graph, state_.placement, sc_.cost);
    resize();
  }

  [[nodiscard]] const DeploymentState& state() const { return state_; }
  [[nodiscard]] std::size_t period() const { return period_; }
  [[nodiscard]] std::size_t total_periods() const { return periods_; }
  [[nodiscard]] const SimMetrics& metrics() const { return metrics_; }

  [[nodiscard]] bool done() const { return period_ >= periods_; }

  void step() {
    const double t0 = static_cast<double>(period_) * sc_.period_s;
    apply_traffic(t0, state_.graph);
    service(t0);
    schedule(t0);
    if (sc_.scaling) scale(t0 + sc_.period_s);
    ++period_;
  }

  SimMetrics run() {
    while (!done()) step();
    return finish();
  }

  // Latency in ms of the bytes admitted to origin chain `origin` in `period`.
  [[nodiscard]] double latency_of_cohort(ChainId origin, std::size_t period) const {
    for (const auto& r : metrics_.latency) {
      if (r.period == period && r.chain == origin) return r.latency_ms;
    }
    throw std::out_of_range("no cohort recorded for that chain and period");
  }

  SimMetrics finish() {
    auto& m = metrics_;
    m.periods = period_;
    m.final_total_db = total_delayed_bytes(state_.graph, state_.placement, sc_.cost);
    m.final_placement = state_.placement;
    m.final_vms = active_vm_count(state_.placement);
    m.element_names.clear();
    for (const auto& e : state_.graph.elements()) m.element_names.push_back(e.name);
    m.elements = totals_;
    for (std::size_t i = 0; i < totals_.size(); ++i) m.elements[i].buffered_MB = element_buffer(ElementId{i});
    m.paths.clear();
    for (const auto& c : state_.graph.chains()) {
      const auto h = chain_hops(state_.graph, state_.placement, c.id);
      m.paths.push_back({c.id, c.origin, c.name, c.throughput_MBps, h.inter, h.intra});
    }
    // Steady state: the last fifth of the run.
    m.steady_latency_ms.clear();
    const std::size_t from = period_ - std::max<std::size_t>(1, period_ / 5);
    double total = 0.0;
    std::size_t origins = 0;
    for (const auto& c : state_.graph.chains()) {
      if (c.origin != c.id) continue;
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& r : m.latency) {
        if (r.chain == c.id && r.period >= from) {
          sum += r.latency_ms;
          ++n;
        }
      }
      if (n == 0) continue;
      m.steady_latency_ms[c.name] = sum / static_cast<double>(n);
      total += sum / static_cast<double>(n);
      ++origins;
    }
    m.steady_latency_mean_ms = origins ? total / static_cast<double>(origins) : 0.0;
    return m;
  }

 private:
  void apply_traffic(double t, ProcessingGraph& g) {
    bool changed = false;
    while (next_step_ < sc_.traffic.size() && sc_.traffic[next_step_].time_s <= t) {
      origin_rate_[sc_.traffic[next_step_].chain.index()] = sc_.traffic[next_step_].throughput_MBps;
      ++next_step_;
      changed = true;
    }
    if (!changed) return;
    for (const auto& c : g.chains()) g.set_chain_throughput(c.id, origin_rate_[c.origin.index()] * c.weight);
  }

  void resize() {
    const auto n = state_.graph.num_elements();
    const auto m = state_.graph.num_chains();
    backlog_.resize(m);
    for (auto& b : backlog_) b.resize(n, 0.0);
    prev_buffer_.resize(n, 0.0);
    served_.resize(n, 0.0);
    dropped_.resize(n, 0.0);
    totals_.resize(n);
    pending_penalty_.resize(m, false);
  }

  [[nodiscard]] double element_buffer(ElementId i) const {
    double b = 0.0;
    for (const auto j : state_.graph.chains_through(i)) b += backlog_[j.index()][i.index()];
    return b;
  }

  void service(double t0) {
    const auto& g = state_.graph;
    const auto n = g.num_elements();
    const double T = sc_.period_s;
    std::vector<std::vector<double>> arrive(g.num_chains(), std::vector<double>(n, 0.0));
    for (const auto& c : g.chains()) {
      if (c.elements.empty()) continue;
      const double injected = c.throughput_MBps * T;
      arrive[c.id.index()][c.elements.front().index()] = injected;
      charge(c.id, 0, injected);
    }
    std::vector<std::vector<std::size_t>> position(g.num_chains(), std::vector<std::size_t>(n, 0));
    for (const auto& c : g.chains()) {
      for (std::size_t k = 0; k < c.elements.size(); ++k) position[c.id.index()][c.elements[k].index()] = k;
    }
    std::vector<double> rate(n, 0.0);
    for (const auto i : g.topological_order()) {
      const auto through = g.chains_through(i);
      const double mu = service_rate(g.element(i).profile, state_.share[i.index()]);
      rate[i.index()] = mu;
      const double capacity = mu * T;
      double offered = 0.0;
      double in = 0.0;
      for (const auto j : through) {
        offered += backlog_[j.index()][i.index()] + arrive[j.index()][i.index()];
        in += arrive[j.index()][i.index()];
      }
      const bool limited = offered > capacity;
      double served = 0.0;
      double left = 0.0;
      for (const auto j : through) {
        const double have = backlog_[j.index()][i.index()] + arrive[j.index()][i.index()];
        const double out = limited ? have * (capacity / offered) : have;
        backlog_[j.index()][i.index()] = have - out;
        left += have - out;
        served += out;
        const auto k = position[j.index()][i.index()];
        const auto& path = g.chain(j).elements;
        if (k + 1 < path.size()) arrive[j.index()][path[k + 1].index()] += out;
        charge(j, k + 1, out);
      }
      double dropped = 0.0;
      if (left > sc_.buffer_capacity_MB) {
        const double keep = sc_.buffer_capacity_MB / left;
        for (const auto j : through) {
          const double b = backlog_[j.index()][i.index()];
          const double kept = b * keep;
          dropped += b - kept;
          backlog_[j.index()][i.index()] = kept;
        }
      }
      served_[i.index()] = served / T;
      dropped_[i.index()] = dropped;
      auto& tot = totals_[i.index()];
      tot.injected_MB += in;
      tot.serviced_MB += served;
      tot.dropped_MB += dropped;
      metrics_.dropped_MB += dropped;
    }

    std::vector<double> buffer(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) buffer[i] = element_buffer(ElementId{i});
    std::vector<double> weight_sum(g.num_chains(), 0.0);
    std::vector<double> lat_sum(g.num_chains(), 0.0);
    std::vector<double> queue_sum(g.num_chains(), 0.0);
    std::vector<std::size_t> members(g.num_chains(), 0);
    std::vector<double> plain_lat(g.num_chains(), 0.0);
    std::vector<double> plain_queue(g.num_chains(), 0.0);
    for (const auto& c : g.chains()) {
      double penalty = 0.0;
      if (pending_penalty_[c.id.index()]) penalty += sc_.migration_penalty_s;
      const bool replica = std::any_of(c.elements.begin(), c.elements.end(),
                                       [&](ElementId i) { return g.element(i).dispatcher.has_value(); });
      if (replica) penalty += sc_.sync_penalty_s;
      double queue = 0.0;
      const double lat = chain_latency_s(g, state_.placement, sc_.cost, c.id, buffer, rate, penalty, &queue);
      const auto o = c.origin.index();
      weight_sum[o] += c.throughput_MBps;
      lat_sum[o] += c.throughput_MBps * lat;
      queue_sum[o] += c.throughput_MBps * queue;
      ++members[o];
      plain_lat[o] += lat;
      plain_queue[o] += queue;
    }
    std::fill(pending_penalty_.begin(), pending_penalty_.end(), false);
    for (const auto& c : g.chains()) {
      if (c.origin != c.id) continue;
      const auto o = c.id.index();
      double lat = 0.0;
      double queue = 0.0;
      if (weight_sum[o] > 0.0) {
        lat = lat_sum[o] / weight_sum[o];
        queue = queue_sum[o] / weight_sum[o];
      } else {
        lat = plain_lat[o] / static_cast<double>(members[o]);
        queue = plain_queue[o] / static_cast<double>(members[o]);
      }
      metrics_.latency.push_back({period_, t0, c.id, lat * 1e3, queue * 1e3});
    }
    metrics_.vm_count.push_back({period_, t0, active_vm_count(state_.placement)});
  }

  // Bytes crossing hop slot h of chain j.
  void charge(ChainId j, std::size_t h, double bytes) {
    if (bytes == 0.0) return;
    const auto slots = hop_slots(state_.graph, state_.placement, j);
    metrics_.accumulated_db += bytes * slots.inter[h] * sc_.cost.t_d_inter_vm;
  }

  void schedule(double t0) {
    const auto& g = state_.graph;
    const auto n = g.num_elements();
    std::vector<std::vector<ElementId>> on_vm(state_.placement.num_vms);
    for (std::size_t i = 0; i < n; ++i) on_vm[state_.placement.at(ElementId{i}).index()].emplace_back(i);
    std::vector<double> buffer(n);
    for (std::size_t i = 0; i < n; ++i) buffer[i] = element_buffer(ElementId{i});
    const SchedulerConfig config{sc_.share_floor, sc_.smoothing};
    for (std::size_t k = 0; k < on_vm.size(); ++k) {
      if (on_vm[k].empty()) continue;
      SchedulerState s{sc_.period_s, {}};
      for (const auto i : on_vm[k]) {
        s.slots.push_back({i, g.element(i).profile, buffer[i.index()], prev_buffer_[i.index()],
                           state_.share[i.index()], sc_.buffer_capacity_MB, dropped_[i.index()],
                           served_[i.index()]});
      }
      const auto alloc = compute_next_shares(s, config);
      for (std::size_t m = 0; m < on_vm[k].size(); ++m) {
        const auto i = on_vm[k][m];
        state_.share[i.index()] = alloc.shares[m];
        metrics_.shares.push_back({period_, t0, VmId{k}, i, alloc.shares[m], buffer[i.index()],
                                   alloc.arrival_MBps[m], alloc.c});
      }
    }
    prev_buffer_ = buffer;
    for (std::size_t i = 0; i < n; ++i) state_.current_MBps[i] = served_[i];
  }

  void scale(double now) {
    const auto& g = state_.graph;
    std::map<VmId, double> lost;
    for (std::size_t i = 0; i < g.num_elements(); ++i) {
      if (dropped_[i] > 0.0) lost[state_.placement.at(ElementId{i})] += dropped_[i];
    }
    std::vector<std::pair<VmId, double>> order(lost.begin(), lost.end());
    std::stable_sort(order.begin(), order.end(),
                     [](const auto& x, const auto& y) { return x.second > y.second; });
    const double timeout = static_cast<double>(sc_.cooldown_periods) * sc_.period_s;
    for (const auto& [vm, bytes] : order) {
      std::optional<ElementId> target;
      double heaviest = -1.0;
      for (std::size_t i = 0; i < g.num_elements(); ++i) {
        if (state_.placement.at(ElementId{i}) != vm) continue;
        const double d = element_demand(g, ElementId{i});
        if (d > heaviest) {
          heaviest = d;
          target = ElementId{i};
        }
      }
      if (!target || !cooldown_elapsed(state_, *target, now, timeout - 1e-9)) continue;
      if (decide_and_apply(*target, now)) return;
    }
  }

  bool decide_and_apply(ElementId i0, double now) {
    const auto& g = state_.graph;
    const auto& profile = g.element(i0).profile;
    const double expected = g.element_load(i0) * sc_.headroom;
    const double current = state_.current_MBps[i0.index()];
    std::optional<ScalingDecision> decision;
    double required = 0.0;
    if (policy_ == Policy::kTraditional) {
      decision = traditional_scale_out(state_, i0, now);
    } else {
      if (!(expected > current)) return false;
      auto outcome = push_aside_scale_up(state_, i0, expected, now);
      if (auto* d = std::get_if<ScalingDecision>(&outcome)) {
        decision = *d;
        required = std::get<PushAside>(d->action).required;
      } else {
        required = cpu_demand(profile, expected) - cpu_demand(profile, current);
        decision = greedy_scale_out(state_, i0, required, now);
      }
    }
    auto applied = apply_decision(state_, *decision);
    ScalingEvent ev;
    ev.period = period_;
    ev.time_s = now;
    ev.target = i0;
    ev.required = required;
    if (const auto* pa = std::get_if<PushAside>(&decision->action)) {
      ev.kind = "push_aside";
      ev.migrations = pa->migrations;
      ev.share = pa->new_share;
    } else if (const auto* so = std::get_if<ScaleOut>(&decision->action)) {
      ev.kind = "scale_out";
      ev.vm = so->vm;
    } else {
      ev.kind = "new_vm";
    }
    ev.replica = applied.replica;
    if (applied.replica) {
      ev.vm = applied.state.placement.at(*applied.replica);
      ev.share = applied.state.share[applied.replica->index()];
    }
    state_ = std::move(applied.state);
    resize();
    for (const auto j : applied.new_chains) pending_penalty_[j.index()] = true;
    for (const auto e : ev.migrations) {
      for (const auto j : state_.graph.chains_through(e.element)) pending_penalty_[j.index()] = true;
    }
    metrics_.events.push_back(std::move(ev));
    return true;
  }

  SimScenario sc_;
  Policy policy_;
  DeploymentState state_;
  std::vector<double> origin_rate_;
  std::size_t next_step_ = 0;
  std::size_t period_ = 0;
  std::size_t periods_ = 0;
  std::vector<std::vector<double>> backlog_;  // [chain][element], MB
  std::vector<double> prev_buffer_;
  std::vector<double> served_;   // MB/s in the last period
  std::vector<double> dropped_;  // MB in the last period
  std::vector<ElementTotals> totals_;
  std::vector<bool> pending_penalty_;
  SimMetrics metrics_;
};

inline SimMetrics run(const SimScenario& scenario, Policy policy) {
  Simulator sim(scenario, policy);
  return sim.run();
}

}  // namespace coco
