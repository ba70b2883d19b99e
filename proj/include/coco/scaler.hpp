#pragma once

// Relieving an overloaded element: push-aside scaling up first (move border
// elements of its co-located run to the neighbouring VMs and grow it in
// place), greedy scaling out onto an existing VM second, a new VM last.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "coco/graph.hpp"
#include "coco/placement.hpp"
#include "coco/profile.hpp"
#include "coco/scheduler.hpp"

namespace coco {

struct DeploymentState {
  ProcessingGraph graph;
  Placement placement;
  std::vector<double> current_MBps;                   // Theta_i^cur, processing speed
  std::vector<double> share;                          // r_i
  std::vector<std::optional<double>> last_scale_up_s;
  std::uint64_t version = 0;
};

class StaleDecision : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Shares of every VM set to the matching allocation for the offered loads.
inline std::vector<double> steady_shares(const ProcessingGraph& g, const Placement& p,
                                         double floor = 0.001) {
  std::vector<double> share(g.num_elements(), 0.0);
  std::vector<std::vector<ElementId>> on_vm(p.num_vms);
  for (std::size_t i = 0; i < g.num_elements(); ++i) on_vm[p.at(ElementId{i}).index()].emplace_back(i);
  for (const auto& members : on_vm) {
    if (members.empty()) continue;
    std::vector<ElementProfile> profiles;
    std::vector<double> demand;
    for (const auto i : members) {
      profiles.push_back(g.element(i).profile);
      demand.push_back(g.element_load(i));
    }
    const auto alloc = allocate_shares(profiles, demand, floor);
    for (std::size_t k = 0; k < members.size(); ++k) share[members[k].index()] = alloc.shares[k];
  }
  return share;
}

inline DeploymentState make_deployment(ProcessingGraph g, Placement p, double floor = 0.001) {
  require_complete(g, p);
  DeploymentState s;
  s.share = steady_shares(g, p, floor);
  s.current_MBps.resize(g.num_elements());
  for (std::size_t i = 0; i < g.num_elements(); ++i) s.current_MBps[i] = g.element_load(ElementId{i});
  s.last_scale_up_s.assign(g.num_elements(), std::nullopt);
  s.graph = std::move(g);
  s.placement = std::move(p);
  return s;
}

inline double vm_share_sum(const DeploymentState& s, VmId k) {
  double sum = 0.0;
  for (std::size_t i = 0; i < s.graph.num_elements(); ++i) {
    if (s.placement.at(ElementId{i}) == k) sum += s.share[i];
  }
  return sum;
}

inline std::size_t active_vm_count(const Placement& p) {
  std::set<VmId> used(p.vm_of.begin(), p.vm_of.end());
  return used.size();
}

// CPU needed to raise i0 from its current to its expected throughput.
inline double required_resource(const ElementProfile& p, double expected_MBps, double current_MBps) {
  if (!(current_MBps >= 0.0)) throw std::invalid_argument("current throughput must be non-negative");
  if (!(expected_MBps > current_MBps)) {
    throw std::invalid_argument("expected throughput does not exceed current; no scaling needed");
  }
  return cpu_for_throughput(p, expected_MBps) - cpu_for_throughput(p, current_MBps);
}

struct BorderElement {
  ElementId element;
  ChainId chain;
  bool upstream;                 // border on i0's upstream side of this chain
  std::optional<VmId> adjacent;  // VM of the chain neighbour beyond the border
};

// Border elements of i0's co-located runs, one entry per (element, chain).
inline std::vector<BorderElement> border_candidates(const DeploymentState& s, ElementId i0) {
  const auto& g = s.graph;
  const auto& p = s.placement;
  const VmId home = p.at(i0);
  std::vector<BorderElement> out;
  for (const auto j : g.chains_through(i0)) {
    for (const bool up : {true, false}) {
      ElementId cur = i0;
      while (true) {
        const auto nb = up ? g.prev(cur, j) : g.next(cur, j);
        if (!nb || p.at(*nb) != home) break;
        cur = *nb;
      }
      if (cur == i0) continue;
      const auto beyond = up ? g.prev(cur, j) : g.next(cur, j);
      std::optional<VmId> adj;
      if (beyond) adj = p.at(*beyond);
      out.push_back({cur, j, up, adj});
    }
  }
  return out;
}

inline std::vector<ElementId> find_border_elements(const DeploymentState& s, ElementId i0) {
  if (!s.graph.has_element(i0)) throw std::out_of_range("unknown element");
  std::set<ElementId> set;
  for (const auto& b : border_candidates(s, i0)) set.insert(b.element);
  return {set.begin(), set.end()};
}

struct Migration {
  ElementId element;
  VmId from;
  VmId to;
  bool operator==(const Migration&) const = default;
};

struct PushAside {
  ElementId target;
  std::vector<Migration> migrations;
  double new_share = 0.0;
  double required = 0.0;
  double released = 0.0;
};

struct ScaleOut {
  ElementId target;
  VmId vm;
  double share = 0.0;             // replica share on vm
  double replica_fraction = 0.0;  // of the target's traffic moved to the replica
};

struct NewVm {
  ElementId target;
  double share = 1.0;
  double replica_fraction = 0.0;
};

struct ScalingDecision {
  std::uint64_t state_version = 0;
  double time_s = 0.0;
  std::variant<PushAside, ScaleOut, NewVm> action;
};

struct NotApplicable {
  int step = 0;
  std::string reason;
};

using PushAsideOutcome = std::variant<ScalingDecision, NotApplicable>;

namespace detail {

inline int total_crossings(const ProcessingGraph& g, const Placement& p, ChainId j) {
  return chain_hops(g, p, j).inter;
}

inline bool crossings_preserved(const ProcessingGraph& g, const Placement& before,
                                const Placement& after) {
  for (const auto& c : g.chains()) {
    if (total_crossings(g, after, c.id) > total_crossings(g, before, c.id)) return false;
  }
  return true;
}

inline bool replica_related(const ProcessingGraph& g, ElementId b) {
  if (g.element(b).dispatcher) return true;
  return std::any_of(g.elements().begin(), g.elements().end(),
                     [&](const Element& e) { return e.dispatcher == b; });
}

}  // namespace detail

inline PushAsideOutcome push_aside_scale_up(const DeploymentState& s, ElementId i0,
                                            double expected_MBps, double now_s = 0.0) {
  const auto& g = s.graph;
  if (!g.has_element(i0)) throw std::out_of_range("unknown element");
  const auto& profile = g.element(i0).profile;
  const double current = s.current_MBps.at(i0.index());
  if (!(expected_MBps > current)) throw std::invalid_argument("element is not overloaded");

  // Step 1: a single core must be able to carry the expected load.
  if (expected_MBps > max_throughput(profile)) return NotApplicable{1, "exceeds one core"};

  // Step 2: border elements of the co-located runs.
  const auto candidates = border_candidates(s, i0);
  if (candidates.empty()) return NotApplicable{2, "no border elements"};

  // Step 3: keep borders whose adjacent VM can absorb them.
  struct Movable {
    ElementId element;
    VmId to;
    double released;
  };
  std::vector<Movable> movable;
  std::set<ElementId> considered;
  for (const auto& b : candidates) {
    if (!b.adjacent || considered.count(b.element)) continue;
    if (detail::replica_related(g, b.element)) continue;
    const double r_b = element_demand(g, b.element);
    if (!(r_b + cpu_load(g, s.placement, *b.adjacent) < 1.0)) continue;
    Placement moved = s.placement;
    moved.vm_of[b.element.index()] = *b.adjacent;
    if (!detail::crossings_preserved(g, s.placement, moved)) continue;
    considered.insert(b.element);
    movable.push_back({b.element, *b.adjacent, r_b});
  }
  if (movable.empty()) return NotApplicable{3, "adjacent VMs full"};

  // Step 4: enough release, and the fewest migrations that provide it.
  const double needed = required_resource(profile, expected_MBps, current);
  double available = 0.0;
  for (const auto& m : movable) available += m.released;
  if (available < needed) return NotApplicable{4, "insufficient release"};

  std::stable_sort(movable.begin(), movable.end(),
                   [](const Movable& x, const Movable& y) { return x.released > y.released; });
  PushAside pa{i0, {}, 0.0, needed, 0.0};
  Placement trial = s.placement;
  std::map<VmId, double> added;
  for (const auto& m : movable) {
    if (pa.released >= needed) break;
    if (!(cpu_load(g, trial, m.to) + m.released < 1.0)) continue;
    Placement next = trial;
    next.vm_of[m.element.index()] = m.to;
    if (!detail::crossings_preserved(g, s.placement, next)) continue;
    trial = std::move(next);
    pa.migrations.push_back({m.element, s.placement.at(m.element), m.to});
    pa.released += m.released;
  }
  if (pa.released < needed) return NotApplicable{4, "insufficient release"};

  const double r0 = s.share.at(i0.index());
  pa.new_share = std::min(r0 + pa.released, r0 + needed);
  return ScalingDecision{s.version, now_s, pa};
}

// Remaining capacity of every VM other than i0's, by offered CPU demand.
inline std::vector<std::pair<VmId, double>> remaining_capacity(const DeploymentState& s,
                                                               ElementId i0) {
  std::vector<std::pair<VmId, double>> out;
  const auto loads = vm_loads(s.graph, s.placement);
  for (std::size_t k = 0; k < s.placement.num_vms; ++k) {
    if (VmId{k} == s.placement.at(i0)) continue;
    out.emplace_back(VmId{k}, 1.0 - loads[k]);
  }
  return out;
}

inline ScalingDecision greedy_scale_out(const DeploymentState& s, ElementId i0, double needed,
                                        double now_s = 0.0) {
  if (!s.graph.has_element(i0)) throw std::out_of_range("unknown element");
  needed = std::max(0.0, needed);
  const double r0 = s.share.at(i0.index());
  const double fraction = needed + r0 > 0.0 ? needed / (needed + r0) : 0.5;
  auto vms = remaining_capacity(s, i0);
  std::stable_sort(vms.begin(), vms.end(),
                   [](const auto& x, const auto& y) { return x.second < y.second; });
  for (const auto& [vm, remaining] : vms) {
    if (remaining >= needed) return {s.version, now_s, ScaleOut{i0, vm, needed, fraction}};
  }
  return {s.version, now_s, NewVm{i0, 1.0, fraction}};
}

// Prior-work baseline: always a replica on a fresh VM with an even split.
inline ScalingDecision traditional_scale_out(const DeploymentState& s, ElementId i0,
                                             double now_s = 0.0) {
  if (!s.graph.has_element(i0)) throw std::out_of_range("unknown element");
  return {s.version, now_s, NewVm{i0, 1.0, 0.5}};
}

struct AppliedDecision {
  DeploymentState state;
  std::optional<ElementId> replica;
  std::vector<ChainId> new_chains;
  std::vector<ElementId> touched;  // elements whose traffic sees a migration
};

namespace detail {

inline void reallocate_vm(DeploymentState& s, VmId k) {
  std::vector<ElementId> members;
  std::vector<ElementProfile> profiles;
  std::vector<double> demand;
  for (std::size_t i = 0; i < s.graph.num_elements(); ++i) {
    if (s.placement.at(ElementId{i}) != k) continue;
    members.emplace_back(i);
    profiles.push_back(s.graph.element(ElementId{i}).profile);
    demand.push_back(s.graph.element_load(ElementId{i}));
  }
  if (members.empty()) return;
  const auto alloc = allocate_shares(profiles, demand, 0.001);
  for (std::size_t m = 0; m < members.size(); ++m) s.share[members[m].index()] = alloc.shares[m];
}

inline AppliedDecision add_replica(DeploymentState s, ElementId i0, VmId vm, double fraction) {
  AppliedDecision out;
  auto& g = s.graph;
  const auto& orig = g.element(i0);
  const ElementId dispatcher = orig.dispatcher.value_or(i0);
  std::size_t serial = 1;
  for (const auto& e : g.elements()) {
    if (e.dispatcher == dispatcher) ++serial;
  }
  const std::string name = g.element(dispatcher).name + "'" + std::to_string(serial);
  const auto replica = g.add_element(name, orig.profile, dispatcher);
  s.placement.vm_of.push_back(vm);
  s.placement.num_vms = std::max(s.placement.num_vms, vm.index() + 1);
  s.share.push_back(0.0);
  s.current_MBps.push_back(0.0);
  s.last_scale_up_s.push_back(std::nullopt);

  for (const auto j : g.chains_through(i0)) {
    const Chain c = g.chain(j);
    g.set_chain_throughput(j, c.throughput_MBps * (1.0 - fraction));
    g.set_chain_weight(j, c.weight * (1.0 - fraction));
    auto path = c.elements;
    std::replace(path.begin(), path.end(), i0, replica);
    out.new_chains.push_back(g.add_subchain(c.name + "~" + name, path,
                                            c.throughput_MBps * fraction, c.origin,
                                            c.weight * fraction));
  }
  s.current_MBps[i0.index()] *= (1.0 - fraction);
  reallocate_vm(s, vm);
  reallocate_vm(s, s.placement.at(i0));
  out.replica = replica;
  out.touched = {i0, replica};
  out.state = std::move(s);
  return out;
}

}  // namespace detail

inline AppliedDecision apply_decision(const DeploymentState& s, const ScalingDecision& d) {
  if (d.state_version != s.version) throw StaleDecision("decision computed against an older state");
  AppliedDecision out;
  if (const auto* pa = std::get_if<PushAside>(&d.action)) {
    DeploymentState next = s;
    std::set<VmId> receivers;
    for (const auto& m : pa->migrations) {
      if (next.placement.at(m.element) != m.from) throw StaleDecision("migration source moved");
      next.placement.vm_of[m.element.index()] = m.to;
      receivers.insert(m.to);
      out.touched.push_back(m.element);
    }
    for (const auto vm : receivers) detail::reallocate_vm(next, vm);
    const VmId home = next.placement.at(pa->target);
    double others = 0.0;
    for (std::size_t i = 0; i < next.graph.num_elements(); ++i) {
      if (ElementId{i} != pa->target && next.placement.at(ElementId{i}) == home) others += next.share[i];
    }
    next.share[pa->target.index()] = std::min(pa->new_share, 1.0 - others);
    next.last_scale_up_s[pa->target.index()] = d.time_s;
    out.state = std::move(next);
  } else if (const auto* so = std::get_if<ScaleOut>(&d.action)) {
    out = detail::add_replica(s, so->target, so->vm, so->replica_fraction);
    out.state.last_scale_up_s[so->target.index()] = d.time_s;
  } else {
    const auto& nv = std::get<NewVm>(d.action);
    const VmId fresh{s.placement.num_vms};
    out = detail::add_replica(s, nv.target, fresh, nv.replica_fraction);
    out.state.last_scale_up_s[nv.target.index()] = d.time_s;
  }
  out.state.version = s.version + 1;
  return out;
}

inline bool cooldown_elapsed(const DeploymentState& s, ElementId i0, double now_s,
                             double timeout_s) {
  const auto& last = s.last_scale_up_s.at(i0.index());
  return !last || now_s - *last >= timeout_s;
}

}  // namespace coco
