#pragma once

// Element-to-VM placement: the delayed-bytes cost model, per-VM CPU load,
// the pre-split of overloaded elements and the greedy / random baselines.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "coco/graph.hpp"
#include "coco/ids.hpp"
#include "coco/profile.hpp"
#include "coco/rng.hpp"

namespace coco {

struct CostModel {
  double t_d_inter_vm = 1e-3;  // s, vNIC + vSwitch path between two VMs
  double t_intra_vm = 3e-6;    // s, shared-memory handoff on one VM

  [[nodiscard]] bool valid() const {
    return std::isfinite(t_d_inter_vm) && t_intra_vm >= 0.0 && t_d_inter_vm > t_intra_vm;
  }
};

// One VM is one CPU core.
struct Placement {
  std::vector<VmId> vm_of;  // indexed by ElementId
  std::size_t num_vms = 0;

  [[nodiscard]] VmId at(ElementId i) const {
    if (i.index() >= vm_of.size()) {
      throw std::out_of_range("element " + std::to_string(i.value) + " is not assigned");
    }
    return vm_of[i.index()];
  }

  bool operator==(const Placement&) const = default;
};

inline void require_complete(const ProcessingGraph& g, const Placement& p) {
  if (p.vm_of.size() < g.num_elements()) {
    throw std::invalid_argument("placement leaves element " + std::to_string(p.vm_of.size()) +
                                " unassigned");
  }
  for (const auto vm : p.vm_of) {
    if (vm.index() >= p.num_vms) {
      throw std::invalid_argument("placement refers to VM " + std::to_string(vm.value) +
                                  " beyond num_vms");
    }
  }
}

// CPU demand used for the capacity constraint. Unlike cpu_for_throughput it is
// not clamped at one core, so a single element carrying more than
// max_throughput() can never satisfy load <= 1.
inline double cpu_demand(const ElementProfile& p, double v) {
  return std::max(0.0, p.intercept + p.slope * v);
}

inline double element_demand(const ProcessingGraph& g, ElementId i) {
  return cpu_demand(g.element(i).profile, g.element_load(i));
}

inline double cpu_load(const ProcessingGraph& g, const Placement& p, VmId k) {
  double load = 0.0;
  for (std::size_t i = 0; i < g.num_elements() && i < p.vm_of.size(); ++i) {
    if (p.vm_of[i] == k) load += element_demand(g, ElementId{i});
  }
  return load;
}

inline std::vector<double> vm_loads(const ProcessingGraph& g, const Placement& p) {
  std::vector<double> loads(p.num_vms, 0.0);
  for (std::size_t i = 0; i < g.num_elements(); ++i) {
    loads[p.at(ElementId{i}).index()] += element_demand(g, ElementId{i});
  }
  return loads;
}

inline bool capacity_ok(const ProcessingGraph& g, const Placement& p) {
  const auto loads = vm_loads(g, p);
  return std::all_of(loads.begin(), loads.end(), [](double l) { return l <= 1.0; });
}

// --- hop accounting --------------------------------------------------------
//
// Traffic for a runtime replica detours through its dispatcher's VM on the way
// in and returns there on the way out. Hop slot h of a chain of length n is:
//   h = 0         entry detour of the first element (carries injected bytes)
//   1 <= h < n    edge elements[h-1] -> elements[h] (carries departures of h-1)
//   h = n         exit detour of the last element

inline VmId entry_vm(const ProcessingGraph& g, const Placement& p, ElementId i) {
  const auto& e = g.element(i);
  return e.dispatcher ? p.at(*e.dispatcher) : p.at(i);
}

inline int detour_hops(const ProcessingGraph& g, const Placement& p, ElementId i) {
  const auto& e = g.element(i);
  return e.dispatcher && p.at(*e.dispatcher) != p.at(i) ? 1 : 0;
}

struct HopSlots {
  std::vector<int> inter;  // size n + 1
  std::vector<int> intra;  // size n + 1
};

inline HopSlots hop_slots(const ProcessingGraph& g, const Placement& p, ChainId j) {
  const auto& path = g.chain(j).elements;
  const std::size_t n = path.size();
  HopSlots s{std::vector<int>(n + 1, 0), std::vector<int>(n + 1, 0)};
  if (n == 0) return s;
  s.inter[0] = detour_hops(g, p, path[0]);
  for (std::size_t h = 1; h < n; ++h) {
    const auto u = path[h - 1];
    const auto v = path[h];
    const bool cross = entry_vm(g, p, u) != entry_vm(g, p, v);
    s.inter[h] = detour_hops(g, p, u) + (cross ? 1 : 0) + detour_hops(g, p, v);
    s.intra[h] = cross ? 0 : 1;
  }
  s.inter[n] = detour_hops(g, p, path[n - 1]);
  return s;
}

struct HopCount {
  int inter = 0;
  int intra = 0;
};

inline HopCount chain_hops(const ProcessingGraph& g, const Placement& p, ChainId j) {
  const auto s = hop_slots(g, p, j);
  HopCount c;
  for (const auto h : s.inter) c.inter += h;
  for (const auto h : s.intra) c.intra += h;
  return c;
}

// Sum over chains of throughput times inter-VM hop count, in MB/s.
inline double crossing_throughput(const ProcessingGraph& g, const Placement& p) {
  double total = 0.0;
  for (const auto& c : g.chains()) {
    total += c.throughput_MBps * static_cast<double>(chain_hops(g, p, c.id).inter);
  }
  return total;
}

// Total delayed bytes in MB: every inter-VM hop of chain j costs Theta_j * t_d.
inline double total_delayed_bytes(const ProcessingGraph& g, const Placement& p,
                                  const CostModel& cost) {
  require_complete(g, p);
  return crossing_throughput(g, p) * cost.t_d_inter_vm;
}

// --- overload pre-split ----------------------------------------------------

struct SplitResult {
  ProcessingGraph graph;
  std::vector<ElementId> replicas;  // elements added by the split
  std::vector<std::string> notes;
};

namespace detail {

// Splits chain j evenly into `parts` parallel copies that share every element.
inline std::vector<ChainId> split_evenly(ProcessingGraph& g, ChainId j, std::size_t parts) {
  std::vector<ChainId> out{j};
  if (parts <= 1) return out;
  const Chain base = g.chain(j);
  const double share = base.throughput_MBps / static_cast<double>(parts);
  const double weight = base.weight / static_cast<double>(parts);
  g.set_chain_throughput(j, share);
  g.set_chain_weight(j, weight);
  for (std::size_t k = 1; k < parts; ++k) {
    out.push_back(g.add_subchain(base.name + "/" + std::to_string(k + 1), base.elements, share,
                                 base.origin, weight));
  }
  return out;
}

}  // namespace detail

// Replaces every element whose summed chain load exceeds one core by replicas.
// Chains through the element are packed first-fit-decreasing into bins of one
// core's capacity; a chain that alone exceeds a core is split evenly first.
inline SplitResult split_overloaded(const ProcessingGraph& input) {
  SplitResult out{input, {}, {}};
  auto& g = out.graph;
  const std::size_t original_count = input.num_elements();
  for (std::size_t idx = 0; idx < original_count; ++idx) {
    const ElementId i0{idx};
    const auto profile = g.element(i0).profile;
    const double cap = max_throughput(profile);
    if (g.element_load(i0) <= cap) continue;

    auto chains = g.chains_through(i0);
    std::vector<ChainId> pieces;
    for (const auto j : chains) {
      const double theta = g.chain(j).throughput_MBps;
      std::size_t parts = 1;
      if (theta > cap) {
        parts = static_cast<std::size_t>(std::ceil(theta / cap));
        if (chains.size() > 1) {
          out.notes.push_back("chain " + g.chain(j).name + " alone exceeds one core of " +
                              g.element(i0).name + "; split evenly into " +
                              std::to_string(parts) + " parts");
        }
      }
      for (const auto piece : detail::split_evenly(g, j, parts)) pieces.push_back(piece);
    }

    std::stable_sort(pieces.begin(), pieces.end(), [&](ChainId x, ChainId y) {
      return g.chain(x).throughput_MBps > g.chain(y).throughput_MBps;
    });
    std::vector<double> bin_load;
    std::vector<ElementId> bin_element;
    for (const auto j : pieces) {
      const double theta = g.chain(j).throughput_MBps;
      std::size_t b = 0;
      while (b < bin_load.size() && bin_load[b] + theta > cap) ++b;
      if (b == bin_load.size()) {
        bin_load.push_back(0.0);
        if (b == 0) {
          bin_element.push_back(i0);
        } else {
          const auto replica =
              g.add_element(g.element(i0).name + "#" + std::to_string(b + 1), profile);
          bin_element.push_back(replica);
          out.replicas.push_back(replica);
        }
      }
      bin_load[b] += theta;
      if (bin_element[b] != i0) g.reroute(j, i0, bin_element[b]);
    }
  }
  return out;
}

// --- baselines -------------------------------------------------------------

// Walks chains in declared order and packs each not-yet-placed element onto
// the current VM until it would overflow, then moves on to the next VM.
inline std::optional<Placement> greedy_place(const ProcessingGraph& g, std::size_t num_vms) {
  constexpr auto kUnplaced = static_cast<std::uint32_t>(-1);
  Placement p{std::vector<VmId>(g.num_elements(), VmId{kUnplaced}), num_vms};
  std::vector<double> load(num_vms, 0.0);
  std::size_t current = 0;
  auto place = [&](ElementId i) {
    if (p.vm_of[i.index()].value != kUnplaced) return true;
    const double d = element_demand(g, i);
    while (current < num_vms && load[current] + d > 1.0) ++current;
    if (current == num_vms) return false;
    load[current] += d;
    p.vm_of[i.index()] = VmId{current};
    return true;
  };
  for (const auto& c : g.chains()) {
    for (const auto i : c.elements) {
      if (!place(i)) return std::nullopt;
    }
  }
  for (std::size_t i = 0; i < g.num_elements(); ++i) {
    if (!place(ElementId{i})) return std::nullopt;
  }
  return p;
}

// Places elements in id order, each on a VM drawn uniformly among those not
// yet full. Fails when the drawn VM cannot host the element.
inline std::optional<Placement> random_place(const ProcessingGraph& g, std::size_t num_vms,
                                             std::uint64_t seed) {
  Rng rng(seed);
  Placement p{std::vector<VmId>(g.num_elements()), num_vms};
  std::vector<double> load(num_vms, 0.0);
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < g.num_elements(); ++i) {
    const double d = element_demand(g, ElementId{i});
    open.clear();
    for (std::size_t k = 0; k < num_vms; ++k) {
      if (load[k] < 1.0) open.push_back(k);
    }
    if (open.empty()) return std::nullopt;
    const auto k = open[uniform_index(rng, open.size())];
    if (load[k] + d > 1.0) return std::nullopt;
    load[k] += d;
    p.vm_of[i] = VmId{k};
  }
  return p;
}

}  // namespace coco
