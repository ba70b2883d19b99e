#pragma once

// Exact minimizer of total delayed bytes under the per-core capacity
// constraint.
//
// The quadratic objective sum_j sum_i Theta_j (1 - sum_k x_ik x_pi(i),k) is
// linearized with one product variable per (edge, VM); with the assignment
// variables of both endpoints fixed the product is fixed too, and with either
// endpoint free the relaxation can always co-locate the pair at zero cost. The
// relaxation bound of a partial assignment is therefore the cost of edges
// whose endpoints are both decided, which is what the search below computes
// directly. Nodes are expanded best-first by that bound; VMs are identical, so
// only assignments whose VM labels first appear in increasing order are
// generated. Every such assignment is the lexicographically smallest member of
// its relabeling class, so ties are broken towards the smallest assignment
// vector overall.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <stdexcept>
#include <vector>

#include "coco/graph.hpp"
#include "coco/placement.hpp"

namespace coco {

struct SolverOptions {
  // Graphs with at most this many elements are solved by plain enumeration.
  std::size_t enumeration_threshold = 12;
  // Upper bound on expanded search nodes; exceeded limits throw.
  std::size_t max_nodes = 50'000'000;
};

enum class SolveMethod { kEnumeration, kBranchAndBound };

struct SolverStats {
  SolveMethod method = SolveMethod::kEnumeration;
  std::size_t nodes = 0;
  std::size_t leaves = 0;
};

namespace detail {

struct Edge {
  std::size_t other;  // endpoint decided earlier (smaller id)
  double throughput;
};

class PlacementSearch {
 public:
  PlacementSearch(const ProcessingGraph& g, std::size_t num_vms)
      : g_(g), n_(g.num_elements()), k_(num_vms), edges_at_(n_), demand_(n_), suffix_(n_ + 1, 0.0) {
    for (const auto& c : g.chains()) {
      for (std::size_t h = 1; h < c.elements.size(); ++h) {
        const auto u = c.elements[h - 1].index();
        const auto v = c.elements[h].index();
        edges_at_[std::max(u, v)].push_back({std::min(u, v), c.throughput_MBps});
      }
    }
    for (std::size_t i = 0; i < n_; ++i) demand_[i] = element_demand(g, ElementId{i});
    for (std::size_t i = n_; i-- > 0;) suffix_[i] = suffix_[i + 1] + demand_[i];
  }

  // Objective in MB/s of crossing traffic, summed exactly as crossing_throughput.
  [[nodiscard]] double objective(const std::vector<std::uint32_t>& a) const {
    Placement p{std::vector<VmId>(a.begin(), a.end()), k_};
    return crossing_throughput(g_, p);
  }

  [[nodiscard]] bool feasible_leaf(const std::vector<std::uint32_t>& a) const {
    std::vector<double> load(k_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) load[a[i]] += demand_[i];
    return std::all_of(load.begin(), load.end(), [](double l) { return l <= 1.0; });
  }

  // Cost of edges that become decided when element `depth` is put on `vm`.
  [[nodiscard]] double step_cost(const std::vector<std::uint32_t>& a, std::size_t depth,
                                 std::uint32_t vm) const {
    double c = 0.0;
    for (const auto& e : edges_at_[depth]) {
      if (a[e.other] != vm) c += e.throughput;
    }
    return c;
  }

  // Remaining demand must fit into the free capacity of all VMs.
  [[nodiscard]] bool capacity_bound_ok(const std::vector<double>& load, std::size_t depth) const {
    double free = 0.0;
    for (const auto l : load) free += std::max(0.0, 1.0 - l);
    return suffix_[depth] <= free + 1e-9;
  }

  std::optional<std::vector<std::uint32_t>> enumerate(SolverStats& stats) {
    std::vector<std::uint32_t> a(n_, 0);
    std::vector<double> load(k_, 0.0);
    best_.reset();
    enumerate_rec(a, load, 0, 0, stats);
    return best_;
  }

  std::optional<std::vector<std::uint32_t>> branch_and_bound(SolverStats& stats,
                                                             std::size_t max_nodes,
                                                             std::optional<double> incumbent) {
    struct Node {
      double bound;
      std::vector<std::uint32_t> prefix;
      std::vector<double> load;
      std::uint32_t used;
    };
    struct Worse {
      bool operator()(const Node& x, const Node& y) const {
        if (x.bound != y.bound) return x.bound > y.bound;
        return x.prefix > y.prefix;
      }
    };
    std::priority_queue<Node, std::vector<Node>, Worse> open;
    open.push({0.0, {}, std::vector<double>(k_, 0.0), 0});
    best_.reset();
    double limit = incumbent.value_or(std::numeric_limits<double>::infinity());

    while (!open.empty()) {
      if (open.top().bound > limit + tolerance(limit)) break;
      Node node = open.top();
      open.pop();
      if (++stats.nodes > max_nodes) throw std::runtime_error("placement search node limit hit");
      const std::size_t depth = node.prefix.size();
      if (depth == n_) {
        ++stats.leaves;
        offer(node.prefix);
        if (best_value_ < limit) limit = best_value_;
        continue;
      }
      if (!capacity_bound_ok(node.load, depth)) continue;
      const std::uint32_t top = std::min<std::uint32_t>(node.used, static_cast<std::uint32_t>(k_ - 1));
      std::vector<std::uint32_t> full = node.prefix;
      full.resize(n_, 0);
      for (std::uint32_t vm = 0; vm <= top; ++vm) {
        if (node.load[vm] + demand_[depth] > 1.0) continue;
        const double bound = node.bound + step_cost(full, depth, vm);
        if (bound > limit + tolerance(limit)) continue;
        Node child{bound, node.prefix, node.load, std::max(node.used, vm + 1)};
        child.prefix.push_back(vm);
        child.load[vm] += demand_[depth];
        open.push(std::move(child));
      }
    }
    return best_;
  }

 private:
  static double tolerance(double v) {
    return std::isfinite(v) ? 1e-12 * std::max(1.0, std::abs(v)) : 0.0;
  }

  void offer(const std::vector<std::uint32_t>& a) {
    if (!feasible_leaf(a)) return;
    const double v = objective(a);
    if (!best_ || v < best_value_ || (v == best_value_ && a < *best_)) {
      best_ = a;
      best_value_ = v;
    }
  }

  // Loads are copied per level rather than added and subtracted back, so every
  // partial sum is formed in id order exactly as feasible_leaf forms it.
  void enumerate_rec(std::vector<std::uint32_t>& a, const std::vector<double>& load,
                     std::size_t depth, std::uint32_t used, SolverStats& stats) {
    ++stats.nodes;
    if (depth == n_) {
      ++stats.leaves;
      offer(a);
      return;
    }
    const std::uint32_t top = std::min<std::uint32_t>(used, static_cast<std::uint32_t>(k_ - 1));
    for (std::uint32_t vm = 0; vm <= top; ++vm) {
      if (load[vm] + demand_[depth] > 1.0) continue;
      a[depth] = vm;
      auto next = load;
      next[vm] += demand_[depth];
      enumerate_rec(a, next, depth + 1, std::max(used, vm + 1), stats);
    }
    a[depth] = 0;
  }

  const ProcessingGraph& g_;
  std::size_t n_;
  std::size_t k_;
  std::vector<std::vector<Edge>> edges_at_;
  std::vector<double> demand_;
  std::vector<double> suffix_;
  std::optional<std::vector<std::uint32_t>> best_;
  double best_value_ = 0.0;
};

}  // namespace detail

// Returns the assignment of minimum total delayed bytes with every VM's load
// at most one core, or nullopt when no such assignment exists.
inline std::optional<Placement> optimize_placement(const ProcessingGraph& g, std::size_t num_vms,
                                                   const CostModel& /*cost*/,
                                                   const SolverOptions& options = {},
                                                   SolverStats* stats_out = nullptr) {
  if (num_vms == 0) throw std::invalid_argument("need at least one VM");
  for (const auto& e : g.elements()) {
    if (e.dispatcher) throw std::invalid_argument("initial placement cannot contain runtime replicas");
  }
  SolverStats stats;
  if (g.num_elements() == 0) {
    if (stats_out) *stats_out = stats;
    return Placement{{}, num_vms};
  }
  detail::PlacementSearch search(g, num_vms);
  std::optional<std::vector<std::uint32_t>> best;
  if (g.num_elements() <= options.enumeration_threshold) {
    stats.method = SolveMethod::kEnumeration;
    best = search.enumerate(stats);
  } else {
    stats.method = SolveMethod::kBranchAndBound;
    std::optional<double> incumbent;
    const auto greedy = greedy_place(g, num_vms);
    if (greedy && capacity_ok(g, *greedy)) incumbent = crossing_throughput(g, *greedy);
    best = search.branch_and_bound(stats, options.max_nodes, incumbent);
  }
  if (stats_out) *stats_out = stats;
  if (!best) return std::nullopt;
  return Placement{std::vector<VmId>(best->begin(), best->end()), num_vms};
}

}  // namespace coco
