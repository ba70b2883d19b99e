#pragma once

// Processing graph of a modularized service chain deployment: elements, the
// ordered chains through them and the per-chain throughputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "coco/ids.hpp"
#include "coco/profile.hpp"

namespace coco {

class NotOnChain : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Element {
  ElementId id;
  std::string name;
  ElementProfile profile;
  // Set for replicas created at runtime: traffic for the replica is steered
  // through the VM of this original instance and returns there afterwards.
  std::optional<ElementId> dispatcher;
};

struct Chain {
  ChainId id;
  std::string name;
  std::vector<ElementId> elements;
  double throughput_MBps = 0.0;
  // A chain split across replicas keeps the id of the tenant chain it came
  // from and the fraction of that chain's traffic it carries.
  ChainId origin;
  double weight = 1.0;
};

enum class ViolationKind {
  kUnknownElement,
  kRepeatedElement,
  kCycle,
  kNegativeThroughput,
  kEmptyChain,
  kInvalidProfile,
};

struct Violation {
  ViolationKind kind;
  std::string message;
};

class ProcessingGraph {
 public:
  ElementId add_element(std::string name, ElementProfile profile,
                        std::optional<ElementId> dispatcher = std::nullopt) {
    const ElementId id{elements_.size()};
    elements_.push_back({id, std::move(name), std::move(profile), dispatcher});
    for (auto& links : links_) links.push_back({});
    return id;
  }

  ChainId add_chain(std::string name, std::vector<ElementId> path, double throughput_MBps) {
    const ChainId id{chains_.size()};
    return add_subchain(std::move(name), std::move(path), throughput_MBps, id, 1.0);
  }

  ChainId add_subchain(std::string name, std::vector<ElementId> path, double throughput_MBps,
                       ChainId origin, double weight) {
    const ChainId id{chains_.size()};
    chains_.push_back({id, std::move(name), std::move(path), throughput_MBps, origin, weight});
    links_.emplace_back();
    relink(id);
    return id;
  }

  void set_chain_throughput(ChainId j, double throughput_MBps) {
    chains_.at(j.index()).throughput_MBps = throughput_MBps;
  }

  void set_chain_weight(ChainId j, double weight) { chains_.at(j.index()).weight = weight; }

  // Replaces element `from` by `to` on chain j. Keeps the per-chain links valid.
  void reroute(ChainId j, ElementId from, ElementId to) {
    auto& path = chains_.at(j.index()).elements;
    std::replace(path.begin(), path.end(), from, to);
    relink(j);
  }

  [[nodiscard]] const std::vector<Element>& elements() const { return elements_; }
  [[nodiscard]] const std::vector<Chain>& chains() const { return chains_; }
  [[nodiscard]] std::size_t num_elements() const { return elements_.size(); }
  [[nodiscard]] std::size_t num_chains() const { return chains_.size(); }

  [[nodiscard]] bool has_element(ElementId i) const { return i.index() < elements_.size(); }
  [[nodiscard]] bool has_chain(ChainId j) const { return j.index() < chains_.size(); }

  [[nodiscard]] const Element& element(ElementId i) const {
    if (!has_element(i)) throw std::out_of_range("unknown element id " + std::to_string(i.value));
    return elements_[i.index()];
  }
  [[nodiscard]] const Chain& chain(ChainId j) const {
    if (!has_chain(j)) throw std::out_of_range("unknown chain id " + std::to_string(j.value));
    return chains_[j.index()];
  }

  [[nodiscard]] std::optional<ElementId> find_element(const std::string& name) const {
    for (const auto& e : elements_) {
      if (e.name == name) return e.id;
    }
    return std::nullopt;
  }

  // Membership indicator alpha_i^j.
  [[nodiscard]] bool on_chain(ElementId i, ChainId j) const {
    return has_chain(j) && has_element(i) && links_[j.index()][i.index()].member;
  }

  // Raw neighbours on chain j; nullopt at the chain ends.
  [[nodiscard]] std::optional<ElementId> prev(ElementId i, ChainId j) const {
    require_member(i, j);
    return links_[j.index()][i.index()].prev;
  }
  [[nodiscard]] std::optional<ElementId> next(ElementId i, ChainId j) const {
    require_member(i, j);
    return links_[j.index()][i.index()].next;
  }

  // Upstream element pi_i^j; the first element of a chain is its own upstream.
  [[nodiscard]] ElementId upstream(ElementId i, ChainId j) const {
    return prev(i, j).value_or(i);
  }

  [[nodiscard]] std::vector<ChainId> chains_through(ElementId i) const {
    std::vector<ChainId> out;
    for (const auto& c : chains_) {
      if (on_chain(i, c.id)) out.push_back(c.id);
    }
    return out;
  }

  // Sum of the throughputs of every chain containing i.
  [[nodiscard]] double element_load(ElementId i) const {
    if (!has_element(i)) throw std::out_of_range("unknown element id " + std::to_string(i.value));
    double load = 0.0;
    for (const auto& c : chains_) {
      if (links_[c.id.index()][i.index()].member) load += c.throughput_MBps;
    }
    return load;
  }

  [[nodiscard]] std::vector<Violation> validate() const {
    std::vector<Violation> out;
    for (const auto& e : elements_) {
      if (!e.profile.valid()) {
        out.push_back({ViolationKind::kInvalidProfile,
                       "invalid profile '" + e.profile.label + "' on element " + e.name});
      }
      if (e.dispatcher && !has_element(*e.dispatcher)) {
        out.push_back({ViolationKind::kUnknownElement,
                       "unknown element as dispatcher of " + e.name});
      }
    }
    bool dangling = false;
    for (const auto& c : chains_) {
      if (c.elements.empty()) {
        out.push_back({ViolationKind::kEmptyChain, "empty chain " + c.name});
      }
      if (!(c.throughput_MBps >= 0.0) || !std::isfinite(c.throughput_MBps)) {
        out.push_back({ViolationKind::kNegativeThroughput,
                       "negative or non-finite throughput on chain " + c.name});
      }
      std::vector<bool> seen(elements_.size(), false);
      for (const auto id : c.elements) {
        if (!has_element(id)) {
          out.push_back({ViolationKind::kUnknownElement, "unknown element " +
                                                             std::to_string(id.value) +
                                                             " on chain " + c.name});
          dangling = true;
          continue;
        }
        if (seen[id.index()]) {
          out.push_back({ViolationKind::kRepeatedElement,
                         "repeated element in chain " + c.name + ": " + element(id).name});
        }
        seen[id.index()] = true;
      }
    }
    if (!dangling && has_cycle()) {
      out.push_back({ViolationKind::kCycle, "chain edges form a cycle"});
    }
    return out;
  }

  [[nodiscard]] bool ok() const { return validate().empty(); }

  // Elements in an order where every chain edge points forward.
  // Requires an acyclic graph.
  [[nodiscard]] std::vector<ElementId> topological_order() const {
    const std::size_t n = elements_.size();
    std::vector<std::vector<std::size_t>> succ(n);
    std::vector<std::size_t> indegree(n, 0);
    for (const auto& c : chains_) {
      for (std::size_t k = 1; k < c.elements.size(); ++k) {
        const auto u = c.elements[k - 1].index();
        const auto v = c.elements[k].index();
        if (u >= n || v >= n) continue;
        succ[u].push_back(v);
        ++indegree[v];
      }
    }
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t i = 0; i < n; ++i) {
      if (indegree[i] == 0) ready.push(i);
    }
    std::vector<ElementId> order;
    order.reserve(n);
    while (!ready.empty()) {
      const auto u = ready.top();
      ready.pop();
      order.emplace_back(u);
      for (const auto v : succ[u]) {
        if (--indegree[v] == 0) ready.push(v);
      }
    }
    if (order.size() != n) throw std::logic_error("processing graph has a cycle");
    return order;
  }

 private:
  struct Link {
    bool member = false;
    std::optional<ElementId> prev;
    std::optional<ElementId> next;
  };

  void relink(ChainId j) {
    auto& links = links_[j.index()];
    links.assign(elements_.size(), Link{});
    const auto& path = chains_[j.index()].elements;
    for (std::size_t k = 0; k < path.size(); ++k) {
      const auto id = path[k];
      if (!has_element(id)) continue;
      auto& l = links[id.index()];
      // On a repeated element the first occurrence wins; validate() reports it.
      if (l.member) continue;
      l.member = true;
      if (k > 0 && has_element(path[k - 1])) l.prev = path[k - 1];
      if (k + 1 < path.size() && has_element(path[k + 1])) l.next = path[k + 1];
    }
  }

  void require_member(ElementId i, ChainId j) const {
    if (!on_chain(i, j)) {
      throw NotOnChain("element " + std::to_string(i.value) + " is not on chain " +
                       std::to_string(j.value));
    }
  }

  [[nodiscard]] bool has_cycle() const {
    try {
      (void)topological_order();
      return false;
    } catch (const std::logic_error&) {
      return true;
    }
  }

  std::vector<Element> elements_;
  std::vector<Chain> chains_;
  std::vector<std::vector<Link>> links_;
};

}  // namespace coco
