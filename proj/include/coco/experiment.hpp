#pragma once

// Repeated placement trials over sampled chain throughputs, comparing the
// exact optimizer against the greedy and random baselines.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "coco/graph.hpp"
#include "coco/placement.hpp"
#include "coco/rng.hpp"
#include "coco/solver.hpp"

namespace coco {

struct ThroughputSampler {
  enum class Kind { kConstant, kUniform, kLognormal };
  Kind kind = Kind::kConstant;
  double a = 0.0;  // constant value | uniform low  | log-space mean
  double b = 0.0;  //                | uniform high | log-space sigma

  static ThroughputSampler constant(double v) { return {Kind::kConstant, v, 0.0}; }
  static ThroughputSampler uniform(double lo, double hi) { return {Kind::kUniform, lo, hi}; }
  static ThroughputSampler lognormal(double mu, double sigma) { return {Kind::kLognormal, mu, sigma}; }

  [[nodiscard]] bool valid() const {
    switch (kind) {
      case Kind::kConstant: return a >= 0.0 && std::isfinite(a);
      case Kind::kUniform: return a >= 0.0 && b >= a && std::isfinite(b);
      case Kind::kLognormal: return std::isfinite(a) && b >= 0.0 && std::isfinite(b);
    }
    return false;
  }

  double operator()(Rng& rng) const {
    switch (kind) {
      case Kind::kConstant: return a;
      case Kind::kUniform: return a + (b - a) * uniform01(rng);
      case Kind::kLognormal: {
        // Box-Muller on our own uniforms keeps draws identical across platforms.
        const double u1 = 1.0 - uniform01(rng);
        const double u2 = uniform01(rng);
        const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
        return std::exp(a + b * z);
      }
    }
    return 0.0;
  }
};

inline constexpr std::array<const char*, 3> kPlacementPolicies{"coco", "greedy", "random"};

struct TrialOutcome {
  std::vector<double> throughput_MBps;          // per original chain
  std::array<std::optional<double>, 3> db;      // MB; nullopt on failure
};

struct PolicySummary {
  std::string policy;
  std::size_t failures = 0;
  double failure_rate = 0.0;
  double mean_db = 0.0;         // over this policy's own successes
  double mean_db_common = 0.0;  // over trials where every policy succeeded
};

struct ExperimentResult {
  std::size_t trials = 0;
  std::size_t common_successes = 0;
  std::array<PolicySummary, 3> policies;
  std::vector<TrialOutcome> outcomes;
};

inline TrialOutcome run_placement_trial(const ProcessingGraph& base, std::size_t num_vms,
                                        const ThroughputSampler& sampler, std::uint64_t trial_seed,
                                        const CostModel& cost) {
  Rng rng(trial_seed);
  ProcessingGraph g = base;
  TrialOutcome out;
  for (const auto& c : base.chains()) {
    const double theta = sampler(rng);
    out.throughput_MBps.push_back(theta);
    g.set_chain_throughput(c.id, theta);
  }
  const auto split = split_overloaded(g);
  const auto& sg = split.graph;
  std::array<std::optional<Placement>, 3> p{
      optimize_placement(sg, num_vms, cost),
      greedy_place(sg, num_vms),
      random_place(sg, num_vms, derive_seed(trial_seed, 1)),
  };
  for (std::size_t k = 0; k < 3; ++k) {
    if (p[k]) out.db[k] = total_delayed_bytes(sg, *p[k], cost);
  }
  return out;
}

inline ExperimentResult run_placement_experiment(const ProcessingGraph& graph, std::size_t num_vms,
                                                 std::size_t trials, const ThroughputSampler& sampler,
                                                 std::uint64_t seed, const CostModel& cost = {},
                                                 std::size_t jobs = 1) {
  if (trials == 0) throw std::invalid_argument("need at least one trial");
  if (!sampler.valid()) throw std::invalid_argument("invalid throughput sampler");
  ExperimentResult r;
  r.trials = trials;
  r.outcomes.resize(trials);
  jobs = std::clamp<std::size_t>(jobs, 1, trials);
  auto work = [&](std::size_t first) {
    for (std::size_t t = first; t < trials; t += jobs) {
      r.outcomes[t] = run_placement_trial(graph, num_vms, sampler, derive_seed(seed, t), cost);
    }
  };
  if (jobs == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }

  // Reduced in trial order, independent of the worker count.
  std::array<double, 3> sum{};
  std::array<double, 3> common{};
  for (const auto& o : r.outcomes) {
    const bool all = o.db[0] && o.db[1] && o.db[2];
    if (all) ++r.common_successes;
    for (std::size_t k = 0; k < 3; ++k) {
      if (!o.db[k]) {
        ++r.policies[k].failures;
        continue;
      }
      sum[k] += *o.db[k];
      if (all) common[k] += *o.db[k];
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    auto& s = r.policies[k];
    s.policy = kPlacementPolicies[k];
    s.failure_rate = static_cast<double>(s.failures) / static_cast<double>(trials);
    const auto ok = trials - s.failures;
    s.mean_db = ok ? sum[k] / static_cast<double>(ok) : 0.0;
    s.mean_db_common = r.common_successes ? common[k] / static_cast<double>(r.common_successes) : 0.0;
  }
  return r;
}

}  // namespace coco
