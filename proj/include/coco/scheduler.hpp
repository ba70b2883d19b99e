#pragma once

// Per-VM CPU share allocation by the buffer-matching principle: over the next
// period every element's buffer change is the same multiple C of its service
// rate, and the shares partition the core.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "coco/ids.hpp"
#include "coco/profile.hpp"

namespace coco {

struct ElementSlot {
  ElementId id;
  ElementProfile profile;
  double buffer_MB = 0.0;       // B_i, end of the elapsed period
  double prev_buffer_MB = 0.0;  // B_i', end of the period before
  double share = 0.0;           // r_i used during the elapsed period
  double capacity_MB = 1.0;
  double dropped_MB = 0.0;      // bytes lost to a full buffer in the elapsed period
  // Measured processing speed over the elapsed period. When absent the
  // element is taken to have run at the full speed of its share.
  std::optional<double> served_MBps;
};

struct SchedulerState {
  double period_s = 0.01;
  std::vector<ElementSlot> slots;
};

struct SchedulerConfig {
  double share_floor = 0.001;
  // Weight of the previous share in the next one; 0 disables smoothing.
  double smoothing = 0.0;
};

struct ShareAllocation {
  std::vector<double> shares;
  std::vector<double> arrival_MBps;
  std::vector<bool> clamped;  // held at a bound instead of solving the matching equation
  double c = 0.0;
};

// Arrival rate v_i = (B_i - B_i') / T + processing speed. With a measured
// speed the bytes dropped in the period are counted as arrivals too, which
// makes the estimate exact.
inline double infer_arrival_rate(const SchedulerState& state, std::size_t slot) {
  const auto& s = state.slots.at(slot);
  if (s.served_MBps) {
    return (s.buffer_MB - s.prev_buffer_MB + s.dropped_MB) / state.period_s + *s.served_MBps;
  }
  return (s.buffer_MB - s.prev_buffer_MB) / state.period_s + throughput_for_cpu(s.profile, s.share);
}

namespace detail {

// Scale s = 1/(C+1) with sum_i phi_i(v_i s) = budget over the given slots.
// The sum is non-decreasing in s and strictly increasing wherever some
// element is unclamped, so the root is unique and bisection converges to it.
inline double solve_scale(std::span<const ElementProfile> profiles, std::span<const double> rate,
                          std::span<const std::size_t> active, double budget) {
  double sum_a = 0.0;
  double sum_bv = 0.0;
  for (const auto i : active) {
    sum_a += profiles[i].intercept;
    sum_bv += profiles[i].slope * rate[i];
  }
  if (sum_bv > 0.0) {
    const double s = (budget - sum_a) / sum_bv;
    bool affine = s > 0.0;
    for (const auto i : active) {
      const double r = profiles[i].intercept + profiles[i].slope * rate[i] * s;
      if (r < 0.0 || r > 1.0) affine = false;
    }
    if (affine) return s;
  }

  auto total = [&](double s) {
    double t = 0.0;
    for (const auto i : active) t += cpu_for_throughput(profiles[i], rate[i] * s);
    return t;
  };
  if (total(0.0) >= budget) {
    throw std::domain_error("element intercepts exceed the core; no share allocation exists");
  }
  double lo = 0.0;
  double hi = 1.0;
  while (total(hi) < budget) {
    hi *= 2.0;
    if (hi > 1e300) throw std::domain_error("share allocation does not converge");
  }
  for (int it = 0; it < 2000 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (total(mid) < budget) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Shares r_i = phi_i(v_i / (C+1)) summing to one for the demanded rates v_i.
// Elements whose share would drop below max(floor, phi_i(0)) are held there and
// the rest re-solved on the remaining budget. Elements with zero demand sit at
// that bound as well.
inline ShareAllocation allocate_shares(std::span<const ElementProfile> profiles,
                                       std::span<const double> demand_MBps, double floor) {
  const std::size_t n = profiles.size();
  if (n == 0) throw std::invalid_argument("no elements to schedule");
  if (demand_MBps.size() != n) throw std::invalid_argument("profile/demand size mismatch");

  ShareAllocation out;
  out.arrival_MBps.assign(demand_MBps.begin(), demand_MBps.end());
  for (auto& v : out.arrival_MBps) v = std::max(0.0, v);
  out.shares.assign(n, 0.0);
  out.clamped.assign(n, false);

  if (n == 1) {
    out.shares[0] = 1.0;
    const double v = out.arrival_MBps[0];
    out.c = v > 0.0 ? v / max_throughput(profiles[0]) - 1.0 : 0.0;
    return out;
  }

  std::vector<double> lower(n);
  for (std::size_t i = 0; i < n; ++i) {
    lower[i] = std::max(floor, min_invertible_share(profiles[i]));
  }
  if (std::accumulate(lower.begin(), lower.end(), 0.0) > 1.0) {
    throw std::domain_error("minimum shares exceed the core");
  }

  std::vector<std::size_t> active;
  double budget = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (out.arrival_MBps[i] > 0.0) {
      active.push_back(i);
    } else {
      out.shares[i] = lower[i];
      out.clamped[i] = true;
      budget -= lower[i];
    }
  }
  if (active.empty()) {
    // Nothing to match: split the core in proportion to the bounds.
    const double total = std::accumulate(lower.begin(), lower.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) out.shares[i] = lower[i] / total;
    return out;
  }

  double scale = 0.0;
  while (true) {
    scale = detail::solve_scale(profiles, out.arrival_MBps, active, budget);
    std::vector<std::size_t> keep;
    bool changed = false;
    for (const auto i : active) {
      const double r = cpu_for_throughput(profiles[i], out.arrival_MBps[i] * scale);
      if (r < lower[i] && active.size() > 1) {
        out.shares[i] = lower[i];
        out.clamped[i] = true;
        budget -= lower[i];
        changed = true;
      } else {
        out.shares[i] = r;
        keep.push_back(i);
      }
    }
    active = std::move(keep);
    if (!changed) break;
  }
  out.c = 1.0 / scale - 1.0;
  return out;
}

inline ShareAllocation compute_next_shares(const SchedulerState& state,
                                           const SchedulerConfig& config = {}) {
  const std::size_t n = state.slots.size();
  if (n == 0) throw std::invalid_argument("no elements to schedule");

  // Steady buffers with a full partition and every element running at the
  // speed of its share: the matching equation is solved by C = 0 and the
  // current shares.
  const bool steady = std::all_of(state.slots.begin(), state.slots.end(), [](const auto& s) {
    return s.buffer_MB == s.prev_buffer_MB && s.dropped_MB == 0.0 &&
           (!s.served_MBps || *s.served_MBps == service_rate(s.profile, s.share));
  });
  double current_sum = 0.0;
  for (const auto& s : state.slots) current_sum += s.share;
  if (steady && std::abs(current_sum - 1.0) <= 1e-12 &&
      std::all_of(state.slots.begin(), state.slots.end(), [&](const auto& s) {
        return s.share >= std::max(config.share_floor, min_invertible_share(s.profile)) &&
               throughput_for_cpu(s.profile, s.share) > 0.0;
      })) {
    ShareAllocation out;
    for (std::size_t i = 0; i < n; ++i) {
      out.shares.push_back(state.slots[i].share);
      out.arrival_MBps.push_back(infer_arrival_rate(state, i));
      out.clamped.push_back(false);
    }
    out.c = 0.0;
    return out;
  }

  std::vector<ElementProfile> profiles;
  std::vector<double> arrivals;
  for (std::size_t i = 0; i < n; ++i) {
    profiles.push_back(state.slots[i].profile);
    arrivals.push_back(infer_arrival_rate(state, i));
  }
  auto out = allocate_shares(profiles, arrivals, config.share_floor);
  if (config.smoothing > 0.0) {
    const double w = std::clamp(config.smoothing, 0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      out.shares[i] = (1.0 - w) * out.shares[i] + w * state.slots[i].share;
    }
  }
  return out;
}

// Elements that lost bytes to a full buffer in the elapsed period, largest
// loss first.
inline std::vector<ElementId> detect_overload(const SchedulerState& state) {
  std::vector<const ElementSlot*> hit;
  for (const auto& s : state.slots) {
    if (s.dropped_MB > 0.0) hit.push_back(&s);
  }
  std::stable_sort(hit.begin(), hit.end(), [](const ElementSlot* x, const ElementSlot* y) {
    return x->dropped_MB > y->dropped_MB;
  });
  std::vector<ElementId> out;
  for (const auto* s : hit) out.push_back(s->id);
  return out;
}

}  // namespace coco
