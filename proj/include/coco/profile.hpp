#pragma once

// Affine throughput -> CPU-utilization mapping of an element kind, and the
// least-squares fit that produces it from measurements.

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace coco {

// r = clamp(intercept + slope * v, 0, 1), v in MB/s, r in fractions of one core.
struct ElementProfile {
  std::string label;
  double intercept = 0.0;
  double slope = 1.0;

  [[nodiscard]] bool valid() const {
    return std::isfinite(intercept) && std::isfinite(slope) && slope > 0.0 &&
           (1.0 - intercept) / slope > 0.0;
  }
};

inline ElementProfile make_profile(std::string label, double intercept, double slope) {
  ElementProfile p{std::move(label), intercept, slope};
  if (!p.valid()) {
    throw std::invalid_argument("profile '" + p.label +
                                "': slope must be positive and a full core must carry "
                                "positive throughput");
  }
  return p;
}

// Published linear fits of the two measured element kinds.
inline ElementProfile classifier_profile() { return {"classifier", 0.00048, 0.0042}; }
inline ElementProfile sender_profile() { return {"sender", -0.022, 0.0013}; }

inline double cpu_for_throughput(const ElementProfile& p, double v) {
  if (!(v >= 0.0)) throw std::invalid_argument("throughput must be non-negative");
  return std::clamp(p.intercept + p.slope * v, 0.0, 1.0);
}

// Throughput one full core sustains.
inline double max_throughput(const ElementProfile& p) { return (1.0 - p.intercept) / p.slope; }

// Lowest share for which the inverse mapping is defined.
inline double min_invertible_share(const ElementProfile& p) {
  return std::max(0.0, p.intercept);
}

// Inverse mapping. Defined on (max(0,a), 1]; when a > 0 the endpoint r = a
// (zero throughput) is accepted as well.
inline double throughput_for_cpu(const ElementProfile& p, double r) {
  constexpr double kSlack = 1e-12;
  const double lo = min_invertible_share(p);
  const bool above_lo = p.intercept > 0.0 ? r >= lo - kSlack : r > 0.0;
  if (!above_lo || !(r <= 1.0 + kSlack)) {
    throw std::domain_error("share " + std::to_string(r) + " outside invertible range of '" +
                            p.label + "'");
  }
  return std::max(0.0, (r - p.intercept) / p.slope);
}

// Service rate actually delivered by a share; zero below the intercept.
inline double service_rate(const ElementProfile& p, double r) {
  if (r <= 0.0) return 0.0;
  return std::max(0.0, (std::min(r, 1.0) - p.intercept) / p.slope);
}

struct Sample {
  double v = 0.0;  // MB/s
  double r = 0.0;  // CPU fraction
};

struct ProfileFit {
  ElementProfile profile;
  double r_squared = 0.0;
};

// Ordinary least squares on centered data. Throws on fewer than two samples,
// all-equal throughputs, or a non-increasing fitted line. Samples are summed in
// sorted order so the result does not depend on input order.
inline ProfileFit fit_profile(std::span<const Sample> input, std::string label = "fitted") {
  if (input.size() < 2) throw std::invalid_argument("degenerate samples: need at least 2");
  for (const auto& s : input) {
    if (!std::isfinite(s.v) || !std::isfinite(s.r)) {
      throw std::invalid_argument("degenerate samples: non-finite value");
    }
  }
  std::vector<Sample> samples(input.begin(), input.end());
  std::sort(samples.begin(), samples.end(), [](const Sample& x, const Sample& y) {
    return x.v < y.v || (x.v == y.v && x.r < y.r);
  });
  const double n = static_cast<double>(samples.size());
  double mean_v = 0.0;
  double mean_r = 0.0;
  for (const auto& s : samples) {
    mean_v += s.v;
    mean_r += s.r;
  }
  mean_v /= n;
  mean_r /= n;

  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (const auto& s : samples) {
    const double dv = s.v - mean_v;
    const double dr = s.r - mean_r;
    sxx += dv * dv;
    sxy += dv * dr;
    syy += dr * dr;
  }
  if (sxx <= 0.0) throw std::invalid_argument("degenerate samples: all throughputs equal");

  const double slope = sxy / sxx;
  const double intercept = mean_r - slope * mean_v;
  double ss_res = 0.0;
  for (const auto& s : samples) {
    const double e = s.r - (intercept + slope * s.v);
    ss_res += e * e;
  }
  double r2 = 1.0;
  if (syy > 0.0) r2 = std::max(0.0, 1.0 - ss_res / syy);

  ProfileFit fit{{std::move(label), intercept, slope}, r2};
  if (!fit.profile.valid()) {
    throw std::invalid_argument("degenerate samples: fitted slope is not positive");
  }
  return fit;
}

}  // namespace coco
