#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "coco/profile.hpp"
#include "coco/rng.hpp"

using namespace coco;

TEST(Profile, ClassifierMapping) {
  const auto c = classifier_profile();
  EXPECT_NEAR(cpu_for_throughput(c, 100.0), 0.42048, 1e-15);
  EXPECT_NEAR(max_throughput(c), (1.0 - 0.00048) / 0.0042, 1e-12);
  EXPECT_NEAR(max_throughput(c), 237.98, 5e-3);
  EXPECT_DOUBLE_EQ(cpu_for_throughput(c, max_throughput(c)), 1.0);
  EXPECT_DOUBLE_EQ(cpu_for_throughput(c, 1000.0), 1.0);
}

TEST(Profile, SenderClampsAtZero) {
  const auto s = sender_profile();
  EXPECT_DOUBLE_EQ(cpu_for_throughput(s, 0.0), 0.0);
  EXPECT_NEAR(max_throughput(s), 786.15, 5e-3);
  EXPECT_DOUBLE_EQ(min_invertible_share(s), 0.0);
}

TEST(Profile, IdentityLikeProfile) {
  EXPECT_DOUBLE_EQ(max_throughput(make_profile("unit", 0.0, 1.0)), 1.0);
}

TEST(Profile, NegativeThroughputRejected) {
  EXPECT_THROW(cpu_for_throughput(classifier_profile(), -1.0), std::invalid_argument);
}

TEST(Profile, InvalidProfilesRejected) {
  EXPECT_THROW(make_profile("flat", 0.1, 0.0), std::invalid_argument);
  EXPECT_THROW(make_profile("saturated", 1.0, 0.01), std::invalid_argument);
}

TEST(Profile, InverseDomain) {
  const auto c = classifier_profile();
  EXPECT_DOUBLE_EQ(throughput_for_cpu(c, 0.00048), 0.0);
  EXPECT_THROW(throughput_for_cpu(c, 0.0001), std::domain_error);
  EXPECT_THROW(throughput_for_cpu(c, 1.1), std::domain_error);
  EXPECT_THROW(throughput_for_cpu(sender_profile(), 0.0), std::domain_error);
}

TEST(ProfileProperty, RoundTripAndMonotone) {
  Rng rng(5);
  for (int k = 0; k < 2000; ++k) {
    const double a = -0.1 + 0.2 * uniform01(rng);
    const double b = 1e-4 + 0.01 * uniform01(rng);
    const auto p = make_profile("p", a, b);
    const double lo = std::max(0.0, a);
    const double r = lo + (1.0 - lo) * (1.0 - uniform01(rng));
    if (r <= lo) continue;
    EXPECT_NEAR(cpu_for_throughput(p, throughput_for_cpu(p, r)), r, 1e-12);
    const double v1 = 300.0 * uniform01(rng);
    const double v2 = v1 + 50.0 * uniform01(rng);
    EXPECT_LE(cpu_for_throughput(p, v1), cpu_for_throughput(p, v2));
  }
}

TEST(Fit, ExactClassifierLine) {
  std::vector<Sample> s;
  for (int v = 10; v <= 220; v += 10) s.push_back({double(v), 0.00048 + 0.0042 * v});
  const auto f = fit_profile(s);
  EXPECT_NEAR(f.profile.intercept, 0.00048, 1e-12);
  EXPECT_NEAR(f.profile.slope, 0.0042, 1e-12);
  EXPECT_DOUBLE_EQ(f.r_squared, 1.0);
}

TEST(Fit, TwoPointLine) {
  const std::vector<Sample> s{{0.0, 0.0}, {100.0, 0.42}};
  const auto f = fit_profile(s);
  EXPECT_NEAR(f.profile.intercept, 0.0, 1e-15);
  EXPECT_NEAR(f.profile.slope, 0.0042, 1e-15);
  EXPECT_DOUBLE_EQ(f.r_squared, 1.0);
}

TEST(Fit, SenderWithSymmetricNoise) {
  std::vector<Sample> s;
  for (int v = 50; v <= 750; v += 25) {
    const double r = -0.022 + 0.0013 * v;
    s.push_back({double(v), r + 1e-4});
    s.push_back({double(v), r - 1e-4});
  }
  const auto f = fit_profile(s);
  EXPECT_NEAR(f.profile.slope, 0.0013, 1e-9);
  EXPECT_GE(f.r_squared, 0.999);
}

TEST(Fit, DegenerateSamples) {
  const std::vector<Sample> same{{5.0, 0.1}, {5.0, 0.2}, {5.0, 0.3}};
  try {
    (void)fit_profile(same);
    FAIL() << "expected a throw";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate samples"), std::string::npos);
  }
  EXPECT_THROW((void)fit_profile(std::vector<Sample>{{1.0, 0.1}}), std::invalid_argument);
  EXPECT_THROW((void)fit_profile(std::vector<Sample>{{1.0, 0.5}, {2.0, 0.1}}), std::invalid_argument);
}

TEST(FitProperty, ReorderInvariant) {
  Rng rng(11);
  std::vector<Sample> s;
  for (int k = 0; k < 40; ++k) {
    const double v = 200.0 * uniform01(rng);
    s.push_back({v, 0.01 + 0.003 * v + 0.01 * (uniform01(rng) - 0.5)});
  }
  const auto base = fit_profile(s);
  std::mt19937 shuffle_rng(3);
  for (int k = 0; k < 20; ++k) {
    std::shuffle(s.begin(), s.end(), shuffle_rng);
    const auto f = fit_profile(s);
    EXPECT_EQ(f.profile.intercept, base.profile.intercept);
    EXPECT_EQ(f.profile.slope, base.profile.slope);
    EXPECT_EQ(f.r_squared, base.r_squared);
  }
}
