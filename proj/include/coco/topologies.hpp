#pragma once

// Reference processing graphs used by the experiments and tests.

#include <string>
#include <vector>

#include "coco/graph.hpp"
#include "coco/placement.hpp"
#include "coco/profile.hpp"

namespace coco {

// Throughput in MB/s of a packet stream (1 MB = 1e6 bytes).
constexpr double packet_rate_MBps(double kpps, double packet_bytes) {
  return kpps * 1e3 * packet_bytes / 1e6;
}

namespace detail {

inline std::vector<ElementId> add_classifiers(ProcessingGraph& g, int count) {
  std::vector<ElementId> ids;
  for (int k = 1; k <= count; ++k) ids.push_back(g.add_element("E" + std::to_string(k), classifier_profile()));
  return ids;
}

}  // namespace detail

// Two chains of four classifiers merging into a shared tail.
//   E1 -> E2 -> E5 -> E6
//   E3 -> E4 -> E5 -> E6
inline ProcessingGraph topology1(double theta1 = 0.0, double theta2 = 0.0) {
  ProcessingGraph g;
  const auto e = detail::add_classifiers(g, 6);
  g.add_chain("chain1", {e[0], e[1], e[4], e[5]}, theta1);
  g.add_chain("chain2", {e[2], e[3], e[4], e[5]}, theta2);
  return g;
}

// Two chains of six classifiers sharing a three-element tail.
//   E1 -> E2 -> E3 -> E7 -> E8 -> E9
//   E4 -> E5 -> E6 -> E7 -> E8 -> E9
inline ProcessingGraph topology2(double theta1 = 0.0, double theta2 = 0.0) {
  ProcessingGraph g;
  const auto e = detail::add_classifiers(g, 9);
  g.add_chain("chain1", {e[0], e[1], e[2], e[6], e[7], e[8]}, theta1);
  g.add_chain("chain2", {e[3], e[4], e[5], e[6], e[7], e[8]}, theta2);
  return g;
}

// Four-element chain Classifier -> Parser -> Logger -> Analyzer.
inline ProcessingGraph push_aside_msfc(double theta) {
  ProcessingGraph g;
  const auto c = g.add_element("Classifier", classifier_profile());
  const auto p = g.add_element("Parser", make_profile("parser", 0.002, 0.0015));
  const auto l = g.add_element("Logger", make_profile("logger", 0.01, 0.004));
  const auto a = g.add_element("Analyzer", make_profile("stateful-analyzer", 0.02, 0.0095));
  g.add_chain("msfc", {c, p, l, a}, theta);
  return g;
}

// Classifier and Parser on VM 0, Logger and Analyzer on VM 1.
inline Placement push_aside_initial_placement() {
  return Placement{{VmId{0u}, VmId{0u}, VmId{1u}, VmId{1u}}, 2};
}

}  // namespace coco
