#pragma once

// Scenario files: YAML documents with a versioned header.
//
//   format: coco-scenario/1
//   seed: 7
//   vms: 2
//   cost: {t_d: 0.001, t_intra: 3.0e-6}
//   profiles:
//     - {label: classifier, a: 0.00048, b: 0.0042}
//   elements:
//     - {name: E1, profile: classifier}
//   chains:
//     - {name: c1, elements: [E1, E2], throughput: 50}      # MB/s
//     - {name: c2, elements: [E3], rate_kpps: 100, packet_bytes: 512}
//   scheduler: {period: 0.01, buffer_capacity: 1.0, floor: 0.001, smoothing: 0}
//   scaler: {timeout_periods: 100, headroom: 1.1, migration_penalty: 0.002, sync_penalty: 0.0005}
//   simulation: {duration: 1.0, scaling: true}
//   traffic:
//     - {time: 0.1, chain: c1, throughput: 80}
//   placement: {E1: 0, E2: 1}
//   experiment: {trials: 1000, sampler: {kind: lognormal, mu: 3.5, sigma: 0.5}}
//
// Every section except format, profiles, elements and chains is optional.

#include <yaml-cpp/yaml.h>

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "coco/experiment.hpp"
#include "coco/graph.hpp"
#include "coco/placement.hpp"
#include "coco/profile.hpp"
#include "coco/sim.hpp"
#include "coco/topologies.hpp"

namespace coco {

inline constexpr const char* kScenarioFormat = "coco-scenario/1";

class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentSpec {
  std::size_t trials = 1000;
  ThroughputSampler sampler;
};

struct Scenario {
  SimScenario sim;
  std::optional<ExperimentSpec> experiment;
};

namespace detail {

class YamlReader {
 public:
  explicit YamlReader(std::string source) : source_(std::move(source)) {}

  [[noreturn]] void fail(const YAML::Node& at, const std::string& path, const std::string& what) const {
    std::ostringstream os;
    os << source_;
    if (at.IsDefined() && !at.Mark().is_null()) os << ":" << at.Mark().line + 1 << ":" << at.Mark().column + 1;
    os << ": " << path << ": " << what;
    throw ScenarioError(os.str());
  }

  void only_keys(const YAML::Node& map, const std::string& path, const std::set<std::string>& allowed) const {
    if (!map.IsMap()) fail(map, path, "expected a mapping");
    for (const auto& kv : map) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) fail(kv.first, path + "." + key, "unknown key");
    }
  }

  YAML::Node require(const YAML::Node& map, const std::string& path, const std::string& key) const {
    const auto v = map[key];
    if (!v) fail(map, path + "." + key, "missing required key");
    return v;
  }

  template <typename T>
  T scalar(const YAML::Node& v, const std::string& path) const {
    if (!v.IsScalar()) fail(v, path, "expected a scalar");
    try {
      return v.as<T>();
    } catch (const YAML::Exception&) {
      fail(v, path, "cannot convert '" + v.Scalar() + "'");
    }
  }

  double number(const YAML::Node& map, const std::string& path, const std::string& key,
                std::optional<double> fallback = std::nullopt) const {
    const auto v = map[key];
    if (!v) {
      if (fallback) return *fallback;
      fail(map, path + "." + key, "missing required key");
    }
    return scalar<double>(v, path + "." + key);
  }

  double non_negative(const YAML::Node& map, const std::string& path, const std::string& key,
                      std::optional<double> fallback = std::nullopt) const {
    const double x = number(map, path, key, fallback);
    if (!(x >= 0.0)) fail(map[key], path + "." + key, "must be non-negative");
    return x;
  }

  // Either `throughput` in MB/s or `rate_kpps` with `packet_bytes`.
  double throughput(const YAML::Node& map, const std::string& path) const {
    const bool direct = static_cast<bool>(map["throughput"]);
    const bool packets = static_cast<bool>(map["rate_kpps"]);
    if (direct == packets) fail(map, path, "give exactly one of throughput or rate_kpps");
    if (direct) return non_negative(map, path, "throughput");
    if (!map["packet_bytes"]) fail(map, path + ".packet_bytes", "required with rate_kpps");
    return packet_rate_MBps(non_negative(map, path, "rate_kpps"), non_negative(map, path, "packet_bytes"));
  }

 private:
  std::string source_;
};

}  // namespace detail

inline Scenario parse_scenario(const std::string& text, const std::string& source = "<scenario>") {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ScenarioError(source + ":" + std::to_string(e.mark.line + 1) + ":" +
                        std::to_string(e.mark.column + 1) + ": " + e.msg);
  }
  detail::YamlReader rd(source);
  if (!root.IsMap()) throw ScenarioError(source + ": scenario must be a mapping");
  rd.only_keys(root, "scenario",
               {"format", "seed", "vms", "cost", "profiles", "elements", "chains", "scheduler",
                "scaler", "simulation", "traffic", "placement", "experiment"});
  const auto fmt = rd.scalar<std::string>(rd.require(root, "scenario", "format"), "format");
  if (fmt != kScenarioFormat) rd.fail(root["format"], "format", "unsupported format '" + fmt + "'");

  Scenario out;
  auto& s = out.sim;
  if (root["seed"]) s.seed = rd.scalar<std::uint64_t>(root["seed"], "seed");
  if (root["vms"]) {
    const auto k = rd.scalar<long long>(root["vms"], "vms");
    if (k < 1) rd.fail(root["vms"], "vms", "must be at least 1");
    s.num_vms = static_cast<std::size_t>(k);
  }
  if (const auto c = root["cost"]) {
    rd.only_keys(c, "cost", {"t_d", "t_intra"});
    s.cost.t_d_inter_vm = rd.non_negative(c, "cost", "t_d", s.cost.t_d_inter_vm);
    s.cost.t_intra_vm = rd.non_negative(c, "cost", "t_intra", s.cost.t_intra_vm);
    if (!s.cost.valid()) rd.fail(c, "cost", "need t_d > t_intra >= 0");
  }

  std::map<std::string, ElementProfile> profiles;
  const auto ps = rd.require(root, "scenario", "profiles");
  if (!ps.IsSequence()) rd.fail(ps, "profiles", "expected a list");
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const auto path = "profiles[" + std::to_string(k) + "]";
    rd.only_keys(ps[k], path, {"label", "a", "b"});
    const auto label = rd.scalar<std::string>(rd.require(ps[k], path, "label"), path + ".label");
    ElementProfile p{label, rd.number(ps[k], path, "a"), rd.number(ps[k], path, "b")};
    if (!p.valid()) rd.fail(ps[k], path, "profile needs finite a < 1 and b > 0");
    if (!profiles.emplace(label, p).second) rd.fail(ps[k], path + ".label", "duplicate profile");
  }

  std::map<std::string, ElementId> elements;
  const auto es = rd.require(root, "scenario", "elements");
  if (!es.IsSequence()) rd.fail(es, "elements", "expected a list");
  for (std::size_t k = 0; k < es.size(); ++k) {
    const auto path = "elements[" + std::to_string(k) + "]";
    rd.only_keys(es[k], path, {"name", "profile"});
    const auto name = rd.scalar<std::string>(rd.require(es[k], path, "name"), path + ".name");
    const auto label = rd.scalar<std::string>(rd.require(es[k], path, "profile"), path + ".profile");
    const auto it = profiles.find(label);
    if (it == profiles.end()) rd.fail(es[k]["profile"], path + ".profile", "unknown profile '" + label + "'");
    if (elements.count(name)) rd.fail(es[k]["name"], path + ".name", "duplicate element");
    elements.emplace(name, s.graph.add_element(name, it->second));
  }

  std::map<std::string, ChainId> chains;
  const auto cs = rd.require(root, "scenario", "chains");
  if (!cs.IsSequence()) rd.fail(cs, "chains", "expected a list");
  for (std::size_t k = 0; k < cs.size(); ++k) {
    const auto path = "chains[" + std::to_string(k) + "]";
    rd.only_keys(cs[k], path, {"name", "elements", "throughput", "rate_kpps", "packet_bytes"});
    const auto name = rd.scalar<std::string>(rd.require(cs[k], path, "name"), path + ".name");
    const auto members = rd.require(cs[k], path, "elements");
    if (!members.IsSequence()) rd.fail(members, path + ".elements", "expected a list");
    std::vector<ElementId> ids;
    for (std::size_t m = 0; m < members.size(); ++m) {
      const auto mp = path + ".elements[" + std::to_string(m) + "]";
      const auto en = rd.scalar<std::string>(members[m], mp);
      const auto it = elements.find(en);
      if (it == elements.end()) rd.fail(members[m], mp, "unknown element '" + en + "'");
      ids.push_back(it->second);
    }
    if (chains.count(name)) rd.fail(cs[k]["name"], path + ".name", "duplicate chain");
    chains.emplace(name, s.graph.add_chain(name, ids, rd.throughput(cs[k], path)));
  }
  const auto violations = s.graph.validate();
  if (!violations.empty()) rd.fail(cs, "chains", violations.front().message);

  if (const auto sch = root["scheduler"]) {
    rd.only_keys(sch, "scheduler", {"period", "buffer_capacity", "floor", "smoothing"});
    s.period_s = rd.number(sch, "scheduler", "period", s.period_s);
    if (!(s.period_s > 0.0)) rd.fail(sch["period"], "scheduler.period", "must be positive");
    s.buffer_capacity_MB = rd.number(sch, "scheduler", "buffer_capacity", s.buffer_capacity_MB);
    if (!(s.buffer_capacity_MB > 0.0)) rd.fail(sch["buffer_capacity"], "scheduler.buffer_capacity", "must be positive");
    s.share_floor = rd.non_negative(sch, "scheduler", "floor", s.share_floor);
    s.smoothing = rd.non_negative(sch, "scheduler", "smoothing", s.smoothing);
    if (!(s.smoothing < 1.0)) rd.fail(sch["smoothing"], "scheduler.smoothing", "must be below 1");
  }
  if (const auto sc = root["scaler"]) {
    rd.only_keys(sc, "scaler", {"timeout_periods", "headroom", "migration_penalty", "sync_penalty"});
    if (sc["timeout_periods"]) {
      const auto t = rd.scalar<long long>(sc["timeout_periods"], "scaler.timeout_periods");
      if (t < 0) rd.fail(sc["timeout_periods"], "scaler.timeout_periods", "must be non-negative");
      s.cooldown_periods = static_cast<std::size_t>(t);
    }
    s.headroom = rd.number(sc, "scaler", "headroom", s.headroom);
    if (!(s.headroom >= 1.0)) rd.fail(sc["headroom"], "scaler.headroom", "must be at least 1");
    s.migration_penalty_s = rd.non_negative(sc, "scaler", "migration_penalty", s.migration_penalty_s);
    s.sync_penalty_s = rd.non_negative(sc, "scaler", "sync_penalty", s.sync_penalty_s);
  }
  if (const auto sim = root["simulation"]) {
    rd.only_keys(sim, "simulation", {"duration", "scaling"});
    s.duration_s = rd.non_negative(sim, "simulation", "duration", s.duration_s);
    if (sim["scaling"]) s.scaling = rd.scalar<bool>(sim["scaling"], "simulation.scaling");
  }
  if (const auto tr = root["traffic"]) {
    if (!tr.IsSequence()) rd.fail(tr, "traffic", "expected a list");
    double last = 0.0;
    for (std::size_t k = 0; k < tr.size(); ++k) {
      const auto path = "traffic[" + std::to_string(k) + "]";
      rd.only_keys(tr[k], path, {"time", "chain", "throughput", "rate_kpps", "packet_bytes"});
      TrafficStep step;
      step.time_s = rd.non_negative(tr[k], path, "time");
      if (step.time_s < last) rd.fail(tr[k]["time"], path + ".time", "times must be non-decreasing");
      last = step.time_s;
      const auto cn = rd.scalar<std::string>(rd.require(tr[k], path, "chain"), path + ".chain");
      const auto it = chains.find(cn);
      if (it == chains.end()) rd.fail(tr[k]["chain"], path + ".chain", "unknown chain '" + cn + "'");
      step.chain = it->second;
      step.throughput_MBps = rd.throughput(tr[k], path);
      s.traffic.push_back(step);
    }
  }
  if (const auto pl = root["placement"]) {
    if (!pl.IsMap()) rd.fail(pl, "placement", "expected a mapping of element to VM");
    Placement p{std::vector<VmId>(s.graph.num_elements()), s.num_vms};
    std::vector<bool> seen(s.graph.num_elements(), false);
    for (const auto& kv : pl) {
      const auto en = kv.first.as<std::string>();
      const auto it = elements.find(en);
      if (it == elements.end()) rd.fail(kv.first, "placement." + en, "unknown element");
      const auto vm = rd.scalar<long long>(kv.second, "placement." + en);
      if (vm < 0 || static_cast<std::size_t>(vm) >= s.num_vms) {
        rd.fail(kv.second, "placement." + en, "VM index outside [0, vms)");
      }
      p.vm_of[it->second.index()] = VmId{static_cast<std::size_t>(vm)};
      seen[it->second.index()] = true;
    }
    for (std::size_t i = 0; i < seen.size(); ++i) {
      if (!seen[i]) rd.fail(pl, "placement", "element " + s.graph.element(ElementId{i}).name + " not placed");
    }
    s.initial_placement = p;
  }
  if (const auto ex = root["experiment"]) {
    rd.only_keys(ex, "experiment", {"trials", "sampler"});
    ExperimentSpec spec;
    if (ex["trials"]) {
      const auto t = rd.scalar<long long>(ex["trials"], "experiment.trials");
      if (t < 1) rd.fail(ex["trials"], "experiment.trials", "must be at least 1");
      spec.trials = static_cast<std::size_t>(t);
    }
    const auto sm = rd.require(ex, "experiment", "sampler");
    if (!sm.IsMap()) rd.fail(sm, "experiment.sampler", "expected a mapping");
    const auto kind = rd.scalar<std::string>(rd.require(sm, "experiment.sampler", "kind"), "experiment.sampler.kind");
    const std::string sp = "experiment.sampler";
    if (kind == "constant") {
      rd.only_keys(sm, sp, {"kind", "value"});
      spec.sampler = ThroughputSampler::constant(rd.non_negative(sm, sp, "value"));
    } else if (kind == "uniform") {
      rd.only_keys(sm, sp, {"kind", "low", "high"});
      spec.sampler = ThroughputSampler::uniform(rd.non_negative(sm, sp, "low"), rd.non_negative(sm, sp, "high"));
    } else if (kind == "lognormal") {
      rd.only_keys(sm, sp, {"kind", "mu", "sigma"});
      spec.sampler = ThroughputSampler::lognormal(rd.number(sm, sp, "mu"), rd.non_negative(sm, sp, "sigma"));
    } else {
      rd.fail(sm["kind"], sp + ".kind", "unknown sampler kind '" + kind + "'");
    }
    if (!spec.sampler.valid()) rd.fail(sm, sp, "invalid sampler parameters");
    out.experiment = spec;
  }
  const auto problems = s.validate();
  if (!problems.empty()) throw ScenarioError(source + ": " + problems.front());
  return out;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ScenarioError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str(), path);
}

}  // namespace coco
