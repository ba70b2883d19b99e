#pragma once

// JSON and CSV records for placements, simulation metrics, experiments and
// profile fits, plus the matching loaders.

#include <charconv>
#include <cstdio>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "coco/experiment.hpp"
#include "coco/graph.hpp"
#include "coco/placement.hpp"
#include "coco/profile.hpp"
#include "coco/sim.hpp"

namespace coco {

using Json = nlohmann::ordered_json;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shortest text that reads back to the same double.
inline std::string format_number(double x) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << text;
  if (!out) throw std::runtime_error(path + ": write failed");
}

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

// --- placement ---------------------------------------------------------------

inline Json placement_json(const ProcessingGraph& g, const std::optional<Placement>& p,
                           const CostModel& cost, const std::string& policy) {
  Json j;
  j["policy"] = policy;
  j["feasible"] = p.has_value();
  if (!p) {
    j["num_vms"] = nullptr;
    j["assignment"] = nullptr;
    j["total_DB"] = nullptr;
    return j;
  }
  j["num_vms"] = p->num_vms;
  Json a = Json::object();
  for (const auto& e : g.elements()) a[e.name] = p->at(e.id).value;
  j["assignment"] = a;
  j["total_DB"] = total_delayed_bytes(g, *p, cost);
  Json loads = Json::array();
  for (const auto l : vm_loads(g, *p)) loads.push_back(l);
  j["vm_loads"] = loads;
  return j;
}

inline Placement placement_from_json(const Json& j, const ProcessingGraph& g) {
  if (!j.is_object() || !j.contains("assignment") || !j["assignment"].is_object()) {
    throw FormatError("placement record has no assignment");
  }
  const auto& a = j["assignment"];
  std::size_t num_vms = 0;
  std::vector<VmId> vm_of(g.num_elements());
  for (const auto& e : g.elements()) {
    if (!a.contains(e.name) || !a[e.name].is_number_unsigned()) {
      throw FormatError("placement record does not assign element " + e.name);
    }
    const auto vm = a[e.name].get<std::uint32_t>();
    vm_of[e.id.index()] = VmId{vm};
    num_vms = std::max<std::size_t>(num_vms, vm + 1);
  }
  for (const auto& [name, value] : a.items()) {
    if (!g.find_element(name)) throw FormatError("placement record names unknown element " + name);
  }
  if (j.contains("num_vms") && j["num_vms"].is_number_unsigned()) {
    num_vms = std::max(num_vms, j["num_vms"].get<std::size_t>());
  }
  return Placement{std::move(vm_of), num_vms};
}

inline Placement load_placement(const std::string& path, const ProcessingGraph& g) {
  try {
    return placement_from_json(Json::parse(read_text(path)), g);
  } catch (const Json::exception& e) {
    throw FormatError(path + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// --- profile fit -------------------------------------------------------------

inline Json fit_json(const ProfileFit& f, std::size_t samples) {
  Json j;
  j["a"] = f.profile.intercept;
  j["b"] = f.profile.slope;
  j["r_squared"] = f.r_squared;
  j["samples"] = samples;
  return j;
}

inline ElementProfile profile_from_json(const Json& j, std::string label = "fitted") {
  if (!j.is_object() || !j.contains("a") || !j.contains("b") || !j["a"].is_number() ||
      !j["b"].is_number()) {
    throw FormatError("profile record needs numeric a and b");
  }
  return make_profile(std::move(label), j["a"].get<double>(), j["b"].get<double>());
}

// Rows of "v,r" with an optional header line; '#' starts a comment line.
inline std::vector<Sample> parse_samples_csv(const std::string& text, const std::string& source) {
  std::vector<Sample> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  auto parse = [&](std::string_view cell, double& x) {
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
    const auto r = std::from_chars(cell.data(), cell.data() + cell.size(), x);
    return r.ec == std::errc{} && r.ptr == cell.data() + cell.size() && !cell.empty();
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw FormatError(source + ":" + std::to_string(lineno) + ": expected two columns v,r");
    }
    Sample s;
    const bool ok = parse(std::string_view(line).substr(0, comma), s.v) &&
                    parse(std::string_view(line).substr(comma + 1), s.r);
    if (!ok) {
      if (out.empty() && lineno == 1) continue;  // header
      throw FormatError(source + ":" + std::to_string(lineno) + ": not a number");
    }
    out.push_back(s);
  }
  return out;
}

// --- simulation metrics ------------------------------------------------------

inline Json metrics_json(const SimMetrics& m, const ProcessingGraph& initial) {
  Json j;
  j["policy"] = m.policy;
  j["periods"] = m.periods;
  j["period_s"] = m.period_s;
  j["final_vms"] = m.final_vms;
  j["accumulated_DB"] = m.accumulated_db;
  j["initial_total_DB"] = m.initial_total_db;
  j["final_total_DB"] = m.final_total_db;
  j["dropped_MB"] = m.dropped_MB;
  Json steady = Json::object();
  for (const auto& [name, v] : m.steady_latency_ms) steady[name] = v;
  j["steady_latency_ms"] = steady;
  j["steady_latency_mean_ms"] = m.steady_latency_mean_ms;
  Json events = Json::array();
  for (const auto& e : m.events) {
    Json ev;
    ev["period"] = e.period;
    ev["time_s"] = e.time_s;
    ev["kind"] = e.kind;
    ev["target"] = m.element_names.at(e.target.index());
    Json mig = Json::array();
    for (const auto& x : e.migrations) {
      mig.push_back({{"element", m.element_names.at(x.element.index())},
                     {"from", x.from.value},
                     {"to", x.to.value}});
    }
    ev["migrations"] = mig;
    ev["replica"] = e.replica ? Json(m.element_names.at(e.replica->index())) : Json(nullptr);
    ev["vm"] = e.vm ? Json(e.vm->value) : Json(nullptr);
    ev["share"] = e.share;
    ev["required"] = e.required;
    events.push_back(ev);
  }
  j["events"] = events;
  Json elements = Json::array();
  for (std::size_t i = 0; i < m.elements.size(); ++i) {
    const auto& t = m.elements[i];
    elements.push_back({{"name", m.element_names[i]},
                        {"vm", m.final_placement.at(ElementId{i}).value},
                        {"injected_MB", t.injected_MB},
                        {"serviced_MB", t.serviced_MB},
                        {"buffered_MB", t.buffered_MB},
                        {"dropped_MB", t.dropped_MB}});
  }
  j["elements"] = elements;
  Json paths = Json::array();
  for (const auto& p : m.paths) {
    paths.push_back({{"name", p.name},
                     {"origin", initial.chain(p.origin).name},
                     {"throughput_MBps", p.throughput_MBps},
                     {"inter_vm_hops", p.inter_hops},
                     {"intra_vm_hops", p.intra_hops}});
  }
  j["paths"] = paths;
  return j;
}

inline std::string latency_csv(const SimMetrics& m, const ProcessingGraph& initial) {
  std::string s = "period,time_s,chain,latency_ms,queueing_ms\n";
  for (const auto& r : m.latency) {
    s += std::to_string(r.period) + "," + format_number(r.time_s) + "," + initial.chain(r.chain).name +
         "," + format_number(r.latency_ms) + "," + format_number(r.queueing_ms) + "\n";
  }
  return s;
}

inline std::string shares_csv(const SimMetrics& m) {
  std::string s = "period,time_s,vm,element,share,buffer_MB,arrival_MBps,c\n";
  for (const auto& r : m.shares) {
    s += std::to_string(r.period) + "," + format_number(r.time_s) + "," + std::to_string(r.vm.value) +
         "," + m.element_names.at(r.element.index()) + "," + format_number(r.share) + "," +
         format_number(r.buffer_MB) + "," + format_number(r.arrival_MBps) + "," + format_number(r.c) + "\n";
  }
  return s;
}

inline std::string vm_count_csv(const SimMetrics& m) {
  std::string s = "period,time_s,vms\n";
  for (const auto& r : m.vm_count) {
    s += std::to_string(r.period) + "," + format_number(r.time_s) + "," + std::to_string(r.vms) + "\n";
  }
  return s;
}

// --- placement experiment ----------------------------------------------------

inline Json sampler_json(const ThroughputSampler& s) {
  switch (s.kind) {
    case ThroughputSampler::Kind::kConstant: return {{"kind", "constant"}, {"value", s.a}};
    case ThroughputSampler::Kind::kUniform: return {{"kind", "uniform"}, {"low", s.a}, {"high", s.b}};
    case ThroughputSampler::Kind::kLognormal: return {{"kind", "lognormal"}, {"mu", s.a}, {"sigma", s.b}};
  }
  return nullptr;
}

inline Json experiment_json(const ExperimentResult& r, const ThroughputSampler& sampler,
                            std::uint64_t seed, std::size_t num_vms) {
  Json j;
  j["trials"] = r.trials;
  j["seed"] = seed;
  j["num_vms"] = num_vms;
  j["sampler"] = sampler_json(sampler);
  j["common_successes"] = r.common_successes;
  Json ps = Json::array();
  for (const auto& p : r.policies) {
    ps.push_back({{"policy", p.policy},
                  {"failures", p.failures},
                  {"failure_rate", p.failure_rate},
                  {"mean_DB", p.mean_db},
                  {"mean_DB_common", p.mean_db_common}});
  }
  j["policies"] = ps;
  return j;
}

inline std::string experiment_trials_csv(const ExperimentResult& r, const ProcessingGraph& g) {
  std::string s = "trial";
  for (const auto& c : g.chains()) s += ",theta_" + c.name;
  for (const auto* p : kPlacementPolicies) s += std::string(",DB_") + p;
  s += "\n";
  for (std::size_t t = 0; t < r.outcomes.size(); ++t) {
    const auto& o = r.outcomes[t];
    s += std::to_string(t);
    for (const auto v : o.throughput_MBps) s += "," + format_number(v);
    for (const auto& d : o.db) s += "," + (d ? format_number(*d) : std::string("fail"));
    s += "\n";
  }
  return s;
}

inline std::string experiment_table(const ExperimentResult& r) {
  std::ostringstream os;
  os << "policy    failures  rate      mean_DB       mean_DB_common\n";
  for (const auto& p : r.policies) {
    char line[160];
    std::snprintf(line, sizeof line, "%-9s %-9zu %-9.4f %-13.6g %.6g\n", p.policy.c_str(), p.failures,
                  p.failure_rate, p.mean_db, p.mean_db_common);
    os << line;
  }
  return os.str();
}

// --- generic CSV -------------------------------------------------------------

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Plain comma separated values without quoting, as written above.
inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.header.size()) throw FormatError("csv row width differs from header");
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

}  // namespace coco
