// Command-line front end. Exit codes: 0 ok, 1 input error, 2 infeasible.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "coco/experiment.hpp"
#include "coco/io.hpp"
#include "coco/placement.hpp"
#include "coco/profile.hpp"
#include "coco/scenario.hpp"
#include "coco/sim.hpp"
#include "coco/solver.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kInfeasible = 2;

std::optional<std::string> env_out_dir() {
  const char* d = std::getenv("COCO_OUT_DIR");
  if (d == nullptr || *d == '\0') return std::nullopt;
  return std::string(d);
}

// Explicit path, else COCO_OUT_DIR/<name>, else stdout (empty).
std::string resolve_out(const std::string& given, const std::string& name) {
  if (!given.empty()) return given;
  if (const auto d = env_out_dir()) {
    fs::create_directories(*d);
    return (fs::path(*d) / name).string();
  }
  return {};
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
  } else {
    coco::write_text(path, text);
  }
}

int cmd_place(const std::string& scenario_path, const std::string& policy, const std::string& out) {
  const auto sc = coco::load_scenario(scenario_path);
  const auto split = coco::split_overloaded(sc.sim.graph);
  for (const auto& n : split.notes) std::cerr << "note: " << n << "\n";
  const auto& g = split.graph;
  std::optional<coco::Placement> p;
  if (policy == "opt") {
    p = coco::optimize_placement(g, sc.sim.num_vms, sc.sim.cost);
  } else if (policy == "greedy") {
    p = coco::greedy_place(g, sc.sim.num_vms);
  } else {
    p = coco::random_place(g, sc.sim.num_vms, sc.sim.seed);
  }
  emit(resolve_out(out, "placement.json"), coco::dump(coco::placement_json(g, p, sc.sim.cost, policy)));
  if (!p) {
    std::cerr << "infeasible: no placement on " << sc.sim.num_vms << " VMs keeps every core within capacity\n";
    return kInfeasible;
  }
  return kOk;
}

int cmd_simulate(const std::string& scenario_path, const std::string& policy_name,
                 std::string out_dir, const std::string& placement_path) {
  auto sc = coco::load_scenario(scenario_path);
  const auto policy = coco::parse_policy(policy_name);
  if (placement_path.size()) sc.sim.initial_placement = coco::load_placement(placement_path, sc.sim.graph);
  if (out_dir.empty()) out_dir = env_out_dir().value_or(".");
  fs::create_directories(out_dir);
  coco::SimMetrics m;
  try {
    m = coco::run(sc.sim, *policy);
  } catch (const coco::InfeasiblePlacement& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kInfeasible;
  }
  const fs::path dir(out_dir);
  coco::write_text((dir / "metrics.json").string(), coco::dump(coco::metrics_json(m, sc.sim.graph)));
  coco::write_text((dir / "latency.csv").string(), coco::latency_csv(m, sc.sim.graph));
  coco::write_text((dir / "shares.csv").string(), coco::shares_csv(m));
  coco::write_text((dir / "vm_count.csv").string(), coco::vm_count_csv(m));
  std::cout << "policy " << m.policy << ": " << m.final_vms << " VMs, steady latency "
            << coco::format_number(m.steady_latency_mean_ms) << " ms, " << m.events.size()
            << " scaling events\n";
  return kOk;
}

int cmd_experiment(const std::string& scenario_path, std::optional<std::size_t> trials,
                   std::optional<std::uint64_t> seed, const std::string& out, const std::string& csv,
                   std::size_t jobs) {
  const auto sc = coco::load_scenario(scenario_path);
  if (!sc.experiment) throw coco::ScenarioError(scenario_path + ": experiment: section required");
  const auto n = trials.value_or(sc.experiment->trials);
  const auto s = seed.value_or(sc.sim.seed);
  const auto r = coco::run_placement_experiment(sc.sim.graph, sc.sim.num_vms, n, sc.experiment->sampler, s,
                                                sc.sim.cost, jobs);
  emit(resolve_out(out, "experiment.json"),
       coco::dump(coco::experiment_json(r, sc.experiment->sampler, s, sc.sim.num_vms)));
  if (!csv.empty()) coco::write_text(csv, coco::experiment_trials_csv(r, sc.sim.graph));
  std::cerr << coco::experiment_table(r);
  return kOk;
}

int cmd_fit(const std::string& samples_path, const std::string& out, const std::string& label) {
  const auto samples = coco::parse_samples_csv(coco::read_text(samples_path), samples_path);
  const auto fit = coco::fit_profile(samples, label);
  emit(resolve_out(out, "profile.json"), coco::dump(coco::fit_json(fit, samples.size())));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consolidation of modular service function chain elements onto VMs"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out;
  std::string place_policy;
  std::string sim_policy;

  auto* place = app.add_subcommand("place", "compute an initial placement");
  place->add_option("scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);
  place->add_option("--policy", place_policy, "opt | greedy | random")
      ->default_val("opt")
      ->check(CLI::IsMember({"opt", "greedy", "random"}));
  place->add_option("--out", out, "placement JSON (default: $COCO_OUT_DIR/placement.json or stdout)");

  std::string out_dir;
  std::string placement;
  auto* simulate = app.add_subcommand("simulate", "run the period-based simulation");
  simulate->add_option("scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--policy", sim_policy, "coco | traditional | greedy | random")
      ->default_val("coco")
      ->check(CLI::IsMember({"coco", "traditional", "greedy", "random"}));
  simulate->add_option("--out-dir", out_dir, "output directory (default: $COCO_OUT_DIR or .)");
  simulate->add_option("--placement", placement, "initial placement JSON from `place`")
      ->check(CLI::ExistingFile);

  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::string csv;
  std::size_t jobs = 1;
  auto* experiment = app.add_subcommand("experiment", "repeat placements over sampled throughputs");
  experiment->add_option("scenario", scenario, "scenario file")->required()->check(CLI::ExistingFile);
  experiment->add_option("--trials", trials, "number of trials (default: scenario)")->check(CLI::PositiveNumber);
  experiment->add_option("--seed", seed, "master seed (default: scenario)");
  experiment->add_option("--out", out, "summary JSON (default: $COCO_OUT_DIR/experiment.json or stdout)");
  experiment->add_option("--csv", csv, "per-trial CSV");
  experiment->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  std::string samples;
  std::string label = "fitted";
  auto* fit = app.add_subcommand("fit", "fit a CPU profile to v,r samples");
  fit->add_option("samples", samples, "CSV of v,r rows")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", out, "profile JSON (default: $COCO_OUT_DIR/profile.json or stdout)");
  fit->add_option("--label", label, "profile label");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (*place) return cmd_place(scenario, place_policy, out);
    if (*simulate) return cmd_simulate(scenario, sim_policy, out_dir, placement);
    if (*experiment) return cmd_experiment(scenario, trials, seed, out, csv, jobs);
    if (*fit) return cmd_fit(samples, out, label);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
