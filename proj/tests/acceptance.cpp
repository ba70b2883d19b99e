// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "coco/coco.hpp"
#include "coco/io.hpp"
#include "coco/scenario.hpp"
#include "oracles.hpp"

using namespace coco;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

std::string scenario_path(const std::string& name) { return std::string(COCO_SCENARIOS) + "/" + name; }

// 1. Exact optimizer against exhaustive enumeration, both search methods.
Verdict solver_optimality() {
  Rng rng(20240601);
  int mismatches = 0;
  int infeasible = 0;
  const auto start = std::chrono::steady_clock::now();
  for (int t = 0; t < 200; ++t) {
    const auto g = oracle::random_graph(rng, 10, 3, 120);
    const std::size_t k = 1 + uniform_index(rng, 4);
    const auto o = oracle::brute_force(g, k);
    if (!o) ++infeasible;
    for (const std::size_t threshold : {std::size_t{12}, std::size_t{0}}) {
      const auto p = optimize_placement(g, k, {}, SolverOptions{threshold});
      if (p.has_value() != o.has_value()) {
        ++mismatches;
      } else if (p && (!capacity_ok(g, *p) || crossing_throughput(g, *p) != o->crossing)) {
        ++mismatches;
      }
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {mismatches == 0 && secs < 60.0,
          std::to_string(mismatches) + " mismatches over 200 graphs (" + std::to_string(infeasible) +
              " infeasible), " + fmt("%.1f s", secs) + " < 60 s"};
}

struct Topology {
  std::string name;
  Scenario sc;
};

std::vector<Topology> topologies() {
  return {{"Topo1", load_scenario(scenario_path("topo1.yaml"))}, {"Topo2", load_scenario(scenario_path("topo2.yaml"))}};
}

ExperimentResult experiment(const Topology& t, std::uint64_t seed) {
  return run_placement_experiment(t.sc.sim.graph, t.sc.sim.num_vms, t.sc.experiment->trials, t.sc.experiment->sampler,
                                  seed, t.sc.sim.cost);
}

// 2. Mean delayed bytes over the trials where every policy placed the chains.
Verdict baseline_dominance() {
  const auto start = std::chrono::steady_clock::now();
  bool ok = true;
  std::ostringstream os;
  for (const auto& t : topologies()) {
    const auto r = experiment(t, t.sc.sim.seed);
    const double c = r.policies[0].mean_db_common;
    const double g = r.policies[1].mean_db_common;
    const double q = r.policies[2].mean_db_common;
    const bool order = c < g && g < q;
    const double ratio = q / c;
    ok = ok && order && r.common_successes > 0;
    if (t.name == "Topo1") ok = ok && ratio > 1.5;
    os << t.name << " DB coco/greedy/random " << fmt("%.4g", c) << "/" << fmt("%.4g", g) << "/" << fmt("%.4g", q)
       << " random/coco " << fmt("%.2f", ratio) << " greedy/coco " << fmt("%.2f", g / c) << "; ";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ok = ok && secs < 300.0;
  os << fmt("%.1f s", secs);
  return {ok, os.str()};
}

// 3. Failure-rate ordering over 20 independent repetitions.
Verdict failure_ordering() {
  constexpr int kReps = 20;
  bool ok = true;
  std::ostringstream os;
  for (const auto& t : topologies()) {
    int weak = 0;
    int strict = 0;
    double coco_rate = 0.0;
    for (int rep = 0; rep < kReps; ++rep) {
      const auto r = experiment(t, derive_seed(t.sc.sim.seed, 1000 + rep));
      const auto c = r.policies[0].failures;
      const auto g = r.policies[1].failures;
      const auto q = r.policies[2].failures;
      if (c <= g && g <= q) ++weak;
      if (c < g && c < q) ++strict;
      coco_rate += r.policies[0].failure_rate / kReps;
    }
    const int need = static_cast<int>(std::ceil(0.95 * kReps));
    ok = ok && weak >= need;
    if (t.name == "Topo1") ok = ok && strict >= need;
    os << t.name << " ordered " << weak << "/" << kReps << ", strict " << strict << "/" << kReps
       << ", coco failure rate " << fmt("%.1f%%", 100.0 * coco_rate) << "; ";
  }
  auto s = os.str();
  s.resize(s.size() - 2);
  return {ok, s};
}

// 4. Four-element chain traffic step over a grid of transfer delays and sync penalties.
Verdict push_aside_scenario() {
  const auto base = load_scenario(scenario_path("push_aside.yaml")).sim;
  bool ok = true;
  int configs = 0;
  std::ostringstream os;
  for (const double td : {0.5e-3, 1e-3, 2e-3, 5e-3}) {
    for (const double sync : {0.0, 0.5e-3, 2e-3}) {
      auto s = base;
      s.cost.t_d_inter_vm = td;
      s.sync_penalty_s = sync;
      const auto c = run(s, Policy::kCoco);
      const auto t = run(s, Policy::kTraditional);
      int coco_hops = -1;
      int trad_rerouted = -1;
      for (const auto& p : c.paths) coco_hops = std::max(coco_hops, p.inter_hops);
      for (const auto& p : t.paths) {
        if (p.chain != p.origin) trad_rerouted = p.inter_hops;
      }
      const bool pass = c.final_vms == 2 && t.final_vms == 3 &&
                        c.steady_latency_mean_ms < t.steady_latency_mean_ms && coco_hops == 1 &&
                        trad_rerouted == 3;
      ok = ok && pass;
      ++configs;
      if (!pass || (td == 1e-3 && sync == 0.5e-3)) {
        os << "t_d " << td * 1e3 << " ms sync " << sync * 1e3 << " ms: VMs " << c.final_vms << " vs "
           << t.final_vms << ", latency " << fmt("%.3f", c.steady_latency_mean_ms) << " vs "
           << fmt("%.3f", t.steady_latency_mean_ms) << " ms, hops " << coco_hops << " vs " << trad_rerouted
           << "; ";
      }
    }
  }
  os << configs << " configurations";
  return {ok, os.str()};
}

// 5. Randomized scheduler states.
Verdict scheduler_correctness() {
  Rng rng(8675309);
  int sum_bad = 0;
  int ratio_bad = 0;
  int fixed_bad = 0;
  double worst_sum = 0.0;
  double worst_ratio = 0.0;
  const auto start = std::chrono::steady_clock::now();
  for (int t = 0; t < 10000; ++t) {
    const auto n = 2 + uniform_index(rng, 7);
    SchedulerState s{0.01, {}};
    for (std::size_t i = 0; i < n; ++i) {
      ElementSlot e;
      e.id = ElementId{i};
      e.profile = make_profile("p", -0.02 + 0.04 * uniform01(rng), 0.001 + 0.01 * uniform01(rng));
      e.buffer_MB = 0.5 * uniform01(rng);
      e.prev_buffer_MB = 0.5 * uniform01(rng);
      s.slots.push_back(e);
    }
    std::vector<double> w(n);
    for (auto& x : w) x = 0.05 + uniform01(rng);
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    double lows = 0.0;
    for (const auto& e : s.slots) lows += std::max(0.001, std::max(0.0, e.profile.intercept)) + 1e-6;
    for (std::size_t i = 0; i < n; ++i) {
      auto& e = s.slots[i];
      e.share = std::max(0.001, std::max(0.0, e.profile.intercept)) + 1e-6 + (1.0 - lows) * w[i] / wsum;
      const double v = (e.share - e.profile.intercept) / e.profile.slope;
      if ((e.buffer_MB - e.prev_buffer_MB) / s.period_s + v < 0.0) e.prev_buffer_MB = e.buffer_MB;
    }

    const auto out = compute_next_shares(s);
    const double total = std::accumulate(out.shares.begin(), out.shares.end(), 0.0);
    worst_sum = std::max(worst_sum, std::abs(total - 1.0));
    if (std::abs(total - 1.0) > 1e-9) ++sum_bad;
    std::optional<double> ratio;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& p = s.slots[i].profile;
      const double va = out.arrival_MBps[i];
      if (out.clamped[i] || va <= 0.0) continue;
      // Buffer growth this share would produce over its own service volume.
      const double vstar = (out.shares[i] - p.intercept) / p.slope;
      const double q = (va - vstar) / vstar;
      if (!ratio) ratio = q;
      worst_ratio = std::max(worst_ratio, std::abs(q - *ratio));
      if (std::abs(q - *ratio) > 1e-9) ++ratio_bad;
    }

    auto steady = s;
    for (auto& e : steady.slots) e.prev_buffer_MB = e.buffer_MB;
    const auto fixed = compute_next_shares(steady);
    for (std::size_t i = 0; i < n; ++i) {
      if (fixed.shares[i] != steady.slots[i].share) ++fixed_bad;
    }
    if (fixed.c != 0.0) ++fixed_bad;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {sum_bad == 0 && ratio_bad == 0 && fixed_bad == 0 && secs < 10.0,
          "10000 states: max |sum-1| " + fmt("%.1e", worst_sum) + ", max ratio spread " + fmt("%.1e", worst_ratio) +
              ", fixed-point mismatches " + std::to_string(fixed_bad) + ", " + fmt("%.2f s", secs) + " < 10 s"};
}

// 6. Simulated delayed bytes against the static crossing-hop formula.
Verdict cost_consistency() {
  Rng rng(4242);
  int checked = 0;
  double worst = 0.0;
  while (checked < 50) {
    SimScenario s;
    s.graph = oracle::random_graph(rng, 9, 3, 40);
    s.num_vms = 1 + uniform_index(rng, 4);
    const auto p = random_place(s.graph, s.num_vms, rng());
    if (!p) continue;
    s.initial_placement = p;
    s.scaling = false;
    s.duration_s = 0.5;
    const auto m = run(s, Policy::kCoco);
    const double expected = total_delayed_bytes(s.graph, *p, s.cost) * s.duration_s;
    const double err = expected == 0.0 ? std::abs(m.accumulated_db) : std::abs(m.accumulated_db - expected) / expected;
    worst = std::max(worst, err);
    ++checked;
  }
  return {worst <= 1e-9, "50 random placements, max relative error " + fmt("%.2e", worst) + " <= 1e-9"};
}

// 7. Profile fitting on the published lines.
Verdict profile_fitting() {
  struct Line {
    ElementProfile p;
    double lo, hi;
  };
  const std::vector<Line> lines{{classifier_profile(), 10, 220}, {sender_profile(), 50, 750}};
  bool ok = true;
  double worst_coef = 0.0;
  double worst_slope = 0.0;
  double min_r2 = 1.0;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> noise(0.0, 0.005);
  for (const auto& l : lines) {
    std::vector<Sample> clean;
    for (int k = 0; k <= 40; ++k) {
      const double v = l.lo + (l.hi - l.lo) * k / 40.0;
      clean.push_back({v, l.p.intercept + l.p.slope * v});
    }
    const auto f = fit_profile(clean);
    worst_coef = std::max({worst_coef, std::abs(f.profile.intercept - l.p.intercept), std::abs(f.profile.slope - l.p.slope)});
    ok = ok && f.r_squared == 1.0;
    for (int rep = 0; rep < 100; ++rep) {
      auto noisy = clean;
      for (auto& s : noisy) s.r += noise(rng);
      const auto g = fit_profile(noisy);
      worst_slope = std::max(worst_slope, std::abs(g.profile.slope - l.p.slope) / l.p.slope);
      min_r2 = std::min(min_r2, g.r_squared);
    }
  }
  ok = ok && worst_coef <= 1e-12 && worst_slope <= 0.05 && min_r2 >= 0.99;
  return {ok, "noiseless max coefficient error " + fmt("%.1e", worst_coef) + "; noisy slope error max " +
                  fmt("%.2f%%", 100 * worst_slope) + ", min R^2 " + fmt("%.5f", min_r2)};
}

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " 2>/dev/null").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::pair<std::string, std::string>> snapshot(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) files.emplace_back(fs::relative(e.path(), dir).string(), read_text(e.path().string()));
  }
  std::sort(files.begin(), files.end());
  return files;
}

// 8. Every subcommand twice into separate directories; outputs compared.
Verdict determinism() {
  const std::string cli = COCO_CLI;
  const auto root = fs::temp_directory_path() / "coco_acceptance";
  fs::remove_all(root);
  const std::vector<std::string> commands{
      "place " + scenario_path("topo1.yaml") + " --policy opt --out {}/place_opt.json",
      "place " + scenario_path("topo2.yaml") + " --policy greedy --out {}/place_greedy.json",
      "place " + scenario_path("topo2.yaml") + " --policy random --out {}/place_random.json",
      "simulate " + scenario_path("push_aside.yaml") + " --policy coco --out-dir {}/sim_coco",
      "simulate " + scenario_path("push_aside.yaml") + " --policy traditional --out-dir {}/sim_trad",
      "simulate " + scenario_path("topo1.yaml") + " --policy random --out-dir {}/sim_random",
      "experiment " + scenario_path("topo1.yaml") + " --trials 300 --seed 5 --jobs 2 --out {}/exp.json --csv {}/exp.csv",
      "fit " + scenario_path("classifier_samples.csv") + " --out {}/fit.json",
  };
  int failures = 0;
  for (const char* run : {"a", "b"}) {
    const auto dir = root / run;
    fs::create_directories(dir);
    for (std::size_t c = 0; c < commands.size(); ++c) {
      auto cmd = commands[c];
      for (auto at = cmd.find("{}"); at != std::string::npos; at = cmd.find("{}")) cmd.replace(at, 2, dir.string());
      const auto out = dir / ("stdout_" + std::to_string(c) + ".txt");
      if (shell(cli + " " + cmd + " > " + out.string()) != 0) ++failures;
    }
  }
  const auto a = snapshot(root / "a");
  const auto b = snapshot(root / "b");
  const bool same = a == b && !a.empty();
  fs::remove_all(root);
  return {same && failures == 0, std::to_string(commands.size()) + " commands, " + std::to_string(a.size()) +
                                     " output files, " + (same ? "byte-identical" : "outputs differ") +
                                     (failures ? ", " + std::to_string(failures) + " commands failed" : "")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"solver optimality", solver_optimality},
      {"baseline DB dominance", baseline_dominance},
      {"failure-rate ordering", failure_ordering},
      {"push-aside scenario", push_aside_scenario},
      {"scheduler correctness", scheduler_correctness},
      {"cost-model consistency", cost_consistency},
      {"profile fitting", profile_fitting},
      {"CLI determinism", determinism},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!v.pass) ++failed;
    std::printf("[%s] %zu. %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                v.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
