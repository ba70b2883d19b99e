#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "coco/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

Result sh(const std::string& cmd) {
  Result r;
  FILE* p = popen((cmd + " 2>/dev/null").c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string cli() { return std::string(COCO_CLI); }
std::string scenario(const std::string& name) { return std::string(COCO_SCENARIOS) + "/" + name; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("coco_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string at(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, PlaceExitCodes) {
  const auto ok = sh(cli() + " place " + scenario("topo1.yaml") + " --out " + at("p.json"));
  EXPECT_EQ(ok.code, 0);
  const auto j = coco::Json::parse(coco::read_text(at("p.json")));
  EXPECT_TRUE(j["feasible"].get<bool>());
  EXPECT_EQ(j["policy"], "opt");

  const auto bad = sh(cli() + " place " + scenario("overloaded.yaml"));
  EXPECT_EQ(bad.code, 2);
  EXPECT_FALSE(coco::Json::parse(bad.out)["feasible"].get<bool>());

  EXPECT_EQ(sh(cli() + " place " + at("missing.yaml")).code, 1);
  EXPECT_EQ(sh(cli() + " place " + scenario("topo1.yaml") + " --policy best").code, 1);
  EXPECT_EQ(sh(cli()).code, 1);
  EXPECT_EQ(sh(cli() + " --help").code, 0);

  coco::write_text(at("broken.yaml"), "format: coco-scenario/1\nvms: 1\nbogus: 1\n");
  EXPECT_EQ(sh(cli() + " place " + at("broken.yaml")).code, 1);
}

TEST_F(Cli, SimulateWritesAllFiles) {
  const auto r = sh(cli() + " simulate " + scenario("push_aside.yaml") + " --policy coco --out-dir " + at("coco"));
  ASSERT_EQ(r.code, 0);
  for (const char* f : {"metrics.json", "latency.csv", "shares.csv", "vm_count.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "coco" / f)) << f;
  }
  const auto coco = coco::Json::parse(coco::read_text(at("coco/metrics.json")));
  EXPECT_EQ(coco["final_vms"].get<int>(), 2);
  EXPECT_EQ(coco["events"][0]["kind"], "push_aside");
  EXPECT_EQ(coco["events"][0]["migrations"][0]["element"], "Logger");

  ASSERT_EQ(sh(cli() + " simulate " + scenario("push_aside.yaml") + " --policy traditional --out-dir " + at("t")).code, 0);
  const auto trad = coco::Json::parse(coco::read_text(at("t/metrics.json")));
  EXPECT_EQ(trad["final_vms"].get<int>(), 3);
  EXPECT_LT(coco["steady_latency_mean_ms"].get<double>(), trad["steady_latency_mean_ms"].get<double>());

  EXPECT_EQ(sh(cli() + " simulate " + scenario("overloaded.yaml") + " --out-dir " + at("o")).code, 2);
}

TEST_F(Cli, PlacementFeedsSimulation) {
  ASSERT_EQ(sh(cli() + " place " + scenario("topo1.yaml") + " --policy greedy --out " + at("p.json")).code, 0);
  const auto placed = coco::Json::parse(coco::read_text(at("p.json")));
  ASSERT_EQ(sh(cli() + " simulate " + scenario("topo1.yaml") + " --placement " + at("p.json") + " --out-dir " + at("s")).code, 0);
  const auto m = coco::Json::parse(coco::read_text(at("s/metrics.json")));
  EXPECT_DOUBLE_EQ(m["initial_total_DB"].get<double>(), placed["total_DB"].get<double>());
  EXPECT_DOUBLE_EQ(m["final_total_DB"].get<double>(), placed["total_DB"].get<double>());
  EXPECT_TRUE(m["events"].empty());
  EXPECT_EQ(m["dropped_MB"].get<double>(), 0.0);

  coco::write_text(at("junk.json"), "{\"assignment\": {\"E1\": 0}}");
  EXPECT_EQ(sh(cli() + " simulate " + scenario("topo1.yaml") + " --placement " + at("junk.json") + " --out-dir " + at("j")).code, 1);
}

TEST_F(Cli, ExperimentDeterministic) {
  const std::string cmd = cli() + " experiment " + scenario("topo1.yaml") + " --trials 50 --seed 7";
  const auto a = sh(cmd + " --csv " + at("a.csv"));
  const auto b = sh(cmd + " --jobs 2 --csv " + at("b.csv"));
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(coco::read_text(at("a.csv")), coco::read_text(at("b.csv")));
  const auto j = coco::Json::parse(a.out);
  EXPECT_EQ(j["trials"].get<int>(), 50);
  EXPECT_EQ(j["policies"].size(), 3u);

  const auto one = sh(cli() + " experiment " + scenario("topo1.yaml") + " --trials 1");
  EXPECT_EQ(one.code, 0);
  EXPECT_EQ(sh(cli() + " experiment " + scenario("push_aside.yaml")).code, 1);
}

TEST_F(Cli, FitProfiles) {
  const auto r = sh(cli() + " fit " + scenario("classifier_samples.csv"));
  ASSERT_EQ(r.code, 0);
  const auto j = coco::Json::parse(r.out);
  EXPECT_NEAR(j["a"].get<double>(), 0.00048, 1e-12);
  EXPECT_NEAR(j["b"].get<double>(), 0.0042, 1e-12);
  EXPECT_NEAR(j["r_squared"].get<double>(), 1.0, 1e-12);

  coco::write_text(at("flat.csv"), "v,r\n5,0.1\n5,0.2\n");
  EXPECT_EQ(sh(cli() + " fit " + at("flat.csv")).code, 1);
  coco::write_text(at("bad.csv"), "1,2\nx,y\n");
  EXPECT_EQ(sh(cli() + " fit " + at("bad.csv")).code, 1);
}

TEST_F(Cli, OutDirFromEnvironment) {
  const auto r = sh("COCO_OUT_DIR=" + at("env") + " " + cli() + " place " + scenario("topo1.yaml"));
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  EXPECT_TRUE(fs::exists(dir_ / "env" / "placement.json"));
}
