#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "misr/manifest.hpp"

using namespace misr;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string("\"") + MISR_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() / ("misr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string opts(const std::string& sub = "") const {
    return "--set output_dir=" + (root_ / sub).string() + " --set members=4 --set seed=2";
  }

  fs::path root_;
};

}  // namespace

TEST_F(Cli, SimulateIsDeterministic) {
  ASSERT_EQ(run("simulate " + opts("a")), 0);
  ASSERT_EQ(run("simulate " + opts("b")), 0);
  const Manifest a = load_manifest(root_ / "a" / "manifest.json");
  ASSERT_EQ(a.entries.size(), 4u);
  for (const auto& e : a.entries) {
    const fs::path rel = fs::path(std::string(to_string(e.band))) / e.tile_id / "HR.png";
    EXPECT_EQ(slurp(root_ / "a" / "data" / rel), slurp(root_ / "b" / "data" / rel));
  }
}

TEST_F(Cli, UsageAndConfigErrorsExitTwo) {
  EXPECT_EQ(run("simulate " + opts() + " --set members=0"), 2);
  EXPECT_EQ(run("simulate --set bogus=1"), 2);
  EXPECT_EQ(run("nosuchcommand"), 2);
  EXPECT_EQ(run("simulate --config " + (root_ / "absent.cfg").string()), 2);
  EXPECT_EQ(run("split " + opts()), 2);  // no manifest yet
}

TEST_F(Cli, AssembleRecordsRejection) {
  ASSERT_EQ(run("simulate " + opts()), 0);
  const Manifest sim = load_manifest(root_ / "manifest.json");
  const auto& victim = sim.entries.front();
  const fs::path dir = root_ / "data" / std::string(to_string(victim.band)) / victim.tile_id;
  fs::remove(dir / "LR008.png");
  fs::remove(dir / "QM008.png");
  ASSERT_EQ(run("assemble " + opts()), 0);
  const Manifest man = load_manifest(root_ / "manifest.json");
  for (const auto& e : man.entries) {
    if (e.id() == victim.id()) {
      EXPECT_FALSE(e.admitted);
      EXPECT_EQ(e.rule, rule::kMinLrCount);
    } else {
      EXPECT_TRUE(e.admitted);
    }
  }
}

TEST_F(Cli, SplitIsStableAndHonoursExclusions) {
  ASSERT_EQ(run("simulate " + opts() + " --set members=8"), 0);
  ASSERT_EQ(run("split " + opts() + " --set split.seed=4"), 0);
  const std::string first = slurp(root_ / "manifest.json");
  ASSERT_EQ(run("split " + opts() + " --set split.seed=4"), 0);
  EXPECT_EQ(slurp(root_ / "manifest.json"), first);

  const Manifest man = load_manifest(root_ / "manifest.json");
  const std::string tile = man.entries.front().tile_id;
  ASSERT_EQ(run("split " + opts() + " --set split.seed=4 --set split.exclude=" + tile), 0);
  const Manifest ex = load_manifest(root_ / "manifest.json");
  for (const auto& e : ex.entries) {
    if (e.tile_id == tile) {
      EXPECT_EQ(e.split, split_label::kExcluded);
    } else {
      EXPECT_NE(e.split, split_label::kExcluded);
    }
  }
}

TEST_F(Cli, MissingParamsExitTwo) {
  ASSERT_EQ(run("simulate " + opts()), 0);
  EXPECT_EQ(run("evaluate " + opts()), 2);
  EXPECT_EQ(run("infer " + opts()), 2);
}

TEST_F(Cli, PipelineReportIsConsistent) {
  ASSERT_EQ(run("simulate " + opts()), 0);
  ASSERT_EQ(run("split " + opts() + " --set split.test_fraction=0.5"), 0);
  ASSERT_EQ(run("baseline " + opts()), 0);
  ASSERT_EQ(run("train " + opts() + " --set train.epochs=1"), 0);
  ASSERT_EQ(run("infer " + opts()), 0);
  ASSERT_EQ(run("evaluate " + opts()), 0);
  EXPECT_TRUE(fs::exists(root_ / "params.bin"));
  EXPECT_TRUE(fs::exists(root_ / "history.csv"));
  EXPECT_TRUE(fs::exists(root_ / "baseline.csv"));
  EXPECT_FALSE(fs::is_empty(root_ / "sr"));
  EXPECT_FALSE(fs::is_empty(root_ / "dumps"));

  const Json report = Json::parse(slurp(root_ / "report.json"));
  const auto& rows = report["rows"];
  ASSERT_FALSE(rows.empty());
  double sum_b = 0, sum_n = 0;
  for (const auto& r : rows) {
    sum_b += r["cpsnr_bicubic"].get<double>();
    sum_n += r["cpsnr_network"].get<double>();
  }
  const auto& all = report["aggregates"].back();
  EXPECT_EQ(all["n_images"].get<std::size_t>(), rows.size());
  EXPECT_NEAR(all["avg_cpsnr_bicubic"].get<double>(), sum_b / static_cast<double>(rows.size()), 1e-12);
  EXPECT_NEAR(all["avg_cpsnr_network"].get<double>(), sum_n / static_cast<double>(rows.size()), 1e-12);

  // baseline.csv agrees with the report's bicubic column.
  std::istringstream base(slurp(root_ / "baseline.csv"));
  std::string line;
  std::getline(base, line);
  std::size_t n = 0;
  while (std::getline(base, line)) ++n;
  EXPECT_EQ(n, rows.size());
}
