#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cli_support.hpp"
#include "nowcast/io.hpp"

namespace fs = std::filesystem;
using test::run_cli;
using test::slurp;

namespace {

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = test::scratch_dir("cli");
    const std::string d = " --out-dir '" + dir_.string() + "'";
    ASSERT_EQ(run_cli("dataset synth --events 6 --frames 12 --height 32 --width 32 --seed 3" + d).code, 0);
    std::string inputs;
    for (int e = 0; e < 6; ++e) inputs += " '" + (dir_ / ("event_00" + std::to_string(e) + ".rgf")).string() + "'";
    build_ = "dataset build --input" + inputs +
             " --mode eval --q-min 1 --spatial-offset 8 --temporal-offset 600 --frames 6 --context 2 --height 16"
             " --width 16 --seed 1" + d;
    ASSERT_EQ(run_cli(build_).code, 0);
    ASSERT_EQ(run_cli("baseline run --manifest '" + path("manifest.tsv") + "' --method eulerian --out eul.rge" + d).code, 0);
    ASSERT_EQ(run_cli("baseline run --manifest '" + path("manifest.tsv") + "' --method perturbed --members 4 --out per.rge" + d).code, 0);
  }

  static std::string path(const std::string& name) { return (dir_ / name).string(); }
  static std::string out_dir(const std::string& sub) { return " --out-dir '" + (dir_ / sub).string() + "'"; }

  static fs::path dir_;
  static std::string build_;
};

fs::path Cli::dir_;
std::string Cli::build_;

}  // namespace

TEST_F(Cli, HelpAndUsage) {
  EXPECT_EQ(run_cli("--help").code, 0);
  EXPECT_EQ(run_cli("").code, 1);
  EXPECT_EQ(run_cli("evaluate --bogus").code, 1);
  EXPECT_EQ(run_cli("compare --a x").code, 1);
}

TEST_F(Cli, MissingAndCorruptInputs) {
  EXPECT_EQ(run_cli("dataset build --input '" + path("nope.rgf") + "'").code, 1);
  std::ofstream(path("junk.rgf")) << "not a radar file";
  EXPECT_EQ(run_cli("dataset stats --input '" + path("junk.rgf") + "'").code, 2);
  EXPECT_EQ(run_cli("evaluate --manifest '" + path("manifest.tsv") + "' --forecasts '" + path("junk.rgf") + "'").code, 2);
}

TEST_F(Cli, BuildSummaryAndEmptyResult) {
  const auto r = run_cli(build_ + " --out again.tsv");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("examples"), std::string::npos);
  EXPECT_EQ(slurp(path("again.tsv")), slurp(path("manifest.tsv")));
  // Crops larger than the frames leave nothing to sample.
  EXPECT_EQ(run_cli("dataset build --input '" + path("event_000.rgf") + "' --height 64 --width 64" + out_dir("empty")).code, 3);
}

TEST_F(Cli, StatsTable) {
  const auto r = run_cli("dataset stats --manifest '" + path("manifest.tsv") + "'");
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("bin,count,percent"), std::string::npos);
  EXPECT_NE(r.out.find("\"=0\","), std::string::npos);
  EXPECT_NE(r.out.find("\">10\","), std::string::npos);
}

TEST_F(Cli, EvaluateWritesAllTablesDeterministically) {
  const std::string args = "evaluate --manifest '" + path("manifest.tsv") + "' --forecasts '" + path("per.rge") +
                           "' --window 8 --scales 1,4";
  ASSERT_EQ(run_cli(args + " --workers 1" + out_dir("ev1")).code, 0);
  ASSERT_EQ(run_cli(args + " --workers 3" + out_dir("ev3")).code, 0);
  for (const char* f : {"metrics.csv", "reliability.csv", "rank_histogram.csv", "scores.csv"}) {
    const auto a = slurp(dir_ / "ev1" / f);
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, slurp(dir_ / "ev3" / f)) << f;
  }
  // A non-positive threshold is a configuration error.
  EXPECT_EQ(run_cli("evaluate --manifest '" + path("again.tsv") + "' --forecasts '" + path("eul.rge") +
                    "' --window 8 --scales 1 --thresholds 0" + out_dir("bad")).code,
            1);
}

TEST_F(Cli, ConfigFileAndEnvironment) {
  std::ofstream(path("eval.ini")) << "[evaluate]\nwindow = 8\nscales = 1,2\nthresholds = 2\n";
  const std::string config = "--config '" + path("eval.ini") + "' ";
  const std::string base = "evaluate --manifest '" + path("manifest.tsv") + "' --forecasts '" + path("eul.rge") + "'";
  ASSERT_EQ(run_cli(config + base + out_dir("cfg")).code, 0);
  const auto m = slurp(dir_ / "cfg" / "metrics.csv");
  EXPECT_NE(m.find("\ncsi,5,2,"), std::string::npos);
  EXPECT_NE(m.find("\nfss,5,2,2,"), std::string::npos);
  // Flags take precedence over the file.
  ASSERT_EQ(run_cli(config + base + " --thresholds 3" + out_dir("cfg2")).code, 0);
  EXPECT_NE(slurp(dir_ / "cfg2" / "metrics.csv").find("\ncsi,5,3,"), std::string::npos);
  ASSERT_EQ(run_cli(base + " --window 8 --scales 1", "NOWCAST_OUTPUT_DIR='" + path("envdir") + "'").code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "envdir" / "metrics.csv"));
}

TEST_F(Cli, CompareIdenticalScores) {
  const std::string args = "evaluate --manifest '" + path("manifest.tsv") + "' --forecasts '" + path("eul.rge") +
                           "' --window 8 --scales 1";
  ASSERT_EQ(run_cli(args + out_dir("cmp")).code, 0);
  const auto s = path("cmp/scores.csv");
  const auto r = run_cli("compare --a '" + s + "' --b '" + s + "' --metric mse --permutations 1000 --parity even");
  if (r.code == 0) {
    EXPECT_NE(r.out.find("p_value=1\n"), std::string::npos) << r.out;
  } else {
    // Six weekly events give three even weeks; too few units is a data error.
    EXPECT_EQ(r.code, 2);
  }
  EXPECT_EQ(run_cli("compare --a '" + s + "' --b '" + s + "' --permutations 0").code, 1);
  EXPECT_EQ(run_cli("compare --a '" + s + "' --b '" + s + "' --metric nosuch").code, 2);
}

TEST_F(Cli, LossEval) {
  std::ofstream(path("real.txt")) << "2\n3\n";
  std::ofstream(path("fake.txt")) << "-1.5\n-4\n";
  std::ofstream(path("one.txt")) << "1\n";
  using namespace nowcast;
  // Members 0 and 2 average to the target 1, so the regularizer vanishes.
  write_rge_set(path("samples.rge"), {EnsembleForecast({FrameStack(1, RadarField(2, 2, 0.0f)),
                                                        FrameStack(1, RadarField(2, 2, 2.0f))})});
  write_rgf(path("target.rgf"), RadarSequence::regular(FrameStack(1, RadarField(2, 2, 1.0f)), 0, 300));
  const std::string common = "loss eval --samples '" + path("samples.rge") + "' --target '" + path("target.rgf") + "'";
  auto r = run_cli(common + " --real-scores '" + path("real.txt") + "' --fake-scores '" + path("fake.txt") +
                   "' --spatial-fake '" + path("one.txt") + "' --temporal-fake '" + path("one.txt") + "'");
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out, "regularizer=0\ndiscriminator_loss=0\ngenerator_objective=2\n");
  write_rgf(path("target.rgf"), RadarSequence::regular(FrameStack(1, RadarField(2, 2, 3.0f)), 0, 300));
  r = run_cli(common + " --rain-weight max");
  EXPECT_EQ(r.out, "regularizer=48\n");
  EXPECT_EQ(run_cli("loss eval --samples '" + path("samples.rge") + "'").code, 1);
}

TEST_F(Cli, PsdTable) {
  const auto r = run_cli("psd --model '" + path("event_000.rgf") + "' --obs '" + path("event_001.rgf") + "'" +
                         out_dir("psd"));
  ASSERT_EQ(r.code, 0);
  const auto csv = slurp(dir_ / "psd" / "psd.csv");
  EXPECT_NE(csv.find("lead_time_minutes,ring,wavelength_km,power,source"), std::string::npos);
  EXPECT_NE(csv.find(",model\n"), std::string::npos);
  EXPECT_NE(csv.find(",obs\n"), std::string::npos);
}
