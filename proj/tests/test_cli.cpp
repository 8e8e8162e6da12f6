#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "pskf/cli.hpp"
#include "pskf/frames.hpp"

namespace pskf {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "pskf");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("pskf_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  fs::path dir_;
};

TEST_F(Cli, SimulateWritesArtifacts) {
  const Outcome r = run_cli({"simulate", "--side", "16", "--frames", "8", "--seed", "5", "--out", path("sim")});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"truth.f32", "measurements.f32", "modes.csv", "meta.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "sim" / f)) << f;
  }
  const FrameSequence truth = read_frames(dir_ / "sim" / "truth.f32");
  EXPECT_EQ(truth.size(), 8u);
  EXPECT_EQ(truth.dims, (ImageDims{16, 16}));
  const std::string meta = slurp(dir_ / "sim" / "meta.json");
  EXPECT_NE(meta.find("noise_variance"), std::string::npos);
  EXPECT_NE(meta.find("mode_variances"), std::string::npos);
}

TEST_F(Cli, ZeroFramesIsAnError) {
  const Outcome r = run_cli({"simulate", "--frames", "0", "--out", path("z")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("frames"), std::string::npos);
}

TEST_F(Cli, UnknownSubcommandOrFlagFails) {
  EXPECT_NE(run_cli({"simulate", "--bogus", "1"}).code, 0);
  EXPECT_NE(run_cli({}).code, 0);
}

TEST_F(Cli, RepeatedInvocationsAreByteIdentical) {
  for (const char* out : {"a", "b"}) {
    ASSERT_EQ(run_cli({"simulate", "--side", "16", "--frames", "10", "--seed", "9", "--out", path(out)}).code, 0);
    const std::string sim = path(out);
    for (const char* est : {"wskf", "swskf", "full"}) {
      const Outcome f = run_cli({"filter", "--estimator", est, "--measurements", sim + "/measurements.f32",
                                 "--truth", sim + "/truth.f32", "--r", "2", "--alpha", "4",
                                 "--out", sim + "/" + est});
      ASSERT_EQ(f.code, 0) << f.err;
    }
  }
  for (const char* f : {"truth.f32", "measurements.f32", "modes.csv", "wskf/estimates.f32",
                        "swskf/estimates.f32", "full/estimates.f32", "wskf/mse.csv",
                        "wskf/mode_posteriors.csv"}) {
    EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
  }
  EXPECT_NE(slurp(dir_ / "a" / "truth.f32"), "");
}

TEST_F(Cli, FilterOutputs) {
  ASSERT_EQ(run_cli({"simulate", "--side", "16", "--frames", "6", "--out", path("s")}).code, 0);
  const Outcome f = run_cli({"filter", "--estimator", "wskf", "--measurements", path("s/measurements.f32"),
                             "--truth", path("s/truth.f32"), "--out", path("w")});
  ASSERT_EQ(f.code, 0) << f.err;
  EXPECT_EQ(read_frames(dir_ / "w" / "estimates.f32").size(), 6u);
  const std::string timing = slurp(dir_ / "w" / "timing.csv");
  EXPECT_EQ(timing.rfind("frame,seconds,log_likelihood\n", 0), 0u);
  EXPECT_TRUE(fs::exists(dir_ / "w" / "mse.csv"));

  const Outcome bad = run_cli({"filter", "--estimator", "kalman", "--measurements",
                               path("s/measurements.f32"), "--out", path("x")});
  EXPECT_EQ(bad.code, 1);
  const Outcome missing = run_cli({"filter", "--measurements", path("nope.f32"), "--out", path("x")});
  EXPECT_EQ(missing.code, 1);
}

TEST_F(Cli, ConfigFileFillsUnsetOptions) {
  std::ofstream(path("cfg.json")) << R"({"side": 8, "frames": 4, "seed": 3})";
  ASSERT_EQ(run_cli({"simulate", "--config", path("cfg.json"), "--frames", "5", "--out", path("c")}).code, 0);
  const FrameSequence truth = read_frames(dir_ / "c" / "truth.f32");
  EXPECT_EQ(truth.dims, (ImageDims{8, 8}));
  EXPECT_EQ(truth.size(), 5u);

  std::ofstream(path("bad.json")) << R"({"no_such_option": 1})";
  EXPECT_EQ(run_cli({"simulate", "--config", path("bad.json"), "--out", path("d")}).code, 1);
}

TEST_F(Cli, BenchWritesMetricsAndReport) {
  const Outcome r = run_cli({"bench", "--side", "16", "--frames", "12", "--realizations", "2",
                             "--window", "8", "--r", "2", "--alpha", "4", "--jobs", "2",
                             "--out", path("bench"), "--check"});
  EXPECT_TRUE(r.code == 0 || r.code == 2) << r.err;
  for (const char* f : {"mse.csv", "timing.csv", "modes.csv", "aggregate.csv", "report.txt"}) {
    EXPECT_TRUE(fs::exists(dir_ / "bench" / f)) << f;
  }
  EXPECT_NE(slurp(dir_ / "bench" / "report.txt").find("Mean MSE"), std::string::npos);
}

TEST(CliBinary, HelpExitsCleanly) {
  const std::string cmd = std::string(PSKF_CLI_PATH) + " --help > /dev/null 2>&1";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
}

}  // namespace
}  // namespace pskf
