#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cli/commands.hpp"
#include "echolab/synth.hpp"
#include "echolab/trace_io.hpp"

namespace echolab::cli {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("echolab-cli-" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs with --output-dir pointing at the test directory.
  Outcome run_in_dir(std::vector<std::string> args) {
    if (args.size() > 0 && args[0] != "--help") {
      args.insert(args.begin() + 1, {"--output-dir", dir_.string()});
    }
    return run_raw(args);
  }

  static Outcome run_raw(const std::vector<std::string>& args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
  }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
  }

  std::vector<std::string> simulate_3ppe(std::uint64_t seed) {
    const auto r = run_in_dir({"simulate", "--model", "3ppe", "--gamma0", "152kHz", "--gamma_sd", "930kHz", "--rate",
                               "227kHz", "--t1e", "83us", "--b", "0.23", "--t1b", "2.4ms", "--noise", "0.03", "--floor",
                               "1e-3", "--seed", std::to_string(seed)});
    EXPECT_EQ(r.code, 0) << r.err;
    return {path("3ppe-td120ns.csv").string(), path("3ppe-td200ns.csv").string(), path("3ppe-td280ns.csv").string()};
  }

  fs::path dir_;
};

TEST_F(Cli, SimulateMimsOnTwoPulseSchedule) {
  const auto r = run_in_dir({"simulate", "--model", "mims", "--t2", "1.580us", "--x", "1.072", "--schedule", "2ppe",
                             "--noise", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ts = io::read_trace_file(path("mims.csv").string());
  EXPECT_EQ(ts.size(), 69u);
  EXPECT_EQ(ts.points().front().t, 1.0e-7);
  EXPECT_TRUE(fs::exists(path("mims.provenance")));
  const auto sidecar = slurp(path("mims.provenance"));
  for (auto key : {"model = mims", "schedule = 2ppe", "seed = 0", "version = ", "param.t2 = ", "command = "}) {
    EXPECT_NE(sidecar.find(key), std::string::npos) << key;
  }
}

TEST_F(Cli, SimulateIsByteIdentical) {
  const std::vector<std::string> args{"simulate", "--model", "hole-decay", "--b", "0.436", "--t1e", "82us", "--t1b",
                                      "2.364ms", "--noise", "0.02", "--seed", "7"};
  ASSERT_EQ(run_in_dir(args).code, 0);
  const auto first = slurp(path("hole-decay.csv"));
  const auto first_sidecar = slurp(path("hole-decay.provenance"));
  ASSERT_EQ(run_in_dir(args).code, 0);
  EXPECT_EQ(first, slurp(path("hole-decay.csv")));
  EXPECT_EQ(first_sidecar, slurp(path("hole-decay.provenance")));
}

TEST_F(Cli, SimulateOutputParsesBackLosslessly) {
  ASSERT_EQ(run_in_dir({"simulate", "--model", "mims", "--t2", "1.58e-6", "--x", "1.072", "--noise", "0.03", "--seed",
                        "5"})
                .code,
            0);
  const auto expected = synth::synthesize("mims", {{"i0", 1.0}, {"t2", 1.580e-6}, {"x", 1.072}},
                                          synth::reference_schedule(synth::ScheduleKind::k2ppe), {0.03, 0.0, 5});
  const auto back = io::read_trace_file(path("mims.csv").string());
  ASSERT_EQ(back.size(), expected.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back.points()[i].t, expected.points()[i].t);
    EXPECT_EQ(back.points()[i].y, expected.points()[i].y);
    EXPECT_EQ(back.points()[i].sigma, expected.points()[i].sigma);
  }
}

TEST_F(Cli, SimulateStarkSingleField) {
  const auto r = run_in_dir({"simulate", "--model", "stark", "--slope", "24.6kHzcm/V", "--field", "1000V/cm"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "2.46e+07 Hz\n");
}

TEST_F(Cli, SimulateRejectsInvalidParameters) {
  const auto r = run_in_dir({"simulate", "--model", "hole-decay", "--b", "1.4", "--t1e", "82us", "--t1b", "2.364ms"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("B must lie in [0, 1]"), std::string::npos) << r.err;
  const auto missing = run_in_dir({"simulate", "--model", "mims", "--x", "1.072"});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("'t2'"), std::string::npos) << missing.err;
  const auto unit = run_in_dir({"simulate", "--model", "mims", "--t2", "1.58kHz", "--x", "1.072"});
  EXPECT_EQ(unit.code, 2);
  EXPECT_EQ(run_in_dir({"simulate", "--model", "cubic"}).code, 2);
}

TEST_F(Cli, SimulateThreePulseWritesOneFilePerDelay) {
  const auto files = simulate_3ppe(11);
  for (const auto& f : files) {
    const auto ts = io::read_trace_file(f);
    EXPECT_TRUE(ts.meta_number("delay_seconds"));
    EXPECT_EQ(ts.size(), 80u);
  }
  EXPECT_EQ(*io::read_trace_file(files[1]).meta_number("delay_seconds"), 200e-9);
}

TEST_F(Cli, FitJointThreePulse) {
  const auto files = simulate_3ppe(11);
  std::vector<std::string> args{"fit", "--model", "3ppe", "--fix", "t1b=2.4ms"};
  args.insert(args.end(), files.begin(), files.end());
  const auto r = run_in_dir(args);
  ASSERT_EQ(r.code, 0) << r.err << r.out;
  for (auto key : {"estimate.gamma0 = ", "estimate.gamma_sd = ", "estimate.rate = ", "fixed.t1b = ",
                   "converged = true"}) {
    EXPECT_NE(r.out.find(key), std::string::npos) << key;
  }
  EXPECT_TRUE(fs::exists(path("fit-3ppe.plot.csv")));
  EXPECT_TRUE(fs::exists(path("fit-3ppe.residuals-2.csv")));
  const auto plot = slurp(path("fit-3ppe.plot.csv"));
  EXPECT_NE(plot.find("set,t_seconds,data,sigma,fitted,residual"), std::string::npos);
  EXPECT_NE(plot.find("# seed = 11"), std::string::npos);
}

TEST_F(Cli, FitThreePulseNeedsFixedT1b) {
  const auto files = simulate_3ppe(2);
  const auto r = run_in_dir({"fit", "--model", "3ppe", files[0], files[1]});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("t1b"), std::string::npos);
  const auto normalized = run_in_dir({"fit", "--model", "3ppe-normalized", "--fix", "t1b=2.4ms", files[0], files[1]});
  EXPECT_EQ(normalized.code, 2);
  EXPECT_NE(normalized.err.find("gamma0"), std::string::npos);
  const auto ok =
      run_in_dir({"fit", "--model", "3ppe-normalized", "--fix", "t1b=2.4ms,gamma0=152kHz", files[0], files[1], files[2]});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_NE(ok.out.find("estimate.i0_2"), std::string::npos);
}

TEST_F(Cli, FitLinearPowerSweep) {
  ASSERT_EQ(run_in_dir({"simulate", "--model", "linear", "--slope", "2.5e9", "--intercept", "1.5MHz", "--noise", "0.05",
                        "--seed", "3"})
                .code,
            0);
  const auto r = run_in_dir({"fit", "--model", "linear", path("linear.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("estimate.intercept = "), std::string::npos);
  EXPECT_NE(r.out.find("derived.zero_power_width = "), std::string::npos);
}

TEST_F(Cli, FitHoleDecayAndMims) {
  ASSERT_EQ(run_in_dir({"simulate", "--model", "hole-decay", "--b", "0.436", "--t1e", "82us", "--t1b", "2.364ms",
                        "--noise", "0.02", "--seed", "1"})
                .code,
            0);
  const auto hole = run_in_dir({"fit", "--model", "hole-decay", "--input", path("hole-decay.csv").string()});
  EXPECT_EQ(hole.code, 0) << hole.err;
  EXPECT_NE(hole.out.find("derived.beta = "), std::string::npos);
  const auto resid = io::read_trace_file(path("fit-hole-decay.residuals.csv").string());
  EXPECT_EQ(resid.size(), 40u);

  ASSERT_EQ(run_in_dir({"simulate", "--model", "mims", "--t2", "1.580us", "--x", "1.072", "--noise", "0.03"}).code, 0);
  const auto mims = run_in_dir({"fit", "--model", "mims", path("mims.csv").string()});
  EXPECT_EQ(mims.code, 0) << mims.err;
  EXPECT_NE(mims.out.find("derived.homogeneous_linewidth = "), std::string::npos);
}

TEST_F(Cli, FitEmptyCsv) {
  write("empty.csv", "");
  const auto r = run_in_dir({"fit", "--model", "mims", path("empty.csv").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("no data rows"), std::string::npos) << r.err;
}

TEST_F(Cli, FitMalformedRowNamesLine) {
  write("bad.csv", "# echo-lab trace v1\nt_seconds,value\n1e-7,1.0\n2e-7,0.9\n3e-7,oops\n");
  const auto r = run_in_dir({"fit", "--model", "mims", path("bad.csv").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 5"), std::string::npos) << r.err;
}

TEST_F(Cli, FitUnitMismatch) {
  ASSERT_EQ(run_in_dir({"simulate", "--model", "mims", "--t2", "1.580us", "--x", "1.072"}).code, 0);
  const auto r = run_in_dir({"fit", "--model", "linear", path("mims.csv").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("y_unit"), std::string::npos) << r.err;
}

TEST_F(Cli, FitNonConvergenceStillWritesOutputs) {
  ASSERT_EQ(run_in_dir({"simulate", "--model", "mims", "--t2", "1.580us", "--x", "1.072", "--noise", "0.03"}).code, 0);
  const auto r = run_in_dir({"fit", "--model", "mims", "--guess", "t2=0.3us", "--guess", "x=2", "--guess", "i0=3",
                             "--max-iterations", "1", path("mims.csv").string()});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.out.find("converged = false"), std::string::npos);
  EXPECT_TRUE(fs::exists(path("fit-mims.residuals.csv")));
  EXPECT_TRUE(fs::exists(path("fit-mims.plot.csv")));
}

TEST_F(Cli, FitStarkWithoutGuess) {
  ASSERT_EQ(run_in_dir({"simulate", "--model", "stark", "--slope", "24.6kHzcm/V", "--noise", "0.01", "--floor", "1e3",
                        "--seed", "4"})
                .code,
            0);
  const auto r = run_in_dir({"fit", "--model", "stark", path("stark.csv").string()});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("estimate.slope = 2.4"), std::string::npos) << r.out;
}

TEST_F(Cli, RoundtripTrivialCase) {
  const auto r = run_in_dir({"roundtrip", "--seeds", "1", "--noise", "0"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("PASS"), std::string::npos);
  const auto csv = slurp(path("roundtrip-hole-decay.csv"));
  EXPECT_NE(csv.find("parameter,truth,median,lower_5,upper_95,tolerance,tolerance_kind,pass_fraction"), std::string::npos);
  EXPECT_NE(csv.find("t1e,8.2"), std::string::npos);
  EXPECT_NE(csv.find("# command = "), std::string::npos);
}

TEST_F(Cli, RoundtripHoleDecayDefaults) {
  const auto r = run_in_dir({"roundtrip", "--experiment", "hole-decay", "--seeds", "100"});
  EXPECT_EQ(r.code, 0) << r.out;
}

TEST_F(Cli, RoundtripThresholdFailure) {
  const auto r = run_in_dir({"roundtrip", "--experiment", "mims", "--seeds", "5", "--tolerance", "1e-6"});
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

TEST_F(Cli, RoundtripUnknownExperiment) {
  const auto r = run_in_dir({"roundtrip", "--experiment", "4ppe"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("4ppe"), std::string::npos);
}

TEST_F(Cli, ReportReferenceConfig) {
  const auto r = run_raw({"report", "--config", ECHOLAB_SOURCE_DIR "/configs/reference.conf"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (auto text : {"617 kHz", "1082 kHz", "1.941 kHz", "333.3 ns", "24.6 MHz", "0.07042"}) {
    EXPECT_NE(r.out.find(text), std::string::npos) << text << "\n" << r.out;
  }
}

TEST_F(Cli, ReportSingleQuantities) {
  const auto afc = run_raw({"report", "--afc-spacing", "3MHz"});
  EXPECT_EQ(afc.code, 0);
  EXPECT_NE(afc.out.find("333.3 ns"), std::string::npos);
  const auto stark = run_raw({"report", "--slope", "24.6kHzcm/V", "--stark-field", "100V/mm"});
  EXPECT_EQ(stark.code, 0);
  EXPECT_NE(stark.out.find("24.6 MHz"), std::string::npos);
}

TEST_F(Cli, ReportMissingParameter) {
  const auto r = run_raw({"report", "--gamma0", "152kHz", "--rate", "227kHz"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("'gamma_sd'"), std::string::npos) << r.err;
  EXPECT_EQ(run_raw({"report"}).code, 2);
}

TEST_F(Cli, ConfigFileAndOverrides) {
  write("sim.conf", "# mims run\nmodel = mims\nt2 = 1.580us\nx = 1.072\nseed = 3\nnoise = 0.03\n");
  ASSERT_EQ(run_in_dir({"simulate", "--config", path("sim.conf").string(), "--seed", "9"}).code, 0);
  EXPECT_EQ(io::read_trace_file(path("mims.csv").string()).meta_value("seed"), "9");

  write("bad.conf", "model = mims\nbogus_key = 3\n");
  const auto r = run_in_dir({"simulate", "--config", path("bad.conf").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bogus_key"), std::string::npos) << r.err;
}

TEST_F(Cli, OutputDirectoryFromEnvironment) {
  const auto env_dir = path("from-env");
  ::setenv(kOutputDirEnv, env_dir.c_str(), 1);
  const auto r = run_raw({"simulate", "--model", "mims", "--t2", "1.580us", "--x", "1.072"});
  ::unsetenv(kOutputDirEnv);
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(env_dir / "mims.csv"));
}

TEST_F(Cli, ProvenanceInEveryOutput) {
  ASSERT_EQ(run_in_dir({"simulate", "--model", "mims", "--t2", "1.580us", "--x", "1.072", "--noise", "0.03", "--seed",
                        "21"})
                .code,
            0);
  ASSERT_EQ(run_in_dir({"fit", "--model", "mims", path("mims.csv").string()}).code, 0);
  for (auto file : {"mims.csv", "fit-mims.residuals.csv", "fit-mims.plot.csv"}) {
    const auto text = slurp(path(file));
    EXPECT_NE(text.find("# command = echo-lab "), std::string::npos) << file;
    EXPECT_NE(text.find("# version = "), std::string::npos) << file;
    EXPECT_NE(text.find("# seed = 21"), std::string::npos) << file;
  }
}

TEST_F(Cli, UsageErrors) {
  EXPECT_EQ(run_raw({}).code, 2);
  EXPECT_EQ(run_raw({"transmogrify"}).code, 2);
  EXPECT_EQ(run_raw({"--help"}).code, 0);
  EXPECT_EQ(run_raw({"fit", "--model", "mims", "--frobnicate", "1"}).code, 2);
}

}  // namespace
}  // namespace echolab::cli
