#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "cli_app.hpp"
#include "usvyaw/usvyaw.hpp"

using namespace usvyaw;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "usvyaw");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double value_after(const std::string& text, const std::string& key) {
  const auto pos = text.find(key);
  if (pos == std::string::npos) throw std::runtime_error("missing '" + key + "' in:\n" + text);
  return std::stod(text.substr(pos + key.size()));
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::random_device rd;
    dir_ = fs::temp_directory_path() / ("usvyaw_cli_" + std::to_string(rd()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, HelpAndUsage) {
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  EXPECT_EQ(run_cli({"excite", "--help"}).code, 0);
  EXPECT_EQ(run_cli({}).code, 2);
  const auto missing = run_cli({"excite", "--reference"});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("--out"), std::string::npos) << missing.err;
  EXPECT_NE(missing.err.find("Usage"), std::string::npos) << missing.err;
  EXPECT_EQ(run_cli({"info"}).code, 2);  // no plant
  EXPECT_EQ(run_cli({"info", "--reference", "--K", "1", "--a1", "1", "--a0", "1"}).code, 2);
  EXPECT_EQ(run_cli({"excite", "--reference", "--out", path("x.csv"), "--period", "0"}).code, 2);
}

TEST_F(CliTest, ExciteDefaults) {
  const auto r = run_cli({"excite", "--reference", "--out", path("d.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("d.csv"));
  const auto ds = load_dataset(in);
  EXPECT_EQ(ds.size(), 4000u);
  EXPECT_EQ(ds.sample_period(), 0.05);
  ASSERT_TRUE(ds.output_rate().has_value());
  // Final cycle (last 400 samples): symmetric extrema after the transient.
  const auto y = ds.output_yaw().values().last(400);
  const double hi = *std::max_element(y.begin(), y.end());
  const double lo = *std::min_element(y.begin(), y.end());
  EXPECT_GT(hi, 0.0);
  EXPECT_NEAR(hi, -lo, 1e-9 * hi);
}

TEST_F(CliTest, ExciteZeroAmplitude) {
  ASSERT_EQ(run_cli({"excite", "--reference", "--amplitude", "0", "--out", path("z.csv")}).code, 0);
  std::ifstream in(path("z.csv"));
  const auto ds = load_dataset(in);
  for (double v : ds.output_yaw().values()) EXPECT_EQ(v, 0.0);
}

TEST_F(CliTest, ExciteFromPhysicalParams) {
  const auto r = run_cli({"excite", "--inertia", "1", "--drag", "2.08", "--thrust", "0.013", "--arm",
                      "0.5", "--out", path("p.csv"), "--duration", "40"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(run_cli({"excite", "--inertia", "1", "--drag", "2.08", "--thrust", "-0.013", "--arm", "0.5",
                 "--out", path("n.csv")})
                .code,
            2);
}

TEST_F(CliTest, IdentifyNoiselessRoundTrip) {
  ASSERT_EQ(run_cli({"excite", "--reference", "--out", path("d.csv")}).code, 0);
  const auto r = run_cli({"identify", "--data", path("d.csv"), "--model-out", path("m.txt"),
                      "--report-out", path("report.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(path("m.txt"));
  const auto mf = read_model_file(in);
  EXPECT_NEAR(mf.model.gain(), 0.013, 0.01 * 0.013);
  EXPECT_NEAR(mf.model.damping_coeff(), 2.08, 0.01 * 2.08);
  EXPECT_NEAR(mf.model.stiffness_coeff(), 0.46, 0.01 * 0.46);
  EXPECT_EQ(mf.dt_identified, 0.05);
  EXPECT_EQ(slurp(path("report.txt")), r.out);
  EXPECT_NE(r.out.find("asymptotically stable"), std::string::npos);
  EXPECT_GE(value_after(r.out, "validation fit: "), 99.0);
}

TEST_F(CliTest, IdentifyConstantInputIsNumericalFailure) {
  std::ofstream f(path("c.csv"));
  f << "t,u,psi\n";
  for (int k = 0; k < 200; ++k) f << 0.05 * k << ",10," << 0.001 * k << '\n';
  f.close();
  const auto r = run_cli({"identify", "--data", path("c.csv"), "--model-out", path("m.txt")});
  EXPECT_EQ(r.code, 5);
  EXPECT_NE(r.err.find("RankDeficientRegression"), std::string::npos) << r.err;
}

TEST_F(CliTest, IdentifyMalformedRowIsDataError) {
  ASSERT_EQ(run_cli({"excite", "--reference", "--out", path("d.csv"), "--duration", "20"}).code, 0);
  std::string text = slurp(path("d.csv"));
  // Corrupt the psi field of the 10th data row (line 13 of the file).
  std::istringstream lines(text);
  std::string line, rebuilt;
  for (int n = 1; std::getline(lines, line); ++n) rebuilt += (n == 13 ? "0.45,50,oops,0" : line) + "\n";
  std::ofstream(path("bad.csv")) << rebuilt;
  const auto r = run_cli({"identify", "--data", path("bad.csv"), "--model-out", path("m.txt")});
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.err.find("row 13"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingFilesAreIoErrors) {
  EXPECT_EQ(run_cli({"identify", "--data", path("nope.csv"), "--model-out", path("m.txt")}).code, 3);
  EXPECT_EQ(run_cli({"info", "--model", path("nope.txt")}).code, 3);
  EXPECT_EQ(run_cli({"excite", "--reference", "--out", path("no/such/dir/d.csv")}).code, 3);
}

TEST_F(CliTest, UnreadableModelFileIsDataError) {
  std::ofstream(path("m.txt")) << "K=abc\n";
  EXPECT_EQ(run_cli({"info", "--model", path("m.txt")}).code, 4);
}

TEST_F(CliTest, ValidateSelfNoiselessNoisyAndMismatched) {
  ASSERT_EQ(run_cli({"excite", "--reference", "--out", path("d.csv")}).code, 0);
  ASSERT_EQ(run_cli({"excite", "--reference", "--out", path("n.csv"), "--noise-rel", "0.05", "--seed",
                 "11"})
                .code,
            0);
  std::ofstream(path("true.txt")) << "K=0.013\na1=2.08\na0=0.46\n";
  std::ofstream(path("integ.txt")) << "K=0.013\na1=2.08\na0=0\n";

  const auto self = run_cli({"validate", "--model", path("true.txt"), "--data", path("d.csv"),
                         "--overlay-out", path("ov.csv")});
  ASSERT_EQ(self.code, 0) << self.err;
  EXPECT_GE(value_after(self.out, "validation fit: "), 99.9);
  const auto overlay = slurp(path("ov.csv"));
  EXPECT_EQ(overlay.rfind("t,psi_measured,psi_simulated\n", 0), 0u);

  const auto noisy = run_cli({"validate", "--model", path("true.txt"), "--data", path("n.csv")});
  ASSERT_EQ(noisy.code, 0) << noisy.err;
  EXPECT_GE(value_after(noisy.out, "validation fit: "), 80.0);

  const auto integ = run_cli({"validate", "--model", path("integ.txt"), "--data", path("d.csv")});
  ASSERT_EQ(integ.code, 0) << integ.err;
  EXPECT_LT(value_after(integ.out, "validation fit: "), value_after(self.out, "validation fit: "));
}

TEST_F(CliTest, IdentifyReportMatchesManualValidation) {
  ASSERT_EQ(run_cli({"excite", "--reference", "--out", path("n.csv"), "--noise-rel", "0.05", "--seed",
                 "5"})
                .code,
            0);
  const auto ident = run_cli({"identify", "--data", path("n.csv"), "--model-out", path("m.txt")});
  ASSERT_EQ(ident.code, 0) << ident.err;
  const auto valid = run_cli({"validate", "--model", path("m.txt"), "--data", path("n.csv"),
                          "--holdout-fraction", "0.5"});
  ASSERT_EQ(valid.code, 0) << valid.err;
  const auto line = [](const std::string& s) {
    const auto p = s.find("validation fit: ");
    return s.substr(p, s.find('\n', p) - p);
  };
  EXPECT_EQ(line(ident.out), line(valid.out));
}

TEST_F(CliTest, InfoStrings) {
  const auto ref = run_cli({"info", "--reference"});
  ASSERT_EQ(ref.code, 0);
  EXPECT_NE(ref.out.find("-1.82842"), std::string::npos) << ref.out;
  EXPECT_NE(ref.out.find("-0.251584"), std::string::npos) << ref.out;
  EXPECT_NE(ref.out.find("stability: asymptotically stable"), std::string::npos);
  EXPECT_NE(ref.out.find("dc gain: 0.0282609"), std::string::npos);
  EXPECT_NEAR(value_after(ref.out, "time constant: "), 3.97, 0.01);

  const auto phys = run_cli({"info", "--inertia", "1", "--drag", "2.08", "--thrust", "0.013", "--arm", "0.5"});
  ASSERT_EQ(phys.code, 0);
  EXPECT_NE(phys.out.find("marginally stable (integrator)"), std::string::npos) << phys.out;
  EXPECT_NE(phys.out.find("dc gain: integrator"), std::string::npos);

  const auto bad = run_cli({"info", "--K", "1", "--a1", "-1", "--a0", "0.5"});
  ASSERT_EQ(bad.code, 0);
  EXPECT_NE(bad.out.find("stability: unstable"), std::string::npos) << bad.out;
}

TEST_F(CliTest, StepMatchesLibrary) {
  const auto r = run_cli({"step", "--reference", "--duration", "10", "--dt", "0.05"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ref = step_response(reference_model(), 1.0, 10.0, 0.05);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,psi");
  std::size_t k = 0;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    ASSERT_LT(k, ref.size());
    EXPECT_EQ(parse_double(line.substr(comma + 1)), ref[k]);
    ++k;
  }
  EXPECT_EQ(k, ref.size());
  EXPECT_EQ(run_cli({"step", "--reference", "--dt", "-1"}).code, 2);
}

TEST_F(CliTest, DegreesOnlyChangeIoUnits) {
  ASSERT_EQ(run_cli({"excite", "--reference", "--out", path("rad.csv")}).code, 0);
  ASSERT_EQ(run_cli({"excite", "--reference", "--degrees", "--out", path("deg.csv")}).code, 0);
  ASSERT_EQ(run_cli({"identify", "--data", path("rad.csv"), "--model-out", path("mr.txt")}).code, 0);
  ASSERT_EQ(
      run_cli({"identify", "--degrees", "--data", path("deg.csv"), "--model-out", path("md.txt")}).code,
      0);
  std::ifstream a(path("mr.txt")), b(path("md.txt"));
  const auto ma = read_model_file(a).model, mb = read_model_file(b).model;
  EXPECT_NEAR(mb.gain(), ma.gain(), 1e-9 * ma.gain());
  EXPECT_NEAR(mb.damping_coeff(), ma.damping_coeff(), 1e-9 * ma.damping_coeff());
  EXPECT_NEAR(mb.stiffness_coeff(), ma.stiffness_coeff(), 1e-9 * ma.stiffness_coeff());
}

TEST_F(CliTest, PipelineIsByteDeterministic) {
  for (int run = 0; run < 2; ++run) {
    const auto tag = std::to_string(run);
    ASSERT_EQ(run_cli({"excite", "--reference", "--noise-rel", "0.05", "--seed", "23", "--out",
                   path("d" + tag + ".csv")})
                  .code,
              0);
    ASSERT_EQ(run_cli({"identify", "--data", path("d" + tag + ".csv"), "--model-out",
                   path("m" + tag + ".txt")})
                  .code,
              0);
  }
  EXPECT_EQ(slurp(path("d0.csv")), slurp(path("d1.csv")));
  EXPECT_EQ(slurp(path("m0.txt")), slurp(path("m1.txt")));
}
