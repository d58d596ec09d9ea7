// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances and seeds are fixed here.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "benchmark.hpp"
#include "cli_app.hpp"
#include "oracles.hpp"
#include "usvyaw/usvyaw.hpp"

using namespace usvyaw;
namespace fs = std::filesystem;

namespace {

const SecondOrderTf kTruth = reference_model();

// Noise seed for the noisy round trip.
constexpr std::uint64_t kNoisySeed = 7;
// Seed for the randomized estimator, data-layer and determinism suites.
constexpr std::uint64_t kPropertySeed = 20240601;

struct Outcome {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

std::string sig6(double v) { return format_sig6(v); }

int failures = 0;

void criterion(int id, const std::string& title, double limit_ms,
               const std::function<Outcome()>& body) {
  Outcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    out = body();
  } catch (const std::exception& e) {
    out.ok = false;
    out.detail = std::string("exception: ") + e.what();
  }
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (limit_ms > 0.0) out.require(ms < limit_ms, "runtime over " + sig6(limit_ms) + " ms");
  if (!out.ok) ++failures;
  std::printf("[%s] %d. %s | %s | %.3f ms%s\n", out.ok ? "PASS" : "FAIL", id, title.c_str(),
              out.detail.c_str(), ms,
              limit_ms > 0.0 ? (" (limit " + sig6(limit_ms) + " ms)").c_str() : "");
  std::fflush(stdout);
}

Outcome reference_stability() {
  Outcome o;
  const auto p = poles(kTruth);
  const auto cls = is_stable(kTruth);
  o.require(std::abs(p[1].real() - -0.2516) <= 1e-3 && p[1].imag() == 0.0, "slow pole");
  o.require(std::abs(p[0].real() - -1.8284) <= 1e-3 && p[0].imag() == 0.0, "fast pole");
  o.require(to_string(cls) == "asymptotically stable", "classification");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("poles ") + sig6(p[1].real()) + ", " +
              sig6(p[0].real()) + ", " + std::string(to_string(cls));
  return o;
}

Outcome step_contract() {
  Outcome o;
  const auto s = step_response(kTruth, 1.0, 120.0, 0.05);
  const double target = 0.028261;
  bool monotone = true;
  double peak = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    if (k > 0 && s[k] < s[k - 1]) monotone = false;
    peak = std::max(peak, s[k]);
  }
  const double final_value = s[s.size() - 1];
  o.require(monotone, "not monotone");
  o.require(peak <= dc_gain(kTruth), "overshoot");
  o.require(std::abs(final_value - target) <= 1e-3 * target, "final value");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("final ") + sig6(final_value) +
              ", peak " + sig6(peak);
  return o;
}

Outcome zoh_vs_rk4() {
  Outcome o;
  const auto u = square_wave(50.0, 20.0, 200.0, 0.05);
  const auto yaw = simulate(discretize_zoh(kTruth, 0.05), u).yaw;
  const auto ref = oracle::rk4_yaw(kTruth, u.values(), 0.05, 100);
  double scale = 0.0, worst = 0.0;
  for (double v : ref) scale = std::max(scale, std::abs(v));
  for (std::size_t k = 0; k < ref.size(); ++k) worst = std::max(worst, std::abs(yaw[k] - ref[k]));
  o.require(worst / scale <= 1e-6, "mismatch");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("max rel diff ") + sig6(worst / scale) +
              " over " + std::to_string(ref.size()) + " samples";
  return o;
}

Outcome round_trip(double noise_rel, double param_tol, double train_fit_min, double held_fit_min) {
  Outcome o;
  const auto ds = bench::excite(kTruth, {.noise_rel = noise_rel, .seed = kNoisySeed});
  const auto res = identify(ds);
  const auto& m = res.report.model;
  const double err = bench::max_rel_err(m, kTruth);
  o.require(err <= param_tol, "parameters");
  if (train_fit_min > 0.0) o.require(res.report.training_fit_percent >= train_fit_min, "train fit");
  o.require(res.validation_fit_percent >= held_fit_min, "held-out fit");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("K=") + sig6(m.gain()) +
              " a1=" + sig6(m.damping_coeff()) + " a0=" + sig6(m.stiffness_coeff()) +
              ", max rel err " + sig6(err) + ", train fit " +
              sig6(res.report.training_fit_percent) + " %, held-out fit " +
              sig6(res.validation_fit_percent) + " %";
  return o;
}

Outcome estimator_properties() {
  Outcome o;
  std::mt19937_64 rng(kPropertySeed);
  std::uniform_real_distribution<double> real_pole(-3.0, -0.15);
  std::uniform_real_distribution<double> sigma(0.2, 2.0);
  std::uniform_real_distribution<double> omega(0.1, 2.0);
  std::uniform_real_distribution<double> gain(0.005, 0.05);
  int steps = 0;
  double worst_jac = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const double k = gain(rng);
    SecondOrderTf plant = kTruth;
    if (trial % 2 == 0) {
      const double p1 = real_pole(rng), p2 = real_pole(rng);
      plant = SecondOrderTf(k, -(p1 + p2), p1 * p2);
    } else {
      const double s = sigma(rng), w = omega(rng);
      plant = SecondOrderTf(k, 2.0 * s, s * s + w * w);
    }
    const auto ds = bench::excite(plant, {.noise_rel = 0.05, .seed = rng()});
    const auto init = equation_error_init(ds);
    const auto rep = estimate_output_error(ds, init.model);
    const auto& trace = rep.objective_trace;
    for (std::size_t i = 1; i < trace.size(); ++i) {
      o.require(trace[i] < trace[i - 1], "trace increase in plant " + std::to_string(trial));
    }
    steps += static_cast<int>(trace.size()) - 1;
    o.require(output_error_sse(ds, rep.model) <= output_error_sse(ds, init.model),
              "refined SSE above initializer in plant " + std::to_string(trial));

    const auto jac = output_error_jacobian(ds, rep.model, {});
    const auto yhat = simulate_yaw(rep.model, ds.input_u().values(), ds.sample_period());
    const double kk = rep.model.gain();
    double scale = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < yhat.size(); ++i) {
      scale = std::max(scale, std::abs(yhat[i] / kk));
      worst = std::max(worst, std::abs(jac[0][i] - yhat[i] / kk));
    }
    worst_jac = std::max(worst_jac, worst / scale);
  }
  o.require(worst_jac <= 1e-4, "gain Jacobian column");
  o.detail += (o.detail.empty() ? "" : "; ") + std::string("20 plants, ") + std::to_string(steps) +
              " accepted steps, worst gain-column rel err " + sig6(worst_jac);
  return o;
}

Outcome fit_truths() {
  Outcome o;
  const std::vector<double> y = {0, 1, 2, 3};
  const double same = fit_percent(y, y);
  const double mean = fit_percent(y, std::vector<double>(4, 1.5));
  const double hand = fit_percent(y, std::vector<double>{0, 1, 2, 4});
  o.require(same == 100.0, "identical");
  o.require(std::abs(mean) <= 1e-12, "mean predictor");
  o.require(std::abs(hand - 55.279) <= 1e-3, "hand case");
  o.detail += (o.detail.empty() ? "" : "; ") + sig6(same) + ", " + sig6(mean) + ", " + sig6(hand);
  return o;
}

Outcome data_layer() {
  Outcome o;
  std::mt19937_64 rng(kPropertySeed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::uniform_int_distribution<int> expo(-30, 30);
  int round_trips = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + rng() % 500;
    const double dt = 0.05 * (1.0 + 0.9 * uni(rng));
    auto draw = [&] {
      std::vector<double> v(n);
      for (double& x : v) x = uni(rng) * std::ldexp(1.0, expo(rng));
      return v;
    };
    std::optional<TimeSeries> rate;
    if (trial % 2 == 0) rate = TimeSeries(dt, draw());
    const TimeSeriesDataset ds(10.0 * uni(rng), TimeSeries(dt, draw()), TimeSeries(dt, draw()),
                               rate, "trial " + std::to_string(trial));
    std::ostringstream out;
    save_dataset(ds, out);
    std::istringstream in(out.str());
    const auto back = load_dataset(in);
    std::ostringstream again;
    save_dataset(back, again);
    if (back == ds && again.str() == out.str()) ++round_trips;
  }
  o.require(round_trips == 100, "round trip");

  int waves = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const std::int64_t q = 1000;
    const std::int64_t dt_num = 1 + static_cast<std::int64_t>(rng() % 100);
    const std::int64_t period_num = 2 * dt_num + static_cast<std::int64_t>(rng() % 5000);
    const std::int64_t duty_den = 100;
    const std::int64_t duty_num = 1 + static_cast<std::int64_t>(rng() % 99);
    const std::int64_t cycles = 1 + static_cast<std::int64_t>(rng() % 4);
    const auto n = static_cast<std::size_t>(cycles * period_num / dt_num);
    const auto w = square_wave(1.0, static_cast<double>(period_num) / q,
                               static_cast<double>(cycles * period_num) / q,
                               static_cast<double>(dt_num) / q,
                               static_cast<double>(duty_num) / duty_den);
    const auto ref = oracle::square_wave_exact(1.0, dt_num, period_num, duty_num, duty_den, n);
    if (std::vector<double>(w.values().begin(), w.values().end()) == ref) ++waves;
  }
  o.require(waves == 500, "square wave");

  std::string text = "t,u,psi\n";
  for (int k = 0; k < 20; ++k) text += format_roundtrip(0.05 * k + (k >= 10 ? 0.15 : 0.0)) + ",1,0\n";
  bool rejected = false;
  try {
    std::istringstream in(text);
    load_dataset(in);
  } catch (const Error& e) {
    rejected = e.code() == ErrorCode::NonUniformSampling;
  }
  o.require(rejected, "non-uniform time column accepted");
  o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(round_trips) + "/100 round trips, " +
              std::to_string(waves) + "/500 square waves, non-uniform " +
              (rejected ? "rejected" : "accepted");
  return o;
}

Outcome determinism() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / ("usvyaw_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(dir);
  auto run = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "usvyaw");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    return cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  };
  std::string files[2];
  for (int i = 0; i < 2; ++i) {
    const auto data = (dir / ("data" + std::to_string(i) + ".csv")).string();
    const auto model = (dir / ("model" + std::to_string(i) + ".txt")).string();
    o.require(run({"excite", "--reference", "--noise-rel", "0.05", "--seed",
                   std::to_string(kPropertySeed), "--out", data}) == 0,
              "excite failed");
    o.require(run({"identify", "--data", data, "--model-out", model}) == 0, "identify failed");
    std::ifstream in(model, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[i] = s.str();
  }
  fs::remove_all(dir);
  o.require(!files[0].empty() && files[0] == files[1], "model files differ");
  o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(files[0].size()) +
              "-byte model files identical";
  return o;
}

}  // namespace

int main() {
  criterion(1, "reference-model poles and stability", 1.0, reference_stability);
  criterion(2, "step response: monotone, no overshoot, DC gain 0.028261 +- 0.1%", 50.0,
            step_contract);
  criterion(3, "ZOH simulation vs RK4 (100 substeps) within 1e-6 relative", 1000.0, zoh_vs_rk4);
  criterion(4, "noiseless round trip: params within 1%, train and held-out fit >= 99%", 2000.0,
            [] { return round_trip(0.0, 0.01, 99.0, 99.0); });
  criterion(5, "noisy round trip (5% noise, seed 7): params within 5%, held-out fit >= 80%",
            2000.0, [] { return round_trip(0.05, 0.05, 0.0, 80.0); });
  criterion(6, "estimator properties on 20 random stable plants", 0.0, estimator_properties);
  criterion(7, "fit_percent unit truths", 0.0, fit_truths);
  criterion(8, "data layer: CSV round trip, square-wave oracle, non-uniform rejection", 0.0,
            data_layer);
  criterion(9, "excite -> identify byte-identical model files", 0.0, determinism);
  std::printf("%s: %d of 9 criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
