#pragma once

// Batch front end: excite, identify, validate, info, step.
//
// Exit codes: 0 success, 2 usage, 3 I/O, 4 data, 5 numerical failure.

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "usvyaw/usvyaw.hpp"

namespace usvyaw::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kIo = 3, kData = 4, kNumerical = 5 };

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParams:
    case ErrorCode::InvalidSamplePeriod:
    case ErrorCode::InvalidWaveSpec:
      return kUsage;
    case ErrorCode::IoFailure:
      return kIo;
    case ErrorCode::ParseError:
    case ErrorCode::NonUniformSampling:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::TooFewSamples:
    case ErrorCode::SplitTooSmall:
    case ErrorCode::LengthMismatch:
    case ErrorCode::SampleRateMismatch:
    case ErrorCode::ConstantReference:
      return kData;
    case ErrorCode::IntegratorError:
    case ErrorCode::RankDeficientRegression:
    case ErrorCode::DivergedNonFinite:
    case ErrorCode::NoDescentDirection:
      return kNumerical;
  }
  return kNumerical;
}

/// Thrown for flag combinations CLI11 cannot express.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr double kPwmWarnLimit = 255.0;
inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

// --------------------------------------------------------------------------
// Shared flag groups

struct PlantFlags {
  std::string model_path;
  bool reference = false;
  std::optional<double> gain, damping, stiffness;
  std::optional<double> inertia, drag, thrust, arm;
  bool allow_negative_thrust = false;

  void attach(CLI::App& cmd) {
    cmd.add_option("--model", model_path, "Model file (K=, a1=, a0=)");
    cmd.add_flag("--reference", reference, "Built-in identified model 0.013/(s^2+2.08s+0.46)");
    cmd.add_option("--K", gain, "Transfer-function gain K");
    cmd.add_option("--a1", damping, "Denominator coefficient a1");
    cmd.add_option("--a0", stiffness, "Denominator coefficient a0");
    cmd.add_option("--inertia", inertia, "Yaw moment of inertia I_z [kg m^2]");
    cmd.add_option("--drag", drag, "Linear yaw drag coefficient b_y [N m s/rad]");
    cmd.add_option("--thrust", thrust, "Thrust coefficient a_t [N per PWM unit]");
    cmd.add_option("--arm", arm, "Thruster moment arm l [m]");
    cmd.add_flag("--allow-negative-thrust", allow_negative_thrust,
                 "Accept a thrust coefficient of either sign");
  }

  SecondOrderTf resolve() const;
};

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "' for reading");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open '" + path + "' for writing");
  return out;
}

inline ModelFile load_model(const std::string& path) {
  auto in = open_input(path);
  return read_model_file(in);
}

inline SecondOrderTf PlantFlags::resolve() const {
  const bool coeffs = gain || damping || stiffness;
  const bool physical = inertia || drag || thrust || arm;
  const int sources = int(!model_path.empty()) + int(reference) + int(coeffs) + int(physical);
  if (sources != 1) {
    throw UsageError(
        "specify exactly one plant: --model FILE, --reference, --K/--a1/--a0, or "
        "--inertia/--drag/--thrust/--arm");
  }
  if (!model_path.empty()) return load_model(model_path).model;
  if (reference) return reference_model();
  if (coeffs) {
    if (!gain || !damping || !stiffness) throw UsageError("--K, --a1 and --a0 go together");
    return SecondOrderTf(*gain, *damping, *stiffness);
  }
  if (!inertia || !drag || !thrust || !arm) {
    throw UsageError("--inertia, --drag, --thrust and --arm go together");
  }
  return physical_to_tf(PhysicalParams(
      *inertia, *drag, *thrust, *arm,
      allow_negative_thrust ? ThrustSign::any : ThrustSign::positive_only));
}

inline TimeSeriesDataset load_data(const std::string& path, bool degrees) {
  auto in = open_input(path);
  auto ds = load_dataset(in);
  if (!degrees) return ds;
  auto to_rad = [](const TimeSeries& ts) {
    std::vector<double> v(ts.values().begin(), ts.values().end());
    for (double& x : v) x /= kRadToDeg;
    return TimeSeries(ts.sample_period(), std::move(v));
  };
  std::optional<TimeSeries> rate;
  if (ds.output_rate()) rate = to_rad(*ds.output_rate());
  return TimeSeriesDataset(ds.time_origin(), ds.input_u(), to_rad(ds.output_yaw()), rate,
                           ds.label());
}

inline void warn_pwm_range(std::span<const double> u, std::ostream& err) {
  for (double v : u) {
    if (std::abs(v) > kPwmWarnLimit) {
      err << "warning: PWM input outside [-255, 255] (found " << format_sig6(v) << ")\n";
      return;
    }
  }
}

inline std::string describe_stability(const SecondOrderTf& tf) {
  const auto s = is_stable(tf);
  std::string text(to_string(s));
  if (s == Stability::marginally_stable) {
    text += tf.stiffness_coeff() == 0.0 ? " (integrator)" : " (undamped oscillation)";
  }
  return text;
}

inline std::string format_pole(std::complex<double> p) {
  if (p.imag() == 0.0) return format_sig6(p.real());
  return format_sig6(p.real()) + (p.imag() < 0.0 ? " - " : " + ") + format_sig6(std::abs(p.imag())) +
         "i";
}

inline void print_analysis(const SecondOrderTf& tf, std::ostream& out) {
  const auto p = poles(tf);
  out << "K: " << format_sig6(tf.gain()) << '\n';
  out << "a1: " << format_sig6(tf.damping_coeff()) << '\n';
  out << "a0: " << format_sig6(tf.stiffness_coeff()) << '\n';
  out << "poles: " << format_pole(p[0]) << ", " << format_pole(p[1]) << '\n';
  out << "stability: " << describe_stability(tf) << '\n';
  if (tf.stiffness_coeff() == 0.0) {
    out << "dc gain: integrator\n";
  } else {
    out << "dc gain: " << format_sig6(dc_gain(tf)) << '\n';
  }
  const double tau = dominant_time_constant(tf);
  out << "time constant: " << (std::isfinite(tau) ? format_sig6(tau) + " s" : "inf") << '\n';
}

// --------------------------------------------------------------------------
// Commands

struct ExciteFlags {
  PlantFlags plant;
  std::string out_path;
  double amplitude = 50.0;
  double period = 20.0;
  double duration = 200.0;
  double dt = 0.05;
  double duty = 0.5;
  double noise_std = 0.0;
  double noise_rel = 0.0;
  std::uint64_t seed = 1;
  std::string label = "excite";
  bool degrees = false;
};

inline int cmd_excite(const ExciteFlags& f, std::ostream& /*out*/, std::ostream& err) {
  const auto tf = f.plant.resolve();
  if (f.noise_std < 0.0 || f.noise_rel < 0.0) throw UsageError("noise levels must be >= 0");
  if (f.noise_std > 0.0 && f.noise_rel > 0.0) {
    throw UsageError("--noise-std and --noise-rel are mutually exclusive");
  }
  if (std::abs(f.amplitude) > kPwmWarnLimit) {
    err << "warning: amplitude " << format_sig6(f.amplitude) << " is outside [-255, 255]\n";
  }
  const auto input = square_wave(f.amplitude, f.period, f.duration, f.dt, f.duty);
  const auto sim = simulate(discretize_zoh(tf, f.dt), input);

  double sigma = f.degrees ? f.noise_std / kRadToDeg : f.noise_std;
  if (f.noise_rel > 0.0) sigma = f.noise_rel * standard_deviation(sim.yaw.values());
  const auto yaw = add_noise(sim.yaw, NoiseSpec{sigma, f.seed});

  TimeSeriesDataset ds(0.0, input, yaw, sim.yaw_rate, f.label);
  if (f.degrees) {
    auto scale = [](const TimeSeries& ts) {
      std::vector<double> v(ts.values().begin(), ts.values().end());
      for (double& x : v) x *= kRadToDeg;
      return TimeSeries(ts.sample_period(), std::move(v));
    };
    ds = TimeSeriesDataset(0.0, input, scale(yaw), scale(sim.yaw_rate), f.label);
  }
  auto out = open_output(f.out_path);
  save_dataset(ds, out);
  return kOk;
}

struct IdentifyFlags {
  std::string data_path;
  std::string model_out;
  std::string report_out;
  double train_fraction = 0.5;
  int max_iterations = 200;
  bool degrees = false;
};

inline int cmd_identify(const IdentifyFlags& f, std::ostream& out, std::ostream& err) {
  const auto ds = load_data(f.data_path, f.degrees);
  warn_pwm_range(ds.input_u().values(), err);
  auto opts = pipeline_options();
  opts.max_iterations = f.max_iterations;
  const auto result = identify(ds, f.train_fraction, opts);
  const auto& model = result.report.model;

  {
    auto mf = open_output(f.model_out);
    write_model_file(ModelFile{model, ds.sample_period(), result.report.training_fit_percent}, mf);
  }

  std::ostringstream rep;
  const auto& init = result.initializer;
  rep << "dataset: " << (ds.label().empty() ? f.data_path : ds.label()) << " (" << ds.size()
      << " samples, dt " << format_sig6(ds.sample_period()) << " s)\n";
  rep << "split: " << result.train.size() << " train / " << result.test.size() << " validation\n";
  rep << "initializer: K=" << format_sig6(init.model.gain())
      << " a1=" << format_sig6(init.model.damping_coeff())
      << " a0=" << format_sig6(init.model.stiffness_coeff());
  if (init.unstable_clamped) rep << " [UnstableInitializer: poles clamped to radius 0.999]";
  if (init.non_physical_pole) rep << " [non-physical discrete pole]";
  if (init.damping_clamped) rep << " [a1 clamped to 0]";
  if (init.stiffness_clamped) rep << " [a0 clamped to 0]";
  rep << '\n';
  print_analysis(model, rep);
  rep << "output offset: " << format_sig6(result.report.output_offset) << '\n';
  rep << "iterations: " << result.report.iterations_used << " ("
      << to_string(result.report.termination_reason) << ")\n";
  rep << "train fit: " << format_sig6(result.report.training_fit_percent) << " %\n";
  rep << "validation fit: " << format_sig6(result.validation_fit_percent) << " %\n";

  out << rep.str();
  if (!f.report_out.empty()) {
    auto rf = open_output(f.report_out);
    rf << rep.str();
    if (!rf) throw Error(ErrorCode::IoFailure, "write failure on '" + f.report_out + "'");
  }
  return kOk;
}

struct ValidateFlags {
  std::string model_path;
  std::string data_path;
  std::string overlay_out;
  std::optional<double> holdout_fraction;
  bool no_detrend = false;
  bool degrees = false;
};

inline int cmd_validate(const ValidateFlags& f, std::ostream& out, std::ostream& err) {
  const auto mf = load_model(f.model_path);
  auto ds = load_data(f.data_path, f.degrees);
  warn_pwm_range(ds.input_u().values(), err);
  if (!f.no_detrend) ds = detrend(ds);

  std::vector<double> preceding;
  std::optional<TimeSeriesDataset> scored;
  if (f.holdout_fraction) {
    // Same split identify uses; the model runs through the training inputs
    // before the scored segment.
    auto [train, test] = split_dataset(ds, 1.0 - *f.holdout_fraction);
    preceding.assign(train.input_u().values().begin(), train.input_u().values().end());
    scored = std::move(test);
  } else {
    scored = ds;
  }
  const double fit = cross_validate(mf.model, *scored, preceding);
  out << "validation fit: " << format_sig6(fit) << " %\n";

  if (!f.overlay_out.empty()) {
    std::vector<double> input = preceding;
    input.insert(input.end(), scored->input_u().values().begin(), scored->input_u().values().end());
    const auto yhat = simulate_yaw(mf.model, input, scored->sample_period());
    const double unit = f.degrees ? kRadToDeg : 1.0;
    auto ov = open_output(f.overlay_out);
    ov << "t,psi_measured,psi_simulated\n";
    for (std::size_t k = 0; k < scored->size(); ++k) {
      ov << format_roundtrip(scored->time_at(k)) << ','
         << format_roundtrip(scored->output_yaw()[k] * unit) << ','
         << format_roundtrip(yhat[preceding.size() + k] * unit) << '\n';
    }
    ov.flush();
    if (!ov) throw Error(ErrorCode::IoFailure, "write failure on '" + f.overlay_out + "'");
  }
  return kOk;
}

inline int cmd_info(const PlantFlags& plant, std::ostream& out) {
  print_analysis(plant.resolve(), out);
  return kOk;
}

struct StepFlags {
  PlantFlags plant;
  double amplitude = 1.0;
  double duration = 120.0;
  double dt = 0.05;
  std::string out_path;
  bool degrees = false;
};

/// Writes t,psi where row k is the yaw at t = (k+1)*dt, the end of the k-th
/// hold interval.
inline int cmd_step(const StepFlags& f, std::ostream& out) {
  const auto tf = f.plant.resolve();
  const auto yaw = step_response(tf, f.amplitude, f.duration, f.dt);
  const double unit = f.degrees ? kRadToDeg : 1.0;
  std::ostringstream csv;
  csv << "t,psi\n";
  for (std::size_t k = 0; k < yaw.size(); ++k) {
    csv << format_roundtrip(static_cast<double>(k + 1) * f.dt) << ','
        << format_roundtrip(yaw[k] * unit) << '\n';
  }
  if (f.out_path.empty()) {
    out << csv.str();
  } else {
    auto file = open_output(f.out_path);
    file << csv.str();
    file.flush();
    if (!file) throw Error(ErrorCode::IoFailure, "write failure on '" + f.out_path + "'");
  }
  return kOk;
}

// --------------------------------------------------------------------------
// Entry point

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Yaw-dynamics system identification for twin-thruster surface vehicles", "usvyaw"};
  app.require_subcommand(1);

  ExciteFlags excite;
  auto* c_excite = app.add_subcommand("excite", "Simulate a square-wave experiment and write a dataset CSV");
  excite.plant.attach(*c_excite);
  c_excite->add_option("--out", excite.out_path, "Output dataset CSV")->required();
  c_excite->add_option("--amplitude", excite.amplitude, "Square-wave amplitude [PWM]")->capture_default_str();
  c_excite->add_option("--period", excite.period, "Square-wave period [s]")->capture_default_str();
  c_excite->add_option("--duration", excite.duration, "Experiment length [s]")->capture_default_str();
  c_excite->add_option("--dt", excite.dt, "Sample period [s]")->capture_default_str();
  c_excite->add_option("--duty", excite.duty, "Fraction of each period at +amplitude")->capture_default_str();
  c_excite->add_option("--noise-std", excite.noise_std, "Additive Gaussian yaw noise std [rad, deg with --degrees]")->capture_default_str();
  c_excite->add_option("--noise-rel", excite.noise_rel, "Noise std as a fraction of the clean yaw std")->capture_default_str();
  c_excite->add_option("--seed", excite.seed, "Noise seed (mt19937_64)")->capture_default_str();
  c_excite->add_option("--label", excite.label, "Dataset label")->capture_default_str();
  c_excite->add_flag("--degrees", excite.degrees, "Write psi and r in degrees");

  IdentifyFlags ident;
  auto* c_ident = app.add_subcommand("identify", "Estimate K, a1, a0 from a dataset and cross-validate");
  c_ident->add_option("--data", ident.data_path, "Dataset CSV")->required();
  c_ident->add_option("--model-out", ident.model_out, "Identified model file")->required();
  c_ident->add_option("--report-out", ident.report_out, "Also write the report to this file");
  c_ident->add_option("--train-fraction", ident.train_fraction, "Leading fraction used for training")->capture_default_str();
  c_ident->add_option("--max-iterations", ident.max_iterations, "Levenberg-Marquardt iteration cap")->capture_default_str();
  c_ident->add_flag("--degrees", ident.degrees, "Dataset psi and r are in degrees");

  ValidateFlags valid;
  auto* c_valid = app.add_subcommand("validate", "Free-run fitness of a model on a dataset");
  c_valid->add_option("--model", valid.model_path, "Model file")->required();
  c_valid->add_option("--data", valid.data_path, "Dataset CSV")->required();
  c_valid->add_option("--overlay-out", valid.overlay_out, "Write t,psi_measured,psi_simulated CSV");
  c_valid->add_option("--holdout-fraction", valid.holdout_fraction,
                      "Score only the trailing fraction, as identify does");
  c_valid->add_flag("--no-detrend", valid.no_detrend, "Do not shift yaw to start at zero");
  c_valid->add_flag("--degrees", valid.degrees, "Dataset psi is in degrees; overlay written in degrees");

  PlantFlags info;
  auto* c_info = app.add_subcommand("info", "Poles, stability, DC gain and time constant of a model");
  info.attach(*c_info);

  StepFlags step;
  auto* c_step = app.add_subcommand("step", "Open-loop step response as a t,psi CSV");
  step.plant.attach(*c_step);
  c_step->add_option("--amplitude", step.amplitude, "Step amplitude [PWM]")->capture_default_str();
  c_step->add_option("--duration", step.duration, "Response length [s]")->capture_default_str();
  c_step->add_option("--dt", step.dt, "Sample period [s]")->capture_default_str();
  c_step->add_option("--out", step.out_path, "Output CSV (default stdout)");
  c_step->add_flag("--degrees", step.degrees, "Write psi in degrees");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();  // delegates to the selected subcommand
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  try {
    if (c_excite->parsed()) return cmd_excite(excite, out, err);
    if (c_ident->parsed()) return cmd_identify(ident, out, err);
    if (c_valid->parsed()) return cmd_validate(valid, out, err);
    if (c_info->parsed()) return cmd_info(info, out);
    if (c_step->parsed()) return cmd_step(step, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  }
  return kUsage;
}

}  // namespace usvyaw::cli
