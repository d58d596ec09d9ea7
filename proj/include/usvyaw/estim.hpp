#pragma once

// Gray-box identification of K / (s^2 + a1 s + a0) from (u, psi) logs.
//
// An equation-error (ARX) regression gives a starting point; Levenberg-
// Marquardt then minimizes the free-run simulation error over
// theta = (K, a1, a0) with a1, a0 kept non-negative.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "usvyaw/error.hpp"
#include "usvyaw/model.hpp"
#include "usvyaw/signals.hpp"
#include "usvyaw/sim.hpp"

namespace usvyaw {

struct EstimationOptions {
  int max_iterations = 200;
  double objective_rel_tol = 1e-10;
  double step_tol = 1e-12;
  double initial_damping = 1e-3;
  // K is unbounded; a1 and a0 are projected onto [bound, inf).
  double damping_lower_bound = 0.0;
  double stiffness_lower_bound = 0.0;
  double finite_difference_rel_step = 1e-6;
  // Fit a constant yaw offset alongside (K, a1, a0). It absorbs the error a
  // noisy first sample leaves behind after detrend; it is not part of the
  // model and is never applied during validation.
  bool estimate_output_offset = false;

  void validate() const {
    if (max_iterations < 1) throw Error(ErrorCode::InvalidParams, "max_iterations must be >= 1");
    for (double tol : {objective_rel_tol, step_tol, initial_damping, finite_difference_rel_step}) {
      if (!std::isfinite(tol) || tol <= 0.0) {
        throw Error(ErrorCode::InvalidParams, "estimation tolerances must be finite and > 0");
      }
    }
    if (!std::isfinite(damping_lower_bound) || !std::isfinite(stiffness_lower_bound) ||
        damping_lower_bound < 0.0 || stiffness_lower_bound < 0.0) {
      throw Error(ErrorCode::InvalidParams, "parameter lower bounds must be finite and >= 0");
    }
  }
};

enum class Termination { converged_objective, converged_step, max_iterations };

constexpr std::string_view to_string(Termination t) noexcept {
  switch (t) {
    case Termination::converged_objective: return "converged-objective";
    case Termination::converged_step: return "converged-step";
    case Termination::max_iterations: return "max-iterations";
  }
  return "unknown";
}

struct EstimationReport {
  SecondOrderTf model;
  double training_fit_percent = 0.0;
  double output_offset = 0.0;  // zero unless estimated
  // SSE of the starting point followed by the SSE after each accepted step.
  std::vector<double> objective_trace;
  int iterations_used = 0;
  Termination termination_reason = Termination::max_iterations;
  SecondOrderTf initializer_model;
};

struct InitializerResult {
  SecondOrderTf model;
  // psi[k] = -alpha1 psi[k-1] - alpha2 psi[k-2] + beta1 u[k] + beta2 u[k-1]
  std::array<double, 4> arx{};  // alpha1, alpha2, beta1, beta2
  std::array<std::complex<double>, 2> discrete_poles{};
  bool unstable_clamped = false;     // a discrete pole had |z| >= 1
  bool non_physical_pole = false;    // a real discrete pole was <= 0
  bool damping_clamped = false;      // mapped a1 < 0, set to 0
  bool stiffness_clamped = false;    // mapped a0 < 0, set to 0
};

/// Radius discrete poles are pulled back to when the regression returns an
/// unstable or marginal polynomial.
inline constexpr double kStabilityMarginRadius = 0.999;

// --------------------------------------------------------------------------
// Fitness

/// NRMSE fitness 100 * (1 - |y - yhat| / |y - mean(y)|). Negative when the
/// simulation is worse than predicting the mean.
inline double fit_percent(std::span<const double> measured, std::span<const double> simulated) {
  if (measured.size() != simulated.size()) {
    throw Error(ErrorCode::LengthMismatch, "measured and simulated lengths differ");
  }
  if (measured.size() < 2) throw Error(ErrorCode::TooFewSamples, "fit needs >= 2 samples");
  double mean = 0.0;
  for (double v : measured) mean += v;
  mean /= static_cast<double>(measured.size());
  double err = 0.0;
  double spread = 0.0;
  for (std::size_t k = 0; k < measured.size(); ++k) {
    err += (measured[k] - simulated[k]) * (measured[k] - simulated[k]);
    spread += (measured[k] - mean) * (measured[k] - mean);
  }
  if (spread == 0.0) throw Error(ErrorCode::ConstantReference, "measured series is constant");
  return 100.0 * (1.0 - std::sqrt(err) / std::sqrt(spread));
}

inline double fit_percent(const TimeSeries& measured, const TimeSeries& simulated) {
  return fit_percent(measured.values(), simulated.values());
}

// --------------------------------------------------------------------------
// Simulation helpers

/// Zero-state yaw response of tf to input held over dt.
inline std::vector<double> simulate_yaw(const SecondOrderTf& tf, std::span<const double> input,
                                        double dt) {
  const auto dm = discretize_zoh(tf, dt);
  std::vector<double> yaw(input.size());
  detail::simulate_into(dm, input, {}, yaw, {});
  return yaw;
}

inline double sum_squared_error(std::span<const double> y, std::span<const double> yhat) {
  double s = 0.0;
  for (std::size_t k = 0; k < y.size(); ++k) s += (y[k] - yhat[k]) * (y[k] - yhat[k]);
  return s;
}

/// Output-error objective of a candidate on a dataset.
inline double output_error_sse(const TimeSeriesDataset& ds, const SecondOrderTf& tf) {
  const auto yhat = simulate_yaw(tf, ds.input_u().values(), ds.sample_period());
  return sum_squared_error(ds.output_yaw().values(), yhat);
}

namespace detail {

using Theta = std::array<double, 3>;

inline Theta to_theta(const SecondOrderTf& tf) {
  return {tf.gain(), tf.damping_coeff(), tf.stiffness_coeff()};
}

inline double fd_step(const Theta& theta, std::size_t i, double rel) {
  // a1 and a0 may sit on their zero bound, so their step has a floor.
  const double scale = i == 0 ? std::abs(theta[0]) : std::max(std::abs(theta[i]), 1e-3);
  return rel * scale;
}

}  // namespace detail

/// Forward-difference Jacobian of the simulated yaw with respect to
/// (K, a1, a0); column i holds d(psi_hat)/d(theta_i) at every sample.
inline std::array<std::vector<double>, 3> output_error_jacobian(const TimeSeriesDataset& ds,
                                                                const SecondOrderTf& tf,
                                                                const EstimationOptions& opts = {}) {
  const auto input = ds.input_u().values();
  const double dt = ds.sample_period();
  const auto theta = detail::to_theta(tf);
  const auto base = simulate_yaw(tf, input, dt);
  std::array<std::vector<double>, 3> jac;
  for (std::size_t i = 0; i < 3; ++i) {
    auto shifted = theta;
    const double h = detail::fd_step(theta, i, opts.finite_difference_rel_step);
    shifted[i] += h;
    const double step = shifted[i] - theta[i];
    const auto yhat = simulate_yaw(SecondOrderTf(shifted[0], shifted[1], shifted[2]), input, dt);
    jac[i].resize(base.size());
    for (std::size_t k = 0; k < base.size(); ++k) jac[i][k] = (yhat[k] - base[k]) / step;
  }
  return jac;
}

// --------------------------------------------------------------------------
// Equation-error initializer

namespace detail {

struct ArxCoefficients {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
};

// Least squares on y[k] = -alpha1 y[k-1] - alpha2 y[k-2] + beta1 u[k] + beta2 u[k-1].
// Returns nullopt when the regression matrix is rank deficient.
inline std::optional<ArxCoefficients> arx_least_squares(std::span<const double> y,
                                                        std::span<const double> u) {
  const std::size_t n = y.size();
  const auto rows = static_cast<Eigen::Index>(n - 2);
  Eigen::MatrixXd phi(rows, 4);
  Eigen::VectorXd target(rows);
  for (std::size_t k = 2; k < n; ++k) {
    const auto r = static_cast<Eigen::Index>(k - 2);
    phi(r, 0) = -y[k - 1];
    phi(r, 1) = -y[k - 2];
    phi(r, 2) = u[k];
    phi(r, 3) = u[k - 1];
    target(r) = y[k];
  }
  // Equilibrate columns so the rank decision is not driven by units.
  const Eigen::Vector4d scale = phi.colwise().norm().transpose();
  if (!scale.allFinite() || (scale.array() == 0.0).any()) return std::nullopt;
  const Eigen::MatrixXd scaled = phi * scale.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  if (qr.rank() < 4) return std::nullopt;
  const Eigen::Vector4d c = qr.solve(target).cwiseQuotient(scale);
  if (!c.allFinite()) return std::nullopt;
  return ArxCoefficients{c(0), c(1), c(2), c(3)};
}

// Roots of z^2 + alpha1 z + alpha2; a conjugate pair has positive imaginary
// part first.
inline std::array<std::complex<double>, 2> discrete_roots(double alpha1, double alpha2) {
  const double half = 0.5 * alpha1;
  const double disc = half * half - alpha2;
  if (disc >= 0.0) {
    const double big = -(half + std::copysign(std::sqrt(disc), half));
    return {std::complex<double>(big, 0.0),
            std::complex<double>(big != 0.0 ? alpha2 / big : 0.0, 0.0)};
  }
  const double im = std::sqrt(-disc);
  return {std::complex<double>(-half, im), std::complex<double>(-half, -im)};
}

// Pulls roots onto the kStabilityMarginRadius circle when they lie on or
// outside the unit circle; returns the (possibly unchanged) polynomial.
inline std::pair<double, double> stabilized_denominator(double alpha1, double alpha2,
                                                        double radius_limit) {
  auto z = discrete_roots(alpha1, alpha2);
  for (auto& root : z) {
    if (std::abs(root) >= 1.0) root *= radius_limit / std::abs(root);
  }
  return {-(z[0] + z[1]).real(), (z[0] * z[1]).real()};
}

// x = s / (1 + alpha1 q^-1 + alpha2 q^-2) from rest.
inline std::vector<double> all_pole_filter(std::span<const double> s, double alpha1, double alpha2) {
  std::vector<double> x(s.size());
  double x1 = 0.0;
  double x2 = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    x[k] = s[k] - alpha1 * x1 - alpha2 * x2;
    x2 = x1;
    x1 = x[k];
  }
  return x;
}

}  // namespace detail

namespace detail {

// Maps ARX coefficients to a continuous model: discrete poles through
// log(z)/dt, K from the discrete DC gain. Poles on or outside the unit
// circle are pulled to radius 0.999 and negative a1 or a0 are clamped to
// zero, each recorded in the flags.
inline InitializerResult map_to_continuous(const ArxCoefficients& fit, std::span<const double> y,
                                           std::span<const double> u, double dt) {
  InitializerResult out{SecondOrderTf(1.0, 0.0, 0.0)};
  out.arx = {fit.alpha1, fit.alpha2, fit.beta1, fit.beta2};
  const auto z = discrete_roots(fit.alpha1, fit.alpha2);
  out.discrete_poles = z;

  double a1 = 0.0;
  double a0 = 0.0;
  double den_at_one = 1.0;  // (1 - z1)(1 - z2) after clamping
  if (z[0].imag() != 0.0) {
    double radius = std::abs(z[0]);
    if (radius >= 1.0) {
      out.unstable_clamped = true;
      radius = kStabilityMarginRadius;
    }
    const double angle = std::abs(std::arg(z[0]));
    const double sigma = std::log(radius) / dt;
    const double omega = angle / dt;
    a1 = -2.0 * sigma;
    a0 = sigma * sigma + omega * omega;
    den_at_one = std::norm(1.0 - std::polar(radius, angle));
  } else {
    std::array<double, 2> p{};
    for (std::size_t i = 0; i < 2; ++i) {
      double zi = z[i].real();
      if (zi <= 0.0) {
        // No continuous pole maps onto the negative real axis.
        out.non_physical_pole = true;
        zi = std::max(std::abs(zi), 1e-6);
      }
      if (zi >= 1.0) {
        out.unstable_clamped = true;
        zi = kStabilityMarginRadius;
      }
      p[i] = std::log(zi) / dt;
      den_at_one *= (1.0 - zi);
    }
    a1 = -(p[0] + p[1]);
    a0 = p[0] * p[1];
  }

  double gain = (fit.beta1 + fit.beta2) / den_at_one * a0;
  if (a1 < 0.0) {
    out.damping_clamped = true;
    a1 = 0.0;
  }
  if (a0 < 0.0) {
    out.stiffness_clamped = true;
    a0 = 0.0;
  }
  if (a0 == 0.0 || !std::isfinite(gain) || gain == 0.0) {
    // DC matching is undefined for an integrating candidate; use the
    // least-squares gain of the unit-gain simulation instead.
    const auto unit = simulate_yaw(SecondOrderTf(1.0, a1, a0), u, dt);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      num += unit[k] * y[k];
      den += unit[k] * unit[k];
    }
    gain = den > 0.0 ? num / den : 0.0;
    if (!std::isfinite(gain) || gain == 0.0) {
      throw Error(ErrorCode::RankDeficientRegression, "no usable gain could be recovered");
    }
  }
  out.model = SecondOrderTf(gain, a1, a0);
  return out;
}

}  // namespace detail

/// Default number of Steiglitz-McBride prefiltering passes after the plain
/// equation-error fit.
inline constexpr int kDefaultPrefilterPasses = 20;

/// Starting model from the discrete regression
///   psi[k] = -alpha1 psi[k-1] - alpha2 psi[k-2] + beta1 u[k] + beta2 u[k-1]
/// (sample k being the output after input k was held).
///
/// Plain least squares is biased when psi carries measurement noise, so the
/// fit is repeated on data prefiltered by the current 1/A(q)
/// (Steiglitz-McBride) for up to prefilter_passes rounds. Every round's
/// estimate is mapped to continuous time and the one with the smallest
/// free-run simulation error is returned; with zero passes this is the plain
/// ARX estimate.
inline InitializerResult equation_error_init(const TimeSeriesDataset& ds,
                                             int prefilter_passes = kDefaultPrefilterPasses) {
  const auto y = ds.output_yaw().values();
  const auto u = ds.input_u().values();
  const double dt = ds.sample_period();
  const std::size_t n = ds.size();
  if (n < kMinEstimationSamples) {
    throw Error(ErrorCode::TooFewSamples, "estimation needs >= 50 samples, dataset has " +
                                              std::to_string(n));
  }
  if (std::all_of(u.begin(), u.end(), [&](double v) { return v == u.front(); })) {
    throw Error(ErrorCode::RankDeficientRegression, "input is constant, nothing is excited");
  }

  auto fit = detail::arx_least_squares(y, u);
  if (!fit) {
    throw Error(ErrorCode::RankDeficientRegression,
                "regression matrix has rank < 4; input is not sufficiently exciting");
  }

  auto best = detail::map_to_continuous(*fit, y, u, dt);
  double best_sse = sum_squared_error(y, simulate_yaw(best.model, u, dt));
  for (int pass = 0; pass < prefilter_passes; ++pass) {
    const auto [f1, f2] =
        detail::stabilized_denominator(fit->alpha1, fit->alpha2, kStabilityMarginRadius);
    const auto yf = detail::all_pole_filter(y, f1, f2);
    const auto uf = detail::all_pole_filter(u, f1, f2);
    const auto next = detail::arx_least_squares(yf, uf);
    if (!next) break;
    const double change = std::max(std::abs(next->alpha1 - fit->alpha1),
                                   std::abs(next->alpha2 - fit->alpha2));
    fit = next;
    try {
      auto candidate = detail::map_to_continuous(*fit, y, u, dt);
      const double sse = sum_squared_error(y, simulate_yaw(candidate.model, u, dt));
      if (sse < best_sse) {
        best = candidate;
        best_sse = sse;
      }
    } catch (const Error&) {
      break;
    }
    if (change < 1e-12) break;
  }
  return best;
}

// --------------------------------------------------------------------------
// Output-error refinement

/// Residual sums of squares below this fraction of sum(y^2) are treated as
/// exact fits; they sit at the rounding floor of the simulation.
inline constexpr double kExactFitFloor = 1e-24;

/// Levenberg-Marquardt on SSE = sum (psi[k] - psi_hat[k] - c)^2, psi_hat being
/// the zero-state ZOH simulation of the candidate. c is fixed at zero unless
/// opts.estimate_output_offset is set. The Jacobian columns for (K, a1, a0)
/// are forward differences of the full simulation; the offset column is
/// exact. Candidates are projected onto the bounds before evaluation and a
/// step is accepted only if it strictly lowers the SSE.
inline EstimationReport estimate_output_error(const TimeSeriesDataset& ds,
                                              const SecondOrderTf& init,
                                              const EstimationOptions& opts = {}) {
  opts.validate();
  if (ds.size() < kMinEstimationSamples) {
    throw Error(ErrorCode::TooFewSamples, "estimation needs >= 50 samples, dataset has " +
                                              std::to_string(ds.size()));
  }
  if (init.damping_coeff() < opts.damping_lower_bound ||
      init.stiffness_coeff() < opts.stiffness_lower_bound) {
    throw Error(ErrorCode::InvalidParams, "initial model violates the parameter bounds");
  }

  const auto y = ds.output_yaw().values();
  const auto input = ds.input_u().values();
  const double dt = ds.sample_period();
  const bool with_offset = opts.estimate_output_offset;
  using Params = std::array<double, 4>;  // K, a1, a0, offset
  const Params lower{-std::numeric_limits<double>::infinity(), opts.damping_lower_bound,
                     opts.stiffness_lower_bound, -std::numeric_limits<double>::infinity()};

  auto residual_sse = [&](const Params& th, std::span<const double> yhat) {
    double s = 0.0;
    for (std::size_t k = 0; k < y.size(); ++k) {
      const double e = y[k] - yhat[k] - th[3];
      s += e * e;
    }
    return s;
  };
  auto objective = [&](const Params& th) {
    for (double v : th) {
      if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    }
    if (th[0] == 0.0) return std::numeric_limits<double>::infinity();
    const auto yhat = simulate_yaw(SecondOrderTf(th[0], th[1], th[2]), input, dt);
    const double s = residual_sse(th, yhat);
    return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
  };
  auto step_scale = [](const Params& th, std::size_t i) {
    return i == 0 ? std::abs(th[0]) : std::max(std::abs(th[i]), 1e-3);
  };
  auto last_good = [](const Params& th) { return std::array<double, 3>{th[0], th[1], th[2]}; };

  double energy = 0.0;
  for (double v : y) energy += v * v;
  const double exact_floor = kExactFitFloor * energy;

  Params theta{init.gain(), init.damping_coeff(), init.stiffness_coeff(), 0.0};
  double sse = objective(theta);
  if (!std::isfinite(sse)) {
    throw EstimationError(ErrorCode::DivergedNonFinite,
                          "objective is not finite at the initial model");
  }

  EstimationReport report{init, 0.0, 0.0, {sse}, 0, Termination::max_iterations, init};
  double lambda = opts.initial_damping;
  bool done = sse <= exact_floor;
  if (done) report.termination_reason = Termination::converged_objective;

  for (int iter = 1; iter <= opts.max_iterations && !done; ++iter) {
    report.iterations_used = iter;
    const SecondOrderTf current(theta[0], theta[1], theta[2]);
    const auto jac = output_error_jacobian(ds, current, opts);
    const auto yhat = simulate_yaw(current, input, dt);

    Eigen::Matrix4d jtj = Eigen::Matrix4d::Zero();
    Eigen::Vector4d grad = Eigen::Vector4d::Zero();
    for (std::size_t k = 0; k < y.size(); ++k) {
      const Eigen::Vector4d row(jac[0][k], jac[1][k], jac[2][k], with_offset ? 1.0 : 0.0);
      jtj.noalias() += row * row.transpose();
      grad += row * (y[k] - yhat[k] - theta[3]);
    }
    if (!with_offset) jtj(3, 3) = 1.0;  // keeps the offset row inert
    if (!jtj.allFinite() || !grad.allFinite()) {
      throw EstimationError(ErrorCode::DivergedNonFinite, "Jacobian is not finite",
                            last_good(theta));
    }
    if (jtj.diagonal().head<3>().maxCoeff() == 0.0) {
      throw EstimationError(ErrorCode::NoDescentDirection, "Jacobian is identically zero",
                            last_good(theta));
    }
    // Marquardt scaling with a floor so a dead column stays solvable.
    const Eigen::Vector4d diag = jtj.diagonal().cwiseMax(1e-12 * jtj.diagonal().maxCoeff());

    while (true) {
      Eigen::Matrix4d damped = jtj;
      damped.diagonal() += lambda * diag;
      const Eigen::Vector4d delta = damped.ldlt().solve(grad);

      Params candidate{};
      double step_ratio = 0.0;
      for (std::size_t i = 0; i < 4; ++i) {
        candidate[i] = std::max(theta[i] + delta(static_cast<Eigen::Index>(i)), lower[i]);
        step_ratio = std::max(step_ratio, std::abs(candidate[i] - theta[i]) / step_scale(theta, i));
      }
      if (!(step_ratio > opts.step_tol)) {
        report.termination_reason = Termination::converged_step;
        done = true;
        break;
      }
      const double trial = objective(candidate);
      if (trial < sse) {
        const double rel_drop = (sse - trial) / sse;
        theta = candidate;
        sse = trial;
        report.objective_trace.push_back(sse);
        lambda = std::max(lambda / 10.0, 1e-12);
        if (rel_drop < opts.objective_rel_tol || sse <= exact_floor) {
          report.termination_reason = Termination::converged_objective;
          done = true;
        }
        break;
      }
      lambda *= 10.0;
      if (lambda > 1e20) {
        throw EstimationError(ErrorCode::NoDescentDirection,
                              "damping exhausted without reducing the objective",
                              last_good(theta));
      }
    }
  }

  report.model = SecondOrderTf(theta[0], theta[1], theta[2]);
  report.output_offset = theta[3];
  auto yhat = simulate_yaw(report.model, input, dt);
  for (double& v : yhat) v += theta[3];
  report.training_fit_percent = fit_percent(y, yhat);
  return report;
}

// --------------------------------------------------------------------------
// Validation

/// Free-run fitness of model on a held-out segment. The simulation starts
/// from rest at the beginning of preceding_input (the inputs applied before
/// the segment, empty for a separate experiment) and only the segment's own
/// samples are scored.
inline double cross_validate(const SecondOrderTf& model, const TimeSeriesDataset& test,
                             std::span<const double> preceding_input = {}) {
  const auto segment = test.input_u().values();
  std::vector<double> input(preceding_input.begin(), preceding_input.end());
  input.insert(input.end(), segment.begin(), segment.end());
  const auto yhat = simulate_yaw(model, input, test.sample_period());
  const auto scored = std::span<const double>(yhat).subspan(preceding_input.size());
  return fit_percent(test.output_yaw().values(), scored);
}

}  // namespace usvyaw
