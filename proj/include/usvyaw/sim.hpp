#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "usvyaw/error.hpp"
#include "usvyaw/model.hpp"

namespace usvyaw {

/// Uniformly sampled real signal.
class TimeSeries {
 public:
  TimeSeries() = default;

  TimeSeries(double sample_period, std::vector<double> values)
      : sample_period_(sample_period), values_(std::move(values)) {
    if (!std::isfinite(sample_period) || sample_period <= 0.0) {
      throw Error(ErrorCode::InvalidSamplePeriod, "sample period must be finite and > 0");
    }
    for (std::size_t k = 0; k < values_.size(); ++k) {
      if (!std::isfinite(values_[k])) {
        throw Error(ErrorCode::NonFiniteValue, "sample " + std::to_string(k) + " is not finite");
      }
    }
  }

  double sample_period() const noexcept { return sample_period_; }
  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  double operator[](std::size_t k) const { return values_[k]; }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  double sample_period_ = 1.0;
  std::vector<double> values_;
};

using Matrix2 = std::array<std::array<double, 2>, 2>;
using Vector2 = std::array<double, 2>;

/// Zero-order-hold discretization of the realization
///   d(psi)/dt = r,  dr/dt = -a1*r - a0*psi + K*u,   state x = (psi, r).
struct DiscreteModel {
  double sample_period = 0.0;
  Matrix2 state_transition{};
  Vector2 input_matrix{};
  Vector2 output_row{1.0, 0.0};
};

namespace detail {

// Scalar functions of the continuous system matrix over a hold interval t:
//   e^{At}        = f0*I + f1*A
//   int_0^t f1    = g1               (unit-gain step response of psi)
// together with f1' = f0 - a1*f1. All are evaluated from the pole midpoint
// m = -a1/2 and the discriminant d = m^2 - a0 so that the distinct-real,
// repeated and complex cases join continuously.
struct HoldFunctions {
  double f0 = 0.0;
  double f1 = 0.0;
  double f1_dot = 0.0;
  double g1 = 0.0;
};

inline double expm1_over(double p, double t) { return p == 0.0 ? t : std::expm1(p * t) / p; }

// g1 by its Taylor series: f1 = sum b_n t^n with b_0 = 0, b_1 = 1 and
// b_{n+2} = -(a1 (n+1) b_{n+1} + a0 b_n) / ((n+2)(n+1)). Used when the
// spectral radius times t is at most one, where it converges quickly and
// carries no cancellation.
inline double hold_step_series(double a1, double a0, double t) {
  double c_prev = 0.0;  // b_n t^n, n = 0
  double c_curr = t;    // n = 1
  double sum = c_curr / 2.0;
  for (int n = 0; n < 80; ++n) {
    const double c_next =
        -(a1 * t * (n + 1) * c_curr + a0 * t * t * c_prev) / (static_cast<double>(n + 2) * (n + 1));
    const double term = c_next / (n + 3);
    sum += term;
    c_prev = c_curr;
    c_curr = c_next;
    if (n > 2 && std::abs(term) <= 1e-18 * std::abs(sum) && std::abs(c_prev) <= 1e-18 * t) break;
  }
  return t * sum;
}

// g1 near a repeated pole: sinh(h tau)/h = sum_k d^k tau^{2k+1}/(2k+1)!, so
// g1 = sum_k d^k / (2k+1)! * int_0^t e^{m tau} tau^{2k+1} d tau. The moment
// integrals use the upward recursion I_n = (e^x - n I_{n-1}) / x, which is
// well conditioned here because |m t| is close to or above one.
inline double hold_step_near_repeated(double m, double d, double t) {
  const double x = m * t;
  std::array<double, 6> moments{};  // I_n = int_0^1 s^n e^{x s} ds
  const double ex = std::exp(x);
  moments[0] = std::expm1(x) / x;
  for (int n = 1; n < 6; ++n) moments[n] = (ex - n * moments[n - 1]) / x;
  const double dt2 = d * t * t;
  // t^{2k+2} * I_{2k+1} / (2k+1)! * d^k
  return t * t * (moments[1] + dt2 * moments[3] / 6.0 + dt2 * dt2 * moments[5] / 120.0);
}

inline HoldFunctions hold_functions(double a1, double a0, double t) {
  const double m = -0.5 * a1;
  const double d = m * m - a0;
  HoldFunctions h;

  double ch = 0.0;  // e^{mt} cosh(sqrt(d) t), or its cos / repeated analogue
  double sh = 0.0;  // e^{mt} sinh(sqrt(d) t) / sqrt(d)
  if (d > 0.0) {
    const double root = std::sqrt(d);
    const double e_fast = std::exp((m + root) * t);
    const double e_slow = std::exp((m - root) * t);
    ch = 0.5 * (e_fast + e_slow);
    sh = -e_fast * std::expm1(-2.0 * root * t) / (2.0 * root);
  } else if (d < 0.0) {
    const double w = std::sqrt(-d);
    const double em = std::exp(m * t);
    ch = em * std::cos(w * t);
    sh = em * std::sin(w * t) / w;
  } else {
    const double em = std::exp(m * t);
    ch = em;
    sh = em * t;
  }
  h.f1 = sh;
  h.f0 = ch - m * sh;
  h.f1_dot = ch + m * sh;

  const double root_abs = std::sqrt(std::abs(d));
  const double radius_t = (std::abs(m) + root_abs) * t;
  if (radius_t <= 1.0) {
    h.g1 = hold_step_series(a1, a0, t);
  } else if (std::abs(d) * t * t < 1e-4) {
    h.g1 = hold_step_near_repeated(m, d, t);
  } else if (d > 0.0) {
    // Divided difference of (e^{pt} - 1)/p over the two real poles.
    h.g1 = (expm1_over(m + root_abs, t) - expm1_over(m - root_abs, t)) / (2.0 * root_abs);
  } else {
    // Im[(e^{pt} - 1)/p] / w for p = m + i w.
    const double w = root_abs;
    const double wt = w * t;
    const double s_half = std::sin(0.5 * wt);
    const double re = std::expm1(m * t) * std::cos(wt) - 2.0 * s_half * s_half;
    const double im = std::exp(m * t) * std::sin(wt);
    h.g1 = (im * m - re * w) / ((m * m + w * w) * w);
  }
  return h;
}

}  // namespace detail

/// Exact ZOH discretization in closed form.
inline DiscreteModel discretize_zoh(const SecondOrderTf& tf, double dt) {
  if (!std::isfinite(dt) || dt <= 0.0) {
    throw Error(ErrorCode::InvalidSamplePeriod, "sample period must be finite and > 0");
  }
  const double a1 = tf.damping_coeff();
  const double a0 = tf.stiffness_coeff();
  const double k = tf.gain();
  const auto h = detail::hold_functions(a1, a0, dt);

  DiscreteModel dm;
  dm.sample_period = dt;
  dm.state_transition = {{{h.f0, h.f1}, {-a0 * h.f1, h.f1_dot}}};
  dm.input_matrix = {k * h.g1, k * h.f1};
  dm.output_row = {1.0, 0.0};
  return dm;
}

struct SimulationResult {
  TimeSeries yaw;
  TimeSeries yaw_rate;
};

namespace detail {

inline double observe(const DiscreteModel& dm, const Vector2& x) {
  return dm.output_row[0] * x[0] + dm.output_row[1] * x[1];
}

// Unchecked core shared by simulate() and the estimator's inner loop.
// Sample k is the state after input k has been held for one period.
inline void simulate_into(const DiscreteModel& dm, std::span<const double> input, SimState initial,
                          std::span<double> yaw, std::span<double> rate) {
  const auto& a = dm.state_transition;
  const auto& b = dm.input_matrix;
  double x0 = initial.yaw;
  double x1 = initial.yaw_rate;
  for (std::size_t k = 0; k < input.size(); ++k) {
    const double n0 = a[0][0] * x0 + a[0][1] * x1 + b[0] * input[k];
    const double n1 = a[1][0] * x0 + a[1][1] * x1 + b[1] * input[k];
    x0 = n0;
    x1 = n1;
    yaw[k] = observe(dm, {x0, x1});
    if (!rate.empty()) rate[k] = x1;
  }
}

}  // namespace detail

/// Runs the discrete recursion over every input sample. The yaw trace is
/// observed through output_row; the rate trace is the second state.
inline SimulationResult simulate(const DiscreteModel& dm, const TimeSeries& input,
                                 SimState initial = {}) {
  if (input.sample_period() != dm.sample_period) {
    throw Error(ErrorCode::SampleRateMismatch,
                "input sample period " + std::to_string(input.sample_period()) +
                    " differs from model sample period " + std::to_string(dm.sample_period));
  }
  std::vector<double> yaw(input.size());
  std::vector<double> rate(input.size());
  detail::simulate_into(dm, input.values(), initial, yaw, rate);
  return {TimeSeries(dm.sample_period, std::move(yaw)),
          TimeSeries(dm.sample_period, std::move(rate))};
}

/// Zero-state response to a step of the given amplitude applied at t = 0.
inline TimeSeries step_response(const SecondOrderTf& tf, double amplitude, double duration,
                                double dt) {
  if (!std::isfinite(dt) || dt <= 0.0) {
    throw Error(ErrorCode::InvalidSamplePeriod, "sample period must be finite and > 0");
  }
  if (!std::isfinite(duration) || duration <= dt) {
    throw Error(ErrorCode::InvalidParams, "step duration must exceed the sample period");
  }
  if (!std::isfinite(amplitude)) {
    throw Error(ErrorCode::InvalidParams, "step amplitude must be finite");
  }
  const auto n = static_cast<std::size_t>(std::floor(duration / dt + 1e-9));
  const TimeSeries input(dt, std::vector<double>(n, amplitude));
  return simulate(discretize_zoh(tf, dt), input).yaw;
}

}  // namespace usvyaw
