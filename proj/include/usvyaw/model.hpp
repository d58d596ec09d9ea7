#pragma once

// Continuous-time yaw dynamics of a twin-thruster surface vehicle.
//
//   I_z * dr/dt + b_y * r = 2 * l * a_t * u,    r = dpsi/dt
//
// and its transfer-function form psi(s)/u(s) = K / (s^2 + a1*s + a0).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <string>
#include <string_view>

#include "usvyaw/error.hpp"

namespace usvyaw {

/// Whether a non-positive thrust coefficient is accepted. Reversed or
/// mis-wired thrusters show up as a negative coefficient; that is only
/// allowed when asked for.
enum class ThrustSign { positive_only, any };

/// Physical plant coefficients. All values SI, PWM input dimensionless.
class PhysicalParams {
 public:
  PhysicalParams(double inertia_z, double drag_coeff, double thrust_coeff, double moment_arm,
                 ThrustSign thrust_sign = ThrustSign::positive_only)
      : inertia_z_(inertia_z),
        drag_coeff_(drag_coeff),
        thrust_coeff_(thrust_coeff),
        moment_arm_(moment_arm) {
    if (!std::isfinite(inertia_z) || inertia_z <= 0.0) {
      throw Error(ErrorCode::InvalidParams, "inertia_z must be finite and > 0");
    }
    if (!std::isfinite(moment_arm) || moment_arm <= 0.0) {
      throw Error(ErrorCode::InvalidParams, "moment_arm must be finite and > 0");
    }
    if (!std::isfinite(drag_coeff) || drag_coeff < 0.0) {
      throw Error(ErrorCode::InvalidParams, "drag_coeff must be finite and >= 0");
    }
    if (!std::isfinite(thrust_coeff)) {
      throw Error(ErrorCode::InvalidParams, "thrust_coeff must be finite");
    }
    if (thrust_sign == ThrustSign::positive_only && thrust_coeff <= 0.0) {
      throw Error(ErrorCode::InvalidParams, "thrust_coeff must be > 0");
    }
    if (thrust_coeff == 0.0) {
      throw Error(ErrorCode::InvalidParams, "thrust_coeff must be non-zero");
    }
  }

  double inertia_z() const noexcept { return inertia_z_; }
  double drag_coeff() const noexcept { return drag_coeff_; }
  double thrust_coeff() const noexcept { return thrust_coeff_; }
  double moment_arm() const noexcept { return moment_arm_; }

 private:
  double inertia_z_;
  double drag_coeff_;
  double thrust_coeff_;
  double moment_arm_;
};

/// psi(s)/u(s) = gain / (s^2 + damping_coeff*s + stiffness_coeff).
///
/// Any finite denominator is representable so that unstable candidates can
/// be analysed; the estimator keeps its own iterates non-negative.
class SecondOrderTf {
 public:
  SecondOrderTf(double gain, double damping_coeff, double stiffness_coeff)
      : gain_(gain), damping_coeff_(damping_coeff), stiffness_coeff_(stiffness_coeff) {
    if (!std::isfinite(gain) || !std::isfinite(damping_coeff) || !std::isfinite(stiffness_coeff)) {
      throw Error(ErrorCode::InvalidParams, "transfer function coefficients must be finite");
    }
    if (gain == 0.0) {
      throw Error(ErrorCode::InvalidParams, "transfer function gain must be non-zero");
    }
  }

  double gain() const noexcept { return gain_; }
  double damping_coeff() const noexcept { return damping_coeff_; }
  double stiffness_coeff() const noexcept { return stiffness_coeff_; }

  bool is_dissipative() const noexcept { return damping_coeff_ >= 0.0 && stiffness_coeff_ >= 0.0; }

  friend bool operator==(const SecondOrderTf&, const SecondOrderTf&) = default;

 private:
  double gain_;
  double damping_coeff_;
  double stiffness_coeff_;
};

/// Identified reference model 0.013 / (s^2 + 2.08 s + 0.46) from pool trials.
inline SecondOrderTf reference_model() { return SecondOrderTf(0.013, 2.08, 0.46); }

struct SimState {
  double yaw = 0.0;       // rad
  double yaw_rate = 0.0;  // rad/s

  friend bool operator==(const SimState&, const SimState&) = default;
};

struct Torque {
  double value = 0.0;  // N*m

  friend bool operator==(const Torque&, const Torque&) = default;
};

inline SecondOrderTf physical_to_tf(const PhysicalParams& p) {
  return SecondOrderTf(2.0 * p.moment_arm() * p.thrust_coeff() / p.inertia_z(),
                       p.drag_coeff() / p.inertia_z(), 0.0);
}

inline Torque applied_torque(const PhysicalParams& p, double input) {
  return Torque{2.0 * p.moment_arm() * p.thrust_coeff() * input};
}

inline Torque drag_torque(const PhysicalParams& p, double rate) {
  return Torque{p.drag_coeff() * rate};
}

/// dr/dt under the given PWM input, rad/s^2.
inline double yaw_accel(const PhysicalParams& p, const SimState& state, double input) {
  return (applied_torque(p, input).value - drag_torque(p, state.yaw_rate).value) / p.inertia_z();
}

using PolePair = std::array<std::complex<double>, 2>;

/// Roots of s^2 + a1*s + a0, ordered by real part then imaginary part.
inline PolePair poles(const SecondOrderTf& tf) {
  const double a1 = tf.damping_coeff();
  const double a0 = tf.stiffness_coeff();
  const double half = 0.5 * a1;
  const double disc = half * half - a0;
  PolePair out;
  if (disc >= 0.0) {
    // Larger-magnitude root first, the other from the product of roots, to
    // avoid cancellation when a0 is small.
    const double big = -(half + std::copysign(std::sqrt(disc), half));
    const double small = big != 0.0 ? a0 / big : 0.0;
    out = {std::complex<double>(big, 0.0), std::complex<double>(small, 0.0)};
  } else {
    const double im = std::sqrt(-disc);
    out = {std::complex<double>(-half, -im), std::complex<double>(-half, im)};
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    return x.real() != y.real() ? x.real() < y.real() : x.imag() < y.imag();
  });
  return out;
}

enum class Stability { asymptotically_stable, marginally_stable, unstable };

constexpr std::string_view to_string(Stability s) noexcept {
  switch (s) {
    case Stability::asymptotically_stable: return "asymptotically stable";
    case Stability::marginally_stable: return "marginally stable";
    case Stability::unstable: return "unstable";
  }
  return "unknown";
}

/// Decided from the coefficients directly (Routh-Hurwitz for a monic
/// quadratic), so the origin and imaginary-axis cases are exact.
inline Stability is_stable(const SecondOrderTf& tf) {
  const double a1 = tf.damping_coeff();
  const double a0 = tf.stiffness_coeff();
  if (a1 > 0.0 && a0 > 0.0) return Stability::asymptotically_stable;
  // Simple pole at the origin, or a simple conjugate pair on the axis.
  if ((a1 > 0.0 && a0 == 0.0) || (a1 == 0.0 && a0 > 0.0)) return Stability::marginally_stable;
  return Stability::unstable;
}

/// Steady yaw angle per unit constant input, rad/PWM-unit.
inline double dc_gain(const SecondOrderTf& tf) {
  if (tf.stiffness_coeff() == 0.0) {
    throw Error(ErrorCode::IntegratorError,
                "a0 = 0: integrating plant, steady yaw angle is unbounded under constant input");
  }
  return tf.gain() / tf.stiffness_coeff();
}

/// 1/|Re p| of the pole closest to the imaginary axis; infinite for a pole
/// on the axis.
inline double dominant_time_constant(const SecondOrderTf& tf) {
  const auto p = poles(tf);
  const double slow = std::max(p[0].real(), p[1].real());
  return slow == 0.0 ? INFINITY : 1.0 / std::abs(slow);
}

}  // namespace usvyaw
