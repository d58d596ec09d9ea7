// Library walk-through: excite the reference yaw model, add sensor noise,
// identify it back and compare.

#include <iostream>

#include "usvyaw/usvyaw.hpp"

int main() {
  using namespace usvyaw;

  const auto plant = reference_model();
  const double dt = 0.05;
  const auto input = square_wave(50.0, 20.0, 200.0, dt);
  const auto clean = simulate(discretize_zoh(plant, dt), input);
  const auto noisy = add_noise(clean.yaw, {0.05 * standard_deviation(clean.yaw.values()), 7});

  const auto result = identify(TimeSeriesDataset(0.0, input, noisy, std::nullopt, "demo"));
  const auto& m = result.report.model;
  std::cout << "true:       K=0.013 a1=2.08 a0=0.46\n"
            << "identified: K=" << format_sig6(m.gain()) << " a1=" << format_sig6(m.damping_coeff())
            << " a0=" << format_sig6(m.stiffness_coeff()) << '\n'
            << "train fit " << format_sig6(result.report.training_fit_percent) << " %, validation fit "
            << format_sig6(result.validation_fit_percent) << " %\n";
}
