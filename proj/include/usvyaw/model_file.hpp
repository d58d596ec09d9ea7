#pragma once

// Identified-model text file:
//
//   # comment
//   K=<value>
//   a1=<value>
//   a0=<value>
//   dt_identified=<value>        optional on read
//   fit_train_percent=<value>    optional on read

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>

#include "usvyaw/error.hpp"
#include "usvyaw/format.hpp"
#include "usvyaw/model.hpp"

namespace usvyaw {

struct ModelFile {
  SecondOrderTf model;
  std::optional<double> dt_identified;
  std::optional<double> fit_train_percent;
};

inline void write_model_file(const ModelFile& mf, std::ostream& out) {
  out << "# yaw model psi(s)/u(s) = K / (s^2 + a1 s + a0)\n";
  out << "K=" << format_roundtrip(mf.model.gain()) << '\n';
  out << "a1=" << format_roundtrip(mf.model.damping_coeff()) << '\n';
  out << "a0=" << format_roundtrip(mf.model.stiffness_coeff()) << '\n';
  if (mf.dt_identified) out << "dt_identified=" << format_roundtrip(*mf.dt_identified) << '\n';
  if (mf.fit_train_percent) {
    out << "fit_train_percent=" << format_roundtrip(*mf.fit_train_percent) << '\n';
  }
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failure");
}

inline ModelFile read_model_file(std::istream& in) {
  std::optional<double> k, a1, a0, dt, fit;
  std::string raw;
  std::size_t row = 0;
  while (std::getline(in, raw)) {
    ++row;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(row, 0, "expected key=value");
    const auto key = trim(line.substr(0, eq));
    const auto value = parse_double(line.substr(eq + 1));
    if (!value || !std::isfinite(*value)) {
      throw ParseError(row, eq + 2, "value of '" + std::string(key) + "' is not a finite number");
    }
    if (key == "K") k = value;
    else if (key == "a1") a1 = value;
    else if (key == "a0") a0 = value;
    else if (key == "dt_identified") dt = value;
    else if (key == "fit_train_percent") fit = value;
    else throw ParseError(row, 1, "unknown key '" + std::string(key) + "'");
  }
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failure");
  if (!k || !a1 || !a0) throw ParseError(row, 0, "model file needs K, a1 and a0");
  if (*k == 0.0) throw ParseError(row, 0, "K must be non-zero");
  return ModelFile{SecondOrderTf(*k, *a1, *a0), dt, fit};
}

}  // namespace usvyaw
