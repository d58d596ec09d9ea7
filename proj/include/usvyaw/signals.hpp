#pragma once

// Experiment data layer: square-wave excitation, the dataset CSV format,
// preprocessing and train/test splitting.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <numbers>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "usvyaw/error.hpp"
#include "usvyaw/format.hpp"
#include "usvyaw/sim.hpp"

namespace usvyaw {

/// Minimum number of samples per segment handed to the estimator.
inline constexpr std::size_t kMinEstimationSamples = 50;

/// Uniformly sampled (u, psi[, r]) experiment log.
class TimeSeriesDataset {
 public:
  TimeSeriesDataset(double time_origin, TimeSeries input_u, TimeSeries output_yaw,
                    std::optional<TimeSeries> output_rate = std::nullopt, std::string label = {})
      : time_origin_(time_origin),
        input_u_(std::move(input_u)),
        output_yaw_(std::move(output_yaw)),
        output_rate_(std::move(output_rate)),
        label_(trim(label)) {
    if (!std::isfinite(time_origin)) {
      throw Error(ErrorCode::NonFiniteValue, "time origin is not finite");
    }
    if (input_u_.size() != output_yaw_.size() ||
        (output_rate_ && output_rate_->size() != input_u_.size())) {
      throw Error(ErrorCode::LengthMismatch, "dataset channels differ in length");
    }
    if (input_u_.size() < 4) {
      throw Error(ErrorCode::TooFewSamples,
                  "dataset has " + std::to_string(input_u_.size()) + " samples, need >= 4");
    }
    if (input_u_.sample_period() != output_yaw_.sample_period() ||
        (output_rate_ && output_rate_->sample_period() != input_u_.sample_period())) {
      throw Error(ErrorCode::SampleRateMismatch, "dataset channels differ in sample period");
    }
    if (label_.find_first_of("\r\n") != std::string::npos) {
      throw Error(ErrorCode::InvalidParams, "dataset label must be a single line");
    }
  }

  double sample_period() const noexcept { return input_u_.sample_period(); }
  double time_origin() const noexcept { return time_origin_; }
  std::size_t size() const noexcept { return input_u_.size(); }
  const TimeSeries& input_u() const noexcept { return input_u_; }
  const TimeSeries& output_yaw() const noexcept { return output_yaw_; }
  const std::optional<TimeSeries>& output_rate() const noexcept { return output_rate_; }
  const std::string& label() const noexcept { return label_; }

  double time_at(std::size_t k) const noexcept {
    return time_origin_ + static_cast<double>(k) * sample_period();
  }

  friend bool operator==(const TimeSeriesDataset&, const TimeSeriesDataset&) = default;

 private:
  double time_origin_;
  TimeSeries input_u_;
  TimeSeries output_yaw_;
  std::optional<TimeSeries> output_rate_;
  std::string label_;
};

struct NoiseSpec {
  double std_dev = 0.0;  // rad
  std::uint64_t seed = 1;
};

// --------------------------------------------------------------------------
// Excitation

/// Square wave starting high: +amplitude while the fractional phase is below
/// duty, -amplitude otherwise. floor(duration/dt) samples.
inline TimeSeries square_wave(double amplitude, double period, double duration, double dt,
                              double duty = 0.5) {
  if (!std::isfinite(amplitude) || !std::isfinite(period) || !std::isfinite(duration) ||
      !std::isfinite(dt) || !std::isfinite(duty)) {
    throw Error(ErrorCode::InvalidWaveSpec, "wave parameters must be finite");
  }
  if (dt <= 0.0) throw Error(ErrorCode::InvalidWaveSpec, "dt must be > 0");
  if (period < 2.0 * dt) throw Error(ErrorCode::InvalidWaveSpec, "period must be >= 2*dt");
  if (duration < period) throw Error(ErrorCode::InvalidWaveSpec, "duration must be >= period");
  if (!(duty > 0.0 && duty < 1.0)) throw Error(ErrorCode::InvalidWaveSpec, "duty must be in (0,1)");

  // Phase boundaries that land exactly on a sample instant are resolved in
  // favour of the new half-cycle despite rounding in k*dt/period.
  constexpr double kPhaseSlack = 1e-9;
  const auto n = static_cast<std::size_t>(std::floor(duration / dt + kPhaseSlack));
  std::vector<double> values(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double cycles = static_cast<double>(k) * dt / period;
    const double frac = std::max(0.0, cycles - std::floor(cycles + kPhaseSlack));
    values[k] = frac < duty - kPhaseSlack ? amplitude : -amplitude;
  }
  return TimeSeries(dt, std::move(values));
}

// --------------------------------------------------------------------------
// CSV
//
//   # label: <text>            optional, before the header
//   # sample_period: <dt>      optional, before the header
//   t,u,psi[,r]
//   <t>,<u>,<psi>[,<r>]        one row per sample
//
// Without a sample_period comment the period is the median time delta.

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

inline std::optional<std::string_view> comment_value(std::string_view comment,
                                                     std::string_view key) {
  // comment excludes the leading '#'
  comment = trim(comment);
  if (comment.substr(0, key.size()) != key) return std::nullopt;
  comment.remove_prefix(key.size());
  comment = trim(comment);
  if (comment.empty() || comment.front() != ':') return std::nullopt;
  comment.remove_prefix(1);
  return trim(comment);
}

inline double median(std::vector<double> v) {
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  if (v.size() % 2 == 1) return v[mid];
  const double upper = v[mid];
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

}  // namespace detail

/// Relative deviation of any time delta from the median that is tolerated.
inline constexpr double kSamplingTolerance = 0.01;

inline TimeSeriesDataset load_dataset(std::istream& in) {
  std::string label;
  std::optional<double> declared_period;
  bool has_rate = false;
  bool header_seen = false;
  std::vector<double> t, u, psi, r;

  std::string raw;
  std::size_t row = 0;
  while (std::getline(in, raw)) {
    ++row;
    std::string_view line = raw;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (row == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") line.remove_prefix(3);
    if (trim(line).empty()) continue;
    if (line.front() == '#') {
      if (header_seen) continue;
      if (auto v = detail::comment_value(line.substr(1), "label")) {
        label = std::string(*v);
      } else if (auto p = detail::comment_value(line.substr(1), "sample_period")) {
        declared_period = parse_double(*p);
        if (!declared_period || !std::isfinite(*declared_period) || *declared_period <= 0.0) {
          throw ParseError(row, 0, "sample_period comment is not a positive number");
        }
      }
      continue;
    }
    if (!header_seen) {
      const auto cols = detail::split_fields(line);
      std::vector<std::string_view> names;
      for (auto c : cols) names.push_back(trim(c));
      const bool base = names.size() >= 3 && names[0] == "t" && names[1] == "u" && names[2] == "psi";
      if (base && names.size() == 3) {
        has_rate = false;
      } else if (base && names.size() == 4 && names[3] == "r") {
        has_rate = true;
      } else {
        throw ParseError(row, 0, "expected header 't,u,psi' or 't,u,psi,r'");
      }
      header_seen = true;
      continue;
    }
    const auto fields = detail::split_fields(line);
    const std::size_t expected = has_rate ? 4 : 3;
    if (fields.size() != expected) {
      throw ParseError(row, std::min(fields.size(), expected) + 1,
                       "expected " + std::to_string(expected) + " fields, found " +
                           std::to_string(fields.size()));
    }
    std::array<double, 4> vals{};
    for (std::size_t c = 0; c < expected; ++c) {
      const auto v = parse_double(fields[c]);
      if (!v) {
        throw ParseError(row, c + 1, "'" + std::string(trim(fields[c])) + "' is not a number");
      }
      if (!std::isfinite(*v)) {
        throw Error(ErrorCode::NonFiniteValue, "row " + std::to_string(row) + ", column " +
                                                   std::to_string(c + 1) + ": value is not finite");
      }
      vals[c] = *v;
    }
    t.push_back(vals[0]);
    u.push_back(vals[1]);
    psi.push_back(vals[2]);
    if (has_rate) r.push_back(vals[3]);
  }
  if (in.bad()) throw Error(ErrorCode::IoFailure, "read failure");
  if (!header_seen) throw ParseError(row, 0, "missing header line");
  if (t.size() < 4) {
    throw Error(ErrorCode::TooFewSamples,
                "dataset has " + std::to_string(t.size()) + " samples, need >= 4");
  }

  std::vector<double> deltas(t.size() - 1);
  for (std::size_t k = 1; k < t.size(); ++k) deltas[k - 1] = t[k] - t[k - 1];
  const double med = detail::median(deltas);
  if (!(med > 0.0)) throw Error(ErrorCode::NonUniformSampling, "time column is not increasing");
  for (std::size_t k = 0; k < deltas.size(); ++k) {
    if (std::abs(deltas[k] - med) > kSamplingTolerance * med) {
      throw Error(ErrorCode::NonUniformSampling,
                  "time step " + format_roundtrip(deltas[k]) + " before sample " +
                      std::to_string(k + 1) + " deviates more than 1% from median " +
                      format_roundtrip(med));
    }
  }
  double dt = med;
  if (declared_period) {
    if (std::abs(*declared_period - med) > kSamplingTolerance * med) {
      throw Error(ErrorCode::NonUniformSampling,
                  "declared sample_period disagrees with the time column");
    }
    dt = *declared_period;
  }

  std::optional<TimeSeries> rate;
  if (has_rate) rate = TimeSeries(dt, std::move(r));
  return TimeSeriesDataset(t.front(), TimeSeries(dt, std::move(u)), TimeSeries(dt, std::move(psi)),
                           std::move(rate), std::move(label));
}

inline void save_dataset(const TimeSeriesDataset& ds, std::ostream& out) {
  if (!ds.label().empty()) out << "# label: " << ds.label() << '\n';
  out << "# sample_period: " << format_roundtrip(ds.sample_period()) << '\n';
  const bool has_rate = ds.output_rate().has_value();
  out << (has_rate ? "t,u,psi,r\n" : "t,u,psi\n");
  for (std::size_t k = 0; k < ds.size(); ++k) {
    out << format_roundtrip(ds.time_at(k)) << ',' << format_roundtrip(ds.input_u()[k]) << ','
        << format_roundtrip(ds.output_yaw()[k]);
    if (has_rate) out << ',' << format_roundtrip((*ds.output_rate())[k]);
    out << '\n';
  }
  out.flush();
  if (!out) throw Error(ErrorCode::IoFailure, "write failure");
}

// --------------------------------------------------------------------------
// Preprocessing

/// Shifts yaw so the first sample is zero. Input and rate are untouched.
inline TimeSeriesDataset detrend(const TimeSeriesDataset& ds) {
  const auto yaw = ds.output_yaw().values();
  const double offset = yaw.front();
  std::vector<double> shifted(yaw.size());
  std::transform(yaw.begin(), yaw.end(), shifted.begin(), [&](double v) { return v - offset; });
  return TimeSeriesDataset(ds.time_origin(), ds.input_u(),
                           TimeSeries(ds.sample_period(), std::move(shifted)), ds.output_rate(),
                           ds.label());
}

namespace detail {

inline TimeSeries slice(const TimeSeries& ts, std::size_t begin, std::size_t end) {
  const auto v = ts.values();
  return TimeSeries(ts.sample_period(), std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                                                            v.begin() + static_cast<std::ptrdiff_t>(end)));
}

inline TimeSeriesDataset slice(const TimeSeriesDataset& ds, std::size_t begin, std::size_t end) {
  std::optional<TimeSeries> rate;
  if (ds.output_rate()) rate = slice(*ds.output_rate(), begin, end);
  return TimeSeriesDataset(ds.time_at(begin), slice(ds.input_u(), begin, end),
                           slice(ds.output_yaw(), begin, end), std::move(rate), ds.label());
}

}  // namespace detail

/// Contiguous split at floor(N * train_fraction). No shuffling.
inline std::pair<TimeSeriesDataset, TimeSeriesDataset> split_dataset(const TimeSeriesDataset& ds,
                                                                     double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidParams, "train fraction must be in (0,1)");
  }
  const std::size_t n = ds.size();
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction));
  if (n_train < kMinEstimationSamples || n - n_train < kMinEstimationSamples) {
    throw Error(ErrorCode::SplitTooSmall, "split gives " + std::to_string(n_train) + "/" +
                                              std::to_string(n - n_train) +
                                              " samples, each part needs >= 50");
  }
  return {detail::slice(ds, 0, n_train), detail::slice(ds, n_train, n)};
}

/// Yaw rate by central differences, one-sided at the two ends.
inline TimeSeries differentiate_yaw(const TimeSeriesDataset& ds) {
  const auto y = ds.output_yaw().values();
  const double dt = ds.sample_period();
  const std::size_t n = y.size();
  std::vector<double> r(n);
  r.front() = (y[1] - y[0]) / dt;
  r.back() = (y[n - 1] - y[n - 2]) / dt;
  for (std::size_t k = 1; k + 1 < n; ++k) r[k] = (y[k + 1] - y[k - 1]) / (2.0 * dt);
  return TimeSeries(dt, std::move(r));
}

// --------------------------------------------------------------------------
// Noise

/// Standard normal deviates from std::mt19937_64 (whose output sequence is
/// fixed by the C++ standard) through the Box-Muller transform. Uniforms are
/// the top 53 bits of each draw mapped into (0, 1]. std::normal_distribution
/// is avoided because its algorithm is implementation-defined.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : engine_(seed) {}

  double next() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  double uniform() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline TimeSeries add_noise(const TimeSeries& ts, const NoiseSpec& spec) {
  if (!std::isfinite(spec.std_dev) || spec.std_dev < 0.0) {
    throw Error(ErrorCode::InvalidParams, "noise std_dev must be finite and >= 0");
  }
  if (spec.std_dev == 0.0) return ts;
  GaussianSource source(spec.seed);
  const auto v = ts.values();
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = v[k] + spec.std_dev * source.next();
  return TimeSeries(ts.sample_period(), std::move(out));
}

/// Population standard deviation, used to size relative noise levels.
inline double standard_deviation(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

}  // namespace usvyaw
