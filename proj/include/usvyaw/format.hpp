#pragma once

// Number <-> text helpers shared by the file formats. Files use the
// shortest decimal string that parses back to the same double; console
// output uses six significant digits.

#include <array>
#include <charconv>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>

namespace usvyaw {

inline std::string format_roundtrip(double value) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), res.ptr);
}

inline std::string format_sig6(double value) {
  std::array<char, 32> buf{};
  const int n = std::snprintf(buf.data(), buf.size(), "%.6g", value);
  return std::string(buf.data(), static_cast<std::size_t>(n));
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

/// Parses the whole (trimmed) field as a double. Accepts the forms
/// std::from_chars accepts, including "nan" and "inf", so callers decide
/// about finiteness.
inline std::optional<double> parse_double(std::string_view field) {
  field = trim(field);
  if (field.empty()) return std::nullopt;
  if (field.front() == '+') field.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) return std::nullopt;
  return value;
}

}  // namespace usvyaw
