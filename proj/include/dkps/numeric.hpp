// SPDX-License-Identifier: Apache-2.0
//
// Small numeric helpers shared across modules. Summation is pairwise so
// aggregates do not depend on worker scheduling or accumulation order
// tricks; float formatting is shortest-round-trip so serialized output is
// byte-stable.

#pragma once

#include <charconv>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dkps/errors.hpp"

namespace dkps {

inline double clip01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Pairwise (cascade) summation over the given order.
inline double pairwise_sum(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n <= 8) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(values.subspan(0, half)) + pairwise_sum(values.subspan(half));
}

inline double stable_mean(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("stable_mean: empty input");
  return pairwise_sum(values) / static_cast<double>(values.size());
}

// Quantile with linear interpolation between order statistics.
// `sorted` must be ascending and nonempty; q in [0,1].
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InvalidArgument("quantile_sorted: empty input");
  if (q < 0.0 || q > 1.0) throw InvalidArgument("quantile_sorted: q outside [0,1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted[sorted.size() - 1];
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[lo + 1] - sorted[lo]) * frac;
}

inline double median_sorted(std::span<const double> sorted) {
  return quantile_sorted(sorted, 0.5);
}

// Shortest round-trip decimal representation.
inline std::string format_double(double value) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& what) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last)
    throw DatasetError("invalid number '" + std::string(text) + "' in " + what);
  return value;
}

inline long long parse_int(std::string_view text, const std::string& what) {
  long long value = 0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc{} || res.ptr != last)
    throw DatasetError("invalid integer '" + std::string(text) + "' in " + what);
  return value;
}

}  // namespace dkps
