#pragma once

#include <algorithm>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <string>

#include "sssom/core.hpp"

namespace sssom {

inline constexpr int kMinPrecision = 1;
inline constexpr int kMaxPrecision = 7;

inline std::int64_t pow10(int d) {
  std::int64_t p = 1;
  for (int i = 0; i < d; ++i) p *= 10;
  return p;
}

// A grid cell at decimal precision d: all points whose coordinates round to
// (lat_q / 10^d, lon_q / 10^d). Ordering is row-major (latitude, then longitude).
struct CellKey {
  std::int64_t lat_q = 0;
  std::int64_t lon_q = 0;
  int d = 0;

  auto operator<=>(const CellKey&) const = default;

  double center_lat() const { return static_cast<double>(lat_q) / static_cast<double>(pow10(d)); }
  double center_lon() const { return static_cast<double>(lon_q) / static_cast<double>(pow10(d)); }
  double size() const { return 1.0 / static_cast<double>(pow10(d)); }
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.lat_q) * 0x9e3779b97f4a7c15ULL;
    h ^= static_cast<std::uint64_t>(k.lon_q) + 0x7f4a7c159e3779b9ULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.d) * 0xbf58476d1ce4e5b9ULL;
    return static_cast<std::size_t>(h);
  }
};

// Chebyshev (queen-move) distance in cell units.
inline std::int64_t chebyshev(const CellKey& a, const CellKey& b) {
  return std::max(std::abs(a.lat_q - b.lat_q), std::abs(a.lon_q - b.lon_q));
}

// Rounds the shortest decimal representation of `value` to d fractional
// digits, half away from zero, returning the scaled integer.
inline std::int64_t quantize(double value, int d) {
  require(d >= kMinPrecision && d <= kMaxPrecision, "precision must be in [1,7]");
  require(std::isfinite(value), "cannot quantize a non-finite coordinate");
  std::string text = format_double(value);
  bool negative = false;
  std::string_view digits(text);
  if (!digits.empty() && digits.front() == '-') {
    negative = true;
    digits.remove_prefix(1);
  }
  const std::size_t dot = digits.find('.');
  const std::string_view whole = digits.substr(0, dot);
  const std::string_view frac =
      dot == std::string_view::npos ? std::string_view{} : digits.substr(dot + 1);

  std::int64_t q = parse_int<std::int64_t>(whole).value_or(0);
  for (int i = 0; i < d; ++i) {
    const int digit = static_cast<std::size_t>(i) < frac.size() ? frac[i] - '0' : 0;
    q = q * 10 + digit;
  }
  if (frac.size() > static_cast<std::size_t>(d) && frac[d] >= '5') ++q;
  return negative ? -q : q;
}

inline CellKey cell_key(double lat, double lon, int d) {
  return CellKey{quantize(lat, d), quantize(lon, d), d};
}

inline std::string to_string(const CellKey& k) {
  return "(" + std::to_string(k.lat_q) + "," + std::to_string(k.lon_q) + ")@" + std::to_string(k.d);
}

}  // namespace sssom
