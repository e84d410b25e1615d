#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "sssom/sssom.hpp"

namespace fixtures {

using namespace sssom;

// Independent c2 oracle: enumerate every pair.
inline PairAgreement brute_force_c2(const std::map<CellKey, int>& a, const std::map<CellKey, int>& b) {
  std::vector<int> ya, yb;
  for (const auto& [k, id] : a) ya.push_back(id);
  for (const auto& [k, id] : b) yb.push_back(id);
  PairAgreement out;
  for (std::size_t i = 0; i < ya.size(); ++i) {
    for (std::size_t j = i + 1; j < ya.size(); ++j) {
      ++out.pairs;
      if ((ya[i] == ya[j]) == (yb[i] == yb[j])) ++out.agreements;
    }
  }
  return out;
}

// Independent rounding oracle on the decimal literal itself: round half away
// from zero to d fractional digits by digit-string carry.
inline std::int64_t round_decimal_literal(std::string s, int d) {
  bool negative = false;
  if (!s.empty() && s[0] == '-') {
    negative = true;
    s.erase(0, 1);
  }
  const auto dot = s.find('.');
  std::string whole = dot == std::string::npos ? s : s.substr(0, dot);
  std::string frac = dot == std::string::npos ? "" : s.substr(dot + 1);
  while (frac.size() < static_cast<std::size_t>(d) + 1) frac += '0';
  std::string digits = whole + frac.substr(0, d);
  if (frac[d] >= '5') {
    int i = static_cast<int>(digits.size()) - 1;
    while (i >= 0 && digits[i] == '9') digits[i--] = '0';
    if (i < 0) {
      digits.insert(digits.begin(), '1');
    } else {
      ++digits[i];
    }
  }
  const std::int64_t v = std::stoll(digits);
  return negative ? -v : v;
}

// Grid field from explicit (lat_q, lon_q, total, positive) rows.
struct CellRow {
  std::int64_t lat_q, lon_q;
  std::uint64_t total, positive;
};

inline GridField field_of(const std::vector<CellRow>& rows, int d = 3) {
  GridField f;
  f.d = d;
  for (const auto& r : rows) f.cells[CellKey{r.lat_q, r.lon_q, d}] = CellCounts{r.total, r.positive, {}, {}};
  return f;
}

inline std::map<CellKey, int> assignment_of(const std::vector<std::pair<CellRow, int>>& rows, int d = 3) {
  std::map<CellKey, int> out;
  for (const auto& [r, id] : rows) out[CellKey{r.lat_q, r.lon_q, d}] = id;
  return out;
}

// Two vertical halves with the given proportions.
inline SyntheticData two_region(int rows, int cols, double left, double right, int posts_per_cell, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.rows = rows;
  spec.cols = cols;
  spec.posts_per_cell = posts_per_cell;
  spec.seed = seed;
  spec.regions = halves_regions(rows, cols, left, right);
  return generate_synthetic(spec);
}

// The acceptance fixture: 60x60 cells, quadrants 0.02/0.10/0.30/0.50,
// 200 posts per cell, seed 42. Built once per process.
inline const SyntheticData& planted_fixture() {
  static const SyntheticData data = [] {
    SyntheticSpec spec;
    spec.rows = 60;
    spec.cols = 60;
    spec.posts_per_cell = 200;
    spec.seed = 42;
    spec.regions = quadrant_regions(60, 60, {0.02, 0.10, 0.30, 0.50});
    return generate_synthetic(spec);
  }();
  return data;
}

inline SyntheticSpec planted_spec() {
  SyntheticSpec spec;
  spec.rows = 60;
  spec.cols = 60;
  spec.posts_per_cell = 200;
  spec.seed = 42;
  spec.regions = quadrant_regions(60, 60, {0.02, 0.10, 0.30, 0.50});
  return spec;
}

// Separable corpus: positives carry "zork", negatives "blee", among filler.
inline std::vector<LabeledText> toy_corpus(int n, std::uint64_t seed) {
  static const std::vector<std::string> filler{"the", "a", "park", "street", "coffee", "train",
                                               "today", "friends", "night", "game", "rain", "city"};
  Rng rng(seed);
  std::vector<LabeledText> out;
  for (int i = 0; i < n; ++i) {
    const bool positive = i % 2 == 0;
    const std::size_t len = 4 + rng.below(5);
    const std::size_t at = rng.below(len);
    std::string text;
    for (std::size_t k = 0; k < len; ++k) {
      if (k) text += ' ';
      text += k == at ? (positive ? "zork" : "blee") : filler[rng.below(filler.size())];
    }
    out.push_back({text, positive ? Label::positive : Label::negative});
  }
  return out;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("sssom_test_" + tag + "_" + std::to_string(std::hash<std::string>{}(tag) ^ reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
