#pragma once

// Seeded synthetic corpora with planted ground-truth regions.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "sssom/core.hpp"
#include "sssom/grid.hpp"
#include "sssom/ingest.hpp"
#include "sssom/partition.hpp"

namespace sssom {

struct PlantedRegion {
  std::vector<std::pair<int, int>> cells;  // (row, col) in the extent
  double proportion = 0.0;
};

struct SyntheticSpec {
  int rows = 0;
  int cols = 0;
  std::vector<PlantedRegion> regions;
  int posts_per_cell = 10;
  std::uint64_t seed = 0;
  // Placement: row r, col c maps to cell (origin_lat_q + r, origin_lon_q + c).
  int precision = 3;
  std::int64_t origin_lat_q = 40700;
  std::int64_t origin_lon_q = -74000;
  // Timestamps are spread uniformly over [start, start + days).
  Timestamp start = Timestamp{std::chrono::milliseconds{1546300800000LL}};  // 2019-01-01
  int days = 90;
  int users = 0;  // 0 picks one user per 5 posts
};

struct SyntheticData {
  std::vector<GeoPost> posts;
  GridField field;
  Partition truth;  // cluster id = region index
};

// Integer round half away from zero.
inline std::uint64_t round_half_away(double x) {
  return static_cast<std::uint64_t>(std::floor(std::abs(x) + 0.5));
}

inline std::vector<PlantedRegion> quadrant_regions(int rows, int cols, const std::array<double, 4>& proportions) {
  std::vector<PlantedRegion> regions(4);
  for (int k = 0; k < 4; ++k) regions[k].proportion = proportions[k];
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int q = (r < rows / 2 ? 0 : 2) + (c < cols / 2 ? 0 : 1);
      regions[q].cells.emplace_back(r, c);
    }
  }
  return regions;
}

inline std::vector<PlantedRegion> halves_regions(int rows, int cols, double left, double right) {
  std::vector<PlantedRegion> regions(2);
  regions[0].proportion = left;
  regions[1].proportion = right;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) regions[c < cols / 2 ? 0 : 1].cells.emplace_back(r, c);
  }
  return regions;
}

inline void validate_synthetic_spec(const SyntheticSpec& spec) {
  require(spec.rows >= 1 && spec.cols >= 1, "synthetic extent must be at least 1x1");
  require(spec.posts_per_cell >= 1, "posts_per_cell must be positive");
  require(spec.precision >= kMinPrecision && spec.precision <= kMaxPrecision, "precision must be in [1,7]");
  require(spec.days >= 1, "days must be positive");
  std::vector<int> owner(static_cast<std::size_t>(spec.rows) * static_cast<std::size_t>(spec.cols), -1);
  for (std::size_t k = 0; k < spec.regions.size(); ++k) {
    const auto& region = spec.regions[k];
    if (!(region.proportion >= 0.0 && region.proportion <= 1.0)) {
      fail(ErrorKind::invalid_argument, "region " + std::to_string(k) + " proportion must be in [0,1]");
    }
    if (region.cells.empty()) fail(ErrorKind::invalid_argument, "region " + std::to_string(k) + " is empty");
    for (const auto& [r, c] : region.cells) {
      if (r < 0 || r >= spec.rows || c < 0 || c >= spec.cols) {
        fail(ErrorKind::invalid_argument, "region " + std::to_string(k) + " has a cell outside the extent");
      }
      int& o = owner[static_cast<std::size_t>(r) * spec.cols + c];
      if (o >= 0) fail(ErrorKind::invalid_argument, "regions overlap at cell (" + std::to_string(r) + "," + std::to_string(c) + ")");
      o = static_cast<int>(k);
    }
  }
  for (std::size_t i = 0; i < owner.size(); ++i) {
    if (owner[i] < 0) fail(ErrorKind::invalid_argument, "regions do not cover the extent");
  }
  // Queen connectivity of each region.
  for (std::size_t k = 0; k < spec.regions.size(); ++k) {
    const auto& cells = spec.regions[k].cells;
    std::set<std::pair<int, int>> remaining(cells.begin(), cells.end());
    std::vector<std::pair<int, int>> stack{cells.front()};
    remaining.erase(cells.front());
    while (!stack.empty()) {
      const auto [r, c] = stack.back();
      stack.pop_back();
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          auto it = remaining.find({r + dr, c + dc});
          if (it == remaining.end()) continue;
          stack.push_back(*it);
          remaining.erase(it);
        }
      }
    }
    if (!remaining.empty()) fail(ErrorKind::invalid_argument, "region " + std::to_string(k) + " is not connected");
  }
}

inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  validate_synthetic_spec(spec);
  static constexpr const char* kFiller[] = {"the", "train", "was", "late", "again", "coffee", "near",
                                            "park", "today", "my", "friend", "said", "we", "should",
                                            "go", "downtown", "weather", "is", "nice", "tonight"};
  constexpr std::size_t kFillerCount = sizeof(kFiller) / sizeof(kFiller[0]);

  std::vector<int> owner(static_cast<std::size_t>(spec.rows) * static_cast<std::size_t>(spec.cols));
  for (std::size_t k = 0; k < spec.regions.size(); ++k) {
    for (const auto& [r, c] : spec.regions[k].cells) owner[static_cast<std::size_t>(r) * spec.cols + c] = static_cast<int>(k);
  }

  Rng rng(derive_seed(spec.seed, 0x5E7));
  const std::uint64_t total_posts = static_cast<std::uint64_t>(spec.rows) * spec.cols * spec.posts_per_cell;
  const std::uint64_t users = spec.users > 0 ? static_cast<std::uint64_t>(spec.users) : std::max<std::uint64_t>(1, total_posts / 5);
  const double scale = static_cast<double>(pow10(spec.precision));
  const std::int64_t span_ms = static_cast<std::int64_t>(spec.days) * 86400000LL;

  SyntheticData data;
  data.posts.reserve(total_posts);
  std::map<CellKey, int> truth;
  std::uint64_t serial = 0;
  for (int r = 0; r < spec.rows; ++r) {
    for (int c = 0; c < spec.cols; ++c) {
      const int region = owner[static_cast<std::size_t>(r) * spec.cols + c];
      const CellKey key{spec.origin_lat_q + r, spec.origin_lon_q + c, spec.precision};
      truth.emplace(key, region);
      const std::uint64_t positives = round_half_away(spec.regions[region].proportion * spec.posts_per_cell);
      std::vector<bool> is_positive(static_cast<std::size_t>(spec.posts_per_cell), false);
      for (std::uint64_t k = 0; k < positives; ++k) is_positive[k] = true;
      rng.shuffle(is_positive);
      for (int k = 0; k < spec.posts_per_cell; ++k) {
        GeoPost p;
        p.id = "p" + std::to_string(serial++);
        p.user_id = "u" + std::to_string(rng.below(users));
        p.lat = (static_cast<double>(key.lat_q) + rng.uniform(-0.45, 0.45)) / scale;
        p.lon = (static_cast<double>(key.lon_q) + rng.uniform(-0.45, 0.45)) / scale;
        p.timestamp = spec.start + std::chrono::milliseconds{static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(span_ms)))};
        p.label = is_positive[k] ? Label::positive : Label::negative;
        std::string text;
        const std::size_t words = 3 + rng.below(6);
        const std::size_t marker_at = rng.below(words);
        for (std::size_t w = 0; w < words; ++w) {
          if (w) text += ' ';
          text += w == marker_at ? (is_positive[k] ? "zork" : "blee") : kFiller[rng.below(kFillerCount)];
        }
        p.text = std::move(text);
        data.posts.push_back(std::move(p));
      }
    }
  }
  data.field = bin_posts(data.posts, spec.precision);
  data.truth = make_partition(data.field, std::move(truth), true);
  return data;
}

// Four rectangles covering the extent, split after `split_row` rows and
// `split_col` columns: a district map that need not follow the planted regions.
inline BoundarySet split_boundaries(const SyntheticSpec& spec, int split_row, int split_col) {
  require(split_row > 0 && split_row < spec.rows && split_col > 0 && split_col < spec.cols,
          "split must fall strictly inside the extent");
  const double scale = static_cast<double>(pow10(spec.precision));
  auto lat = [&](int r) { return (static_cast<double>(spec.origin_lat_q + r) - 0.5) / scale; };
  auto lon = [&](int c) { return (static_cast<double>(spec.origin_lon_q + c) - 0.5) / scale; };
  BoundarySet set;
  set.polygons.push_back({"south_west", {rectangle_ring(lat(0), lon(0), lat(split_row), lon(split_col))}});
  set.polygons.push_back({"south_east", {rectangle_ring(lat(0), lon(split_col), lat(split_row), lon(spec.cols))}});
  set.polygons.push_back({"north_west", {rectangle_ring(lat(split_row), lon(0), lat(spec.rows), lon(split_col))}});
  set.polygons.push_back({"north_east", {rectangle_ring(lat(split_row), lon(split_col), lat(spec.rows), lon(spec.cols))}});
  return set;
}

// Lazy random walks over the extent: each person starts on a random cell and
// at every step stays or moves to a queen neighbour, one point per hour.
inline std::vector<TracePoint> generate_traces(const SyntheticSpec& spec, int persons, int points_per_person) {
  require(spec.rows > 0 && spec.cols > 0, "extent must be non-empty");
  require(persons >= 0 && points_per_person >= 1, "invalid trace counts");
  Rng rng(derive_seed(spec.seed, 0x7ACE));
  const double scale = static_cast<double>(pow10(spec.precision));
  std::vector<TracePoint> out;
  for (int i = 0; i < persons; ++i) {
    int r = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.rows)));
    int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.cols)));
    for (int k = 0; k < points_per_person; ++k) {
      TracePoint pt;
      pt.person_id = "person" + std::to_string(i);
      pt.lat = (static_cast<double>(spec.origin_lat_q + r) + rng.uniform(-0.45, 0.45)) / scale;
      pt.lon = (static_cast<double>(spec.origin_lon_q + c) + rng.uniform(-0.45, 0.45)) / scale;
      pt.timestamp = spec.start + std::chrono::hours{k};
      out.push_back(std::move(pt));
      r = std::clamp(r + static_cast<int>(rng.below(3)) - 1, 0, spec.rows - 1);
      c = std::clamp(c + static_cast<int>(rng.below(3)) - 1, 0, spec.cols - 1);
    }
  }
  return out;
}

}  // namespace sssom
