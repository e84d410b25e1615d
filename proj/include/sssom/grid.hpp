#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "sssom/cell.hpp"
#include "sssom/core.hpp"
#include "sssom/ingest.hpp"

namespace sssom {

struct CellCounts {
  std::uint64_t total = 0;
  std::uint64_t positive = 0;
  std::optional<std::uint64_t> users_total;
  std::optional<std::uint64_t> users_positive;

  bool operator==(const CellCounts&) const = default;
};

// Which counts a field's proportions are computed from.
enum class CountBasis { posts, users };

// Occupied cells only, keyed in row-major order.
struct GridField {
  int d = 3;
  CountBasis basis = CountBasis::posts;
  std::map<CellKey, CellCounts> cells;

  std::size_t occupied() const { return cells.size(); }
  bool empty() const { return cells.empty(); }

  double proportion(const CellCounts& c) const {
    if (basis == CountBasis::users) {
      return static_cast<double>(c.users_positive.value_or(0)) /
             static_cast<double>(c.users_total.value_or(1));
    }
    return static_cast<double>(c.positive) / static_cast<double>(c.total);
  }

  double proportion(const CellKey& key) const { return proportion(cells.at(key)); }

  std::uint64_t total_posts() const {
    std::uint64_t n = 0;
    for (const auto& [key, c] : cells) n += c.total;
    return n;
  }

  bool operator==(const GridField&) const = default;
};

inline void validate_field(const GridField& field) {
  for (const auto& [key, c] : field.cells) {
    if (key.d != field.d) fail(ErrorKind::invariant, "cell " + to_string(key) + " has the wrong precision");
    if (c.total < 1) fail(ErrorKind::invariant, "cell " + to_string(key) + " is stored with zero posts");
    if (c.positive > c.total) fail(ErrorKind::invariant, "cell " + to_string(key) + " has positive > total");
    if (c.users_total && c.users_positive && *c.users_positive > *c.users_total) {
      fail(ErrorKind::invariant, "cell " + to_string(key) + " has users_positive > users_total");
    }
  }
}

namespace detail {

inline std::string list_ids(const std::vector<std::string>& ids) {
  std::string out;
  const std::size_t shown = std::min<std::size_t>(ids.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) {
    if (i) out += ",";
    out += ids[i];
  }
  if (ids.size() > shown) out += ",... (" + std::to_string(ids.size()) + " total)";
  return out;
}

}  // namespace detail

// Counts posts per occupied cell at precision d. When a boundary is given,
// cells whose center lies outside it are dropped.
inline GridField bin_posts(const std::vector<GeoPost>& posts, int d,
                           const BoundarySet* boundary = nullptr) {
  require(d >= kMinPrecision && d <= kMaxPrecision, "precision must be in [1,7]");
  std::vector<std::string> unlabeled;
  for (const auto& p : posts) {
    if (!p.label) unlabeled.push_back(p.id);
  }
  if (!unlabeled.empty()) {
    fail(ErrorKind::invariant, "unlabeled posts: " + detail::list_ids(unlabeled));
  }
  GridField field;
  field.d = d;
  for (const auto& p : posts) {
    auto& c = field.cells[cell_key(p.lat, p.lon, d)];
    ++c.total;
    if (*p.label == Label::positive) ++c.positive;
  }
  if (boundary) {
    std::erase_if(field.cells, [&](const auto& entry) {
      return !point_in_boundary(entry.first.center_lat(), entry.first.center_lon(), *boundary);
    });
  }
  return field;
}

// Proportions over distinct users: users_positive counts users with at least
// one positive post in the cell.
inline GridField user_centric_field(const std::vector<GeoPost>& posts, int d) {
  std::vector<std::string> missing;
  for (const auto& p : posts) {
    if (!p.user_id) missing.push_back(p.id);
  }
  if (!missing.empty()) fail(ErrorKind::invariant, "posts without user_id: " + detail::list_ids(missing));

  GridField field = bin_posts(posts, d);
  field.basis = CountBasis::users;
  std::map<CellKey, std::map<std::string, bool>> users;
  for (const auto& p : posts) {
    bool& positive = users[cell_key(p.lat, p.lon, d)][*p.user_id];
    positive = positive || *p.label == Label::positive;
  }
  for (auto& [key, c] : field.cells) {
    const auto& per_user = users.at(key);
    c.users_total = per_user.size();
    std::uint64_t pos = 0;
    for (const auto& [user, positive] : per_user) pos += positive ? 1 : 0;
    c.users_positive = pos;
  }
  return field;
}

// Sample Pearson correlation of proportions over the cells both fields share.
inline double pearson(const GridField& a, const GridField& b) {
  std::vector<double> xs, ys;
  for (const auto& [key, ca] : a.cells) {
    auto it = b.cells.find(key);
    if (it == b.cells.end()) continue;
    xs.push_back(a.proportion(ca));
    ys.push_back(b.proportion(it->second));
  }
  if (xs.size() < 2) fail(ErrorKind::undefined, "pearson needs at least 2 common cells");
  const double mx = mean(xs), my = mean(ys);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) fail(ErrorKind::undefined, "pearson is undefined for a constant series");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

// Welch's unequal-variance two-sample t-test.
inline WelchResult welch_ttest(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() >= 2 && b.size() >= 2, "welch t-test needs at least 2 values per sample");
  const double ma = mean(a), mb = mean(b);
  const double va = sample_sd(a) * sample_sd(a), vb = sample_sd(b) * sample_sd(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double se2 = va / na + vb / nb;
  WelchResult r;
  if (se2 == 0.0) {
    r.df = na + nb - 2.0;
    if (ma == mb) return r;
    r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
  boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.p = std::clamp(r.p, 0.0, 1.0);
  return r;
}

struct MonthPairTest {
  std::pair<int, int> month_a;  // (year, month), UTC
  std::pair<int, int> month_b;
  WelchResult result;
};

struct MonthlyTestReport {
  std::vector<MonthPairTest> pairs;
  std::vector<std::string> warnings;
};

// Welch t-test on cell proportions between each pair of consecutive months
// present in the data.
inline MonthlyTestReport monthly_ttest(const std::vector<GeoPost>& posts, int d) {
  std::map<std::pair<int, int>, std::vector<GeoPost>> by_month;
  for (const auto& p : posts) by_month[utc_month(p.timestamp)].push_back(p);

  MonthlyTestReport report;
  std::vector<std::pair<std::pair<int, int>, std::vector<double>>> series;
  for (const auto& [month, month_posts] : by_month) {
    const GridField field = bin_posts(month_posts, d);
    std::vector<double> props;
    for (const auto& [key, c] : field.cells) props.push_back(field.proportion(c));
    series.emplace_back(month, std::move(props));
  }
  auto name = [](std::pair<int, int> m) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", m.first, m.second);
    return std::string(buf);
  };
  for (std::size_t i = 1; i < series.size(); ++i) {
    const auto& [ma, a] = series[i - 1];
    const auto& [mb, b] = series[i];
    if (a.size() < 2 || b.size() < 2) {
      report.warnings.push_back("skipped " + name(ma) + " vs " + name(mb) +
                                ": a month has fewer than 2 occupied cells");
      continue;
    }
    report.pairs.push_back({ma, mb, welch_ttest(a, b)});
  }
  return report;
}

// --- field export ----------------------------------------------------------
//
// CSV with header "lat_q,lon_q,d,total,positive", rows sorted by key. User
// centric fields append "users_total,users_positive".

inline std::string field_to_csv(const GridField& field) {
  const bool users = field.basis == CountBasis::users;
  std::string out = users ? "lat_q,lon_q,d,total,positive,users_total,users_positive\n"
                          : "lat_q,lon_q,d,total,positive\n";
  for (const auto& [key, c] : field.cells) {
    out += std::to_string(key.lat_q) + "," + std::to_string(key.lon_q) + "," + std::to_string(key.d) +
           "," + std::to_string(c.total) + "," + std::to_string(c.positive);
    if (users) {
      out += "," + std::to_string(c.users_total.value_or(0)) + "," +
             std::to_string(c.users_positive.value_or(0));
    }
    out += "\n";
  }
  return out;
}

inline GridField parse_field_csv(const std::vector<std::string>& lines) {
  if (lines.empty()) fail(ErrorKind::malformed_input, "field file is empty");
  const auto header = trim(lines[0]);
  bool users = false;
  if (header == "lat_q,lon_q,d,total,positive,users_total,users_positive") {
    users = true;
  } else if (header != "lat_q,lon_q,d,total,positive") {
    fail(ErrorKind::malformed_input, "line 1: unexpected field header");
  }
  GridField field;
  field.basis = users ? CountBasis::users : CountBasis::posts;
  std::optional<int> precision;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    const std::size_t want = users ? 7 : 5;
    if (cols.size() != want) detail::bad_field(i + 1, "record", "wrong field count");
    static constexpr const char* names[] = {"lat_q", "lon_q", "d", "total", "positive",
                                            "users_total", "users_positive"};
    std::vector<std::int64_t> v;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      auto x = parse_int<std::int64_t>(cols[c]);
      if (!x) detail::bad_field(i + 1, names[c], "is not an integer");
      v.push_back(*x);
    }
    const int d = static_cast<int>(v[2]);
    if (d < kMinPrecision || d > kMaxPrecision) detail::bad_field(i + 1, "d", "out of range");
    if (precision && *precision != d) detail::bad_field(i + 1, "d", "differs from earlier rows");
    precision = d;
    if (v[3] < 0 || v[4] < 0) detail::bad_field(i + 1, "total", "is negative");
    CellCounts c{static_cast<std::uint64_t>(v[3]), static_cast<std::uint64_t>(v[4]), {}, {}};
    if (users) {
      c.users_total = static_cast<std::uint64_t>(v[5]);
      c.users_positive = static_cast<std::uint64_t>(v[6]);
    }
    const CellKey key{v[0], v[1], d};
    if (!field.cells.emplace(key, c).second) detail::bad_field(i + 1, "lat_q", "duplicate cell");
  }
  field.d = precision.value_or(3);
  validate_field(field);
  return field;
}

inline GridField load_field(const std::filesystem::path& path) {
  return parse_field_csv(read_lines(path));
}

}  // namespace sssom
