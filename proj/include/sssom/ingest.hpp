#pragma once

// Loading and validation of posts, boundary polygons and mobility traces.
//
// Posts file ("delimited" format), one record per line, tab separated:
//
//   id <TAB> user_id <TAB> lat <TAB> lon <TAB> timestamp <TAB> label <TAB> text
//
// user_id and label may be empty; label is "positive" or "negative". The text
// is everything after the sixth tab. Backslash escapes \\ \t \n \r are decoded
// in the text field, so a record never spans lines. A first line starting with
// "id<TAB>user_id" is treated as a header. Timestamps are RFC 3339.
//
// Posts file ("record-per-line" format): one JSON object per line with keys
// id, user_id, lat, lon, timestamp, label, score, text; user_id, label and
// score are optional.

#include <array>
#include <chrono>
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sssom/cell.hpp"
#include "sssom/core.hpp"

namespace sssom {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

enum class Label { negative, positive };

inline const char* to_string(Label label) {
  return label == Label::positive ? "positive" : "negative";
}

struct GeoPost {
  std::string id;
  std::optional<std::string> user_id;
  double lat = 0.0;
  double lon = 0.0;
  Timestamp timestamp{};
  std::string text;
  std::optional<Label> label;
  std::optional<double> score;

  bool operator==(const GeoPost&) const = default;
};

// --- timestamps -------------------------------------------------------------

namespace detail {

// Days since 1970-01-01 for a proleptic Gregorian date.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m > 2 ? m - 3 : m + 9) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

constexpr std::array<std::int64_t, 3> civil_from_days(std::int64_t z) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  const unsigned d = doy - (153 * mp + 2) / 5 + 1;
  const unsigned m = mp < 10 ? mp + 3 : mp - 9;
  return {y + (m <= 2), m, d};
}

inline bool digits_at(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

}  // namespace detail

// Parses "YYYY-MM-DDTHH:MM:SS[.fff][Z|+HH:MM|-HH:MM]" into UTC.
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  int year, month, day, hour, minute, second;
  if (!detail::digits_at(s, 0, 4, year) || s.size() < 19 || s[4] != '-' ||
      !detail::digits_at(s, 5, 2, month) || s[7] != '-' || !detail::digits_at(s, 8, 2, day) ||
      (s[10] != 'T' && s[10] != 't' && s[10] != ' ') || !detail::digits_at(s, 11, 2, hour) ||
      s[13] != ':' || !detail::digits_at(s, 14, 2, minute) || s[16] != ':' ||
      !detail::digits_at(s, 17, 2, second)) {
    return std::nullopt;
  }
  const std::chrono::year_month_day date{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                                         std::chrono::day{static_cast<unsigned>(day)}};
  if (!date.ok() || hour > 23 || minute > 59 || second > 60) return std::nullopt;
  std::size_t pos = 19;
  std::int64_t millis = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    int scale = 100;
    const std::size_t start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      millis += (s[pos] - '0') * scale;
      scale /= 10;
      ++pos;
    }
    if (pos == start) return std::nullopt;
  }
  std::int64_t offset_minutes = 0;
  if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
    ++pos;
  } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
    int oh, om;
    if (!detail::digits_at(s, pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
        !detail::digits_at(s, pos + 4, 2, om)) {
      return std::nullopt;
    }
    offset_minutes = (oh * 60 + om) * (s[pos] == '-' ? -1 : 1);
    pos += 6;
  } else {
    return std::nullopt;
  }
  if (pos != s.size()) return std::nullopt;

  const std::int64_t days = detail::days_from_civil(year, static_cast<unsigned>(month),
                                                    static_cast<unsigned>(day));
  const std::int64_t secs = days * 86400 + hour * 3600 + minute * 60 + second - offset_minutes * 60;
  return Timestamp{std::chrono::milliseconds{secs * 1000 + millis}};
}

// UTC, with milliseconds only when nonzero.
inline std::string format_timestamp(Timestamp ts) {
  const std::int64_t total_ms = ts.time_since_epoch().count();
  std::int64_t secs = total_ms / 1000;
  std::int64_t ms = total_ms % 1000;
  if (ms < 0) {
    ms += 1000;
    --secs;
  }
  std::int64_t days = secs / 86400;
  std::int64_t rem = secs % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  const auto ymd = detail::civil_from_days(days);
  char buf[160];
  if (ms != 0) {
    std::snprintf(buf, sizeof(buf), "%04lld-%02lld-%02lldT%02lld:%02lld:%02lld.%03lldZ",
                  static_cast<long long>(ymd[0]), static_cast<long long>(ymd[1]),
                  static_cast<long long>(ymd[2]), static_cast<long long>(rem / 3600),
                  static_cast<long long>(rem / 60 % 60), static_cast<long long>(rem % 60),
                  static_cast<long long>(ms));
  } else {
    std::snprintf(buf, sizeof(buf), "%04lld-%02lld-%02lldT%02lld:%02lld:%02lldZ",
                  static_cast<long long>(ymd[0]), static_cast<long long>(ymd[1]),
                  static_cast<long long>(ymd[2]), static_cast<long long>(rem / 3600),
                  static_cast<long long>(rem / 60 % 60), static_cast<long long>(rem % 60));
  }
  return buf;
}

// (year, month) of a UTC instant.
inline std::pair<int, int> utc_month(Timestamp ts) {
  const std::int64_t ms = ts.time_since_epoch().count();
  std::int64_t days = ms / 86400000;
  if (ms % 86400000 < 0) --days;
  const auto ymd = detail::civil_from_days(days);
  return {static_cast<int>(ymd[0]), static_cast<int>(ymd[1])};
}

// --- posts -----------------------------------------------------------------

enum class PostFormat { delimited, record_per_line };

// strict: any out-of-range coordinate fails the whole load.
// lenient: out-of-range rows are dropped and counted.
enum class LoadPolicy { strict, lenient };

struct PostLoad {
  std::vector<GeoPost> posts;
  std::size_t rejected_rows = 0;
};

namespace detail {

inline std::string escape_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string unescape_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\\' && i + 1 < text.size()) {
      const char n = text[i + 1];
      if (n == '\\' || n == 't' || n == 'n' || n == 'r') {
        out += n == '\\' ? '\\' : n == 't' ? '\t' : n == 'n' ? '\n' : '\r';
        ++i;
        continue;
      }
    }
    out += text[i];
  }
  return out;
}

[[noreturn]] inline void bad_field(std::size_t line, std::string_view field, std::string_view why) {
  fail(ErrorKind::malformed_input,
       "line " + std::to_string(line) + ": field '" + std::string(field) + "' " + std::string(why));
}

inline std::optional<Label> parse_label(std::string_view text, std::size_t line) {
  if (text.empty()) return std::nullopt;
  if (text == "positive") return Label::positive;
  if (text == "negative") return Label::negative;
  bad_field(line, "label", "must be 'positive', 'negative' or empty");
}

struct RangeIssue {
  std::size_t line;
  std::string field;
};

inline std::optional<RangeIssue> check_ranges(const GeoPost& p, std::size_t line) {
  if (!(p.lat >= -90.0 && p.lat <= 90.0)) return RangeIssue{line, "lat"};
  if (!(p.lon >= -180.0 && p.lon <= 180.0)) return RangeIssue{line, "lon"};
  if (p.score && !(*p.score >= 0.0 && *p.score <= 1.0)) return RangeIssue{line, "score"};
  return std::nullopt;
}

inline GeoPost parse_delimited_post(std::string_view line, std::size_t lineno) {
  std::array<std::string_view, 6> head;
  std::size_t start = 0;
  for (std::size_t i = 0; i < head.size(); ++i) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      static constexpr std::array<const char*, 7> names{"id", "user_id", "lat", "lon",
                                                        "timestamp", "label", "text"};
      bad_field(lineno, names[i + 1], "missing");
    }
    head[i] = line.substr(start, tab - start);
    start = tab + 1;
  }
  GeoPost p;
  if (head[0].empty()) bad_field(lineno, "id", "is empty");
  p.id = std::string(head[0]);
  if (!head[1].empty()) p.user_id = std::string(head[1]);
  const auto lat = parse_double(head[2]);
  if (!lat) bad_field(lineno, "lat", "is not a number");
  const auto lon = parse_double(head[3]);
  if (!lon) bad_field(lineno, "lon", "is not a number");
  p.lat = *lat;
  p.lon = *lon;
  const auto ts = parse_timestamp(head[4]);
  if (!ts) bad_field(lineno, "timestamp", "is not RFC 3339");
  p.timestamp = *ts;
  p.label = parse_label(head[5], lineno);
  p.text = unescape_text(line.substr(start));
  return p;
}

inline GeoPost parse_json_post(std::string_view line, std::size_t lineno) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    bad_field(lineno, "record", "is not valid JSON");
  }
  if (!j.is_object()) bad_field(lineno, "record", "is not a JSON object");
  GeoPost p;
  auto string_field = [&](const char* name, bool required) -> std::optional<std::string> {
    auto it = j.find(name);
    if (it == j.end() || it->is_null()) {
      if (required) bad_field(lineno, name, "missing");
      return std::nullopt;
    }
    if (!it->is_string()) bad_field(lineno, name, "must be a string");
    return it->get<std::string>();
  };
  auto number_field = [&](const char* name, bool required) -> std::optional<double> {
    auto it = j.find(name);
    if (it == j.end() || it->is_null()) {
      if (required) bad_field(lineno, name, "missing");
      return std::nullopt;
    }
    if (!it->is_number()) bad_field(lineno, name, "is not a number");
    return it->get<double>();
  };
  p.id = *string_field("id", true);
  if (p.id.empty()) bad_field(lineno, "id", "is empty");
  p.user_id = string_field("user_id", false);
  if (p.user_id && p.user_id->empty()) p.user_id.reset();
  p.lat = *number_field("lat", true);
  p.lon = *number_field("lon", true);
  const auto ts = parse_timestamp(*string_field("timestamp", true));
  if (!ts) bad_field(lineno, "timestamp", "is not RFC 3339");
  p.timestamp = *ts;
  p.text = *string_field("text", true);
  if (auto label = string_field("label", false)) p.label = parse_label(*label, lineno);
  p.score = number_field("score", false);
  return p;
}

}  // namespace detail

inline PostLoad load_posts(const std::filesystem::path& path, PostFormat format,
                           LoadPolicy policy = LoadPolicy::strict) {
  const auto lines = read_lines(path);
  PostLoad out;
  std::optional<detail::RangeIssue> first_issue;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    const std::string& line = lines[i];
    if (line.empty()) continue;
    if (i == 0 && format == PostFormat::delimited && line.rfind("id\tuser_id", 0) == 0) continue;
    GeoPost post = format == PostFormat::delimited ? detail::parse_delimited_post(line, lineno)
                                                   : detail::parse_json_post(line, lineno);
    if (auto issue = detail::check_ranges(post, lineno)) {
      ++out.rejected_rows;
      if (!first_issue) first_issue = issue;
      continue;
    }
    out.posts.push_back(std::move(post));
  }
  if (first_issue && policy == LoadPolicy::strict) {
    fail(ErrorKind::invariant, "line " + std::to_string(first_issue->line) + ": field '" +
                                   first_issue->field + "' out of range; " +
                                   std::to_string(out.rejected_rows) + " row(s) rejected");
  }
  return out;
}

inline std::string posts_to_delimited(const std::vector<GeoPost>& posts) {
  std::string out = "id\tuser_id\tlat\tlon\ttimestamp\tlabel\ttext\n";
  for (const auto& p : posts) {
    out += detail::escape_text(p.id);
    out += '\t';
    out += p.user_id ? detail::escape_text(*p.user_id) : std::string{};
    out += '\t';
    out += format_double(p.lat);
    out += '\t';
    out += format_double(p.lon);
    out += '\t';
    out += format_timestamp(p.timestamp);
    out += '\t';
    if (p.label) out += to_string(*p.label);
    out += '\t';
    out += detail::escape_text(p.text);
    out += '\n';
  }
  return out;
}

inline std::string posts_to_json_lines(const std::vector<GeoPost>& posts) {
  std::string out;
  for (const auto& p : posts) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    if (p.user_id) j["user_id"] = *p.user_id;
    j["lat"] = p.lat;
    j["lon"] = p.lon;
    j["timestamp"] = format_timestamp(p.timestamp);
    if (p.label) j["label"] = to_string(*p.label);
    if (p.score) j["score"] = *p.score;
    j["text"] = p.text;
    out += j.dump();
    out += '\n';
  }
  return out;
}

// --- boundaries ------------------------------------------------------------

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;
  bool operator==(const LonLat&) const = default;
};

using Ring = std::vector<LonLat>;

// One named area. All rings (outer boundaries, holes, parts) take part in a
// single even-odd test.
struct BoundaryPolygon {
  std::string name;
  std::vector<Ring> rings;
};

struct BoundarySet {
  std::vector<BoundaryPolygon> polygons;
  bool empty() const { return polygons.empty(); }
};

inline void validate_ring(const Ring& ring, const std::string& owner) {
  if (ring.size() < 4) fail(ErrorKind::invariant, "ring of '" + owner + "' has fewer than 4 vertices");
  if (!(ring.front() == ring.back())) fail(ErrorKind::invariant, "ring of '" + owner + "' is not closed");
}

namespace detail {

inline bool on_segment(double px, double py, const LonLat& a, const LonLat& b) {
  const double cross = (b.lon - a.lon) * (py - a.lat) - (b.lat - a.lat) * (px - a.lon);
  if (cross != 0.0) return false;
  return px >= std::min(a.lon, b.lon) && px <= std::max(a.lon, b.lon) &&
         py >= std::min(a.lat, b.lat) && py <= std::max(a.lat, b.lat);
}

}  // namespace detail

// Even-odd containment over all rings; points on any edge count as inside.
inline bool point_in_polygon(double lat, double lon, const BoundaryPolygon& polygon) {
  bool inside = false;
  for (const auto& ring : polygon.rings) {
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
      const LonLat& a = ring[i];
      const LonLat& b = ring[j];
      if (detail::on_segment(lon, lat, a, b)) return true;
      if ((a.lat > lat) != (b.lat > lat)) {
        const double x = a.lon + (lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
        if (lon < x) inside = !inside;
      }
    }
  }
  return inside;
}

inline bool point_in_boundary(double lat, double lon, const BoundarySet& boundary) {
  for (const auto& polygon : boundary.polygons) {
    if (point_in_polygon(lat, lon, polygon)) return true;
  }
  return false;
}

// Area-weighted centroid of the first ring, falling back to the vertex mean
// for degenerate rings.
inline LonLat centroid(const BoundaryPolygon& polygon) {
  const Ring& ring = polygon.rings.front();
  double area2 = 0.0, cx = 0.0, cy = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const double cross = ring[i].lon * ring[i + 1].lat - ring[i + 1].lon * ring[i].lat;
    area2 += cross;
    cx += (ring[i].lon + ring[i + 1].lon) * cross;
    cy += (ring[i].lat + ring[i + 1].lat) * cross;
  }
  if (area2 == 0.0) {
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
      sx += ring[i].lon;
      sy += ring[i].lat;
    }
    const double n = static_cast<double>(ring.size() - 1);
    return {sx / n, sy / n};
  }
  return {cx / (3.0 * area2), cy / (3.0 * area2)};
}

namespace detail {

inline Ring parse_ring(const nlohmann::json& coords, const std::string& owner) {
  if (!coords.is_array()) fail(ErrorKind::malformed_input, "ring of '" + owner + "' is not an array");
  Ring ring;
  for (const auto& pt : coords) {
    if (!pt.is_array() || pt.size() < 2 || !pt[0].is_number() || !pt[1].is_number()) {
      fail(ErrorKind::malformed_input, "vertex of '" + owner + "' is not [lon, lat]");
    }
    ring.push_back({pt[0].get<double>(), pt[1].get<double>()});
  }
  validate_ring(ring, owner);
  return ring;
}

}  // namespace detail

inline BoundarySet parse_boundaries(std::string_view geojson) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(geojson);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::malformed_input, std::string("boundary file is not valid JSON: ") + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features")) {
    fail(ErrorKind::malformed_input, "boundary file must be a FeatureCollection");
  }
  BoundarySet set;
  std::size_t index = 0;
  for (const auto& feature : doc["features"]) {
    BoundaryPolygon polygon;
    polygon.name = "feature_" + std::to_string(index++);
    if (feature.contains("properties") && feature["properties"].is_object()) {
      const auto& props = feature["properties"];
      if (props.contains("name") && props["name"].is_string()) polygon.name = props["name"];
    }
    if (!feature.contains("geometry") || !feature["geometry"].is_object()) {
      fail(ErrorKind::malformed_input, "feature '" + polygon.name + "' has no geometry");
    }
    const auto& geom = feature["geometry"];
    const std::string type = geom.value("type", "");
    const auto& coords = geom.at("coordinates");
    if (type == "Polygon") {
      for (const auto& ring : coords) polygon.rings.push_back(detail::parse_ring(ring, polygon.name));
    } else if (type == "MultiPolygon") {
      for (const auto& part : coords) {
        for (const auto& ring : part) polygon.rings.push_back(detail::parse_ring(ring, polygon.name));
      }
    } else {
      fail(ErrorKind::malformed_input, "feature '" + polygon.name + "' is not a Polygon/MultiPolygon");
    }
    if (polygon.rings.empty()) fail(ErrorKind::invariant, "feature '" + polygon.name + "' has no rings");
    set.polygons.push_back(std::move(polygon));
  }
  return set;
}

inline BoundarySet load_boundaries(const std::filesystem::path& path) {
  return parse_boundaries(read_file(path));
}

inline std::string boundaries_to_geojson(const BoundarySet& set) {
  nlohmann::ordered_json features = nlohmann::ordered_json::array();
  for (const auto& polygon : set.polygons) {
    nlohmann::ordered_json rings = nlohmann::ordered_json::array();
    for (const auto& ring : polygon.rings) {
      nlohmann::ordered_json r = nlohmann::ordered_json::array();
      for (const auto& v : ring) r.push_back({v.lon, v.lat});
      rings.push_back(std::move(r));
    }
    nlohmann::ordered_json f;
    f["type"] = "Feature";
    f["properties"] = {{"name", polygon.name}};
    f["geometry"] = {{"type", "Polygon"}, {"coordinates", std::move(rings)}};
    features.push_back(std::move(f));
  }
  nlohmann::ordered_json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = std::move(features);
  return doc.dump(1) + "\n";
}

// Axis-aligned rectangle ring, counter-clockwise.
inline Ring rectangle_ring(double lat_min, double lon_min, double lat_max, double lon_max) {
  return {{lon_min, lat_min}, {lon_max, lat_min}, {lon_max, lat_max}, {lon_min, lat_max}, {lon_min, lat_min}};
}

// --- mobility traces -------------------------------------------------------
//
// Trace file: comma separated, header "person_id,lat,lon,timestamp".

struct TracePoint {
  std::string person_id;
  double lat = 0.0;
  double lon = 0.0;
  Timestamp timestamp{};
};

struct MobilityTrace {
  std::string person_id;
  std::map<CellKey, std::uint64_t> visits;

  std::uint64_t total_visits() const {
    std::uint64_t total = 0;
    for (const auto& [cell, count] : visits) total += count;
    return total;
  }
};

inline std::vector<TracePoint> load_trace_points(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  std::vector<TracePoint> points;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t lineno = i + 1;
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    if (i == 0 && line.rfind("person_id", 0) == 0) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 4) {
      detail::bad_field(lineno, fields.size() < 4 ? "timestamp" : "record", "wrong field count");
    }
    TracePoint pt;
    pt.person_id = std::string(trim(fields[0]));
    if (pt.person_id.empty()) detail::bad_field(lineno, "person_id", "is empty");
    const auto lat = parse_double(trim(fields[1]));
    const auto lon = parse_double(trim(fields[2]));
    const auto ts = parse_timestamp(trim(fields[3]));
    if (!lat) detail::bad_field(lineno, "lat", "is not a number");
    if (!lon) detail::bad_field(lineno, "lon", "is not a number");
    if (!ts) detail::bad_field(lineno, "timestamp", "is not RFC 3339");
    if (!(*lat >= -90.0 && *lat <= 90.0)) detail::bad_field(lineno, "lat", "out of range");
    if (!(*lon >= -180.0 && *lon <= 180.0)) detail::bad_field(lineno, "lon", "out of range");
    pt.lat = *lat;
    pt.lon = *lon;
    pt.timestamp = *ts;
    points.push_back(std::move(pt));
  }
  return points;
}

// Bins raw points into per-person visit counts at precision d. Persons appear
// in order of first occurrence.
inline std::vector<MobilityTrace> bin_traces(const std::vector<TracePoint>& points, int d) {
  std::vector<MobilityTrace> traces;
  std::map<std::string, std::size_t> index;
  for (const auto& pt : points) {
    auto [it, inserted] = index.try_emplace(pt.person_id, traces.size());
    if (inserted) traces.push_back(MobilityTrace{pt.person_id, {}});
    ++traces[it->second].visits[cell_key(pt.lat, pt.lon, d)];
  }
  return traces;
}

inline std::string trace_points_to_csv(const std::vector<TracePoint>& points) {
  std::string out = "person_id,lat,lon,timestamp\n";
  for (const auto& pt : points) {
    out += pt.person_id + "," + format_double(pt.lat) + "," + format_double(pt.lon) + "," +
           format_timestamp(pt.timestamp) + "\n";
  }
  return out;
}

}  // namespace sssom
