#pragma once

// Map export: one GeoJSON feature per cluster, the union of its cell squares.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sssom/cell.hpp"
#include "sssom/core.hpp"
#include "sssom/grid.hpp"
#include "sssom/partition.hpp"

namespace sssom {

// Vertices live on the doubled integer lattice: cell (lat_q, lon_q) spans
// x = 2 lon_q +- 1, y = 2 lat_q +- 1.
using LatticePoint = std::pair<std::int64_t, std::int64_t>;  // (x, y)
using LatticeRing = std::vector<LatticePoint>;               // closed, first == last

struct LatticePolygon {
  LatticeRing outer;               // counter-clockwise
  std::vector<LatticeRing> holes;  // clockwise
};

namespace detail {

// Direction index: 0 east, 1 north, 2 west, 3 south.
inline constexpr std::array<std::array<std::int64_t, 2>, 4> kStep{{{2, 0}, {0, 2}, {-2, 0}, {0, -2}}};

inline std::int64_t ring_area2(const LatticeRing& r) {
  std::int64_t a = 0;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) a += r[i].first * r[i + 1].second - r[i + 1].first * r[i].second;
  return a;
}

// Drops vertices in the middle of straight runs and rotates the ring to
// start at its smallest vertex.
inline LatticeRing simplify_ring(const LatticeRing& closed) {
  LatticeRing open(closed.begin(), closed.end() - 1);
  const std::size_t n = open.size();
  LatticeRing kept;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& prev = open[(i + n - 1) % n];
    const auto& cur = open[i];
    const auto& next = open[(i + 1) % n];
    const bool collinear = (cur.first - prev.first) * (next.second - cur.second) ==
                           (cur.second - prev.second) * (next.first - cur.first);
    if (!collinear) kept.push_back(cur);
  }
  std::rotate(kept.begin(), std::min_element(kept.begin(), kept.end()), kept.end());
  kept.push_back(kept.front());
  return kept;
}

// Even-odd containment of a point that never lies on the ring.
inline bool lattice_contains(const LatticeRing& r, double x, double y) {
  bool inside = false;
  for (std::size_t i = 0; i + 1 < r.size(); ++i) {
    const double x1 = static_cast<double>(r[i].first), y1 = static_cast<double>(r[i].second);
    const double x2 = static_cast<double>(r[i + 1].first), y2 = static_cast<double>(r[i + 1].second);
    if ((y1 > y) != (y2 > y) && x < x1 + (y - y1) * (x2 - x1) / (y2 - y1)) inside = !inside;
  }
  return inside;
}

}  // namespace detail

// Union of unit cell squares as polygons with holes. Boundary edges are the
// cell edges not shared with another member; rings are traced keeping the
// interior on the left and turning left first at pinch vertices, so cells
// that only touch at a corner end up in separate rings.
inline std::vector<LatticePolygon> union_of_cells(const std::vector<CellKey>& cells) {
  std::map<std::pair<LatticePoint, int>, bool> edges;  // (start, dir) -> used
  for (const auto& c : cells) {
    const std::int64_t x0 = 2 * c.lon_q - 1, y0 = 2 * c.lat_q - 1;
    const std::array<LatticePoint, 4> corner{{{x0, y0}, {x0 + 2, y0}, {x0 + 2, y0 + 2}, {x0, y0 + 2}}};
    for (int dir = 0; dir < 4; ++dir) {
      const LatticePoint& from = corner[dir];
      const LatticePoint to{from.first + detail::kStep[dir][0], from.second + detail::kStep[dir][1]};
      auto twin = edges.find({to, (dir + 2) % 4});
      if (twin != edges.end()) {
        edges.erase(twin);
      } else {
        edges.emplace(std::pair{from, dir}, false);
      }
    }
  }

  std::vector<LatticeRing> outers, holes;
  for (auto& [start_edge, used] : edges) {
    if (used) continue;
    LatticeRing ring{start_edge.first};
    auto current = start_edge;
    while (true) {
      edges.at(current) = true;
      const LatticePoint end{current.first.first + detail::kStep[current.second][0],
                             current.first.second + detail::kStep[current.second][1]};
      ring.push_back(end);
      if (end == start_edge.first) break;
      bool advanced = false;
      for (int turn : {1, 0, 3}) {
        const int dir = (current.second + turn) % 4;
        auto it = edges.find({end, dir});
        if (it != edges.end() && !it->second) {
          current = it->first;
          advanced = true;
          break;
        }
      }
      if (!advanced) fail(ErrorKind::invariant, "open boundary while tracing cell union");
    }
    LatticeRing simple = detail::simplify_ring(ring);
    (detail::ring_area2(simple) > 0 ? outers : holes).push_back(std::move(simple));
  }

  std::sort(outers.begin(), outers.end());
  std::sort(holes.begin(), holes.end());
  std::vector<LatticePolygon> polygons;
  for (auto& r : outers) polygons.push_back({std::move(r), {}});
  for (auto& h : holes) {
    // A point just inside the hole, next to its first edge.
    const auto& a = h[0];
    const auto& b = h[1];
    const double mx = (static_cast<double>(a.first) + static_cast<double>(b.first)) / 2.0;
    const double my = (static_cast<double>(a.second) + static_cast<double>(b.second)) / 2.0;
    std::size_t best = polygons.size();
    for (std::size_t i = 0; i < polygons.size(); ++i) {
      if (!detail::lattice_contains(polygons[i].outer, mx, my)) continue;
      if (best == polygons.size() ||
          detail::ring_area2(polygons[i].outer) < detail::ring_area2(polygons[best].outer)) {
        best = i;
      }
    }
    if (best == polygons.size()) fail(ErrorKind::invariant, "hole outside every ring while tracing cell union");
    polygons[best].holes.push_back(std::move(h));
  }
  return polygons;
}

namespace detail {

inline nlohmann::ordered_json ring_to_json(const LatticeRing& ring, int d) {
  const double scale = 2.0 * static_cast<double>(pow10(d));
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& [x, y] : ring) {
    out.push_back({static_cast<double>(x) / scale, static_cast<double>(y) / scale});
  }
  return out;
}

}  // namespace detail

// FeatureCollection sorted by cluster id. Each feature carries cluster_id,
// cells and prevalence; the geometry is a Polygon or, for clusters whose
// cells do not all share edges, a MultiPolygon.
inline std::string export_geojson(const Partition& partition) {
  std::map<int, std::vector<CellKey>> members;
  for (const auto& [key, id] : partition.assignment) members[id].push_back(key);

  nlohmann::ordered_json features = nlohmann::ordered_json::array();
  for (const auto& [id, cells] : members) {
    const auto polygons = union_of_cells(cells);
    nlohmann::ordered_json parts = nlohmann::ordered_json::array();
    for (const auto& poly : polygons) {
      nlohmann::ordered_json rings = nlohmann::ordered_json::array();
      rings.push_back(detail::ring_to_json(poly.outer, partition.d));
      for (const auto& h : poly.holes) rings.push_back(detail::ring_to_json(h, partition.d));
      parts.push_back(std::move(rings));
    }
    nlohmann::ordered_json geometry;
    if (parts.size() == 1) {
      geometry["type"] = "Polygon";
      geometry["coordinates"] = std::move(parts[0]);
    } else {
      geometry["type"] = "MultiPolygon";
      geometry["coordinates"] = std::move(parts);
    }
    nlohmann::ordered_json props;
    props["name"] = "cluster_" + std::to_string(id);
    props["cluster_id"] = id;
    props["cells"] = cells.size();
    auto it = partition.clusters.find(id);
    props["prevalence"] = it == partition.clusters.end() ? 0.0 : it->second.prevalence;

    nlohmann::ordered_json feature;
    feature["type"] = "Feature";
    feature["properties"] = std::move(props);
    feature["geometry"] = std::move(geometry);
    features.push_back(std::move(feature));
  }
  nlohmann::ordered_json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = std::move(features);
  return doc.dump() + "\n";
}

}  // namespace sssom
