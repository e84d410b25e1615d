#pragma once

// Contiguous partitioning of occupied grid cells.
//
// The socio-spatial SOM keeps one output node per occupied cell. A node has a
// fixed position (its cell) and belongs to exactly one cluster; the weight is
// stored per cluster, so every member of a cluster shares it. Each cycle
// presents every cell once in a seeded order:
//
//   1. candidates = nodes within Chebyshev distance tau of the input cell
//   2. the winner is the candidate whose cluster weight is closest to the
//      input (ties: larger share of the candidates, then smaller cluster id)
//   3. each candidate j moves its weight toward the input by
//      eta(t) * exp(-d / (s_j + 1)), d = Chebyshev distance to the winner and
//      s_j = number of candidates in j's cluster; each touched cluster's
//      shared weight becomes the mean of its members
//   4. the input cell joins the winner's cluster
//
// At the end of every cycle, clusters that the moves in step 4 disconnected
// are split into their tau-connected components.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "sssom/cell.hpp"
#include "sssom/core.hpp"
#include "sssom/grid.hpp"
#include "sssom/ingest.hpp"

namespace sssom {

// --- partitions --------------------------------------------------------------

struct ClusterSummary {
  std::size_t cells = 0;
  std::uint64_t posts = 0;
  std::uint64_t positives = 0;
  double prevalence = 0.0;

  bool operator==(const ClusterSummary&) const = default;
};

struct Partition {
  int d = 3;
  std::map<CellKey, int> assignment;
  std::map<int, ClusterSummary> clusters;
  // False for clusterings that do not enforce contiguity (traditional SOM).
  bool contiguous = true;

  std::size_t cluster_count() const { return clusters.size(); }
  bool operator==(const Partition&) const = default;
};

// Attaches per-cluster aggregates from the field to an assignment.
inline Partition make_partition(const GridField& field, std::map<CellKey, int> assignment,
                                bool contiguous = true) {
  Partition p;
  p.d = field.d;
  p.contiguous = contiguous;
  p.assignment = std::move(assignment);
  for (const auto& [key, id] : p.assignment) {
    auto it = field.cells.find(key);
    if (it == field.cells.end()) fail(ErrorKind::invariant, "partition cell " + to_string(key) + " is not in the field");
    auto& s = p.clusters[id];
    ++s.cells;
    s.posts += it->second.total;
    s.positives += it->second.positive;
  }
  for (auto& [id, s] : p.clusters) {
    s.prevalence = s.posts ? static_cast<double>(s.positives) / static_cast<double>(s.posts) : 0.0;
  }
  return p;
}

// Renumbers clusters 0..k-1 in row-major order of their first cell.
inline std::map<CellKey, int> relabel_dense(const std::map<CellKey, int>& assignment) {
  std::map<int, int> mapping;
  std::map<CellKey, int> out;
  for (const auto& [key, id] : assignment) {
    auto [it, inserted] = mapping.try_emplace(id, static_cast<int>(mapping.size()));
    out.emplace(key, it->second);
  }
  return out;
}

struct ContiguityReport {
  bool ok = true;
  std::vector<int> offending_clusters;
};

// Each cluster must form one connected component when cells within
// Chebyshev distance tau are linked.
inline ContiguityReport check_contiguity(const Partition& partition, int tau) {
  require(tau >= 1, "tau must be >= 1");
  std::map<int, std::vector<CellKey>> members;
  for (const auto& [key, id] : partition.assignment) members[id].push_back(key);

  ContiguityReport report;
  for (const auto& [id, cells] : members) {
    std::unordered_map<CellKey, bool, CellKeyHash> seen;
    for (const auto& c : cells) seen.emplace(c, false);
    std::deque<CellKey> queue{cells.front()};
    seen[cells.front()] = true;
    std::size_t reached = 1;
    while (!queue.empty()) {
      const CellKey c = queue.front();
      queue.pop_front();
      for (std::int64_t dl = -tau; dl <= tau; ++dl) {
        for (std::int64_t dn = -tau; dn <= tau; ++dn) {
          auto it = seen.find(CellKey{c.lat_q + dl, c.lon_q + dn, c.d});
          if (it == seen.end() || it->second) continue;
          it->second = true;
          ++reached;
          queue.push_back(it->first);
        }
      }
    }
    if (reached != cells.size()) report.offending_clusters.push_back(id);
  }
  report.ok = report.offending_clusters.empty();
  return report;
}

// --- SS-SOM ----------------------------------------------------------------

enum class WinnerRule {
  lexicographic,  // weight distance first, surrounding-cluster share as tie-break
  literal_eq1,    // weight distance multiplied by the surrounding-cluster share
};

enum class WeightSpace {
  counts_scaled,  // (total, positive) counts, each min-max scaled to [0,1]
  proportions,    // (positive / total, 0)
};

inline const char* to_string(WinnerRule r) {
  return r == WinnerRule::lexicographic ? "lexicographic" : "literal_eq1";
}
inline const char* to_string(WeightSpace w) {
  return w == WeightSpace::counts_scaled ? "counts_scaled" : "proportions";
}

struct SsomParams {
  int tau = 3;
  int t_max = 50;
  double eta0 = 0.1;
  std::uint64_t seed = 0;
  WinnerRule winner_rule = WinnerRule::lexicographic;
  WeightSpace weight_space = WeightSpace::counts_scaled;

  void validate() const {
    require(tau >= 1, "tau must be >= 1");
    require(t_max >= 1, "t_max must be >= 1");
    require(eta0 > 0.0 && eta0 < 1.0, "eta0 must be in (0,1)");
  }
};

inline double learning_rate(double t, const SsomParams& params) {
  return params.eta0 * std::exp(-t / static_cast<double>(params.t_max));
}

// h(d) = exp(-d / (cluster_size + 1))
inline double neighborhood(double distance, std::size_t cluster_size) {
  return std::exp(-distance / (static_cast<double>(cluster_size) + 1.0));
}

using Weight = std::array<double, 2>;

inline double weight_distance(const Weight& a, const Weight& b) {
  return std::hypot(a[0] - b[0], a[1] - b[1]);
}

struct SsomNode {
  CellKey position;
  Weight input{};
  int cluster = 0;
};

struct SsomState {
  std::vector<SsomNode> nodes;  // row-major
  std::vector<Weight> cluster_weight;
  std::vector<std::size_t> cluster_size;
  std::vector<std::vector<std::size_t>> neighbors;  // within tau, self included
  int tau = 1;
  int cycle = 0;

  const Weight& weight(std::size_t node) const { return cluster_weight[nodes[node].cluster]; }

  int new_cluster(const Weight& w) {
    cluster_weight.push_back(w);
    cluster_size.push_back(0);
    return static_cast<int>(cluster_weight.size() - 1);
  }

  void move(std::size_t node, int cluster) {
    --cluster_size[nodes[node].cluster];
    nodes[node].cluster = cluster;
    ++cluster_size[cluster];
  }
};

inline std::vector<Weight> input_weights(const GridField& field, WeightSpace space) {
  std::vector<Weight> out;
  out.reserve(field.cells.size());
  if (space == WeightSpace::proportions) {
    for (const auto& [key, c] : field.cells) out.push_back({field.proportion(c), 0.0});
    return out;
  }
  std::uint64_t tmin = std::numeric_limits<std::uint64_t>::max(), tmax = 0;
  std::uint64_t pmin = std::numeric_limits<std::uint64_t>::max(), pmax = 0;
  for (const auto& [key, c] : field.cells) {
    tmin = std::min(tmin, c.total);
    tmax = std::max(tmax, c.total);
    pmin = std::min(pmin, c.positive);
    pmax = std::max(pmax, c.positive);
  }
  // Integer numerators and denominators: proportional rescaling of all
  // counts yields bit-identical weights.
  auto scale = [](std::uint64_t v, std::uint64_t lo, std::uint64_t hi) {
    return hi == lo ? 0.0 : static_cast<double>(v - lo) / static_cast<double>(hi - lo);
  };
  for (const auto& [key, c] : field.cells) {
    out.push_back({scale(c.total, tmin, tmax), scale(c.positive, pmin, pmax)});
  }
  return out;
}

// Candidate lists for each node: all nodes within Chebyshev distance tau.
inline std::vector<std::vector<std::size_t>> neighbor_lists(const std::vector<CellKey>& cells, int tau) {
  std::unordered_map<CellKey, std::size_t, CellKeyHash> index;
  index.reserve(cells.size() * 2);
  for (std::size_t i = 0; i < cells.size(); ++i) index.emplace(cells[i], i);
  std::vector<std::vector<std::size_t>> out(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const CellKey& c = cells[i];
    for (std::int64_t dl = -tau; dl <= tau; ++dl) {
      for (std::int64_t dn = -tau; dn <= tau; ++dn) {
        auto it = index.find(CellKey{c.lat_q + dl, c.lon_q + dn, c.d});
        if (it != index.end()) out[i].push_back(it->second);
      }
    }
    std::sort(out[i].begin(), out[i].end());
  }
  return out;
}

// Singleton clusters, ids in row-major order, weights equal to the inputs.
inline SsomState initialize_ssom(const GridField& field, const SsomParams& params) {
  params.validate();
  SsomState state;
  state.tau = params.tau;
  const auto inputs = input_weights(field, params.weight_space);
  std::vector<CellKey> cells;
  std::size_t i = 0;
  for (const auto& [key, c] : field.cells) {
    const int id = state.new_cluster(inputs[i]);
    state.nodes.push_back({key, inputs[i], id});
    state.cluster_size[id] = 1;
    cells.push_back(key);
    ++i;
  }
  state.neighbors = neighbor_lists(cells, params.tau);
  return state;
}

namespace detail {

// Number of candidates sharing each candidate's cluster.
inline std::vector<std::size_t> surround_counts(const SsomState& state,
                                                const std::vector<std::size_t>& candidates) {
  std::vector<std::pair<int, std::size_t>> tally;
  for (std::size_t j : candidates) {
    const int c = state.nodes[j].cluster;
    auto it = std::find_if(tally.begin(), tally.end(), [c](const auto& e) { return e.first == c; });
    if (it == tally.end()) {
      tally.emplace_back(c, 1);
    } else {
      ++it->second;
    }
  }
  std::vector<std::size_t> out;
  out.reserve(candidates.size());
  for (std::size_t j : candidates) {
    const int c = state.nodes[j].cluster;
    out.push_back(std::find_if(tally.begin(), tally.end(), [c](const auto& e) { return e.first == c; })->second);
  }
  return out;
}

}  // namespace detail

// Returns the winning node for input node v. Among members of one cluster the
// node nearest v wins, then the first in row-major order.
inline std::size_t find_winner(const SsomState& state, std::size_t v, const SsomParams& params,
                               const std::vector<std::size_t>& surround) {
  const auto& candidates = state.neighbors[v];
  const Weight& x = state.nodes[v].input;

  std::size_t best = candidates.front();
  double best_score = std::numeric_limits<double>::infinity();
  std::size_t best_surround = 0;
  std::int64_t best_reach = 0;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const std::size_t j = candidates[k];
    double score = weight_distance(state.weight(j), x);
    if (params.winner_rule == WinnerRule::literal_eq1) score *= static_cast<double>(surround[k]);
    const std::int64_t reach = chebyshev(state.nodes[j].position, state.nodes[v].position);
    bool better;
    if (score != best_score) {
      better = score < best_score;
    } else if (surround[k] != best_surround) {
      better = surround[k] > best_surround;
    } else if (state.nodes[j].cluster != state.nodes[best].cluster) {
      better = state.nodes[j].cluster < state.nodes[best].cluster;
    } else {
      better = reach < best_reach;
    }
    if (better) {
      best = j;
      best_score = score;
      best_surround = surround[k];
      best_reach = reach;
    }
  }
  return best;
}

inline std::size_t find_winner(const SsomState& state, std::size_t v, const SsomParams& params) {
  return find_winner(state, v, params, detail::surround_counts(state, state.neighbors[v]));
}

// Moves every candidate's weight toward the input, reconciles each touched
// cluster to the mean of its members, then moves v into the winner's cluster.
// `t` is the zero-based cycle index used for the learning rate.
inline void update_weights(SsomState& state, std::size_t winner, std::size_t v, double t,
                           const SsomParams& params, const std::vector<std::size_t>& surround) {
  const auto& candidates = state.neighbors[v];
  const Weight x = state.nodes[v].input;
  const double eta = learning_rate(t, params);

  std::vector<std::pair<int, Weight>> delta_sums;
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const std::size_t j = candidates[k];
    const double d = static_cast<double>(chebyshev(state.nodes[winner].position, state.nodes[j].position));
    const double g = eta * neighborhood(d, surround[k]);
    const Weight& w = state.weight(j);
    const Weight delta{g * (x[0] - w[0]), g * (x[1] - w[1])};
    const int c = state.nodes[j].cluster;
    auto it = std::find_if(delta_sums.begin(), delta_sums.end(), [c](const auto& e) { return e.first == c; });
    if (it == delta_sums.end()) {
      delta_sums.emplace_back(c, delta);
    } else {
      it->second[0] += delta[0];
      it->second[1] += delta[1];
    }
  }
  // Members outside the candidate set keep the old shared weight, so the new
  // mean is the old weight plus the summed member deltas over the cluster size.
  for (const auto& [c, sum] : delta_sums) {
    const double n = static_cast<double>(state.cluster_size[c]);
    state.cluster_weight[c][0] += sum[0] / n;
    state.cluster_weight[c][1] += sum[1] / n;
  }
  const int target = state.nodes[winner].cluster;
  if (state.nodes[v].cluster != target) state.move(v, target);
}

inline void update_weights(SsomState& state, std::size_t winner, std::size_t v, double t,
                           const SsomParams& params) {
  update_weights(state, winner, v, t, params, detail::surround_counts(state, state.neighbors[v]));
}

// Splits clusters into tau-connected components. The component holding a
// cluster's first row-major cell keeps the id; the others get fresh ids with
// the same weight. Returns the number of clusters created.
inline std::size_t split_disconnected(SsomState& state) {
  const std::size_t n = state.nodes.size();
  std::vector<bool> visited(n, false);
  std::vector<bool> claimed(state.cluster_weight.size(), false);
  std::size_t created = 0;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (visited[start]) continue;
    const int old_id = state.nodes[start].cluster;
    int id = old_id;
    if (claimed[old_id]) {
      id = state.new_cluster(state.cluster_weight[old_id]);
      claimed.push_back(true);
      ++created;
    } else {
      claimed[old_id] = true;
    }
    stack.assign(1, start);
    visited[start] = true;
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      if (id != old_id) state.move(i, id);
      for (std::size_t j : state.neighbors[i]) {
        if (!visited[j] && state.nodes[j].cluster == old_id) {
          visited[j] = true;
          stack.push_back(j);
        }
      }
    }
  }
  return created;
}

// Mean distance between each cell's input and its cluster's weight.
inline double quantization_error(const SsomState& state) {
  if (state.nodes.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < state.nodes.size(); ++i) sum += weight_distance(state.weight(i), state.nodes[i].input);
  return sum / static_cast<double>(state.nodes.size());
}

inline std::map<CellKey, int> state_assignment(const SsomState& state) {
  std::map<CellKey, int> out;
  for (const auto& node : state.nodes) out.emplace(node.position, node.cluster);
  return out;
}

using CycleObserver = std::function<void(const SsomState&)>;

// Runs initialization and t_max organization cycles. The observer, when set,
// sees the state after every cycle.
inline Partition run_ssom(const GridField& field, const SsomParams& params,
                          const CycleObserver& observer = {}) {
  require(!field.empty(), "run_ssom needs a non-empty field");
  SsomState state = initialize_ssom(field, params);
  Rng rng(derive_seed(params.seed, 0x550A));
  std::vector<std::size_t> order(state.nodes.size());
  for (int t = 1; t <= params.t_max; ++t) {
    state.cycle = t;
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t v : order) {
      const auto surround = detail::surround_counts(state, state.neighbors[v]);
      const std::size_t winner = find_winner(state, v, params, surround);
      update_weights(state, winner, v, static_cast<double>(t - 1), params, surround);
    }
    split_disconnected(state);
    if (observer) observer(state);
  }
  return make_partition(field, relabel_dense(state_assignment(state)), true);
}

// --- traditional SOM baseline ------------------------------------------------

struct TraditionalSomParams {
  int rows = 0;  // lattice size; 0 picks about 5*sqrt(g) nodes on a square
  int cols = 0;
  int t_max = 50;
  double eta0 = 0.1;
  double sigma0 = 0.0;  // 0 picks half the lattice side
  std::uint64_t seed = 0;

  TraditionalSomParams() = default;
  explicit TraditionalSomParams(const SsomParams& p) : t_max(p.t_max), eta0(p.eta0), seed(p.seed) {}
};

// Kohonen SOM on (total, positive, lat, lon), each min-max scaled. Cells that
// share a best-matching unit form a cluster; contiguity is not enforced.
inline Partition run_traditional_som(const GridField& field, TraditionalSomParams params) {
  require(!field.empty(), "run_traditional_som needs a non-empty field");
  require(params.t_max >= 1 && params.eta0 > 0.0, "invalid SOM parameters");
  const std::size_t g = field.cells.size();
  if (params.rows <= 0 || params.cols <= 0) {
    const double nodes = 5.0 * std::sqrt(static_cast<double>(g));
    const int side = std::max(1, static_cast<int>(std::ceil(std::sqrt(nodes))));
    params.rows = params.cols = side;
  }
  if (params.sigma0 <= 0.0) params.sigma0 = std::max(1.0, std::max(params.rows, params.cols) / 2.0);

  using Vec4 = std::array<double, 4>;
  std::vector<Vec4> inputs;
  std::vector<CellKey> keys;
  for (const auto& [key, c] : field.cells) {
    inputs.push_back({static_cast<double>(c.total), static_cast<double>(c.positive),
                      static_cast<double>(key.lat_q), static_cast<double>(key.lon_q)});
    keys.push_back(key);
  }
  for (std::size_t dim = 0; dim < 4; ++dim) {
    double lo = inputs[0][dim], hi = inputs[0][dim];
    for (const auto& x : inputs) {
      lo = std::min(lo, x[dim]);
      hi = std::max(hi, x[dim]);
    }
    for (auto& x : inputs) x[dim] = hi == lo ? 0.0 : (x[dim] - lo) / (hi - lo);
  }

  Rng rng(derive_seed(params.seed, 0x50A));
  const std::size_t m = static_cast<std::size_t>(params.rows) * static_cast<std::size_t>(params.cols);
  std::vector<Vec4> nodes(m);
  for (auto& w : nodes) {
    for (auto& x : w) x = rng.uniform();
  }
  auto bmu = [&](const Vec4& x) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < m; ++k) {
      double d = 0.0;
      for (std::size_t dim = 0; dim < 4; ++dim) d += (nodes[k][dim] - x[dim]) * (nodes[k][dim] - x[dim]);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  };

  std::vector<std::size_t> order(g);
  for (int t = 1; t <= params.t_max; ++t) {
    const double frac = static_cast<double>(t - 1) / static_cast<double>(params.t_max);
    const double eta = params.eta0 * std::exp(-frac);
    const double sigma = params.sigma0 * std::exp(-frac);
    const double two_sigma2 = 2.0 * sigma * sigma;
    for (std::size_t i = 0; i < g; ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t i : order) {
      const std::size_t b = bmu(inputs[i]);
      const int br = static_cast<int>(b) / params.cols, bc = static_cast<int>(b) % params.cols;
      for (std::size_t k = 0; k < m; ++k) {
        const int r = static_cast<int>(k) / params.cols, c = static_cast<int>(k) % params.cols;
        const double d2 = static_cast<double>((r - br) * (r - br) + (c - bc) * (c - bc));
        const double h = std::exp(-d2 / two_sigma2);
        if (h < 1e-6) continue;
        for (std::size_t dim = 0; dim < 4; ++dim) nodes[k][dim] += eta * h * (inputs[i][dim] - nodes[k][dim]);
      }
    }
  }
  std::map<CellKey, int> assignment;
  for (std::size_t i = 0; i < g; ++i) assignment.emplace(keys[i], static_cast<int>(bmu(inputs[i])));
  return make_partition(field, relabel_dense(assignment), false);
}

// --- administrative polygon baseline ---------------------------------------------

struct PolygonPartition {
  Partition partition;
  std::size_t uncovered_cells = 0;  // assigned to the nearest polygon centroid
};

// Cluster id = polygon index. Cells are assigned by center containment (first
// containing polygon); uncovered cells go to the polygon with the nearest
// centroid.
inline PolygonPartition polygon_partition(const GridField& field, const BoundarySet& boundary) {
  require(!boundary.empty(), "polygon_partition needs at least one polygon");
  std::vector<LonLat> centroids;
  for (const auto& polygon : boundary.polygons) centroids.push_back(centroid(polygon));

  PolygonPartition out;
  std::map<CellKey, int> assignment;
  for (const auto& [key, c] : field.cells) {
    const double lat = key.center_lat(), lon = key.center_lon();
    int id = -1;
    for (std::size_t k = 0; k < boundary.polygons.size(); ++k) {
      if (point_in_polygon(lat, lon, boundary.polygons[k])) {
        id = static_cast<int>(k);
        break;
      }
    }
    if (id < 0) {
      ++out.uncovered_cells;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < centroids.size(); ++k) {
        const double d2 = (centroids[k].lat - lat) * (centroids[k].lat - lat) +
                          (centroids[k].lon - lon) * (centroids[k].lon - lon);
        if (d2 < best) {
          best = d2;
          id = static_cast<int>(k);
        }
      }
    }
    assignment.emplace(key, id);
  }
  out.partition = make_partition(field, std::move(assignment), false);
  return out;
}

// --- export ------------------------------------------------------------------
//
// Assignment CSV: "lat_q,lon_q,d,cluster_id", sorted by cell.
// Summary CSV:    "cluster_id,cells,posts,positives,prevalence", sorted by id.

inline std::string partition_to_csv(const Partition& p) {
  std::string out = "lat_q,lon_q,d,cluster_id\n";
  for (const auto& [key, id] : p.assignment) {
    out += std::to_string(key.lat_q) + "," + std::to_string(key.lon_q) + "," + std::to_string(key.d) + "," +
           std::to_string(id) + "\n";
  }
  return out;
}

inline std::string cluster_summary_to_csv(const Partition& p) {
  std::string out = "cluster_id,cells,posts,positives,prevalence\n";
  for (const auto& [id, s] : p.clusters) {
    out += std::to_string(id) + "," + std::to_string(s.cells) + "," + std::to_string(s.posts) + "," +
           std::to_string(s.positives) + "," + format_double(s.prevalence) + "\n";
  }
  return out;
}

inline std::map<CellKey, int> parse_assignment_csv(const std::vector<std::string>& lines) {
  if (lines.empty() || trim(lines[0]) != "lat_q,lon_q,d,cluster_id") {
    fail(ErrorKind::malformed_input, "line 1: unexpected partition header");
  }
  std::map<CellKey, int> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 4) detail::bad_field(i + 1, "record", "wrong field count");
    const auto lat = parse_int<std::int64_t>(cols[0]);
    const auto lon = parse_int<std::int64_t>(cols[1]);
    const auto d = parse_int<int>(cols[2]);
    const auto id = parse_int<int>(cols[3]);
    if (!lat) detail::bad_field(i + 1, "lat_q", "is not an integer");
    if (!lon) detail::bad_field(i + 1, "lon_q", "is not an integer");
    if (!d || *d < kMinPrecision || *d > kMaxPrecision) detail::bad_field(i + 1, "d", "is invalid");
    if (!id) detail::bad_field(i + 1, "cluster_id", "is not an integer");
    if (!out.emplace(CellKey{*lat, *lon, *d}, *id).second) detail::bad_field(i + 1, "lat_q", "duplicate cell");
  }
  return out;
}

inline std::map<int, ClusterSummary> parse_cluster_summary_csv(const std::vector<std::string>& lines) {
  if (lines.empty() || trim(lines[0]) != "cluster_id,cells,posts,positives,prevalence") {
    fail(ErrorKind::malformed_input, "line 1: unexpected cluster summary header");
  }
  std::map<int, ClusterSummary> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != 5) detail::bad_field(i + 1, "record", "wrong field count");
    const auto id = parse_int<int>(cols[0]);
    const auto cells = parse_int<std::size_t>(cols[1]);
    const auto posts = parse_int<std::uint64_t>(cols[2]);
    const auto positives = parse_int<std::uint64_t>(cols[3]);
    const auto prevalence = parse_double(cols[4]);
    if (!id) detail::bad_field(i + 1, "cluster_id", "is not an integer");
    if (!cells) detail::bad_field(i + 1, "cells", "is not an integer");
    if (!posts) detail::bad_field(i + 1, "posts", "is not an integer");
    if (!positives) detail::bad_field(i + 1, "positives", "is not an integer");
    if (!prevalence) detail::bad_field(i + 1, "prevalence", "is not a number");
    out[*id] = ClusterSummary{*cells, *posts, *positives, *prevalence};
  }
  return out;
}

// Loads an assignment file and, when present, its summary table; otherwise
// the summary is left empty and can be rebuilt with make_partition.
inline Partition load_partition(const std::filesystem::path& assignment_path,
                                const std::optional<std::filesystem::path>& summary_path = std::nullopt) {
  Partition p;
  p.assignment = parse_assignment_csv(read_lines(assignment_path));
  if (!p.assignment.empty()) p.d = p.assignment.begin()->first.d;
  for (const auto& [key, id] : p.assignment) {
    if (key.d != p.d) fail(ErrorKind::invariant, "partition mixes precisions");
  }
  if (summary_path) p.clusters = parse_cluster_summary_csv(read_lines(*summary_path));
  return p;
}

}  // namespace sssom
