#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <atomic>
#include <future>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "sssom/cell.hpp"
#include "sssom/core.hpp"
#include "sssom/grid.hpp"
#include "sssom/partition.hpp"
#include "sssom/synthetic.hpp"

namespace sssom {

// --- c2 pair agreement -----------------------------------------------------------

// Exact pair counts behind c2: `agreements` of `pairs` cell pairs are either
// co-clustered in both clusterings or separated in both.
struct PairAgreement {
  std::uint64_t agreements = 0;
  std::uint64_t pairs = 0;

  double value() const {
    return pairs == 0 ? 1.0 : static_cast<double>(agreements) / static_cast<double>(pairs);
  }
};

inline void require_same_cells(const std::map<CellKey, int>& a, const std::map<CellKey, int>& b) {
  if (a.size() == b.size() &&
      std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) { return x.first == y.first; })) {
    return;
  }
  std::vector<std::string> diff;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && ia->first < ib->first)) {
      diff.push_back(to_string(ia++->first));
    } else if (ia == a.end() || ib->first < ia->first) {
      diff.push_back(to_string(ib++->first));
    } else {
      ++ia;
      ++ib;
    }
  }
  fail(ErrorKind::invalid_argument, "partitions cover different cells; symmetric difference: " + detail::list_ids(diff));
}

// Counts from the contingency table: pairs together in both plus pairs apart
// in both equals C(n,2) - sum C(a_i,2) - sum C(b_j,2) + 2 sum C(n_ij,2).
inline PairAgreement c2_counts(const std::map<CellKey, int>& a, const std::map<CellKey, int>& b) {
  require_same_cells(a, b);
  auto choose2 = [](std::uint64_t n) { return n * (n - 1) / 2; };
  std::map<int, std::uint64_t> rows, cols;
  std::map<std::pair<int, int>, std::uint64_t> joint;
  auto ib = b.begin();
  for (const auto& [key, ida] : a) {
    const int idb = (ib++)->second;
    ++rows[ida];
    ++cols[idb];
    ++joint[{ida, idb}];
  }
  std::uint64_t same_a = 0, same_b = 0, same_both = 0;
  for (const auto& [id, n] : rows) same_a += choose2(n);
  for (const auto& [id, n] : cols) same_b += choose2(n);
  for (const auto& [ids, n] : joint) same_both += choose2(n);
  PairAgreement out;
  out.pairs = choose2(a.size());
  out.agreements = out.pairs - same_a - same_b + 2 * same_both;
  return out;
}

inline double c2_similarity(const std::map<CellKey, int>& a, const std::map<CellKey, int>& b) {
  return c2_counts(a, b).value();
}

inline double c2_similarity(const Partition& a, const Partition& b) {
  return c2_similarity(a.assignment, b.assignment);
}

// --- within-cluster variance ---------------------------------------------------------

struct VarianceReport {
  std::map<int, double> per_cluster;  // multi-cell clusters only
  std::vector<int> singletons;
  double mean = 0.0;
  double min = 0.0;
  double max = 0.0;
};

// s^2 = sum (x_i - xbar)^2 / (n - 1) over a cluster's cell proportions x_i,
// with xbar the cluster's pooled proportion. Singletons are excluded.
inline VarianceReport cluster_variance(const Partition& partition, const GridField& field) {
  std::map<int, std::vector<CellKey>> members;
  for (const auto& [key, id] : partition.assignment) members[id].push_back(key);

  VarianceReport report;
  for (const auto& [id, cells] : members) {
    if (cells.size() < 2) {
      report.singletons.push_back(id);
      continue;
    }
    std::uint64_t pos = 0, tot = 0;
    for (const auto& k : cells) {
      const auto& c = field.cells.at(k);
      pos += c.positive;
      tot += c.total;
    }
    const double pooled = static_cast<double>(pos) / static_cast<double>(tot);
    double ss = 0.0;
    for (const auto& k : cells) {
      const double x = field.proportion(k);
      ss += (x - pooled) * (x - pooled);
    }
    report.per_cluster[id] = ss / static_cast<double>(cells.size() - 1);
  }
  if (!report.per_cluster.empty()) {
    std::vector<double> values;
    for (const auto& [id, v] : report.per_cluster) values.push_back(v);
    report.mean = sssom::mean(values);
    report.min = *std::min_element(values.begin(), values.end());
    report.max = *std::max_element(values.begin(), values.end());
  }
  return report;
}

// --- subsampling -------------------------------------------------------------

enum class SubsampleMode { uniform, ratio_preserving };

// Keeps round(fraction * n) of `n`, half away from zero.
inline std::uint64_t kept_count(double fraction, std::uint64_t n) {
  return std::min<std::uint64_t>(n, round_half_away(fraction * static_cast<double>(n)));
}

// round(kept * positive / total), half away from zero, in exact integers.
inline std::uint64_t kept_positives(std::uint64_t kept, std::uint64_t positive, std::uint64_t total) {
  return (2 * kept * positive + total) / (2 * total);
}

// uniform: a seeded sample of round(fraction * n) posts without replacement.
// ratio_preserving: within every cell at precision d, keep round(fraction *
// total) posts of which round(kept * positive / total) are positive.
// The input order is preserved.
inline std::vector<GeoPost> subsample_posts(const std::vector<GeoPost>& posts, double fraction,
                                            SubsampleMode mode, std::uint64_t seed, int d = 3) {
  require(fraction > 0.0 && fraction <= 1.0, "subsample fraction must be in (0,1]");
  if (fraction == 1.0) return posts;
  Rng rng(derive_seed(seed, 0x5AB));
  std::vector<bool> keep(posts.size(), false);
  if (mode == SubsampleMode::uniform) {
    std::vector<std::size_t> idx(posts.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    rng.shuffle(idx);
    const std::uint64_t k = kept_count(fraction, posts.size());
    for (std::uint64_t i = 0; i < k; ++i) keep[idx[i]] = true;
  } else {
    std::map<CellKey, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> cells;
    for (std::size_t i = 0; i < posts.size(); ++i) {
      if (!posts[i].label) fail(ErrorKind::invariant, "ratio-preserving subsampling needs labels; post " + posts[i].id + " has none");
      auto& [pos, neg] = cells[cell_key(posts[i].lat, posts[i].lon, d)];
      (*posts[i].label == Label::positive ? pos : neg).push_back(i);
    }
    for (auto& [key, lists] : cells) {
      auto& [pos, neg] = lists;
      const std::uint64_t total = pos.size() + neg.size();
      const std::uint64_t k = kept_count(fraction, total);
      const std::uint64_t kp = kept_positives(k, pos.size(), total);
      rng.shuffle(pos);
      rng.shuffle(neg);
      for (std::uint64_t i = 0; i < kp; ++i) keep[pos[i]] = true;
      for (std::uint64_t i = 0; i < k - kp; ++i) keep[neg[i]] = true;
    }
  }
  std::vector<GeoPost> out;
  for (std::size_t i = 0; i < posts.size(); ++i) {
    if (keep[i]) out.push_back(posts[i]);
  }
  return out;
}

// The same two samplers applied to a field's counts. Cells left with no posts
// are removed.
inline GridField subsample_field(const GridField& field, double fraction, SubsampleMode mode, std::uint64_t seed) {
  require(fraction > 0.0 && fraction <= 1.0, "subsample fraction must be in (0,1]");
  GridField out;
  out.d = field.d;
  if (mode == SubsampleMode::ratio_preserving) {
    for (const auto& [key, c] : field.cells) {
      const std::uint64_t k = kept_count(fraction, c.total);
      if (k == 0) continue;
      out.cells[key] = CellCounts{k, kept_positives(k, c.positive, c.total), {}, {}};
    }
    return out;
  }
  // Uniform over individual posts: each post is (cell, positive?).
  std::vector<std::pair<std::uint32_t, bool>> items;
  std::vector<CellKey> keys;
  for (const auto& [key, c] : field.cells) {
    const auto idx = static_cast<std::uint32_t>(keys.size());
    keys.push_back(key);
    for (std::uint64_t i = 0; i < c.total; ++i) items.emplace_back(idx, i < c.positive);
  }
  Rng rng(derive_seed(seed, 0x5AC));
  rng.shuffle(items);
  const std::uint64_t k = kept_count(fraction, items.size());
  std::vector<CellCounts> counts(keys.size());
  for (std::uint64_t i = 0; i < k; ++i) {
    ++counts[items[i].first].total;
    if (items[i].second) ++counts[items[i].first].positive;
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (counts[i].total > 0) out.cells[keys[i]] = counts[i];
  }
  return out;
}

// --- holdout harnesses -------------------------------------------------------------

enum class HoldoutKind { cells, posts };

struct HoldoutPlan {
  HoldoutKind kind = HoldoutKind::cells;
  std::vector<double> fractions{0.10, 0.25, 0.50, 0.75};
  int k = 10;
  std::uint64_t seed = 0;
  SubsampleMode post_mode = SubsampleMode::ratio_preserving;  // posts kind only

  void validate() const {
    require(k >= 2, "holdout needs k >= 2 folds");
    require(!fractions.empty(), "holdout needs at least one fraction");
    for (double f : fractions) require(f >= 0.0 && f < 1.0, "holdout fractions must be in [0,1)");
  }
};

struct EvalReport {
  std::string metric;
  double fraction = 0.0;
  std::vector<double> folds;
  double mean = 0.0;
  double sd = 0.0;
};

inline EvalReport make_report(std::string metric, double fraction, std::vector<double> folds) {
  EvalReport r{std::move(metric), fraction, std::move(folds), 0.0, 0.0};
  r.mean = sssom::mean(r.folds);
  r.sd = sample_sd(r.folds);
  return r;
}

// Rows "metric,fraction,fold,value"; each report ends with "mean" and "sd" rows.
inline std::string reports_to_csv(const std::vector<EvalReport>& reports) {
  std::string out = "metric,fraction,fold,value\n";
  for (const auto& r : reports) {
    const std::string prefix = r.metric + "," + format_double(r.fraction) + ",";
    for (std::size_t i = 0; i < r.folds.size(); ++i) out += prefix + std::to_string(i) + "," + format_double(r.folds[i]) + "\n";
    out += prefix + "mean," + format_double(r.mean) + "\n";
    out += prefix + "sd," + format_double(r.sd) + "\n";
  }
  return out;
}

namespace detail {

// Runs fn(0..n-1) on worker threads; results are ordered by index.
template <typename Fn>
auto parallel_map(std::size_t n, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<R> out(n);
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(n, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::vector<std::future<void>> tasks;
  std::atomic<std::size_t> next{0};
  for (std::size_t w = 0; w < workers; ++w) {
    tasks.push_back(std::async(std::launch::async, [&] {
      for (std::size_t i = next++; i < n; i = next++) out[i] = fn(i);
    }));
  }
  for (auto& t : tasks) t.get();
  return out;
}

inline std::uint64_t fraction_tag(double fraction) {
  return static_cast<std::uint64_t>(std::llround(fraction * 1e6));
}

}  // namespace detail

// Cells held out in fold `fold`: a window of round(fraction * g) cells over one
// seeded permutation per fraction, starting at fold * g / k. With fraction =
// 1/k the folds are disjoint.
inline std::vector<bool> holdout_mask(std::size_t g, double fraction, int fold, const HoldoutPlan& plan) {
  std::vector<std::size_t> order(g);
  for (std::size_t i = 0; i < g; ++i) order[i] = i;
  Rng rng(derive_seed(plan.seed, detail::fraction_tag(fraction)));
  rng.shuffle(order);
  const std::uint64_t m = kept_count(fraction, g);
  if (g - m < 2) fail(ErrorKind::invalid_argument, "holdout fraction " + format_double(fraction) + " leaves fewer than 2 cells");
  std::vector<bool> held(g, false);
  const std::size_t start = static_cast<std::size_t>(fold) * g / static_cast<std::size_t>(plan.k);
  for (std::uint64_t j = 0; j < m; ++j) held[order[(start + j) % g]] = true;
  return held;
}

// Cluster of the retained cell nearest `cell` (Chebyshev). Among equally
// near cells the cluster holding most of them wins, then the smaller id.
inline int nearest_cluster(const CellKey& cell, const Partition& reduced) {
  if (auto it = reduced.assignment.find(cell); it != reduced.assignment.end()) return it->second;
  std::int64_t lat_lo = reduced.assignment.begin()->first.lat_q, lat_hi = reduced.assignment.rbegin()->first.lat_q;
  std::int64_t lon_lo = std::numeric_limits<std::int64_t>::max(), lon_hi = std::numeric_limits<std::int64_t>::min();
  for (const auto& [k, id] : reduced.assignment) {
    lon_lo = std::min(lon_lo, k.lon_q);
    lon_hi = std::max(lon_hi, k.lon_q);
  }
  const std::int64_t max_r = std::max({std::abs(cell.lat_q - lat_lo), std::abs(cell.lat_q - lat_hi),
                                       std::abs(cell.lon_q - lon_lo), std::abs(cell.lon_q - lon_hi)});
  std::map<int, int> tally;
  for (std::int64_t r = 1; r <= max_r; ++r) {
    auto probe = [&](std::int64_t dl, std::int64_t dn) {
      auto it = reduced.assignment.find(CellKey{cell.lat_q + dl, cell.lon_q + dn, cell.d});
      if (it != reduced.assignment.end()) ++tally[it->second];
    };
    for (std::int64_t t = -r; t <= r; ++t) {
      probe(-r, t);
      probe(r, t);
      if (t != -r && t != r) {
        probe(t, -r);
        probe(t, r);
      }
    }
    if (!tally.empty()) {
      // std::map iterates ids ascending, so strict > keeps the smaller id on ties.
      auto best = tally.begin();
      for (auto it = tally.begin(); it != tally.end(); ++it) {
        if (it->second > best->second) best = it;
      }
      return best->first;
    }
  }
  fail(ErrorKind::invariant, "no retained cell to assign " + to_string(cell) + " to");
}

inline std::map<CellKey, int> restrict_to(const std::map<CellKey, int>& assignment, const GridField& field) {
  std::map<CellKey, int> out;
  for (const auto& [key, id] : assignment) {
    if (field.cells.count(key)) out.emplace(key, id);
  }
  return out;
}

// Reduced field for one fold plus the cells whose prediction is scored.
struct FoldData {
  GridField reduced;
  std::vector<CellKey> scored;
};

inline FoldData make_fold(const GridField& field, double fraction, int fold, const HoldoutPlan& plan) {
  FoldData out;
  out.reduced.d = field.d;
  if (plan.kind == HoldoutKind::cells) {
    const auto held = holdout_mask(field.cells.size(), fraction, fold, plan);
    std::size_t i = 0;
    for (const auto& [key, c] : field.cells) {
      if (held[i++]) {
        out.scored.push_back(key);
      } else {
        out.reduced.cells.emplace(key, c);
      }
    }
    return out;
  }
  const std::uint64_t fold_seed = derive_seed(plan.seed, detail::fraction_tag(fraction) * 1000 + static_cast<std::uint64_t>(fold));
  out.reduced = fraction == 0.0 ? field : subsample_field(field, 1.0 - fraction, plan.post_mode, fold_seed);
  if (out.reduced.cells.size() < 2) fail(ErrorKind::invalid_argument, "holdout fraction " + format_double(fraction) + " leaves fewer than 2 cells");
  for (const auto& [key, c] : field.cells) out.scored.push_back(key);
  return out;
}

// Mean squared difference between each scored cell's cluster prevalence in
// the full-data partition and in the partition re-learned without the held-out
// data. Cell holdout scores the held-out cells; post holdout scores every cell.
inline std::vector<EvalReport> mspe(const GridField& field, const SsomParams& params, const HoldoutPlan& plan) {
  plan.validate();
  const Partition full = run_ssom(field, params);
  std::vector<EvalReport> reports;
  for (double fraction : plan.fractions) {
    auto folds = detail::parallel_map(static_cast<std::size_t>(plan.k), [&](std::size_t fold) {
      const FoldData data = make_fold(field, fraction, static_cast<int>(fold), plan);
      if (data.scored.empty() || fraction == 0.0) return 0.0;
      const Partition reduced = run_ssom(data.reduced, params);
      double sum = 0.0;
      for (const auto& cell : data.scored) {
        const double g = full.clusters.at(full.assignment.at(cell)).prevalence;
        const double ghat = reduced.clusters.at(nearest_cluster(cell, reduced)).prevalence;
        sum += (g - ghat) * (g - ghat);
      }
      return sum / static_cast<double>(data.scored.size());
    });
    reports.push_back(make_report("mspe", fraction, std::move(folds)));
  }
  return reports;
}

// c2 between the full-data partition restricted to the retained cells and
// the partition re-learned on those cells alone.
inline std::vector<EvalReport> grid_robustness(const GridField& field, const SsomParams& params, const HoldoutPlan& plan) {
  plan.validate();
  require(plan.kind == HoldoutKind::cells, "grid robustness needs a cell holdout plan");
  const Partition full = run_ssom(field, params);
  std::vector<EvalReport> reports;
  for (double fraction : plan.fractions) {
    auto folds = detail::parallel_map(static_cast<std::size_t>(plan.k), [&](std::size_t fold) {
      const FoldData data = make_fold(field, fraction, static_cast<int>(fold), plan);
      const Partition reduced = run_ssom(data.reduced, params);
      return c2_similarity(restrict_to(full.assignment, data.reduced), reduced.assignment);
    });
    reports.push_back(make_report("c2", fraction, std::move(folds)));
  }
  return reports;
}

}  // namespace sssom
