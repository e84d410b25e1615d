#pragma once

// Exposure difference between two partitions along mobility traces, and
// user-level co-prevalence of two labeled processes.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "sssom/core.hpp"
#include "sssom/grid.hpp"
#include "sssom/ingest.hpp"
#include "sssom/partition.hpp"

namespace sssom {

// Pooled prevalence per cluster: sum of positives over sum of totals of the
// cluster's cells, read from `field`.
inline std::map<int, double> region_prevalence(const Partition& partition, const GridField& field) {
  require(partition.d == field.d, "partition and field precision differ");
  std::map<int, std::pair<std::uint64_t, std::uint64_t>> sums;
  for (const auto& [key, id] : partition.assignment) {
    auto it = field.cells.find(key);
    if (it == field.cells.end()) fail(ErrorKind::invariant, "partition cell " + to_string(key) + " is not in the field");
    auto& [pos, tot] = sums[id];
    if (field.basis == CountBasis::users) {
      pos += it->second.users_positive.value_or(0);
      tot += it->second.users_total.value_or(0);
    } else {
      pos += it->second.positive;
      tot += it->second.total;
    }
  }
  std::map<int, double> out;
  for (const auto& [id, s] : sums) out[id] = s.second ? static_cast<double>(s.first) / static_cast<double>(s.second) : 0.0;
  return out;
}

struct PersonExposure {
  std::string person_id;
  std::uint64_t visits = 0;          // V_i, counted visits
  std::uint64_t skipped_visits = 0;  // visits to cells outside the field
  double exposure = 0.0;             // E_i
  std::vector<CellKey> flagged_cells;  // visited cells whose partition-A prevalence is 0
};

// Per-cell prevalence under two partitions, shared by every trace.
class ExposureTable {
 public:
  ExposureTable(const Partition& a, const Partition& b, const GridField& field) : d_(field.d) {
    require(a.d == field.d && b.d == field.d, "partitions and field must share precision");
    const auto prev_a = region_prevalence(a, field);
    const auto prev_b = region_prevalence(b, field);
    for (const auto& [key, c] : field.cells) {
      auto ia = a.assignment.find(key);
      auto ib = b.assignment.find(key);
      if (ia == a.assignment.end() || ib == b.assignment.end()) {
        fail(ErrorKind::invariant, "cell " + to_string(key) + " is in the field but not in both partitions");
      }
      cells_.emplace(key, std::pair{prev_a.at(ia->second), prev_b.at(ib->second)});
    }
  }

  int d() const { return d_; }

  // E_i = sum_k |E_A(k) - E_B(k)| / E_A(k) * V_ik / V_i.
  PersonExposure score(const MobilityTrace& trace) const {
    PersonExposure out;
    out.person_id = trace.person_id;
    double weighted = 0.0;
    for (const auto& [key, count] : trace.visits) {
      require(key.d == d_, "trace of " + trace.person_id + " is binned at a different precision");
      auto it = cells_.find(key);
      if (it == cells_.end()) {
        out.skipped_visits += count;
        continue;
      }
      out.visits += count;
      const auto [ea, eb] = it->second;
      if (ea == 0.0) {
        out.flagged_cells.push_back(key);
        continue;
      }
      weighted += std::abs(ea - eb) / ea * static_cast<double>(count);
    }
    if (out.visits == 0) {
      fail(ErrorKind::undefined, "person " + trace.person_id + " has no visits to partitioned cells (" +
                                     std::to_string(out.skipped_visits) + " skipped)");
    }
    out.exposure = weighted / static_cast<double>(out.visits);
    return out;
  }

 private:
  int d_;
  std::map<CellKey, std::pair<double, double>> cells_;
};

inline double exposure_difference(const MobilityTrace& trace, const Partition& a, const Partition& b,
                                  const GridField& field) {
  return ExposureTable(a, b, field).score(trace).exposure;
}

struct ExposureReport {
  std::vector<PersonExposure> persons;  // valid traces, input order
  std::vector<std::string> invalid_persons;
  double mean = 0.0;
  double sd = 0.0;  // sample SD; 0 when single_person
  bool single_person = false;
  double fraction_over_half = 0.0;
  std::uint64_t skipped_visits = 0;
  std::uint64_t flagged_cells = 0;
};

inline ExposureReport cohort_exposure(const std::vector<MobilityTrace>& traces, const Partition& a, const Partition& b,
                                      const GridField& field) {
  const ExposureTable table(a, b, field);
  ExposureReport report;
  for (const auto& trace : traces) {
    try {
      report.persons.push_back(table.score(trace));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::undefined) throw;
      report.invalid_persons.push_back(trace.person_id);
      report.skipped_visits += trace.total_visits();
    }
  }
  if (report.persons.empty()) fail(ErrorKind::invalid_argument, "no trace has visits to partitioned cells");
  std::vector<double> e;
  std::size_t over = 0;
  for (const auto& p : report.persons) {
    e.push_back(p.exposure);
    if (p.exposure > 0.5) ++over;
    report.skipped_visits += p.skipped_visits;
    report.flagged_cells += p.flagged_cells.size();
  }
  report.mean = mean(e);
  report.single_person = e.size() == 1;
  report.sd = report.single_person ? 0.0 : sample_sd(e);
  report.fraction_over_half = static_cast<double>(over) / static_cast<double>(e.size());
  return report;
}

// Rows "person_id,visits,skipped_visits,exposure,flagged_cells" and a final
// "__cohort__" row with totals and the mean exposure.
inline std::string exposure_to_csv(const ExposureReport& report) {
  std::string out = "person_id,visits,skipped_visits,exposure,flagged_cells\n";
  std::uint64_t visits = 0;
  for (const auto& p : report.persons) {
    out += p.person_id + "," + std::to_string(p.visits) + "," + std::to_string(p.skipped_visits) + "," +
           format_hex(p.exposure) + "," + std::to_string(p.flagged_cells.size()) + "\n";
    visits += p.visits;
  }
  out += "__cohort__," + std::to_string(visits) + "," + std::to_string(report.skipped_visits) + "," +
         format_hex(report.mean) + "," + std::to_string(report.flagged_cells) + "\n";
  return out;
}

// Per-person exposures from an exported report, without the cohort row.
inline std::vector<std::pair<std::string, double>> parse_exposure_csv(const std::vector<std::string>& lines) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto f = split(lines[i], ',');
    if (f.size() != 5) fail(ErrorKind::malformed_input, "line " + std::to_string(i + 1) + ": expected 5 fields");
    if (f[0] == "__cohort__") continue;
    auto e = parse_hex(f[3]);
    if (!e) fail(ErrorKind::malformed_input, "line " + std::to_string(i + 1) + ": field 'exposure' is not a number");
    out.emplace_back(std::string(f[0]), *e);
  }
  return out;
}

struct Coprevalence {
  std::optional<double> a_given_b;  // undefined when no user is B-positive
  std::optional<double> b_given_a;
  std::size_t users_a = 0;
  std::size_t users_b = 0;
  std::size_t users_both = 0;
};

namespace detail {

inline std::set<std::string> positive_users(const std::vector<GeoPost>& posts, const char* which) {
  std::set<std::string> users;
  for (const auto& p : posts) {
    if (!p.user_id) fail(ErrorKind::invalid_argument, std::string("post ") + p.id + " in set " + which + " has no user_id");
    if (!p.label) fail(ErrorKind::invalid_argument, std::string("post ") + p.id + " in set " + which + " is unlabeled");
    if (*p.label == Label::positive) users.insert(*p.user_id);
  }
  return users;
}

}  // namespace detail

// P(A|B) = |A-positive users within B-positive users| / |B-positive users|,
// and symmetrically.
inline Coprevalence user_coprevalence(const std::vector<GeoPost>& posts_a, const std::vector<GeoPost>& posts_b) {
  const auto ua = detail::positive_users(posts_a, "A");
  const auto ub = detail::positive_users(posts_b, "B");
  Coprevalence out;
  out.users_a = ua.size();
  out.users_b = ub.size();
  for (const auto& u : ua) out.users_both += ub.count(u);
  if (!ub.empty()) out.a_given_b = static_cast<double>(out.users_both) / static_cast<double>(ub.size());
  if (!ua.empty()) out.b_given_a = static_cast<double>(out.users_both) / static_cast<double>(ua.size());
  return out;
}

}  // namespace sssom
