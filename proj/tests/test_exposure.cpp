#include <gtest/gtest.h>

#include <cmath>

#include "fixtures.hpp"

using namespace sssom;

namespace {

// c1 = 2/10, c2 = 0/10, c3 = 4/10. A keeps every cell apart; B merges c1 and c2.
const CellKey c1{0, 0, 3}, c2{0, 1, 3}, c3{0, 5, 3};

GridField field3() { return fixtures::field_of({{0, 0, 10, 2}, {0, 1, 10, 0}, {0, 5, 10, 4}}); }

Partition part_a() { return make_partition(field3(), {{c1, 0}, {c2, 1}, {c3, 2}}); }
Partition part_b() { return make_partition(field3(), {{c1, 0}, {c2, 0}, {c3, 1}}); }

MobilityTrace trace(const std::string& id, std::map<CellKey, std::uint64_t> visits) {
  return MobilityTrace{id, std::move(visits)};
}

}  // namespace

TEST(Prevalence, PooledOverClusterCells) {
  const GridField f = fixtures::field_of({{0, 0, 10, 3}, {1, 0, 10, 1}, {1, 1, 10, 2}, {5, 5, 10, 0}});
  const Partition p = make_partition(f, fixtures::assignment_of({{{0, 0, 10, 3}, 0},
                                                                 {{1, 0, 10, 1}, 1},
                                                                 {{1, 1, 10, 2}, 1},
                                                                 {{5, 5, 10, 0}, 2}}));
  const auto prev = region_prevalence(p, f);
  EXPECT_DOUBLE_EQ(prev.at(0), 0.3);
  EXPECT_DOUBLE_EQ(prev.at(1), 0.15);
  EXPECT_EQ(prev.at(2), 0.0);
}

TEST(Exposure, SingleCellHalfDifference) {
  const auto e = ExposureTable(part_a(), part_b(), field3()).score(trace("p", {{c1, 3}}));
  EXPECT_NEAR(e.exposure, 0.5, 1e-12);
  EXPECT_EQ(e.visits, 3u);
}

TEST(Exposure, VisitWeightedAverage) {
  // 4 visits at |0.2 - 0.1| / 0.2 = 0.5 and 1 visit at 0: 0.5 * 4 / 5.
  EXPECT_NEAR(exposure_difference(trace("p", {{c1, 4}, {c3, 1}}), part_a(), part_b(), field3()), 0.4, 1e-12);
}

TEST(Exposure, ZeroPrevalenceCellsAreFlaggedAndContributeNothing) {
  const auto e = ExposureTable(part_a(), part_b(), field3()).score(trace("p", {{c1, 1}, {c2, 1}}));
  EXPECT_NEAR(e.exposure, 0.25, 1e-12);
  EXPECT_EQ(e.flagged_cells, std::vector<CellKey>{c2});
}

TEST(Exposure, VisitsOutsideTheFieldAreSkipped) {
  const ExposureTable table(part_a(), part_b(), field3());
  const auto e = table.score(trace("p", {{c1, 2}, {CellKey{9, 9, 3}, 5}}));
  EXPECT_EQ(e.skipped_visits, 5u);
  EXPECT_EQ(e.visits, 2u);
  EXPECT_NEAR(e.exposure, 0.5, 1e-12);
  try {
    table.score(trace("lost", {{CellKey{9, 9, 3}, 5}}));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::undefined);
    EXPECT_NE(std::string(err.what()).find("lost"), std::string::npos);
  }
}

TEST(Exposure, IdenticalPartitionsGiveZeroForRandomTraces) {
  const auto& data = fixtures::planted_fixture();
  const ExposureTable table(data.truth, data.truth, data.field);
  Rng rng(77);
  const auto keys = [&] {
    std::vector<CellKey> out;
    for (const auto& [k, c] : data.field.cells) out.push_back(k);
    return out;
  }();
  for (int i = 0; i < 100; ++i) {
    MobilityTrace t{"p" + std::to_string(i), {}};
    const int n = 1 + static_cast<int>(rng.below(30));
    for (int v = 0; v < n; ++v) ++t.visits[keys[rng.below(keys.size())]];
    EXPECT_EQ(table.score(t).exposure, 0.0);
  }
}

TEST(Exposure, ScalingVisitCountsLeavesExposureUnchanged) {
  const ExposureTable table(part_a(), part_b(), field3());
  const double base = table.score(trace("p", {{c1, 4}, {c2, 2}, {c3, 1}})).exposure;
  for (std::uint64_t s : {2u, 7u, 1000u}) {
    EXPECT_NEAR(table.score(trace("p", {{c1, 4 * s}, {c2, 2 * s}, {c3, s}})).exposure, base, 1e-12);
  }
}

TEST(Exposure, PartitionsMissingFieldCellsAreRejected) {
  const Partition partial = make_partition(field3(), {{c1, 0}, {c2, 0}});
  EXPECT_THROW(ExposureTable(part_a(), partial, field3()), Error);
}

TEST(Cohort, SinglePersonHasNoSpread) {
  const auto r = cohort_exposure({trace("only", {{c1, 1}})}, part_a(), part_b(), field3());
  EXPECT_TRUE(r.single_person);
  EXPECT_EQ(r.sd, 0.0);
  EXPECT_NEAR(r.mean, 0.5, 1e-12);
}

TEST(Cohort, MeanAndSampleSd) {
  // 0.2 = (2 * 0.5 + 3 * 0) / 5 and 0.4 as above.
  const auto r = cohort_exposure({trace("a", {{c1, 2}, {c3, 3}}), trace("b", {{c1, 4}, {c3, 1}})}, part_a(),
                                 part_b(), field3());
  ASSERT_EQ(r.persons.size(), 2u);
  EXPECT_NEAR(r.persons[0].exposure, 0.2, 1e-12);
  EXPECT_NEAR(r.mean, 0.3, 1e-12);
  EXPECT_NEAR(r.sd, 0.14142135623730950, 1e-12);
  EXPECT_EQ(r.fraction_over_half, 0.0);
}

TEST(Cohort, InvalidTracesAreListedAndAllInvalidIsAnError) {
  const auto r = cohort_exposure({trace("ok", {{c1, 1}}), trace("gone", {{CellKey{8, 8, 3}, 2}})}, part_a(),
                                 part_b(), field3());
  EXPECT_EQ(r.invalid_persons, std::vector<std::string>{"gone"});
  EXPECT_EQ(r.skipped_visits, 2u);
  EXPECT_THROW(cohort_exposure({trace("gone", {{CellKey{8, 8, 3}, 2}})}, part_a(), part_b(), field3()), Error);
}

TEST(Cohort, ExportedValuesRecomputeExactly) {
  const std::vector<MobilityTrace> traces{trace("a", {{c1, 2}, {c3, 3}}), trace("b", {{c1, 4}, {c2, 9}, {c3, 1}})};
  const auto report = cohort_exposure(traces, part_a(), part_b(), field3());
  fixtures::TempDir dir("exposure");
  write_file_atomic(dir / "exposure.csv", exposure_to_csv(report));
  const auto rows = parse_exposure_csv(read_lines(dir / "exposure.csv"));
  ASSERT_EQ(rows.size(), 2u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].first, traces[i].person_id);
    EXPECT_NEAR(rows[i].second, exposure_difference(traces[i], part_a(), part_b(), field3()), 1e-12);
  }
}

TEST(Coprevalence, ConditionalShareOfPositiveUsers) {
  auto make = [](const std::string& user, bool positive) {
    GeoPost p;
    p.id = user + (positive ? "+" : "-");
    p.user_id = user;
    p.label = positive ? Label::positive : Label::negative;
    return p;
  };
  const std::vector<GeoPost> a{make("u1", true), make("u2", true), make("u3", false)};
  const std::vector<GeoPost> b{make("u2", true), make("u3", true), make("u4", true), make("u1", false)};
  const auto r = user_coprevalence(a, b);
  EXPECT_EQ(r.users_both, 1u);
  EXPECT_DOUBLE_EQ(*r.a_given_b, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(*r.b_given_a, 0.5);

  const auto none = user_coprevalence(a, {make("u1", false)});
  EXPECT_FALSE(none.a_given_b.has_value());
  EXPECT_EQ(*none.b_given_a, 0.0);

  std::vector<GeoPost> anonymous{make("u9", true)};
  anonymous[0].user_id.reset();
  EXPECT_THROW(user_coprevalence(anonymous, b), Error);
}
