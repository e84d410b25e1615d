#include <gtest/gtest.h>

#include <cmath>
#include <deque>

#include "fixtures.hpp"

using namespace sssom;

namespace {

// Nodes laid out on one row at lon_q = 0..n-1 with explicit cluster ids and
// shared weights; every node is within tau of every other.
SsomState row_state(const std::vector<Weight>& inputs, const std::vector<int>& clusters,
                    const std::vector<Weight>& weights, int tau) {
  SsomState s;
  s.tau = tau;
  s.cluster_weight = weights;
  s.cluster_size.assign(weights.size(), 0);
  std::vector<CellKey> cells;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const CellKey key{0, static_cast<std::int64_t>(i), 3};
    s.nodes.push_back({key, inputs[i], clusters[i]});
    ++s.cluster_size[clusters[i]];
    cells.push_back(key);
  }
  s.neighbors = neighbor_lists(cells, tau);
  return s;
}

SsomParams params_with(WinnerRule rule) {
  SsomParams p;
  p.winner_rule = rule;
  return p;
}

}  // namespace

TEST(Schedule, LearningRateDecaysExponentially) {
  SsomParams p;
  EXPECT_DOUBLE_EQ(learning_rate(0, p), 0.1);
  EXPECT_NEAR(learning_rate(50, p), 0.036788, 1e-6);
}

TEST(Schedule, NeighborhoodOfOneAtSizeOne) {
  EXPECT_NEAR(neighborhood(1.0, 1), 0.606531, 1e-6);
  EXPECT_DOUBLE_EQ(neighborhood(0.0, 7), 1.0);
}

TEST(FindWinner, EqualDistanceFavorsTheLargerSurroundingCluster) {
  // Cluster 0 = nodes {1..5} at weight 1, cluster 1 = nodes {0, 6} at weight 0; input 0.5.
  const SsomState s = row_state({{0.5, 0}, {1, 0}, {1, 0}, {1, 0}, {1, 0}, {1, 0}, {0, 0}},
                                {1, 0, 0, 0, 0, 0, 1}, {{1, 0}, {0, 0}}, 6);
  EXPECT_EQ(s.nodes[find_winner(s, 0, params_with(WinnerRule::lexicographic))].cluster, 0);
  // Size-weighted distance: 0.5 * 5 against 0.5 * 2.
  EXPECT_EQ(s.nodes[find_winner(s, 0, params_with(WinnerRule::literal_eq1))].cluster, 1);
}

TEST(FindWinner, LexicographicAndSizeWeightedRulesDisagree) {
  // Cluster 0 = {0,1,2,3} at distance 1 from the input, cluster 1 = {4} at distance 2.
  const SsomState s = row_state({{0, 0}, {0, 0}, {0, 0}, {0, 0}, {0, 0}}, {0, 0, 0, 0, 1}, {{1, 0}, {2, 0}}, 4);
  EXPECT_EQ(s.nodes[find_winner(s, 0, params_with(WinnerRule::lexicographic))].cluster, 0);
  EXPECT_EQ(s.nodes[find_winner(s, 0, params_with(WinnerRule::literal_eq1))].cluster, 1);
}

TEST(FindWinner, SameClusterTieGoesToTheNearestNode) {
  const SsomState s = row_state({{0, 0}, {0, 0}, {0, 0}}, {0, 0, 0}, {{0.3, 0}}, 2);
  EXPECT_EQ(find_winner(s, 0, SsomParams{}), 0u);
  EXPECT_EQ(find_winner(s, 2, SsomParams{}), 2u);
}

TEST(UpdateWeights, SingleNodeMovesByTheLearningRate) {
  SsomState s = row_state({{1, 0}}, {0}, {{0, 0}}, 1);
  update_weights(s, 0, 0, 0.0, SsomParams{});
  EXPECT_DOUBLE_EQ(s.cluster_weight[0][0], 0.1);
  EXPECT_DOUBLE_EQ(s.cluster_weight[0][1], 0.0);
}

TEST(UpdateWeights, SharedWeightIsTheMeanOfMemberUpdates) {
  // Two members of one cluster, one within reach of v and one not: the
  // reconciled weight moves by half the member's update.
  SsomState s;
  s.tau = 1;
  s.cluster_weight = {{0, 0}, {1, 0}};
  s.cluster_size = {2, 1};
  const std::vector<CellKey> cells{{0, 0, 3}, {0, 1, 3}, {0, 5, 3}};
  s.nodes = {{cells[0], {1, 0}, 1}, {cells[1], {0, 0}, 0}, {cells[2], {0, 0}, 0}};
  s.neighbors = neighbor_lists(cells, 1);
  SsomParams p;
  const std::size_t v = 0;
  const std::size_t winner = find_winner(s, v, p);
  EXPECT_EQ(winner, 0u);
  update_weights(s, winner, v, 0.0, p);
  // Node 1 is at Chebyshev 1 from the winner, surround count 1.
  const double member = 0.1 * neighborhood(1.0, 1) * (1.0 - 0.0);
  EXPECT_DOUBLE_EQ(s.cluster_weight[0][0], member / 2.0);
  EXPECT_DOUBLE_EQ(s.cluster_weight[1][0], 1.0);
}

TEST(SplitDisconnected, SeparatesComponentsBeyondTau) {
  SsomState s;
  s.tau = 1;
  s.cluster_weight = {{0.5, 0.5}};
  s.cluster_size = {3};
  const std::vector<CellKey> cells{{0, 0, 3}, {0, 1, 3}, {0, 4, 3}};
  s.nodes = {{cells[0], {}, 0}, {cells[1], {}, 0}, {cells[2], {}, 0}};
  s.neighbors = neighbor_lists(cells, 1);
  EXPECT_EQ(split_disconnected(s), 1u);
  EXPECT_EQ(s.nodes[0].cluster, 0);
  EXPECT_EQ(s.nodes[1].cluster, 0);
  EXPECT_EQ(s.nodes[2].cluster, 1);
  EXPECT_EQ(s.cluster_weight[1], s.cluster_weight[0]);
  EXPECT_EQ(s.cluster_size, (std::vector<std::size_t>{2, 1}));
}

TEST(RunSsom, SingleCellIsOneCluster) {
  const GridField f = fixtures::field_of({{5, 5, 10, 3}});
  const Partition p = run_ssom(f, SsomParams{});
  EXPECT_EQ(p.cluster_count(), 1u);
  EXPECT_EQ(p.clusters.at(0).prevalence, 0.3);
}

TEST(RunSsom, RecoversTwoPlantedHalves) {
  const auto data = fixtures::two_region(30, 30, 0.05, 0.45, 50, 3);
  const Partition p = run_ssom(data.field, SsomParams{});
  EXPECT_GE(c2_similarity(p, data.truth), 0.9);
}

TEST(RunSsom, SameSeedSameBytes) {
  const auto data = fixtures::two_region(20, 20, 0.1, 0.4, 30, 5);
  SsomParams p;
  p.seed = 9;
  EXPECT_EQ(partition_to_csv(run_ssom(data.field, p)), partition_to_csv(run_ssom(data.field, p)));
}

TEST(RunSsom, InvariantsHoldAfterEveryCycle) {
  const auto data = fixtures::two_region(20, 20, 0.1, 0.4, 30, 6);
  SsomParams params;
  int cycles = 0;
  run_ssom(data.field, params, [&](const SsomState& s) {
    ++cycles;
    ASSERT_EQ(s.cycle, cycles);
    std::vector<std::size_t> sizes(s.cluster_weight.size(), 0);
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
      ++sizes[s.nodes[i].cluster];
      ASSERT_EQ(s.weight(i), s.cluster_weight[s.nodes[i].cluster]);
    }
    ASSERT_EQ(sizes, s.cluster_size);
    const Partition p = make_partition(data.field, state_assignment(s));
    ASSERT_TRUE(check_contiguity(p, params.tau).ok) << "cycle " << s.cycle;
  });
  EXPECT_EQ(cycles, params.t_max);
}

TEST(RunSsom, QuantizationErrorSettles) {
  const auto data = fixtures::two_region(30, 30, 0.05, 0.45, 50, 3);
  std::vector<double> qe;
  std::deque<std::map<CellKey, int>> tail;
  run_ssom(data.field, SsomParams{}, [&](const SsomState& s) {
    qe.push_back(quantization_error(s));
    tail.push_back(state_assignment(s));
    if (tail.size() > 10) tail.pop_front();
  });
  ASSERT_EQ(qe.size(), 50u);
  for (const auto& a : tail) EXPECT_DOUBLE_EQ(c2_similarity(a, tail.back()), 1.0);
  const std::vector<double> last(qe.end() - 10, qe.end());
  const double lo = *std::min_element(last.begin(), last.end());
  const double hi = *std::max_element(last.begin(), last.end());
  EXPECT_LE(hi - lo, 0.25 * mean(last));
}

TEST(RunSsom, StableAcrossSeeds) {
  const auto data = fixtures::two_region(30, 30, 0.05, 0.45, 50, 3);
  SsomParams a, b;
  a.seed = 1;
  b.seed = 2;
  EXPECT_GE(c2_similarity(run_ssom(data.field, a), run_ssom(data.field, b)), 0.8);
}

TEST(RunSsom, DistantBlobsWithEqualProportionsStaySeparate) {
  std::vector<fixtures::CellRow> rows;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      rows.push_back({r, c, 10, 2});
      rows.push_back({r, c + 20, 10, 2});
    }
  }
  const Partition p = run_ssom(fixtures::field_of(rows), SsomParams{});
  EXPECT_EQ(p.cluster_count(), 2u);
  EXPECT_NE(p.assignment.at(CellKey{0, 0, 3}), p.assignment.at(CellKey{0, 20, 3}));
}

TEST(RunSsom, RejectsInvalidParameters) {
  const GridField f = fixtures::field_of({{0, 0, 10, 3}});
  SsomParams p;
  p.tau = 0;
  EXPECT_THROW(run_ssom(f, p), Error);
  p = SsomParams{};
  p.eta0 = 1.5;
  EXPECT_THROW(run_ssom(f, p), Error);
  EXPECT_THROW(run_ssom(GridField{}, SsomParams{}), Error);
}

TEST(TraditionalSom, FragmentsAtLeastAsMuchAsSsom) {
  const auto data = fixtures::two_region(20, 20, 0.1, 0.4, 30, 5);
  const Partition ssom = run_ssom(data.field, SsomParams{});
  const Partition som = run_traditional_som(data.field, TraditionalSomParams(SsomParams{}));
  EXPECT_GE(som.cluster_count(), ssom.cluster_count());
  EXPECT_FALSE(som.contiguous);
}

TEST(TraditionalSom, SingleCellAndDeterminism) {
  EXPECT_EQ(run_traditional_som(fixtures::field_of({{1, 1, 5, 1}}), TraditionalSomParams{}).cluster_count(), 1u);
  const auto data = fixtures::two_region(10, 10, 0.1, 0.4, 20, 8);
  EXPECT_EQ(run_traditional_som(data.field, TraditionalSomParams{}), run_traditional_som(data.field, TraditionalSomParams{}));
}

TEST(PolygonPartition, AssignsByCenterAndFallsBackToNearestCentroid) {
  // d = 1: cells (0,0), (0,1), (0,5); west box covers lon < 0.05, east box covers [0.05, 0.2).
  const GridField f = fixtures::field_of({{0, 0, 10, 1}, {0, 1, 10, 5}, {0, 5, 10, 9}}, 1);
  BoundarySet b;
  b.polygons.push_back({"west", {rectangle_ring(-0.05, -0.05, 0.05, 0.05)}});
  b.polygons.push_back({"east", {rectangle_ring(-0.05, 0.05, 0.05, 0.2)}});
  const auto result = polygon_partition(f, b);
  EXPECT_EQ(result.uncovered_cells, 1u);
  EXPECT_EQ(result.partition.assignment.at(CellKey{0, 0, 1}), 0);
  EXPECT_EQ(result.partition.assignment.at(CellKey{0, 1, 1}), 1);
  EXPECT_EQ(result.partition.assignment.at(CellKey{0, 5, 1}), 1);
  EXPECT_EQ(result.partition.clusters.at(1).posts, 20u);
  EXPECT_DOUBLE_EQ(result.partition.clusters.at(1).prevalence, 0.7);
}

TEST(PolygonPartition, PlantedSplitReproducesQuadrants) {
  const auto& data = fixtures::planted_fixture();
  const auto result = polygon_partition(data.field, split_boundaries(fixtures::planted_spec(), 30, 30));
  EXPECT_EQ(result.uncovered_cells, 0u);
  EXPECT_EQ(c2_similarity(result.partition, data.truth), 1.0);
}

TEST(Contiguity, DetectsClustersSplitBeyondTau) {
  const GridField f = fixtures::field_of({{0, 0, 1, 0}, {0, 5, 1, 0}, {1, 0, 1, 0}});
  const Partition p = make_partition(f, fixtures::assignment_of({{{0, 0, 1, 0}, 0}, {{0, 5, 1, 0}, 0}, {{1, 0, 1, 0}, 1}}));
  const auto tight = check_contiguity(p, 3);
  EXPECT_FALSE(tight.ok);
  EXPECT_EQ(tight.offending_clusters, std::vector<int>{0});
  EXPECT_TRUE(check_contiguity(p, 5).ok);
}

TEST(PartitionCsv, RoundTripsAssignmentAndSummary) {
  const auto data = fixtures::two_region(10, 10, 0.1, 0.4, 20, 2);
  const Partition p = run_ssom(data.field, SsomParams{});
  fixtures::TempDir dir("partcsv");
  write_file_atomic(dir / "assignment.csv", partition_to_csv(p));
  write_file_atomic(dir / "clusters.csv", cluster_summary_to_csv(p));
  EXPECT_EQ(load_partition(dir / "assignment.csv", dir / "clusters.csv"), p);
  EXPECT_EQ(make_partition(data.field, load_partition(dir / "assignment.csv").assignment), p);
}

TEST(PartitionCsv, RejectsMalformedRows) {
  EXPECT_THROW(parse_assignment_csv({"bad"}), Error);
  EXPECT_THROW(parse_assignment_csv({"lat_q,lon_q,d,cluster_id", "1,2,3"}), Error);
  EXPECT_THROW(parse_assignment_csv({"lat_q,lon_q,d,cluster_id", "1,2,3,0", "1,2,3,1"}), Error);
  EXPECT_THROW(parse_assignment_csv({"lat_q,lon_q,d,cluster_id", "1,2,9,0"}), Error);
}
