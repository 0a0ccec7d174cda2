#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <numbers>
#include <set>
#include <sstream>

#include "flowad/cluster.hpp"
#include "flowad/rng.hpp"
#include "support/cluster_oracles.hpp"

namespace flowad
{
namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

using testing::brute_force_dtw;
using testing::purity;
using testing::shape_panel;

Array euclidean_matrix(const std::vector<std::pair<double, double>>& pts)
{
  Array d = Array::zeros(pts.size(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j)
      d.at(i, j) = std::hypot(pts[i].first - pts[j].first, pts[i].second - pts[j].second);
  return d;
}

std::vector<std::pair<double, double>> planted_blobs(std::size_t per_blob, std::uint64_t seed)
{
  Rng rng(seed);
  const std::pair<double, double> centers[] = {{0.0, 0.0}, {20.0, 0.0}, {0.0, 20.0}};
  std::vector<std::pair<double, double>> pts;
  for (const auto& c : centers)
    for (std::size_t k = 0; k < per_blob; ++k) pts.emplace_back(c.first + rng.normal(), c.second + rng.normal());
  return pts;
}

/// Number of runs of finite reachability separated by a value at least
/// `jump` times the running valley level.
std::size_t valley_count(const std::vector<double>& plot, double jump)
{
  std::size_t valleys = 0;
  double level = kInf;
  for (double r : plot)
  {
    if (std::isinf(r) || r > jump * level)
    {
      ++valleys;
      level = kInf;
      continue;
    }
    level = std::isinf(level) ? r : std::max(level, r);
  }
  return valleys;
}


TEST(DtwTest, Examples)
{
  const std::vector<double> x{1.5, -2.0, 3.0, 0.25};
  EXPECT_EQ(dtw_distance(x, x), 0.0);
  EXPECT_EQ(dtw_distance(std::vector<double>{0, 1, 2}, std::vector<double>{0, 1, 2, 2}), 0.0);
  EXPECT_DOUBLE_EQ(dtw_distance(std::vector<double>{0}, std::vector<double>{3, 4}), 5.0);
  EXPECT_THROW(dtw_distance(std::vector<double>{}, x), std::invalid_argument);
}

TEST(DtwTest, MatchesBruteForceAlignmentEnumeration)
{
  Rng rng(2024);
  for (int c = 0; c < 50; ++c)
  {
    std::vector<double> a(1 + rng.below(6)), b(1 + rng.below(6));
    for (double& v : a) v = rng.uniform(-3, 3);
    for (double& v : b) v = rng.uniform(-3, 3);
    EXPECT_EQ(dtw_distance(a, b), brute_force_dtw(a, b)) << "case " << c;
    EXPECT_EQ(dtw_distance(a, b), dtw_distance(b, a));
  }
}

TEST(DtwTest, BandOnlyRestrictsPaths)
{
  Rng rng(5);
  for (int c = 0; c < 20; ++c)
  {
    std::vector<double> a(40), b(35);
    for (double& v : a) v = rng.normal();
    for (double& v : b) v = rng.normal();
    const double full = dtw_distance(a, b);
    EXPECT_EQ(dtw_distance(a, b, 40), full);
    EXPECT_GE(dtw_distance(a, b, 4), full);
    EXPECT_TRUE(std::isfinite(dtw_distance(a, b, 0)));
  }
}

TEST(DistanceMatrixTest, EntriesMatchPairwiseDtw)
{
  const SeriesPanel p = shape_panel(3, 1);
  DistanceOptions opt;
  opt.sample_size = p.width();
  opt.window = PrototypeWindow{0, 100};
  const DistanceMatrix m = build_distance_matrix(p, opt);
  ASSERT_EQ(m.ids, p.feature_ids);
  EXPECT_NO_THROW(m.validate());
  for (std::size_t i = 0; i < m.size(); ++i)
  {
    for (std::size_t j = 0; j < m.size(); ++j)
    {
      const auto a = p.column(i), b = p.column(j);
      EXPECT_EQ(m.values.at(i, j), dtw_distance(std::span(a).first(100), std::span(b).first(100)));
    }
  }
}

TEST(DistanceMatrixTest, SamplingIsSeededAndOrdered)
{
  const SeriesPanel p = shape_panel(4, 2);
  DistanceOptions opt;
  opt.sample_size = 5;
  opt.seed = 11;
  opt.window = PrototypeWindow{0, 50};
  const DistanceMatrix a = build_distance_matrix(p, opt);
  const DistanceMatrix b = build_distance_matrix(p, opt);
  EXPECT_EQ(a.ids, b.ids);
  EXPECT_EQ(a.values.data(), b.values.data());
  EXPECT_EQ(a.ids.size(), 5u);
  EXPECT_TRUE(std::is_sorted(a.ids.begin(), a.ids.end(), [&](const std::string& x, const std::string& y) {
    return std::stoi(x.substr(1)) < std::stoi(y.substr(1));
  }));
  opt.sample_size = p.width() + 1;
  EXPECT_THROW(build_distance_matrix(p, opt), std::invalid_argument);
}

TEST(PrototypeWindowTest, FindsFirstMondayWeek)
{
  // 2019-11-01 is a Friday; the first Monday is three days later.
  const std::size_t T = 12 * 288;
  const SeriesPanel p = make_panel(1572566400, 300, {"a"}, Array::zeros(T, 1));
  const PrototypeWindow w = first_full_week(p);
  EXPECT_EQ(w.begin, 3u * 288);
  EXPECT_EQ(w.length, 7u * 288);
}

TEST(OpticsTest, HandComputedLine)
{
  const Array d = euclidean_matrix({{0, 0}, {1, 0}, {2, 0}, {10, 0}, {11, 0}, {12, 0}});
  const OpticsResult r = optics(d, 2);
  EXPECT_EQ(r.ordering, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5}));
  const std::vector<double> expected{kInf, 1, 1, 8, 1, 1};
  EXPECT_EQ(r.reachability_plot(), expected);
  EXPECT_EQ(r.core_distance, (std::vector<double>{1, 1, 1, 1, 1, 1}));
  EXPECT_EQ(r.predecessor[3], 2u);
  const std::vector<int> labels = extract_xi(r, 0.05, 2, 2);
  EXPECT_EQ(labels[0], labels[2]);
  EXPECT_EQ(labels[3], labels[5]);
  EXPECT_NE(labels[0], labels[3]);
}

TEST(OpticsTest, OrderingIsPermutation)
{
  const Array d = euclidean_matrix(planted_blobs(7, 3));
  const OpticsResult r = optics(d, 5);
  std::vector<std::size_t> sorted = r.ordering;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_THROW(optics(d, 1), std::invalid_argument);
}

TEST(OpticsTest, IdenticalPointsHaveEqualReachability)
{
  const OpticsResult r = optics(Array::zeros(8, 8), 3);
  const auto plot = r.reachability_plot();
  EXPECT_TRUE(std::isinf(plot[0]));
  for (std::size_t i = 1; i < plot.size(); ++i) EXPECT_EQ(plot[i], 0.0);
}

TEST(OpticsTest, TwoSeparatedGroupsGiveTwoValleys)
{
  std::vector<std::pair<double, double>> pts;
  Rng rng(4);
  for (int k = 0; k < 15; ++k) pts.emplace_back(rng.normal() * 0.3, rng.normal() * 0.3);
  for (int k = 0; k < 15; ++k) pts.emplace_back(50 + rng.normal() * 0.3, rng.normal() * 0.3);
  const OpticsResult r = optics(euclidean_matrix(pts), 5);
  EXPECT_EQ(valley_count(r.reachability_plot(), 5.0), 2u);
}

TEST(OpticsTest, InvariantToRelabelingOfLaterPoints)
{
  const auto pts = planted_blobs(6, 9);
  // min_pts = 2 keeps reachability values distinct, so no ties need breaking.
  const OpticsResult base = optics(euclidean_matrix(pts), 2);
  std::vector<std::size_t> perm(pts.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(1);
  rng.shuffle(std::span(perm).subspan(1));  // keep the starting point first
  std::vector<std::pair<double, double>> shuffled;
  for (std::size_t i : perm) shuffled.push_back(pts[i]);
  const OpticsResult moved = optics(euclidean_matrix(shuffled), 2);
  ASSERT_EQ(moved.ordering.size(), base.ordering.size());
  for (std::size_t k = 0; k < base.ordering.size(); ++k)
  {
    EXPECT_EQ(perm[moved.ordering[k]], base.ordering[k]);
    EXPECT_DOUBLE_EQ(moved.reachability_plot()[k], base.reachability_plot()[k]);
  }
}

TEST(ExtractXiTest, SingleValleyIsOneCluster)
{
  std::vector<std::pair<double, double>> pts;
  Rng rng(6);
  for (int k = 0; k < 20; ++k) pts.emplace_back(rng.normal(), rng.normal());
  const DistanceMatrix m{std::vector<std::string>(20, ""), euclidean_matrix(pts)};
  DistanceMatrix named = m;
  for (int k = 0; k < 20; ++k) named.ids[static_cast<std::size_t>(k)] = "p" + std::to_string(k);
  const ClusterAssignment a = cluster_features(named, 5, 0.05);
  EXPECT_EQ(a.cluster_count(), 1u);
  EXPECT_NO_THROW(a.validate());
}

TEST(ExtractXiTest, PlantedBlobsAreRecovered)
{
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u})
  {
    const auto pts = planted_blobs(20, seed);
    DistanceMatrix m{{}, euclidean_matrix(pts)};
    for (std::size_t k = 0; k < pts.size(); ++k) m.ids.push_back("p" + std::to_string(k));
    const ClusterAssignment a = cluster_features(m, 5, 0.05);
    EXPECT_EQ(a.cluster_count(), 3u) << "seed " << seed;
    EXPECT_GE(purity(a.labels, 3, 20), 0.95) << "seed " << seed;
    for (int label : a.labels) EXPECT_GE(label, 0);
    EXPECT_NO_THROW(a.validate());
  }
}

TEST(ExtractXiTest, PlantedShapesViaDtw)
{
  const SeriesPanel p = shape_panel(8, 7);
  DistanceOptions opt;
  opt.sample_size = p.width();
  opt.window = PrototypeWindow{0, 0};
  const ClusterAssignment a = cluster_features(build_distance_matrix(p, opt));
  EXPECT_EQ(a.cluster_count(), 3u);
  EXPECT_GE(purity(a.labels, 3, 8), 0.95);
}

TEST(ExtractXiTest, TooFewPointsFallBackToOneCluster)
{
  DistanceMatrix m{{"a", "b", "c"}, euclidean_matrix({{0, 0}, {1, 0}, {9, 9}})};
  const ClusterAssignment a = cluster_features(m, 5, 0.05);
  EXPECT_EQ(a.cluster_count(), 1u);
  EXPECT_EQ(a.labels, (std::vector<int>{0, 0, 0}));
  EXPECT_THROW(extract_xi(optics(m.values, 2), 1.0, 2, 2), std::invalid_argument);
}

TEST(MedoidTest, MinimizesSummedDistance)
{
  const Array d = euclidean_matrix({{0, 0}, {1, 0}, {2, 0}, {7, 0}});
  const std::vector<std::size_t> all{0, 1, 2, 3};
  EXPECT_EQ(medoid_of(d, all), 1u);  // sums 10, 8, 8, 18; ties go to the first member
  const std::vector<std::size_t> sub{0, 1};
  EXPECT_EQ(medoid_of(d, sub), 0u);  // tie goes to the first member
}

TEST(AssignRemainingTest, MatchesExhaustiveNearestMedoid)
{
  const SeriesPanel p = shape_panel(8, 12);
  DistanceOptions opt;
  opt.sample_size = 15;
  opt.seed = 3;
  opt.window = PrototypeWindow{0, 0};
  ClusterAssignment sampled = cluster_features(build_distance_matrix(p, opt), 3, 0.05);
  sampled.seed = 3;
  const ClusterAssignment all = assign_remaining(p, sampled, PrototypeWindow{0, 0});
  EXPECT_EQ(all.feature_ids.size(), p.width());
  EXPECT_NO_THROW(all.validate());
  for (std::size_t i = 0; i < sampled.feature_ids.size(); ++i)
    EXPECT_EQ(all.label_of(sampled.feature_ids[i]), sampled.labels[i]);
  for (std::size_t i = 0; i < p.width(); ++i)
  {
    const std::string& id = p.feature_ids[i];
    if (std::find(sampled.sample_ids.begin(), sampled.sample_ids.end(), id) != sampled.sample_ids.end()) continue;
    int best = -1;
    double best_d = kInf;
    for (std::size_t c = 0; c < all.medoids.size(); ++c)
    {
      const std::size_t mi = static_cast<std::size_t>(
          std::find(p.feature_ids.begin(), p.feature_ids.end(), all.medoids[c]) - p.feature_ids.begin());
      const double d = dtw_distance(p.column(i), p.column(mi));
      if (d < best_d) best_d = d, best = static_cast<int>(c);
    }
    EXPECT_EQ(all.label_of(id), best) << id;
  }
  EXPECT_GE(purity(all.labels, 3, 8), 0.95);
}

TEST(AssignRemainingTest, CopyOfMedoidJoinsItsCluster)
{
  const SeriesPanel p = shape_panel(6, 13);
  DistanceOptions opt;
  opt.sample_size = p.width();
  opt.window = PrototypeWindow{0, 0};
  const ClusterAssignment a = cluster_features(build_distance_matrix(p, opt), 3, 0.05);
  SeriesPanel wider = p;
  const std::size_t medoid = static_cast<std::size_t>(std::stoi(a.medoids.back().substr(1)));
  Array v = Array::zeros(p.length(), p.width() + 1);
  for (std::size_t t = 0; t < p.length(); ++t)
  {
    for (std::size_t i = 0; i < p.width(); ++i) v.at(t, i) = p.at(t, i);
    v.at(t, p.width()) = p.at(t, medoid);
  }
  wider.values = v;
  wider.feature_ids.push_back("copy");
  const ClusterAssignment all = assign_remaining(wider, a, PrototypeWindow{0, 0});
  EXPECT_EQ(all.label_of("copy"), static_cast<int>(a.cluster_count()) - 1);
}

TEST(AssignmentFileTest, RoundTrip)
{
  DistanceMatrix m{{}, euclidean_matrix(planted_blobs(6, 8))};
  for (std::size_t k = 0; k < 18; ++k) m.ids.push_back("seg_" + std::to_string(k));
  ClusterAssignment a = cluster_features(m, 4, 0.1);
  a.seed = 77;
  std::stringstream ss;
  write_assignment(ss, a);
  EXPECT_NE(ss.str().find("# seed: 77"), std::string::npos);
  const ClusterAssignment b = read_assignment(ss);
  EXPECT_EQ(b.feature_ids, a.feature_ids);
  EXPECT_EQ(b.labels, a.labels);
  EXPECT_EQ(b.medoids, a.medoids);
  EXPECT_EQ(b.sample_ids, a.sample_ids);
  EXPECT_EQ(b.min_pts, 4u);
  EXPECT_EQ(b.xi, 0.1);
  EXPECT_EQ(b.seed, 77u);

  std::stringstream bad("feature_id,cluster_label\nx,7\n");
  EXPECT_THROW(read_assignment(bad), std::invalid_argument);
}

}  // namespace
}  // namespace flowad
