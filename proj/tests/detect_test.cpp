#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flowad/detect.hpp"
#include "support/oracles.hpp"

namespace flowad
{
namespace
{

using testing::direct_kde;

constexpr Timestamp kMonday = 1704067200;  // 2024-01-01 00:00 UTC

SeriesPanel daily_panel(std::size_t days, std::size_t N, std::uint64_t seed, double noise = 0.1)
{
  Rng rng(seed);
  const std::size_t T = days * 288;
  Array values = Array::zeros(T, N);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < N; ++i)
      values.at(t, i) = std::sin(2 * std::numbers::pi * static_cast<double>(t % 288) / 288.0 + static_cast<double>(i)) +
                        noise * rng.normal();
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < N; ++i) ids.push_back("s" + std::to_string(i));
  return make_panel(kMonday, 300, ids, values);
}

CondFlowModel random_model(std::size_t N, std::size_t C, std::size_t P, std::uint64_t seed)
{
  ModelConfig c;
  c.data_width = N;
  c.hidden = {4};
  c.st_hidden = 6;
  c.coupling_blocks = 2;
  c.context_len = C;
  c.pred_len = P;
  CondFlowModel m = CondFlowModel::init(c, seed);
  Rng rng(seed);
  testing::randomize(m.flow, rng, 0.3);
  return m;
}

TEST(ScoreTest, StrideEqualToPredictionCoversOnce)
{
  const SeriesPanel panel = daily_panel(1, 3, 1).slice_rows(0, 60);
  const CondFlowModel model = random_model(3, 6, 4, 1);
  const auto windows = make_windows(panel, 6, 4, 4);
  const AnomalyScoreSeries s = score_windows(model, windows, panel.timestamps);
  const Array lp = window_log_prob(EagerContext{}, model, make_batch(windows), FlowMode::kInference);
  for (std::size_t t = 0; t < 6; ++t)
  {
    EXPECT_EQ(s.coverage[t], 0u);
    EXPECT_TRUE(std::isnan(s.score[t]));
  }
  for (std::size_t k = 0; k < windows.size(); ++k)
    for (std::size_t p = 0; p < 4; ++p)
    {
      const std::size_t row = windows[k].prediction_start() + p;
      EXPECT_EQ(s.coverage[row], 1u);
      EXPECT_EQ(s.score[row], -lp[p * windows.size() + k]);
    }
  EXPECT_EQ(s.scored_indices().front(), 6u);
}

TEST(ScoreTest, OverlapAveragesAndDuplicatesAreIdempotent)
{
  const SeriesPanel panel = daily_panel(1, 3, 2).slice_rows(0, 40);
  const CondFlowModel model = random_model(3, 5, 3, 2);
  auto windows = make_windows(panel, 5, 3, 1);
  const AnomalyScoreSeries a = score_windows(model, windows, panel.timestamps, 7);
  EXPECT_EQ(a.coverage[10], 3u);
  // Row 10 is covered by windows starting at 3, 4, 5 at steps 2, 1, 0.
  double manual = 0.0;
  for (std::size_t start : {3u, 4u, 5u})
  {
    const std::size_t one[] = {start};
    const Array lp = window_log_prob(EagerContext{}, model, make_batch(windows, one), FlowMode::kInference);
    manual -= lp[10 - windows[start].prediction_start()];
  }
  EXPECT_NEAR(a.score[10], manual / 3.0, 1e-12);

  // Duplicating every window leaves each average unchanged.
  auto doubled = windows;
  doubled.insert(doubled.end(), windows.begin(), windows.end());
  const AnomalyScoreSeries b = score_windows(model, doubled, panel.timestamps);
  for (std::size_t t = 0; t < a.size(); ++t)
  {
    EXPECT_EQ(b.coverage[t], 2 * a.coverage[t]);
    if (a.scored(t)) EXPECT_NEAR(a.score[t], b.score[t], 1e-12);
  }

  // With single coverage, duplicating one window changes nothing.
  auto tiled = make_windows(panel, 5, 3, 3);
  const AnomalyScoreSeries c = score_windows(model, tiled, panel.timestamps);
  tiled.push_back(tiled[2]);
  const AnomalyScoreSeries d = score_windows(model, tiled, panel.timestamps);
  for (std::size_t t = 0; t < c.size(); ++t)
    if (c.scored(t)) EXPECT_NEAR(c.score[t], d.score[t], 1e-12);
}

TEST(ScoreTest, ScorePanelSelectsAndStandardizes)
{
  SeriesPanel panel = daily_panel(1, 4, 3).slice_rows(0, 30);
  CondFlowModel model = random_model(2, 4, 2, 3);
  model.feature_ids = {"s3", "s1"};
  model.standardizer = {{0.5, -0.5}, {2.0, 0.5}};
  const AnomalyScoreSeries s = score_panel(model, panel, 2);

  const std::size_t cols[] = {3, 1};
  const SeriesPanel manual = model.standardizer.apply(panel.select_features(cols));
  const AnomalyScoreSeries expected = score_windows(model, make_windows(manual, 4, 2, 2), manual.timestamps);
  for (std::size_t t = 0; t < s.size(); ++t)
    if (expected.scored(t)) EXPECT_EQ(s.score[t], expected.score[t]);

  model.feature_ids = {"s3", "missing"};
  EXPECT_THROW(score_panel(model, panel, 2), std::invalid_argument);
  model.feature_ids = {"s3", "s1"};
  panel.values.at(5, 1) = std::nan("");
  EXPECT_THROW(score_panel(model, panel, 2), std::invalid_argument);
}

TEST(ScoreTest, CombineSumsAndKeepsAbsence)
{
  AnomalyScoreSeries a{{1, 2, 3}, {std::nan(""), 1.0, 2.0}, {0, 1, 1}};
  AnomalyScoreSeries b{{1, 2, 3}, {0.5, 0.25, 4.0}, {1, 1, 2}};
  const AnomalyScoreSeries parts[] = {a, b};
  const AnomalyScoreSeries c = combine_scores(parts);
  EXPECT_FALSE(c.scored(0));
  EXPECT_EQ(c.score[1], 1.25);
  EXPECT_EQ(c.score[2], 6.0);
  b.timestamps[0] = 9;
  const AnomalyScoreSeries bad[] = {a, b};
  EXPECT_THROW(combine_scores(bad), std::invalid_argument);
}

TEST(MetricsTest, CountsAndRatios)
{
  const int flags[] = {1, 1, 0, 0, 1};
  const int labels[] = {1, 0, 1, 0, 1};
  const BinaryMetrics m = binary_metrics(flags, labels);
  EXPECT_EQ(m.tp, 2u);
  EXPECT_EQ(m.fp, 1u);
  EXPECT_EQ(m.fn, 1u);
  EXPECT_EQ(m.tn, 1u);
  EXPECT_DOUBLE_EQ(m.f1(), 2.0 / 3.0);
  EXPECT_EQ(BinaryMetrics{}.f1(), 0.0);
}

/// Best F1 over every distinct decision rule "score > tau", tau ranging over
/// midpoints between sorted scores and both ends.
std::pair<double, double> exhaustive_best(const std::vector<double>& scores, const std::vector<int>& labels)
{
  std::vector<double> s = scores;
  std::sort(s.begin(), s.end());
  std::vector<double> taus{s.front() - 1.0, s.back() + 1.0};
  for (std::size_t k = 0; k + 1 < s.size(); ++k) taus.push_back(0.5 * (s[k] + s[k + 1]));
  double best_f1 = -1.0, best_recall = -1.0;
  for (double tau : taus)
  {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i)
    {
      const bool f = scores[i] > tau;
      tp += f && labels[i];
      fp += f && !labels[i];
      fn += !f && labels[i];
    }
    const double f1 = tp == 0 ? 0.0 : 2 * tp / (2 * tp + fp + fn);
    const double recall = tp / (tp + fn);
    if (f1 > best_f1 + 1e-15 || (std::abs(f1 - best_f1) <= 1e-15 && recall > best_recall))
    {
      best_f1 = f1;
      best_recall = recall;
    }
  }
  return {best_f1, best_recall};
}

TEST(StaticThresholdTest, SeparatedScoresGiveUnitF1)
{
  const double scores[] = {0.1, 0.4, 0.2, 3.0, 0.3, 2.5};
  const int labels[] = {0, 0, 0, 1, 0, 1};
  const StaticThreshold t = static_threshold(scores, labels);
  EXPECT_EQ(t.metrics.f1(), 1.0);
  EXPECT_GT(t.epsilon, 0.4);
  EXPECT_LE(t.epsilon, 2.5);
  /// The lowest epsilon in the gap sits just above the largest normal score.
  EXPECT_EQ(t.epsilon, std::nextafter(0.4, 1.0));
}

TEST(StaticThresholdTest, SingleClassPrefixIsRejected)
{
  const double scores[] = {1.0, 2.0, 3.0};
  const int ones[] = {1, 1, 1}, zeros[] = {0, 0, 0};
  EXPECT_THROW(static_threshold(scores, ones), std::invalid_argument);
  try
  {
    static_threshold(scores, zeros);
  }
  catch (const std::invalid_argument& e)
  {
    EXPECT_NE(std::string(e.what()).find("SPOT"), std::string::npos);
  }
}

TEST(StaticThresholdTest, MatchesExhaustiveSearchOnSmallPrefixes)
{
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial)
  {
    std::vector<double> scores(10);
    std::vector<int> labels(10);
    for (std::size_t i = 0; i < 10; ++i)
    {
      labels[i] = rng.uniform() < 0.3 ? 1 : 0;
      // Coarse values force ties among scores.
      scores[i] = std::round(4.0 * (rng.normal() + 1.5 * labels[i])) / 4.0;
    }
    if (std::count(labels.begin(), labels.end(), 1) == 0) labels[0] = 1;
    if (std::count(labels.begin(), labels.end(), 0) == 0) labels[1] = 0;
    const StaticThreshold t = static_threshold(scores, labels, 1000);
    const auto [f1, recall] = exhaustive_best(scores, labels);
    EXPECT_NEAR(t.metrics.f1(), f1, 1e-12) << "trial " << trial;
    EXPECT_NEAR(t.metrics.recall(), recall, 1e-12) << "trial " << trial;
    // No lower candidate reaches the same F1 and recall.
    for (double s : scores)
      if (s < t.epsilon)
      {
        const BinaryMetrics m = binary_metrics(apply_threshold(scores, s), labels);
        EXPECT_FALSE(m.f1() == t.metrics.f1() && m.recall() == t.metrics.recall());
      }
  }
}

TEST(StaticThresholdTest, CoarseGridIsBestAmongItsCandidates)
{
  Rng rng(5);
  std::vector<double> scores(500);
  std::vector<int> labels(500);
  for (std::size_t i = 0; i < 500; ++i)
  {
    labels[i] = rng.uniform() < 0.1;
    scores[i] = rng.normal() + 2.0 * labels[i];
  }
  const StaticThreshold t = static_threshold(scores, labels, 20);
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 0; k < 20; ++k)
  {
    const double c = sorted[static_cast<std::size_t>(std::llround(k * 499.0 / 19.0))];
    EXPECT_GE(t.metrics.f1(), binary_metrics(apply_threshold(scores, c), labels).f1());
  }
}

std::vector<double> gpd_sample(std::size_t n, double gamma, double sigma, Rng& rng)
{
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i)
  {
    const double u = 1.0 - rng.uniform();
    out.push_back(gamma == 0.0 ? -sigma * std::log(u) : sigma / gamma * (std::pow(u, -gamma) - 1.0));
  }
  return out;
}

TEST(PotTest, ExponentialExcessesGiveZeroShapeUnitScale)
{
  Rng rng(6);
  const auto y = gpd_sample(10000, 0.0, 1.0, rng);
  const GpdFit f = pot_fit(y);
  EXPECT_LT(std::abs(f.gamma), 0.1);
  EXPECT_NEAR(f.sigma, 1.0, 0.1);
}

TEST(PotTest, RecoversHeavyAndLightTails)
{
  Rng rng(7);
  for (const auto [gamma, sigma] : {std::pair{0.3, 2.0}, std::pair{-0.2, 1.0}})
  {
    const auto y = gpd_sample(10000, gamma, sigma, rng);
    const GpdFit f = pot_fit(y);
    EXPECT_NEAR(f.gamma, gamma, 0.06);
    EXPECT_NEAR(f.sigma, sigma, 0.1 * sigma);
    EXPECT_FALSE(f.moment_fallback);
  }
}

TEST(PotTest, ConstantExcessesFallBackToMoments)
{
  const std::vector<double> y(20, 0.7);
  const GpdFit f = pot_fit(y);
  EXPECT_TRUE(f.moment_fallback);
  EXPECT_GT(f.gamma, -1.0);
  EXPECT_GT(f.sigma, 0.0);
  EXPECT_THROW(pot_fit(std::vector<double>(7, 1.0)), std::invalid_argument);
  EXPECT_THROW(pot_fit(std::vector<double>{1, 2, 3, 4, 5, 6, 7, -1}), std::invalid_argument);
}

TEST(PotTest, LikelihoodNeverBelowMomentEstimate)
{
  Rng rng(8);
  for (int trial = 0; trial < 60; ++trial)
  {
    const double gamma = rng.uniform(-0.4, 0.6), sigma = rng.uniform(0.2, 3.0);
    const auto y = gpd_sample(10 + static_cast<std::size_t>(rng.uniform(0, 300)), gamma, sigma, rng);
    const GpdFit f = pot_fit(y);
    const GpdFit m = gpd_moments(y);
    EXPECT_GT(f.gamma, -1.0);
    EXPECT_GE(gpd_log_likelihood(y, f.gamma, f.sigma), gpd_log_likelihood(y, m.gamma, m.sigma)) << "trial " << trial;
  }
}

TEST(PotTest, LikelihoodClosedForms)
{
  const std::vector<double> y{0.5, 1.0, 2.0};
  EXPECT_NEAR(gpd_log_likelihood(y, 0.0, 2.0), -3 * std::log(2.0) - 3.5 / 2.0, 1e-14);
  const double expected = -3 * std::log(2.0) - 1.5 * (std::log(1.5) + std::log(2.0) + std::log(3.0));
  EXPECT_NEAR(gpd_log_likelihood(y, 2.0 / 3.0 * 1.0, 2.0), -3 * std::log(2.0) - 2.5 * (std::log(1 + 1.0 / 6) + std::log(1 + 1.0 / 3) + std::log(1 + 2.0 / 3)), 1e-14);
  EXPECT_NEAR(gpd_log_likelihood(y, 2.0, 2.0), expected, 1e-14);
  EXPECT_EQ(gpd_log_likelihood(y, -1.5, 2.0), -std::numeric_limits<double>::infinity());
}

TEST(SpotTest, QuantileFormulaAndLimit)
{
  EXPECT_NEAR(spot_quantile(2.0, {0.0, 1.5}, 1e-3, 1000, 20), 2.0 - 1.5 * std::log(0.05), 1e-12);
  EXPECT_NEAR(spot_quantile(2.0, {1e-9, 1.5}, 1e-3, 1000, 20), 2.0 - 1.5 * std::log(0.05), 1e-6);
  EXPECT_NEAR(spot_quantile(2.0, {0.5, 1.5}, 1e-3, 1000, 20), 2.0 + 3.0 * (std::pow(0.05, -0.5) - 1.0), 1e-12);
}

TEST(SpotTest, ValuesBelowInitialThresholdNeverMoveTheLevel)
{
  Rng rng(9);
  std::vector<double> init(500);
  for (double& v : init) v = rng.exponential();
  ThresholdState s = spot_init(init, 1e-3, 0.98);
  const double z = s.z_q;
  EXPECT_GE(z, s.t);
  for (int i = 0; i < 1000; ++i)
  {
    EXPECT_FALSE(spot_update(s, s.t * rng.uniform()));
    EXPECT_EQ(s.z_q, z);
  }
  EXPECT_EQ(s.n, 1500u);
}

TEST(SpotTest, ExponentialStreamConvergesToAnalyticQuantile)
{
  Rng rng(10);
  std::vector<double> values(10000);
  for (double& v : values) v = rng.exponential();
  ThresholdState state;
  spot_run(values, {.level = 0.98, .q = 1e-3, .init_size = 1000}, &state);
  EXPECT_NEAR(state.z_q, std::log(1000.0), 0.15 * std::log(1000.0));
}

TEST(SpotTest, FlagsAreExactlyValuesAboveCurrentLevel)
{
  Rng rng(11);
  std::vector<double> init(1000);
  for (double& v : init) v = rng.exponential();
  ThresholdState s = spot_init(init, 1e-3, 0.98);
  for (int i = 0; i < 5000; ++i)
  {
    const double v = rng.uniform() < 0.01 ? 10.0 + rng.exponential() : rng.exponential();
    const double z_before = s.z_q;
    const std::size_t n_before = s.n, excess_before = s.excess_count();
    const bool flag = spot_update(s, v);
    EXPECT_EQ(flag, v > z_before);
    EXPECT_GE(s.n, n_before);
    if (s.excess_count() == excess_before) EXPECT_EQ(s.z_q, z_before);
    EXPECT_GE(s.z_q, s.t);
    EXPECT_LE(s.excess_count(), s.n);
  }
}

TEST(SpotTest, CensoringModeLeavesStateOnAlarm)
{
  Rng rng(16);
  std::vector<double> init(1000);
  for (double& v : init) v = rng.exponential();
  ThresholdState s = spot_init(init, 1e-3, 0.98);
  s.absorb_alarms = false;
  const ThresholdState before = s;
  EXPECT_TRUE(spot_update(s, s.z_q + 1.0));
  EXPECT_EQ(s.n, before.n);
  EXPECT_EQ(s.excesses, before.excesses);
  EXPECT_EQ(s.z_q, before.z_q);

  s.absorb_alarms = true;
  EXPECT_TRUE(spot_update(s, s.z_q + 1.0));
  EXPECT_EQ(s.n, before.n + 1);
  EXPECT_EQ(s.excess_count(), before.excess_count() + 1);
}

TEST(SpotTest, InitValidation)
{
  const std::vector<double> small(50, 1.0);
  EXPECT_THROW(spot_init(small), std::invalid_argument);
  std::vector<double> init(200);
  for (std::size_t i = 0; i < init.size(); ++i) init[i] = static_cast<double>(i);
  EXPECT_THROW(spot_init(init, 0.05, 0.98), std::invalid_argument);
  const ThresholdState s = spot_init(init, 1e-3, 0.98);
  EXPECT_TRUE(s.quantile_fallback);  // 200 * 2% = 4 excesses
  EXPECT_GE(s.z_q, s.t);
}

TEST(KdeTest, KernelAtItsCenter)
{
  const KdeModel m{{0.0}, 0.4, 0.0};
  EXPECT_NEAR(m.density(0.0), 1.0 / (0.4 * std::sqrt(2 * std::numbers::pi)), 1e-15);
}

TEST(KdeTest, MatchesDirectKernelSum)
{
  Rng rng(12);
  std::vector<double> hist(200), val(60);
  for (double& v : hist) v = rng.normal() * 2.0 + 1.0;
  for (double& v : val) v = rng.normal() * 2.0 + 1.0;
  const KdeModel m = kde_fit(hist, val);
  double mean = 0.0, ss = 0.0;
  for (double v : hist) mean += v / 200.0;
  for (double v : hist) ss += (v - mean) * (v - mean);
  EXPECT_NEAR(m.bandwidth, 1.06 * std::sqrt(ss / 199.0) * std::pow(200.0, -0.2), 1e-12);
  for (int q = 0; q < 1000; ++q)
  {
    const double x = rng.uniform(-12.0, 14.0);
    const double d = m.density(x);
    EXPECT_NEAR(d, direct_kde(hist, m.bandwidth, x), 1e-12);
    EXPECT_GE(d, 0.0);
  }
  std::vector<double> dens;
  for (double v : val) dens.push_back(direct_kde(hist, m.bandwidth, v));
  EXPECT_NEAR(m.threshold, quantile(dens, 0.01), 1e-15);
}

TEST(KdeTest, IntegratesToOne)
{
  Rng rng(13);
  std::vector<double> hist(50);
  for (double& v : hist) v = rng.exponential();
  const KdeModel m = kde_fit(hist, hist);
  const double lo = -6.0, hi = 20.0;
  const std::size_t n = 20001;
  const double h = (hi - lo) / (n - 1);
  double total = 0.0;
  for (std::size_t k = 0; k < n; ++k) total += (k == 0 || k == n - 1 ? 0.5 : 1.0) * m.density(lo + h * k);
  EXPECT_NEAR(total * h, 1.0, 1e-3);
}

TEST(KdeTest, BandwidthFloorAndValidation)
{
  const std::vector<double> same(10, 3.0);
  EXPECT_EQ(silverman_bandwidth(same), 1e-3);
  EXPECT_THROW(kde_fit(std::vector<double>(4, 1.0), {}), std::invalid_argument);
  const KdeModel m = kde_fit(std::vector<double>{1, 2, 3, 4, 5}, {});
  EXPECT_GT(m.threshold, 0.0);
}

class DiagnoseTest : public ::testing::Test
{
protected:
  SeriesPanel full = daily_panel(12, 4, 14);
  SeriesPanel history = full.slice_rows(0, 10 * 288);
  SeriesPanel observed = full.slice_rows(10 * 288, 12 * 288);
};

TEST_F(DiagnoseTest, ImplicatesOnlyTheDisplacedFeature)
{
  const std::size_t row = 100;
  const Timestamp ts = observed.timestamps[row];
  // Feature 0 sits on its historical mode; feature 2 is ten deviations out.
  std::vector<double> same_time;
  for (std::size_t d = 0; d < 10; ++d) same_time.push_back(history.at(d * 288 + row, 0));
  observed.values.at(row, 0) = quantile(same_time, 0.5);
  observed.values.at(row, 2) += 10 * 0.1 + 10.0 * 0.2;
  const Timestamp flagged[] = {ts};
  const DiagnosisResult r = diagnose(history, observed, flagged);
  const auto ids = r.features_at(ts);
  EXPECT_NE(std::find(ids.begin(), ids.end(), "s2"), ids.end());
  EXPECT_EQ(std::find(ids.begin(), ids.end(), "s0"), ids.end());
  for (const ImplicatedFeature& f : r.implicated.at(ts)) EXPECT_LT(f.density, f.threshold);
}

TEST_F(DiagnoseTest, CleanFeaturesRarelyImplicated)
{
  std::vector<Timestamp> flagged;
  for (std::size_t t = 0; t < observed.length(); t += 7) flagged.push_back(observed.timestamps[t]);
  const DiagnosisResult r = diagnose(history, observed, flagged);
  std::size_t implicated = 0;
  for (const auto& [ts, list] : r.implicated) implicated += list.size();
  EXPECT_LE(static_cast<double>(implicated), 0.1 * static_cast<double>(flagged.size() * 4));
}

TEST_F(DiagnoseTest, UsesOnlyEarlierSameTimeHistory)
{
  // A wild value at a different time of day must not change the verdict.
  const Timestamp ts = observed.timestamps[50];
  const Timestamp flagged[] = {ts};
  const DiagnosisResult before = diagnose(history, observed, flagged);
  SeriesPanel altered = history;
  for (std::size_t d = 0; d < 10; ++d) altered.values.at(d * 288 + 200, 1) = 1e6;
  const DiagnosisResult after = diagnose(altered, observed, flagged);
  EXPECT_EQ(before.features_at(ts), after.features_at(ts));
}

TEST_F(DiagnoseTest, Validation)
{
  const Timestamp ts[] = {observed.timestamps[0]};
  EXPECT_THROW(diagnose(history, observed, ts, {.sigma = 1}), std::invalid_argument);
  EXPECT_THROW(diagnose(history.slice_rows(0, 300), observed, ts), std::invalid_argument);
  const Timestamp missing[] = {kMonday - 300};
  EXPECT_THROW(diagnose(history, observed, missing), std::invalid_argument);
}

TEST(ArBaselineTest, RecoversNoiselessCoefficients)
{
  const std::size_t T = 300;
  Array values = Array::zeros(T, 2);
  values.at(0, 0) = 1.0;
  values.at(1, 0) = 0.5;
  values.at(0, 1) = 2.0;
  values.at(1, 1) = -1.0;
  for (std::size_t t = 2; t < T; ++t)
  {
    values.at(t, 0) = 0.3 + 1.2 * values.at(t - 1, 0) - 0.5 * values.at(t - 2, 0);
    values.at(t, 1) = -0.1 + 0.4 * values.at(t - 1, 1) + 0.3 * values.at(t - 2, 1);
  }
  const SeriesPanel panel = make_panel(kMonday, 300, {"a", "b"}, values);
  const ArModel m = ar_fit(panel, 2);
  const std::vector<std::vector<double>> truth{{0.3, 1.2, -0.5}, {-0.1, 0.4, 0.3}};
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(m.coefficients[i][k], truth[i][k], 1e-6);
  const AnomalyScoreSeries s = ar_score(m, panel);
  EXPECT_FALSE(s.scored(1));
  for (std::size_t t = 2; t < T; ++t) EXPECT_LT(s.score[t], 1e-8);
}

TEST(ArBaselineTest, SpikeRaisesLocalScore)
{
  SeriesPanel panel = daily_panel(2, 3, 15);
  panel.values.at(300, 1) += 5.0;
  const AnomalyScoreSeries s = ar_baseline(panel, 3);
  const auto peak = std::max_element(s.score.begin() + 3, s.score.end());
  EXPECT_GE(peak - s.score.begin(), 300);
  EXPECT_LE(peak - s.score.begin(), 303);
}

TEST(ArBaselineTest, ConstantSeriesUsesRidge)
{
  Array values = Array::zeros(50, 1);
  for (double& v : values.data()) v = 2.0;
  const AnomalyScoreSeries s = ar_baseline(make_panel(kMonday, 300, {"c"}, values), 2);
  for (std::size_t t = 2; t < 50; ++t) EXPECT_LT(s.score[t], 1e-3);
  EXPECT_THROW(ar_fit(make_panel(kMonday, 300, {"c"}, Array::zeros(2, 1)), 2), std::invalid_argument);
}

TEST(ScoreFileTest, RoundTrip)
{
  const AnomalyScoreSeries s{{kMonday, kMonday + 300, kMonday + 600}, {std::nan(""), 1.25, 3.5}, {0, 1, 1}};
  const int flags[] = {0, 0, 1};
  DiagnosisResult d;
  d.implicated[kMonday + 600] = {{"a", 0.1, 0.2}, {"c", 0.0, 0.2}};
  const auto path = std::filesystem::temp_directory_path() / "flowad_scores_test.csv";
  write_score_file(path, s, flags, &d);
  const ScoreFile f = read_score_file(path);
  EXPECT_EQ(f.series.timestamps, s.timestamps);
  EXPECT_FALSE(f.series.scored(0));
  EXPECT_EQ(f.series.score[2], 3.5);
  EXPECT_EQ(f.flags, (std::vector<int>{0, 0, 1}));
  EXPECT_EQ(f.implicated[2], (std::vector<std::string>{"a", "c"}));
  EXPECT_TRUE(f.implicated[1].empty());
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace flowad
