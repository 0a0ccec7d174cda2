#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "flowad/evalgen.hpp"
#include "support/oracles.hpp"

namespace flowad
{
namespace
{

constexpr Timestamp kMonday = 1704067200;  // 2024-01-01 00:00 UTC

std::vector<std::string> ids_for(std::size_t N, const std::string& prefix = "f")
{
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < N; ++i) ids.push_back(prefix + std::to_string(i));
  return ids;
}

SeriesPanel sine_panel(std::size_t T, std::size_t N, std::uint64_t seed, Timestamp start = kMonday)
{
  Rng rng(seed);
  Array values = Array::zeros(T, N);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < N; ++i)
      values.at(t, i) = std::sin(0.2 * static_cast<double>(t) + static_cast<double>(i)) + 0.1 * rng.normal();
  return make_panel(start, 300, ids_for(N), values);
}

ModelConfig tiny_config(std::size_t N, std::size_t C, std::size_t P)
{
  ModelConfig c;
  c.data_width = N;
  c.hidden = {4, 3};
  c.st_hidden = 5;
  c.coupling_blocks = 2;
  c.context_len = C;
  c.pred_len = P;
  return c;
}

CondFlowModel tiny_model(const SeriesPanel& panel, std::span<const std::string> ids, std::size_t C, std::size_t P,
                         std::uint64_t seed)
{
  CondFlowModel m = CondFlowModel::init(tiny_config(ids.size(), C, P), seed);
  m.feature_ids.assign(ids.begin(), ids.end());
  std::vector<std::size_t> cols;
  for (const std::string& id : ids)
    cols.push_back(static_cast<std::size_t>(std::find(panel.feature_ids.begin(), panel.feature_ids.end(), id) -
                                            panel.feature_ids.begin()));
  m.standardizer = fit_standardizer(panel.select_features(cols));
  return m;
}

/// Pairwise definition: P(s+ > s-) + P(s+ == s-)/2 over all positive-negative pairs.
double pairwise_auc(std::span<const double> s, std::span<const int> y)
{
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0)
      {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

TEST(MetricsTest, PerfectFlagsGiveUnitScores)
{
  const std::vector<int> labels{0, 1, 1, 0, 1, 0};
  const auto m = metrics(labels, labels);
  EXPECT_EQ(m.tp, 3u);
  EXPECT_EQ(m.tn, 3u);
  EXPECT_DOUBLE_EQ(m.precision, 1.0);
  EXPECT_DOUBLE_EQ(m.recall, 1.0);
  EXPECT_DOUBLE_EQ(m.f1, 1.0);
  EXPECT_TRUE(std::isnan(m.auc));
}

TEST(MetricsTest, ConstantScoreGivesHalfAuc)
{
  const std::vector<double> scores(7, 2.5);
  const std::vector<int> labels{0, 1, 0, 0, 1, 1, 0};
  EXPECT_DOUBLE_EQ(auc_score(scores, labels), 0.5);
}

TEST(MetricsTest, AucMatchesPairwiseCounting)
{
  const std::vector<double> scores{0.1, 0.4, 0.35, 0.8, 0.4, 0.2};
  const std::vector<int> labels{0, 0, 1, 1, 1, 0};
  EXPECT_NEAR(auc_score(scores, labels), pairwise_auc(scores, labels), 1e-15);

  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial)
  {
    std::vector<double> s(12);
    std::vector<int> y(12);
    for (std::size_t k = 0; k < s.size(); ++k)
    {
      s[k] = static_cast<double>(rng.below(4));
      y[k] = static_cast<int>(rng.below(2));
    }
    y[0] = 0;
    y[1] = 1;
    ASSERT_NEAR(auc_score(s, y), pairwise_auc(s, y), 1e-15);
  }
}

TEST(MetricsTest, RejectsDegenerateInput)
{
  const std::vector<double> scores{1.0, 2.0};
  const std::vector<int> single{1, 1};
  EXPECT_THROW(auc_score(scores, single), std::invalid_argument);
  EXPECT_THROW(metrics(std::span<const int>{}, std::span<const int>{}), std::invalid_argument);
  const auto m = metrics(single, single, scores);
  EXPECT_TRUE(std::isnan(m.auc));
}

TEST(GenerateTest, LengthEqualToPredictionIsOneIteration)
{
  const std::size_t C = 6, P = 4;
  const SeriesPanel panel = sine_panel(60, 3, 1);
  const auto ids = ids_for(3);
  const CondFlowModel model = tiny_model(panel, ids, C, P, 2);
  const SeriesPanel warmup = panel.slice_rows(panel.length() - C, panel.length());
  const SeriesPanel out = generate_sequence(model, warmup, P, 9);
  ASSERT_EQ(out.length(), P);
  EXPECT_EQ(out.feature_ids, ids);
  EXPECT_EQ(out.timestamps.front(), warmup.timestamps.back() + 300);
  EXPECT_EQ(out.step(), 300);

  /// One iteration draws exactly one P-row sample with the same stream.
  const SeriesPanel longer = generate_sequence(model, warmup, P + 3, 9);
  for (std::size_t t = 0; t < P; ++t)
    for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(longer.at(t, i), out.at(t, i));
  EXPECT_EQ(longer.length(), P + 3);
}

TEST(GenerateTest, FixedSeedIsDeterministic)
{
  const SeriesPanel panel = sine_panel(60, 2, 3);
  const auto ids = ids_for(2);
  Rng rng(4);
  CondFlowModel model = tiny_model(panel, ids, 5, 3, 4);
  testing::randomize(model.flow, rng, 0.3);
  const SeriesPanel warmup = panel.slice_rows(10, 15);
  const SeriesPanel a = generate_sequence(model, warmup, 20, 7);
  const SeriesPanel b = generate_sequence(model, warmup, 20, 7);
  const SeriesPanel c = generate_sequence(model, warmup, 20, 8);
  EXPECT_EQ(a.values.data(), b.values.data());
  EXPECT_NE(a.values.data(), c.values.data());
}

TEST(GenerateTest, IdentityModelReproducesStandardizerMoments)
{
  Rng rng(11);
  const std::size_t T = 200;
  Array values = Array::zeros(T, 2);
  for (std::size_t t = 0; t < T; ++t)
  {
    values.at(t, 0) = 3.0 + 2.0 * rng.normal();
    values.at(t, 1) = -1.0 + 0.5 * rng.normal();
  }
  const SeriesPanel panel = make_panel(kMonday, 60, ids_for(2), values);
  const auto ids = ids_for(2);
  const CondFlowModel model = tiny_model(panel, ids, 4, 5, 1);
  const SeriesPanel out = generate_sequence(model, panel.slice_rows(0, 4), 4000, 12);
  for (std::size_t i = 0; i < 2; ++i)
  {
    double mean = 0.0, var = 0.0;
    for (std::size_t t = 0; t < out.length(); ++t) mean += out.at(t, i);
    mean /= static_cast<double>(out.length());
    for (std::size_t t = 0; t < out.length(); ++t) var += (out.at(t, i) - mean) * (out.at(t, i) - mean);
    const double sd = std::sqrt(var / static_cast<double>(out.length()));
    EXPECT_NEAR(mean, model.standardizer.mean[i], 0.2 * model.standardizer.stddev[i]);
    EXPECT_NEAR(sd, model.standardizer.stddev[i], 0.2 * model.standardizer.stddev[i]);
  }
}

TEST(GenerateTest, RejectsBadWarmup)
{
  const SeriesPanel panel = sine_panel(30, 2, 1);
  const auto ids = ids_for(2);
  const CondFlowModel model = tiny_model(panel, ids, 5, 3, 1);
  EXPECT_THROW(generate_sequence(model, panel.slice_rows(0, 4), 5, 1), std::invalid_argument);
  EXPECT_THROW(generate_sequence(model, panel.slice_rows(0, 5), 0, 1), std::invalid_argument);
  SeriesPanel gappy = panel.slice_rows(0, 5);
  gappy.values.at(2, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(generate_sequence(model, gappy, 5, 1), std::invalid_argument);
}

struct TwoModels
{
  SeriesPanel warmup;
  std::vector<CondFlowModel> models;
};

TwoModels two_models()
{
  TwoModels out;
  out.warmup = sine_panel(80, 4, 21);
  const std::vector<std::string> a{"f2", "f0"}, b{"f1", "f3"};
  out.models.push_back(tiny_model(out.warmup, a, 6, 4, 1));
  out.models.push_back(tiny_model(out.warmup, b, 8, 3, 2));
  return out;
}

TEST(LabeledSetTest, ZeroAlphaLeavesAllLabelsNormal)
{
  const TwoModels m = two_models();
  InjectionSpec spec;
  spec.alpha = 0.0;
  spec.seed = 3;
  const GeneratedDataset d = make_labeled_set(m.models, m.warmup, 300, spec);
  EXPECT_EQ(d.panel.feature_ids, m.warmup.feature_ids);
  EXPECT_EQ(d.panel.length(), 300u);
  const auto labels = d.labels.timestamp_labels();
  EXPECT_EQ(std::accumulate(labels.begin(), labels.end(), 0), 0);
  EXPECT_EQ(d.warmup_end, m.warmup.timestamps.back());
  EXPECT_EQ(d.warmup_start, m.warmup.timestamps[80 - 8]);
}

TEST(LabeledSetTest, LabelFractionTracksAlphaAndSeedsAreDistinct)
{
  const TwoModels m = two_models();
  InjectionSpec spec;
  spec.alpha = 0.1;
  spec.seed = 5;
  const GeneratedDataset d = make_labeled_set(m.models, m.warmup, 600, spec);
  const auto labels = d.labels.timestamp_labels();
  const double fraction = std::accumulate(labels.begin(), labels.end(), 0) / 600.0;
  EXPECT_GE(fraction, 0.1 - 6.0 / 600.0);
  EXPECT_LE(fraction, 0.1 + 12.0 / 600.0);

  spec.seed = 6;
  const GeneratedDataset e = make_labeled_set(m.models, m.warmup, 600, spec);
  EXPECT_NE(d.panel.values.data(), e.panel.values.data());
  spec.seed = 5;
  const GeneratedDataset again = make_labeled_set(m.models, m.warmup, 600, spec);
  EXPECT_EQ(d.panel.values.data(), again.panel.values.data());
}

TEST(LabeledSetTest, RejectsOverlappingFeatures)
{
  TwoModels m = two_models();
  m.models[1].feature_ids = {"f1", "f0"};
  EXPECT_THROW(make_labeled_set(m.models, m.warmup, 50, InjectionSpec{}), std::invalid_argument);
}

TEST(ClassifierTest, SeparableDataReachesPerfectAccuracy)
{
  Rng rng(1);
  const std::size_t n = 200;
  Array x = Array::zeros(n, 2);
  std::vector<int> y(n);
  for (std::size_t k = 0; k < n; ++k)
  {
    x.at(k, 0) = 50.0 + 10.0 * rng.uniform(-1.0, 1.0);
    x.at(k, 1) = rng.uniform(-1.0, 1.0);
    y[k] = x.at(k, 0) + 5.0 * x.at(k, 1) > 50.0 ? 1 : 0;
    x.at(k, 0) += y[k] ? 1.0 : -1.0;
  }
  ClassifierConfig cfg;
  cfg.batch_size = 32;
  cfg.learning_rate = 1e-2;
  cfg.seed = 3;
  const MlpClassifier clf = train_classifier(x, y, cfg);
  const auto p = predict(clf, x);
  std::size_t correct = 0;
  for (std::size_t k = 0; k < n; ++k) correct += (p[k] >= 0.5) == (y[k] == 1);
  EXPECT_EQ(correct, n);
}

TEST(ClassifierTest, LossGradientMatchesFiniteDifferences)
{
  Rng rng(2);
  MlpClassifier clf;
  const std::size_t widths[] = {3, 5, 4, 1};
  clf.net = Mlp::init("c", widths, Activation::kTanh, Activation::kIdentity, rng);
  for (Parameter* p : clf.net.parameters())
    for (double& v : p->value.data()) v = rng.uniform(-0.8, 0.8);
  const Array x = testing::random_array(9, 3, rng);
  Array y = Array::zeros(9, 1);
  for (std::size_t k = 0; k < 9; ++k) y[k] = static_cast<double>(k % 2);
  const double worst = testing::worst_parameter_gradient_error(clf.net.parameters(), [&](const auto& ctx) {
    return classifier_loss(ctx, clf, x, y);
  });
  EXPECT_LE(worst, 1.0);

  /// Closed form at zero logits: log 2 regardless of labels.
  MlpClassifier zero;
  zero.net = Mlp::init("z", widths, Activation::kRelu, Activation::kIdentity, rng);
  EXPECT_NEAR(classifier_loss(EagerContext{}, zero, x, y).item(), std::log(2.0), 1e-12);
}

TEST(ClassifierTest, SingleClassIsRejected)
{
  const Array x = Array::zeros(4, 2);
  const std::vector<int> y(4, 1);
  EXPECT_THROW(train_classifier(x, y, ClassifierConfig{}), std::invalid_argument);
}

ExperimentSetup small_setup()
{
  ExperimentSetup s;
  const SeriesPanel all = sine_panel(700, 3, 31);
  s.history = all.slice_rows(0, 400);
  s.test = all.slice_rows(400, 700);
  s.models.push_back(tiny_model(s.history, ids_for(3), 6, 3, 1));
  s.ar_lag = 4;
  return s;
}

TEST(ExperimentTest, ReplicateEvaluatesAfterPrefix)
{
  const ExperimentSetup s = small_setup();
  InjectionSpec spec;
  spec.alpha = 0.1;
  spec.seed = 4;
  const ReplicateResult r = run_replicate(s, spec);
  ASSERT_EQ(r.labels.size(), s.test.length());
  ASSERT_EQ(r.flow_scores.timestamps, s.test.timestamps);
  ASSERT_EQ(r.ar_scores.timestamps, s.test.timestamps);
  EXPECT_TRUE(r.applicable);
  EXPECT_EQ(r.evaluation_begin, 90u);
  for (std::size_t t = 0; t < r.evaluation_begin; ++t)
  {
    EXPECT_EQ(r.flow_flags[t], 0);
    EXPECT_EQ(r.ar_flags[t], 0);
  }
  const std::span<const int> rest_flags(r.flow_flags.begin() + 90, r.flow_flags.end());
  const std::span<const int> rest_labels(r.labels.begin() + 90, r.labels.end());
  const auto check = metrics(rest_flags, rest_labels);
  EXPECT_EQ(check.tp, r.flow.tp);
  EXPECT_EQ(check.fp, r.flow.fp);
  EXPECT_FALSE(std::isnan(r.flow.auc));
}

TEST(ExperimentTest, ZeroAlphaIsNotApplicable)
{
  const ExperimentSetup s = small_setup();
  InjectionSpec spec;
  spec.alpha = 0.0;
  const ReplicateResult r = run_replicate(s, spec);
  EXPECT_FALSE(r.applicable);

  const double alphas[] = {0.0};
  const auto cells = run_effectiveness(s, alphas, 0.5, 2, 1);
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells[0].method, "CondRealNVP");
  EXPECT_EQ(cells[1].method, "AR");
  EXPECT_EQ(cells[0].applicable, 0u);
  EXPECT_TRUE(std::isnan(cells[0].recall_mean));

  const auto path = std::filesystem::temp_directory_path() / "flowad_grid_na.csv";
  write_grid_table(path, cells);
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  EXPECT_EQ(header, "method,alpha,beta,replicates,applicable,recall_mean,recall_std,f1_mean,f1_std");
  EXPECT_NE(row.find(",NA,NA,NA,NA"), std::string::npos);
  std::filesystem::remove(path);
}

TEST(ExperimentTest, GridsAreDeterministic)
{
  const ExperimentSetup s = small_setup();
  const double betas[] = {0.5, 1.0};
  const auto a = run_sensitivity(s, betas, 0.3, 2, 8);
  const auto b = run_sensitivity(s, betas, 0.3, 2, 8);
  ASSERT_EQ(a.size(), 4u);
  auto same = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
  for (std::size_t k = 0; k < a.size(); ++k)
  {
    EXPECT_GT(a[k].applicable, 0u);
    EXPECT_EQ(a[k].applicable, b[k].applicable);
    EXPECT_TRUE(same(a[k].recall_mean, b[k].recall_mean));
    EXPECT_TRUE(same(a[k].f1_std, b[k].f1_std));
  }
  EXPECT_DOUBLE_EQ(a[0].beta, 0.5);
  EXPECT_DOUBLE_EQ(a[2].beta, 1.0);
}

}  // namespace
}  // namespace flowad
