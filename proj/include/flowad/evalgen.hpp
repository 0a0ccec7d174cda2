#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "flowad/detect.hpp"
#include "flowad/flow.hpp"
#include "flowad/model.hpp"
#include "flowad/synth.hpp"

namespace flowad
{

struct MetricsRecord
{
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// NaN when no scores were given or only one class is present.
  double auc = std::numeric_limits<double>::quiet_NaN();
};

/// Mann-Whitney statistic with midranks for ties: P(score+ > score-) + P(tie)/2.
double auc_score(std::span<const double> scores, std::span<const int> labels);

MetricsRecord metrics(std::span<const int> flags, std::span<const int> labels, std::span<const double> scores = {});

/// Rolls the model forward from a warm-up panel (raw scale, exactly
/// context_len rows holding the model's features) and returns `length`
/// de-standardized rows that follow it in time.
SeriesPanel generate_sequence(const CondFlowModel& model, const SeriesPanel& warmup, std::size_t length, std::uint64_t seed);

struct GeneratedDataset
{
  SeriesPanel panel;
  LabelGrid labels;
  std::uint64_t seed = 0;
  Timestamp warmup_start = 0;
  Timestamp warmup_end = 0;
};

/// Generates each cluster model's features from the tail of `warmup`, merges
/// them in warm-up column order and injects labeled anomalies.
GeneratedDataset make_labeled_set(std::span<const CondFlowModel> models, const SeriesPanel& warmup, std::size_t length,
                                  const InjectionSpec& spec);

struct ClassifierConfig
{
  std::size_t hidden = 64;
  std::size_t hidden_layers = 2;
  std::size_t max_epochs = 200;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  /// Stop once the epoch loss has not improved by this much for `patience` epochs.
  double tolerance = 1e-5;
  std::size_t patience = 10;
};

struct MlpClassifier
{
  Mlp net;  // relu hidden layers, one logit output
  Standardizer scaler;

  std::size_t input_width() const { return net.input_width(); }
};

/// Mean binary cross-entropy of logits on already standardized rows.
template <typename Ctx, typename V = typename Ctx::Value>
V classifier_loss(const Ctx& ctx, const MlpClassifier& clf, const Array& x, const Array& y)
{
  const V z = mlp_forward(ctx, clf.net, ctx.constant(x));
  return mean(sub(softplus(z), mask_mul(z, y)));
}

MlpClassifier train_classifier(const Array& x, std::span<const int> labels, const ClassifierConfig& config);
MlpClassifier train_classifier(const GeneratedDataset& dataset, const ClassifierConfig& config);

/// Anomaly probability per row of raw-scale x.
std::vector<double> predict(const MlpClassifier& classifier, const Array& x);

struct ExperimentSetup
{
  std::vector<CondFlowModel> models;
  SeriesPanel history;     // clean training panel, raw scale
  SeriesPanel test;        // clean panel following history, raw scale
  std::size_t slice_len = 6;
  double prefix_fraction = 0.3;
  std::size_t grid_size = 1000;
  std::size_t ar_lag = 12;
  std::size_t stride = 0;  // 0 means the prediction length
};

/// Outcome of one replicate: scores for both methods and metrics on the
/// timestamps after the threshold-search prefix.
struct ReplicateResult
{
  InjectionResult injected;
  AnomalyScoreSeries flow_scores;
  AnomalyScoreSeries ar_scores;
  std::vector<int> labels;       // per test timestamp
  std::size_t evaluation_begin = 0;
  std::vector<int> flow_flags;   // per test timestamp, 0 inside the prefix
  std::vector<int> ar_flags;
  MetricsRecord flow;
  MetricsRecord ar;
  bool applicable = false;       // false when the prefix or the rest has a single class
};

ReplicateResult run_replicate(const ExperimentSetup& setup, const InjectionSpec& spec);

struct GridCell
{
  std::string method;
  double alpha = 0.0;
  double beta = 0.0;
  std::size_t replicates = 0;
  std::size_t applicable = 0;
  double recall_mean = 0.0;
  double recall_std = 0.0;
  double f1_mean = 0.0;
  double f1_std = 0.0;
};

std::vector<GridCell> run_effectiveness(const ExperimentSetup& setup, std::span<const double> alphas, double beta,
                                        std::size_t replicates, std::uint64_t seed);
std::vector<GridCell> run_sensitivity(const ExperimentSetup& setup, std::span<const double> betas, double alpha,
                                      std::size_t replicates, std::uint64_t seed);

/// method,alpha,beta,replicates,applicable,recall_mean,recall_std,f1_mean,f1_std;
/// not-applicable cells print NA.
void write_grid_table(const std::filesystem::path& path, std::span<const GridCell> cells);

}  // namespace flowad
