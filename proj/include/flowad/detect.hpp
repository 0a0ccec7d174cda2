#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flowad/dataio.hpp"
#include "flowad/model.hpp"

namespace flowad
{

/// Per-timestamp anomaly scores (negative log density, higher is worse).
/// Timestamps with coverage 0 were not scored and hold NaN.
struct AnomalyScoreSeries
{
  std::vector<Timestamp> timestamps;
  std::vector<double> score;
  std::vector<std::size_t> coverage;

  std::size_t size() const { return timestamps.size(); }
  bool scored(std::size_t t) const { return coverage[t] > 0; }
  /// Indices with coverage >= 1, in order.
  std::vector<std::size_t> scored_indices() const;
  void validate() const;
};

/// Averages each prediction row's -log p over the windows covering it.
AnomalyScoreSeries score_windows(const CondFlowModel& model, std::span<const SlidingWindow> windows,
                                 std::span<const Timestamp> timestamps, std::size_t chunk = 256);

/// Selects the model's features from a raw panel, standardizes them, builds
/// windows with the given stride and scores them.
AnomalyScoreSeries score_panel(const CondFlowModel& model, const SeriesPanel& raw, std::size_t stride);

/// Joint score of independent cluster models: the sum of their scores.
AnomalyScoreSeries combine_scores(std::span<const AnomalyScoreSeries> parts);

struct BinaryMetrics
{
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  double precision() const;
  double recall() const;
  double f1() const;
};

BinaryMetrics binary_metrics(std::span<const int> flags, std::span<const int> labels);

/// Flags score >= epsilon.
std::vector<int> apply_threshold(std::span<const double> scores, double epsilon);

struct StaticThreshold
{
  double epsilon = 0.0;
  BinaryMetrics metrics;
};

/// F1-optimal epsilon among `grid_size` quantile-spaced score values, each
/// also taken in strict form (the next double above it); ties go to higher
/// recall, then lower epsilon.
StaticThreshold static_threshold(std::span<const double> scores, std::span<const int> labels, std::size_t grid_size = 1000);

struct GpdFit
{
  double gamma = 0.0;
  double sigma = 1.0;
  bool moment_fallback = false;
};

/// Generalized Pareto log-likelihood; -inf outside the support.
double gpd_log_likelihood(std::span<const double> excesses, double gamma, double sigma);

/// Method-of-moments estimate; invalid (gamma <= -1 or sigma <= 0) when the
/// excesses have no spread.
GpdFit gpd_moments(std::span<const double> excesses);

/// Grimshaw profile-likelihood fit with moment fallback.
GpdFit pot_fit(std::span<const double> excesses);

struct SpotOptions
{
  double level = 0.98;
  double q = 1e-4;
  std::size_t init_size = 1000;
  bool absorb_alarms = true;
};

struct ThresholdState
{
  double t = 0.0;
  GpdFit fit;
  std::vector<double> excesses;
  std::size_t n = 0;
  double q = 1e-4;
  double z_q = 0.0;
  /// Too few excesses for a tail fit; z_q is the empirical 1-q quantile.
  bool quantile_fallback = false;
  /// Alarm values still join the excess buffer; when false they leave the
  /// state untouched, which censors the tail and biases z_q downward.
  bool absorb_alarms = true;

  std::size_t excess_count() const { return excesses.size(); }
};

/// Alarm level t + (sigma/gamma)((q n / N_t)^-gamma - 1), or its gamma -> 0 limit.
double spot_quantile(double t, const GpdFit& fit, double q, std::size_t n, std::size_t n_excess);

ThresholdState spot_init(std::span<const double> init, double q = 1e-4, double level = 0.98);

/// Returns true when value > z_q (the level in force at arrival).
bool spot_update(ThresholdState& state, double value);

/// Initializes on the first init_size values and streams the rest; the
/// init values are never flagged.
std::vector<int> spot_run(std::span<const double> scores, const SpotOptions& options, ThresholdState* final_state = nullptr);

struct KdeModel
{
  std::vector<double> samples;
  double bandwidth = 1.0;
  double threshold = 0.0;

  double density(double x) const;
};

/// 1.06 * std * n^(-1/5), floored at 1e-3.
double silverman_bandwidth(std::span<const double> values);

KdeModel kde_fit(std::span<const double> history, std::span<const double> validation);

struct DiagnosisOptions
{
  std::size_t sigma = 12;             // window width in steps
  double validation_fraction = 0.3;  // chronological share of gathered history
  std::size_t min_history = 5;
};

struct ImplicatedFeature
{
  std::string feature_id;
  double density = 0.0;
  double threshold = 0.0;
};

struct DiagnosisResult
{
  std::map<Timestamp, std::vector<ImplicatedFeature>> implicated;

  std::vector<std::string> features_at(Timestamp ts) const;
};

/// For every flagged timestamp and feature, fits a KDE on `history` values
/// from earlier days inside the same time-of-day window of width sigma, and
/// implicates the feature when its observed density falls below threshold.
DiagnosisResult diagnose(const SeriesPanel& history, const SeriesPanel& observed, std::span<const Timestamp> flagged,
                         const DiagnosisOptions& options = {});

struct ArModel
{
  std::size_t lag = 1;
  /// Per feature: intercept followed by lag coefficients (most recent first).
  std::vector<std::vector<double>> coefficients;
};

ArModel ar_fit(const SeriesPanel& panel, std::size_t lag);

/// Mean absolute one-step prediction error across features.
AnomalyScoreSeries ar_score(const ArModel& model, const SeriesPanel& panel);

AnomalyScoreSeries ar_baseline(const SeriesPanel& panel, std::size_t lag);

/// timestamp,score,flag,implicated_features; absent scores are empty fields.
void write_score_file(const std::filesystem::path& path, const AnomalyScoreSeries& series, std::span<const int> flags,
                      const DiagnosisResult* diagnosis = nullptr);

struct ScoreFile
{
  AnomalyScoreSeries series;
  std::vector<int> flags;
  std::vector<std::vector<std::string>> implicated;
};

ScoreFile read_score_file(const std::filesystem::path& path);

}  // namespace flowad
