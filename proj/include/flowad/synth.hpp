#pragma once

#include <cstdint>
#include <vector>

#include "flowad/array.hpp"
#include "flowad/dataio.hpp"

namespace flowad
{

/// Multivariate Gaussian fitted to a panel's rows.
struct GaussianGroundTruth
{
  std::vector<double> mean;
  Array covariance;  // N x N

  static constexpr double kShrinkage = 1e-6;
};

struct InjectionSpec
{
  double alpha = 0.05;  // fraction of anomalous time slices
  double beta = 0.5;    // fraction of affected features per slice
  std::size_t slice_len = 6;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Binary T x N anomaly labels.
struct LabelGrid
{
  Array cells;

  static LabelGrid zeros(std::size_t length, std::size_t width) { return {Array::zeros(length, width)}; }
  /// 1 where any feature is labeled.
  std::vector<int> timestamp_labels() const;
  std::size_t anomalous_timestamps() const;
  std::size_t anomalous_cells() const;
};

enum class AnomalyKind { kPoint, kContextual };

/// One injected anomaly: the rows it touched and the features it perturbed.
struct InjectionEvent
{
  AnomalyKind kind = AnomalyKind::kPoint;
  std::vector<std::size_t> row_starts;  // one slice for point, two swapped slices for contextual
  std::vector<std::size_t> features;
};

struct InjectionResult
{
  SeriesPanel panel;
  LabelGrid labels;
  std::vector<InjectionEvent> events;
};

/// Empirical mean and population covariance plus kShrinkage * trace/N on the diagonal.
GaussianGroundTruth fit_gaussian(const SeriesPanel& panel);

/// Lower-triangular L with L L^T = cov. Semi-definite directions get zero
/// columns; throws std::domain_error on a clearly indefinite matrix.
Array cholesky_psd(const Array& cov);

/// Draws `length` rows as mean + L z with z standard normal.
SeriesPanel sample_ground_truth(const GaussianGroundTruth& model, std::size_t length, std::uint64_t seed,
                                Timestamp start, std::int64_t step, std::vector<std::string> feature_ids);

/// Daily-periodic panel for demos and end-to-end checks.
struct SinusoidSpec
{
  std::size_t features = 8;
  std::size_t length = 8640;
  std::int64_t step = 300;
  Timestamp start = 1704067200;  // Monday 2024-01-01 00:00 UTC
  double noise = 0.2;            // stddev of the additive noise
  double correlation = 0.5;      // share of noise variance common to all features
  std::uint64_t seed = 0;

  void validate() const;
};

/// x_i(t) = a_i (sin(w t + p_i) + 0.3 sin(2 w t + q_i)) + noise, with w one
/// cycle per day, a_i in [0.8, 1.2], p_i in [0, pi/2], q_i in [0, 2 pi) and
/// noise that mixes a common and a per-feature standard normal.
SeriesPanel sinusoid_panel(const SinusoidSpec& spec);

/// Injects point and contextual anomalies into ceil(alpha*T/slice_len)
/// non-overlapping slice-aligned slots, half of the slots of each kind.
///
/// Point: each chosen feature in the slot gets x + u, u ~ U(-g, g), with g the
/// largest |x| of that feature on that calendar day.
///
/// Contextual: on the day of a randomly drawn free slot, the free slots with
/// the lowest and highest average (over the chosen features) swap their
/// value blocks feature by feature. A contextual event consumes two slots.
InjectionResult inject_anomalies(const SeriesPanel& panel, const InjectionSpec& spec);

/// Labels as a 0/1 panel sharing the source timestamps and feature ids.
SeriesPanel label_panel(const SeriesPanel& like, const LabelGrid& labels);
LabelGrid labels_from_panel(const SeriesPanel& panel);

}  // namespace flowad
