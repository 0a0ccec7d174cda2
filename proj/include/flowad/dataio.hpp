#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "flowad/array.hpp"

namespace flowad
{

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

/// T x N panel of uniformly sampled observations. Missing cells hold NaN.
struct SeriesPanel
{
  std::vector<Timestamp> timestamps;
  std::vector<std::string> feature_ids;
  Array values;

  std::size_t length() const { return timestamps.size(); }
  std::size_t width() const { return feature_ids.size(); }
  /// Sampling interval in seconds.
  std::int64_t step() const;
  bool has_gaps() const;
  double at(std::size_t t, std::size_t i) const { return values.at(t, i); }
  std::vector<double> column(std::size_t i) const;

  /// Throws std::invalid_argument unless timestamps are strictly increasing
  /// with constant spacing, N >= 1, T >= 2 and the value matrix is T x N.
  void validate() const;

  SeriesPanel slice_rows(std::size_t begin, std::size_t end) const;
  SeriesPanel select_features(std::span<const std::size_t> columns) const;
};

/// Builds a panel with `length` timestamps starting at `start`, spaced `step`.
SeriesPanel make_panel(Timestamp start, std::int64_t step, std::vector<std::string> feature_ids, Array values);

/// Speeds per feature and timestamp; free-flow speed is one value per feature.
struct SpeedPanel
{
  SeriesPanel observed;
  SeriesPanel historical;
  std::vector<double> free_flow;
};

struct TimeFeatures
{
  double week_of_year = 0.0;
  double day_of_week = 0.0;
  double hour_of_day = 0.0;

  static constexpr std::size_t kWidth = 3;
};

/// One context block followed by one prediction block.
struct SlidingWindow
{
  Array context;          // context_len x N
  Array prediction;       // pred_len x N
  Array context_time;     // context_len x 3
  Array prediction_time;  // pred_len x 3
  std::size_t start = 0;  // index of the first context row in the source panel

  std::size_t context_length() const { return context.rows(); }
  std::size_t prediction_length() const { return prediction.rows(); }
  /// Index of the first prediction row in the source panel.
  std::size_t prediction_start() const { return start + context.rows(); }
};

struct Standardizer
{
  std::vector<double> mean;
  std::vector<double> stddev;

  static constexpr double kMinStd = 1e-8;

  Array apply(const Array& values) const;
  Array invert(const Array& values) const;
  SeriesPanel apply(const SeriesPanel& panel) const;
  SeriesPanel invert(const SeriesPanel& panel) const;
};

/// (historical - observed) / free_flow.
double congestion_rate(double historical, double observed, double free_flow);

/// Congestion panel from observed and historical speed panels.
SeriesPanel congestion_panel(const SpeedPanel& speeds);

/// Linear-interpolation quantile (type 7); q in [0, 1].
double quantile(std::span<const double> values, double q);

/// 85th percentile of the observations.
double free_flow_speed(std::span<const double> observations);

/// Average per feature and hour of week (Monday 00:00 = slot 0). 168 x N.
struct HistoricalProfile
{
  Array averages;

  static constexpr std::size_t kSlots = 168;

  static HistoricalProfile fit(const SeriesPanel& panel);
  double lookup(Timestamp ts, std::size_t feature) const;
};

std::size_t hour_of_week(Timestamp ts);

using NeighborMap = std::map<std::string, std::vector<std::string>>;

/// Fills each missing cell with the mean of its listed neighbours' values at
/// the same timestamp; cells with no observed neighbour fall back to the
/// historical profile.
SeriesPanel impute(const SeriesPanel& panel, const NeighborMap& neighbors, const HistoricalProfile& history);

/// hour/23, Monday-based weekday/6, (ISO week - 1)/52.
TimeFeatures time_features(Timestamp ts);
Array time_feature_rows(std::span<const Timestamp> timestamps);

std::vector<SlidingWindow> make_windows(const SeriesPanel& panel, std::size_t context_len, std::size_t pred_len,
                                        std::size_t stride);

Standardizer fit_standardizer(const SeriesPanel& panel);

/// Parses "YYYY-MM-DDTHH:MM[:SS][Z]" (a space may replace the T) as UTC.
Timestamp parse_timestamp(const std::string& text);
std::string format_timestamp(Timestamp ts);

/// Shortest decimal text that parses back to the same double; NaN prints empty.
std::string format_double(double v);

/// Splits one CSV line on commas and trims blanks around each cell.
std::vector<std::string> split_csv_line(const std::string& line);
/// Parses a numeric cell; empty or NaN text gives NaN. Errors name path:line.
double parse_cell(const std::string& cell, const std::filesystem::path& path, std::size_t line);

SeriesPanel read_panel(const std::filesystem::path& path);
void write_panel(const std::filesystem::path& path, const SeriesPanel& panel);

/// Reads a one-row file holding one value per feature (the free-flow file).
std::vector<double> read_feature_row(const std::filesystem::path& path, const std::vector<std::string>& feature_ids);

}  // namespace flowad
