#include "flowad/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "flowad/log.hpp"

namespace flowad
{

namespace
{

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double mean_of(std::span<const double> v)
{
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v)
{
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

AnomalyScoreSeries empty_series(std::span<const Timestamp> timestamps)
{
  AnomalyScoreSeries s;
  s.timestamps.assign(timestamps.begin(), timestamps.end());
  s.score.assign(timestamps.size(), kNaN);
  s.coverage.assign(timestamps.size(), 0);
  return s;
}

}  // namespace

std::vector<std::size_t> AnomalyScoreSeries::scored_indices() const
{
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < size(); ++t)
    if (scored(t)) out.push_back(t);
  return out;
}

void AnomalyScoreSeries::validate() const
{
  if (score.size() != timestamps.size() || coverage.size() != timestamps.size())
    throw std::invalid_argument("score series: field lengths differ");
  for (std::size_t t = 0; t < size(); ++t)
    if (scored(t) && !std::isfinite(score[t]))
      throw std::invalid_argument("score series: non-finite score at row " + std::to_string(t));
}

AnomalyScoreSeries score_windows(const CondFlowModel& model, std::span<const SlidingWindow> windows,
                                 std::span<const Timestamp> timestamps, std::size_t chunk)
{
  AnomalyScoreSeries out = empty_series(timestamps);
  std::vector<double> total(timestamps.size(), 0.0);
  chunk = std::max<std::size_t>(chunk, 1);
  std::vector<std::size_t> idx(windows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t begin = 0; begin < idx.size(); begin += chunk)
  {
    const auto part = std::span<const std::size_t>(idx).subspan(begin, std::min(chunk, idx.size() - begin));
    const Array lp = window_log_prob(EagerContext{}, model, make_batch(windows, part), FlowMode::kInference);
    const std::size_t B = part.size();
    for (std::size_t k = 0; k < B; ++k)
    {
      const SlidingWindow& w = windows[part[k]];
      for (std::size_t p = 0; p < w.prediction_length(); ++p)
      {
        const std::size_t row = w.prediction_start() + p;
        if (row >= timestamps.size()) throw std::out_of_range("score_windows: window runs past the timestamps");
        total[row] -= lp[p * B + k];
        ++out.coverage[row];
      }
    }
  }
  for (std::size_t t = 0; t < total.size(); ++t)
    if (out.coverage[t] > 0) out.score[t] = total[t] / static_cast<double>(out.coverage[t]);
  out.validate();
  return out;
}

AnomalyScoreSeries score_panel(const CondFlowModel& model, const SeriesPanel& raw, std::size_t stride)
{
  std::vector<std::size_t> columns;
  for (const std::string& id : model.feature_ids)
  {
    const auto it = std::find(raw.feature_ids.begin(), raw.feature_ids.end(), id);
    if (it == raw.feature_ids.end()) throw std::invalid_argument("score_panel: feature '" + id + "' is missing from the panel");
    columns.push_back(static_cast<std::size_t>(it - raw.feature_ids.begin()));
  }
  const SeriesPanel selected = model.standardizer.apply(raw.select_features(columns));
  if (selected.has_gaps()) throw std::invalid_argument("score_panel: panel has missing values; impute it first");
  const auto windows = make_windows(selected, model.config.context_len, model.config.pred_len, stride);
  return score_windows(model, windows, selected.timestamps);
}

AnomalyScoreSeries combine_scores(std::span<const AnomalyScoreSeries> parts)
{
  if (parts.empty()) throw std::invalid_argument("combine_scores: nothing to combine");
  AnomalyScoreSeries out = parts[0];
  for (std::size_t k = 1; k < parts.size(); ++k)
  {
    if (parts[k].timestamps != out.timestamps) throw std::invalid_argument("combine_scores: timestamps differ");
    for (std::size_t t = 0; t < out.size(); ++t)
    {
      out.coverage[t] = std::min(out.coverage[t], parts[k].coverage[t]);
      out.score[t] += parts[k].score[t];
    }
  }
  for (std::size_t t = 0; t < out.size(); ++t)
    if (out.coverage[t] == 0) out.score[t] = kNaN;
  return out;
}

double BinaryMetrics::precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }

double BinaryMetrics::recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }

double BinaryMetrics::f1() const
{
  const double denom = static_cast<double>(2 * tp + fp + fn);
  return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(tp) / denom;
}

BinaryMetrics binary_metrics(std::span<const int> flags, std::span<const int> labels)
{
  if (flags.size() != labels.size()) throw std::invalid_argument("binary_metrics: flags and labels differ in length");
  BinaryMetrics m;
  for (std::size_t i = 0; i < flags.size(); ++i)
  {
    const bool f = flags[i] != 0, l = labels[i] != 0;
    if (f && l) ++m.tp;
    else if (f) ++m.fp;
    else if (l) ++m.fn;
    else ++m.tn;
  }
  return m;
}

std::vector<int> apply_threshold(std::span<const double> scores, double epsilon)
{
  std::vector<int> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= epsilon ? 1 : 0;
  return out;
}

StaticThreshold static_threshold(std::span<const double> scores, std::span<const int> labels, std::size_t grid_size)
{
  if (scores.size() != labels.size()) throw std::invalid_argument("static_threshold: scores and labels differ in length");
  const auto positives = std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; });
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size()))
    throw std::invalid_argument("static_threshold: the prefix holds a single class; use SPOT thresholding instead");
  if (grid_size < 2) throw std::invalid_argument("static_threshold: grid_size must be at least 2");
  for (double s : scores)
    if (!std::isfinite(s)) throw std::invalid_argument("static_threshold: scores must be finite");

  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> candidates;
  const std::size_t n = sorted.size();
  if (grid_size >= n)
    candidates = sorted;
  else
    for (std::size_t k = 0; k < grid_size; ++k)
    {
      const double pos = static_cast<double>(k) * static_cast<double>(n - 1) / static_cast<double>(grid_size - 1);
      candidates.push_back(sorted[static_cast<std::size_t>(std::llround(pos))]);
    }
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  /// Each value also enters in strict form (flag score > v), so a gap between
  /// classes can be entered from its lower edge.
  const std::size_t plain = candidates.size();
  for (std::size_t k = 0; k < plain; ++k)
    candidates.push_back(std::nextafter(candidates[k], std::numeric_limits<double>::infinity()));
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  StaticThreshold best{candidates.front(), binary_metrics(apply_threshold(scores, candidates.front()), labels)};
  for (std::size_t k = 1; k < candidates.size(); ++k)
  {
    const BinaryMetrics m = binary_metrics(apply_threshold(scores, candidates[k]), labels);
    const double f1 = m.f1(), best_f1 = best.metrics.f1();
    if (f1 > best_f1 || (f1 == best_f1 && m.recall() > best.metrics.recall())) best = {candidates[k], m};
  }
  return best;
}

double gpd_log_likelihood(std::span<const double> excesses, double gamma, double sigma)
{
  if (!(sigma > 0.0) || !std::isfinite(gamma)) return kNegInf;
  const double n = static_cast<double>(excesses.size());
  if (gamma == 0.0)
  {
    double s = 0.0;
    for (double y : excesses) s += y;
    return -n * std::log(sigma) - s / sigma;
  }
  double s = 0.0;
  for (double y : excesses)
  {
    const double z = 1.0 + gamma * y / sigma;
    if (!(z > 0.0)) return kNegInf;
    s += std::log(z);
  }
  return -n * std::log(sigma) - (1.0 + 1.0 / gamma) * s;
}

GpdFit gpd_moments(std::span<const double> excesses)
{
  const double m = mean_of(excesses);
  double var = 0.0;
  for (double y : excesses) var += (y - m) * (y - m);
  var /= static_cast<double>(excesses.size());
  if (!(var > 0.0)) return {kNaN, kNaN, true};
  const double r = m * m / var;
  return {0.5 * (1.0 - r), 0.5 * m * (1.0 + r), true};
}

namespace
{

bool valid_fit(const GpdFit& f) { return std::isfinite(f.gamma) && std::isfinite(f.sigma) && f.gamma > -1.0 && f.sigma > 0.0; }

/// u(theta) v(theta) - 1, whose nonzero roots are the profile-likelihood stationary points.
double grimshaw_w(std::span<const double> y, double theta)
{
  double u = 0.0, v = 0.0;
  for (double x : y)
  {
    const double z = 1.0 + theta * x;
    u += 1.0 / z;
    v += std::log1p(theta * x);
  }
  const double n = static_cast<double>(y.size());
  return (u / n) * (1.0 + v / n) - 1.0;
}

GpdFit from_theta(std::span<const double> y, double theta)
{
  double g = 0.0;
  for (double x : y) g += std::log1p(theta * x);
  g /= static_cast<double>(y.size());
  return {g, g / theta, false};
}

std::vector<double> geometric(double lo, double hi, std::size_t count)
{
  std::vector<double> out;
  const double step = std::log(hi / lo) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) out.push_back(lo * std::exp(step * static_cast<double>(k)));
  return out;
}

void collect_roots(std::span<const double> y, const std::vector<double>& grid, std::vector<double>& roots)
{
  double prev_theta = grid.front(), prev_w = grimshaw_w(y, prev_theta);
  for (std::size_t k = 1; k < grid.size(); ++k)
  {
    const double theta = grid[k], w = grimshaw_w(y, theta);
    if (std::isfinite(prev_w) && std::isfinite(w) && (prev_w < 0.0) != (w < 0.0))
    {
      double lo = prev_theta, hi = theta, wlo = prev_w;
      for (int it = 0; it < 100; ++it)
      {
        const double mid = 0.5 * (lo + hi), wm = grimshaw_w(y, mid);
        if ((wm < 0.0) == (wlo < 0.0))
        {
          lo = mid;
          wlo = wm;
        }
        else
        {
          hi = mid;
        }
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev_theta = theta;
    prev_w = w;
  }
}

}  // namespace

GpdFit pot_fit(std::span<const double> excesses)
{
  if (excesses.size() < 8) throw std::invalid_argument("pot_fit: need at least 8 excesses, got " + std::to_string(excesses.size()));
  for (double y : excesses)
    if (!(y > 0.0) || !std::isfinite(y)) throw std::invalid_argument("pot_fit: excesses must be positive and finite");

  const auto [min_it, max_it] = std::minmax_element(excesses.begin(), excesses.end());
  const double y_min = *min_it, y_max = *max_it, y_mean = mean_of(excesses);

  std::vector<double> roots;
  if (y_max > y_min)
  {
    // Negative side: theta in (-1/y_max, 0), as a fraction of the bound.
    const std::size_t kPoints = 120;
    std::vector<double> left;
    for (double f : geometric(1e-5, 0.5, kPoints)) left.push_back(-f / y_max);
    for (double f : geometric(0.5, 1e-10, kPoints)) left.push_back(-(1.0 - f) / y_max);
    collect_roots(excesses, left, roots);
    // Positive side up to 2 (mean - min) / min^2.
    const double lo = 1e-5 / y_max, hi = 2.0 * (y_mean - y_min) / (y_min * y_min);
    if (hi > lo) collect_roots(excesses, geometric(lo, hi, 2 * kPoints), roots);
  }

  std::vector<GpdFit> candidates;
  for (double theta : roots)
  {
    const GpdFit f = from_theta(excesses, theta);
    if (valid_fit(f)) candidates.push_back(f);
  }
  const bool fallback = candidates.empty();
  candidates.push_back({0.0, y_mean, fallback});
  if (const GpdFit m = gpd_moments(excesses); valid_fit(m)) candidates.push_back(m);

  GpdFit best = candidates.front();
  double best_ll = gpd_log_likelihood(excesses, best.gamma, best.sigma);
  for (const GpdFit& c : candidates)
  {
    const double ll = gpd_log_likelihood(excesses, c.gamma, c.sigma);
    if (ll > best_ll)
    {
      best = c;
      best_ll = ll;
    }
  }
  best.moment_fallback = fallback;
  return best;
}

double spot_quantile(double t, const GpdFit& fit, double q, std::size_t n, std::size_t n_excess)
{
  const double r = q * static_cast<double>(n) / static_cast<double>(n_excess);
  if (std::abs(fit.gamma) < 1e-12) return t - fit.sigma * std::log(r);
  return t + fit.sigma / fit.gamma * (std::pow(r, -fit.gamma) - 1.0);
}

ThresholdState spot_init(std::span<const double> init, double q, double level)
{
  if (init.size() < 100) throw std::invalid_argument("spot_init: need at least 100 initial values, got " + std::to_string(init.size()));
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("spot_init: level must lie in (0, 1)");
  if (!(q > 0.0 && q < 1.0 - level)) throw std::invalid_argument("spot_init: q must lie in (0, 1 - level)");
  for (double v : init)
    if (!std::isfinite(v)) throw std::invalid_argument("spot_init: initial values must be finite");

  ThresholdState s;
  s.q = q;
  s.n = init.size();
  s.t = quantile(init, level);
  for (double v : init)
    if (v > s.t) s.excesses.push_back(v - s.t);
  if (s.excesses.size() < 8)
  {
    warn("spot_init: only " + std::to_string(s.excesses.size()) + " excesses; using the empirical quantile");
    s.quantile_fallback = true;
    s.z_q = quantile(init, 1.0 - q);
    return s;
  }
  s.fit = pot_fit(s.excesses);
  s.z_q = std::max(s.t, spot_quantile(s.t, s.fit, q, s.n, s.excesses.size()));
  return s;
}

bool spot_update(ThresholdState& state, double value)
{
  if (!std::isfinite(value)) throw std::invalid_argument("spot_update: value must be finite");
  const bool alarm = value > state.z_q;
  if (alarm && !state.absorb_alarms) return true;
  ++state.n;
  if (value > state.t)
  {
    state.excesses.push_back(value - state.t);
    if (state.excesses.size() >= 8)
    {
      try
      {
        const GpdFit fit = pot_fit(state.excesses);
        const double z = spot_quantile(state.t, fit, state.q, state.n, state.excesses.size());
        if (!std::isfinite(z)) throw std::domain_error("non-finite alarm level");
        state.fit = fit;
        state.z_q = std::max(state.t, z);
        state.quantile_fallback = false;
      }
      catch (const std::exception& e)
      {
        warn(std::string("spot_update: refit failed, keeping the previous level: ") + e.what());
      }
    }
  }
  return alarm;
}

std::vector<int> spot_run(std::span<const double> scores, const SpotOptions& options, ThresholdState* final_state)
{
  const std::size_t n_init = std::min(options.init_size, scores.size());
  ThresholdState state = spot_init(scores.first(n_init), options.q, options.level);
  state.absorb_alarms = options.absorb_alarms;
  std::vector<int> flags(scores.size(), 0);
  for (std::size_t i = n_init; i < scores.size(); ++i) flags[i] = spot_update(state, scores[i]) ? 1 : 0;
  if (final_state) *final_state = std::move(state);
  return flags;
}

double KdeModel::density(double x) const
{
  const double norm = 1.0 / (static_cast<double>(samples.size()) * bandwidth * std::sqrt(2.0 * std::numbers::pi));
  double s = 0.0;
  for (double xi : samples)
  {
    const double u = (x - xi) / bandwidth;
    s += std::exp(-0.5 * u * u);
  }
  return norm * s;
}

double silverman_bandwidth(std::span<const double> values)
{
  if (values.empty()) throw std::invalid_argument("silverman_bandwidth: no values");
  const double h = 1.06 * sample_std(values) * std::pow(static_cast<double>(values.size()), -0.2);
  return std::max(h, 1e-3);
}

KdeModel kde_fit(std::span<const double> history, std::span<const double> validation)
{
  if (history.size() < 5) throw std::invalid_argument("kde_fit: need at least 5 history values, got " + std::to_string(history.size()));
  KdeModel m;
  m.samples.assign(history.begin(), history.end());
  m.bandwidth = silverman_bandwidth(history);
  std::span<const double> reference = validation;
  if (validation.empty())
  {
    warn("kde_fit: empty validation set; threshold taken from history densities");
    reference = history;
  }
  std::vector<double> densities;
  densities.reserve(reference.size());
  for (double v : reference) densities.push_back(m.density(v));
  m.threshold = quantile(densities, 0.01);
  return m;
}

std::vector<std::string> DiagnosisResult::features_at(Timestamp ts) const
{
  std::vector<std::string> out;
  if (const auto it = implicated.find(ts); it != implicated.end())
    for (const ImplicatedFeature& f : it->second) out.push_back(f.feature_id);
  return out;
}

DiagnosisResult diagnose(const SeriesPanel& history, const SeriesPanel& observed, std::span<const Timestamp> flagged,
                         const DiagnosisOptions& options)
{
  if (options.sigma < 2) throw std::invalid_argument("diagnose: sigma must be at least 2 steps");
  if (!(options.validation_fraction > 0.0 && options.validation_fraction < 1.0))
    throw std::invalid_argument("diagnose: validation_fraction must lie in (0, 1)");
  if (history.feature_ids != observed.feature_ids) throw std::invalid_argument("diagnose: history and observed features differ");
  const std::int64_t step = history.step();
  if (step <= 0) throw std::invalid_argument("diagnose: history needs at least two rows");
  constexpr std::int64_t kDay = 86400;
  if (history.timestamps.back() - history.timestamps.front() < 2 * kDay)
    throw std::invalid_argument("diagnose: history must span at least two days");

  std::unordered_map<Timestamp, std::size_t> row_of;
  for (std::size_t t = 0; t < observed.length(); ++t) row_of.emplace(observed.timestamps[t], t);
  const std::int64_t half = static_cast<std::int64_t>(options.sigma / 2) * step;

  DiagnosisResult result;
  std::size_t skipped = 0;
  for (Timestamp ts : flagged)
  {
    const auto found = row_of.find(ts);
    if (found == row_of.end()) throw std::invalid_argument("diagnose: timestamp " + format_timestamp(ts) + " is not in the panel");
    std::vector<std::size_t> rows;
    for (std::size_t r = 0; r < history.length(); ++r)
    {
      const Timestamp h = history.timestamps[r];
      if (h >= ts - half) break;
      std::int64_t offset = ((h - ts) % kDay + kDay) % kDay;
      if (offset > kDay / 2) offset -= kDay;
      if (std::abs(offset) <= half) rows.push_back(r);
    }
    auto& implicated = result.implicated[ts];
    for (std::size_t i = 0; i < observed.width(); ++i)
    {
      const double x = observed.at(found->second, i);
      std::vector<double> values;
      for (std::size_t r : rows)
        if (const double v = history.at(r, i); !std::isnan(v)) values.push_back(v);
      const auto n_val = static_cast<std::size_t>(std::floor(options.validation_fraction * static_cast<double>(values.size())));
      if (std::isnan(x) || values.size() - n_val < options.min_history)
      {
        ++skipped;
        continue;
      }
      const std::span<const double> all(values);
      const KdeModel kde = kde_fit(all.first(values.size() - n_val), all.last(n_val));
      const double d = kde.density(x);
      if (d < kde.threshold) implicated.push_back({observed.feature_ids[i], d, kde.threshold});
    }
  }
  if (skipped > 0) warn("diagnose: skipped " + std::to_string(skipped) + " feature checks with insufficient history");
  return result;
}

namespace
{

/// Solves the symmetric positive definite system A x = b by Cholesky; returns
/// false when A is not numerically positive definite.
bool cholesky_solve(std::vector<double> a, std::vector<double> b, std::size_t n, std::vector<double>& x)
{
  for (std::size_t j = 0; j < n; ++j)
  {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 1e-12 * std::max(1.0, std::abs(a[j * n + j])))) return false;
    a[j * n + j] = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i)
    {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / a[j * n + j];
    }
  }
  for (std::size_t i = 0; i < n; ++i)
  {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
    b[i] = s / a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;)
  {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * b[k];
    b[i] = s / a[i * n + i];
  }
  x = std::move(b);
  return true;
}

}  // namespace

ArModel ar_fit(const SeriesPanel& panel, std::size_t lag)
{
  if (lag == 0) throw std::invalid_argument("ar_fit: lag must be at least 1");
  if (panel.length() <= lag) throw std::invalid_argument("ar_fit: panel must be longer than the lag");
  if (panel.has_gaps()) throw std::invalid_argument("ar_fit: panel has missing values");
  ArModel model{lag, {}};
  const std::size_t n = lag + 1;
  for (std::size_t i = 0; i < panel.width(); ++i)
  {
    std::vector<double> ata(n * n, 0.0), atb(n, 0.0), row(n);
    for (std::size_t t = lag; t < panel.length(); ++t)
    {
      row[0] = 1.0;
      for (std::size_t k = 1; k <= lag; ++k) row[k] = panel.at(t - k, i);
      for (std::size_t a = 0; a < n; ++a)
      {
        atb[a] += row[a] * panel.at(t, i);
        for (std::size_t b = 0; b < n; ++b) ata[a * n + b] += row[a] * row[b];
      }
    }
    std::vector<double> coef;
    if (!cholesky_solve(ata, atb, n, coef))
    {
      for (std::size_t a = 0; a < n; ++a) ata[a * n + a] += 1e-6;
      if (!cholesky_solve(ata, atb, n, coef)) throw std::runtime_error("ar_fit: normal equations are singular for feature " + panel.feature_ids[i]);
    }
    model.coefficients.push_back(std::move(coef));
  }
  return model;
}

AnomalyScoreSeries ar_score(const ArModel& model, const SeriesPanel& panel)
{
  if (model.coefficients.size() != panel.width()) throw std::invalid_argument("ar_score: model and panel widths differ");
  AnomalyScoreSeries out = empty_series(panel.timestamps);
  for (std::size_t t = model.lag; t < panel.length(); ++t)
  {
    double err = 0.0;
    for (std::size_t i = 0; i < panel.width(); ++i)
    {
      const auto& c = model.coefficients[i];
      double pred = c[0];
      for (std::size_t k = 1; k <= model.lag; ++k) pred += c[k] * panel.at(t - k, i);
      err += std::abs(panel.at(t, i) - pred);
    }
    out.score[t] = err / static_cast<double>(panel.width());
    out.coverage[t] = 1;
  }
  return out;
}

AnomalyScoreSeries ar_baseline(const SeriesPanel& panel, std::size_t lag) { return ar_score(ar_fit(panel, lag), panel); }

void write_score_file(const std::filesystem::path& path, const AnomalyScoreSeries& series, std::span<const int> flags,
                      const DiagnosisResult* diagnosis)
{
  if (flags.size() != series.size()) throw std::invalid_argument("write_score_file: flags and scores differ in length");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_score_file: cannot open " + path.string());
  out << "timestamp,score,flag,implicated_features\n";
  for (std::size_t t = 0; t < series.size(); ++t)
  {
    out << format_timestamp(series.timestamps[t]) << ',' << (series.scored(t) ? format_double(series.score[t]) : "") << ','
        << flags[t] << ',';
    if (diagnosis)
    {
      const auto ids = diagnosis->features_at(series.timestamps[t]);
      for (std::size_t k = 0; k < ids.size(); ++k) out << (k ? ";" : "") << ids[k];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_score_file: write to " + path.string() + " failed");
}

ScoreFile read_score_file(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_score_file: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_csv_line(line) != std::vector<std::string>{"timestamp", "score", "flag", "implicated_features"})
    throw std::invalid_argument("read_score_file: " + path.string() + ": unexpected header");
  ScoreFile f;
  std::size_t lineno = 1;
  while (std::getline(in, line))
  {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 4) throw std::invalid_argument("read_score_file: " + path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    f.series.timestamps.push_back(parse_timestamp(cells[0]));
    const double s = parse_cell(cells[1], path, lineno);
    f.series.score.push_back(s);
    f.series.coverage.push_back(std::isnan(s) ? 0 : 1);
    f.flags.push_back(cells[2] == "1" ? 1 : 0);
    std::vector<std::string> ids;
    std::stringstream ss(cells[3]);
    for (std::string id; std::getline(ss, id, ';');)
      if (!id.empty()) ids.push_back(id);
    f.implicated.push_back(std::move(ids));
  }
  return f;
}

}  // namespace flowad
