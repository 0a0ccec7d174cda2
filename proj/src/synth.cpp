#include "flowad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "flowad/log.hpp"
#include "flowad/rng.hpp"

namespace flowad
{

namespace
{

std::int64_t day_index(Timestamp ts)
{
  return ts >= 0 ? ts / 86400 : -((-ts + 86399) / 86400);
}

/// k distinct indices from [0, n), in the order drawn.
std::vector<std::size_t> choose(std::size_t n, std::size_t k, Rng& rng)
{
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i)
  {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(all[i], all[j]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

void InjectionSpec::validate() const
{
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("injection: alpha must lie in [0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("injection: beta must lie in [0, 1]");
  if (slice_len == 0) throw std::invalid_argument("injection: slice_len must be at least 1");
}

std::vector<int> LabelGrid::timestamp_labels() const
{
  std::vector<int> out(cells.rows(), 0);
  for (std::size_t t = 0; t < cells.rows(); ++t)
    for (std::size_t i = 0; i < cells.cols(); ++i)
      if (cells.at(t, i) != 0.0) out[t] = 1;
  return out;
}

std::size_t LabelGrid::anomalous_timestamps() const
{
  const auto labels = timestamp_labels();
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

std::size_t LabelGrid::anomalous_cells() const
{
  return static_cast<std::size_t>(std::count_if(cells.data().begin(), cells.data().end(), [](double v) { return v != 0.0; }));
}

GaussianGroundTruth fit_gaussian(const SeriesPanel& panel)
{
  const std::size_t T = panel.length(), N = panel.width();
  if (T < 2) throw std::invalid_argument("fit_gaussian: need at least two rows");
  if (T <= N) warn("fit_gaussian: T <= N, covariance is dominated by shrinkage");
  GaussianGroundTruth g;
  g.mean.assign(N, 0.0);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < N; ++i) g.mean[i] += panel.at(t, i);
  for (double& m : g.mean) m /= static_cast<double>(T);
  g.covariance = Array::zeros(N, N);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j <= i; ++j)
        g.covariance.at(i, j) += (panel.at(t, i) - g.mean[i]) * (panel.at(t, j) - g.mean[j]);
  double trace = 0.0;
  for (std::size_t i = 0; i < N; ++i)
  {
    for (std::size_t j = 0; j <= i; ++j)
    {
      g.covariance.at(i, j) /= static_cast<double>(T);
      g.covariance.at(j, i) = g.covariance.at(i, j);
    }
    trace += g.covariance.at(i, i);
  }
  const double shrink = GaussianGroundTruth::kShrinkage * trace / static_cast<double>(N);
  for (std::size_t i = 0; i < N; ++i) g.covariance.at(i, i) += shrink;
  return g;
}

Array cholesky_psd(const Array& cov)
{
  const std::size_t n = cov.rows();
  if (cov.cols() != n) throw ShapeError("cholesky: matrix is " + to_string(cov.shape()));
  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(cov.at(i, i)));
  const double tol = 1e-12 * std::max(scale, 1e-300);
  Array L = Array::zeros(n, n);
  for (std::size_t j = 0; j < n; ++j)
  {
    double d = cov.at(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= L.at(j, k) * L.at(j, k);
    if (d < -1e-9 * std::max(scale, 1.0)) throw std::domain_error("cholesky: matrix is not positive semi-definite");
    if (d <= tol) continue;
    const double ljj = std::sqrt(d);
    L.at(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i)
    {
      double s = cov.at(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= L.at(i, k) * L.at(j, k);
      L.at(i, j) = s / ljj;
    }
  }
  return L;
}

SeriesPanel sample_ground_truth(const GaussianGroundTruth& model, std::size_t length, std::uint64_t seed,
                                Timestamp start, std::int64_t step, std::vector<std::string> feature_ids)
{
  const std::size_t N = model.mean.size();
  if (model.covariance.rows() != N || model.covariance.cols() != N || feature_ids.size() != N)
  {
    throw std::invalid_argument("sample_ground_truth: mean, covariance and feature ids disagree in width");
  }
  Array L;
  try
  {
    L = cholesky_psd(model.covariance);
  }
  catch (const std::domain_error&)
  {
    warn("sample_ground_truth: covariance factorization failed; retrying with extra shrinkage");
    Array cov = model.covariance;
    double trace = 0.0;
    for (std::size_t i = 0; i < N; ++i) trace += std::abs(cov.at(i, i));
    for (std::size_t i = 0; i < N; ++i) cov.at(i, i) += 1e-3 * trace / static_cast<double>(N);
    L = cholesky_psd(cov);
  }
  Rng rng(seed);
  Array values = Array::zeros(length, N);
  std::vector<double> z(N);
  for (std::size_t t = 0; t < length; ++t)
  {
    for (double& v : z) v = rng.normal();
    for (std::size_t i = 0; i < N; ++i)
    {
      double acc = model.mean[i];
      for (std::size_t k = 0; k <= i; ++k) acc += L.at(i, k) * z[k];
      values.at(t, i) = acc;
    }
  }
  return make_panel(start, step, std::move(feature_ids), std::move(values));
}

void SinusoidSpec::validate() const
{
  if (features == 0 || length < 2) throw std::invalid_argument("sinusoid: need at least one feature and two rows");
  if (step <= 0) throw std::invalid_argument("sinusoid: step must be positive");
  if (!(noise >= 0.0)) throw std::invalid_argument("sinusoid: noise must be nonnegative");
  if (!(correlation >= 0.0 && correlation <= 1.0)) throw std::invalid_argument("sinusoid: correlation must lie in [0, 1]");
}

SeriesPanel sinusoid_panel(const SinusoidSpec& spec)
{
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t N = spec.features;
  std::vector<double> amp(N), phase(N), phase2(N);
  std::vector<std::string> ids(N);
  for (std::size_t i = 0; i < N; ++i)
  {
    amp[i] = rng.uniform(0.8, 1.2);
    phase[i] = rng.uniform(0.0, 0.5 * std::numbers::pi);
    phase2[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    ids[i] = "s" + std::to_string(i);
  }
  const double common = std::sqrt(spec.correlation), own = std::sqrt(1.0 - spec.correlation);
  const double omega = 2.0 * std::numbers::pi / 86400.0;
  Array values = Array::zeros(spec.length, N);
  for (std::size_t t = 0; t < spec.length; ++t)
  {
    const double secs = static_cast<double>(spec.start % 86400 + static_cast<std::int64_t>(t) * spec.step);
    const double shared = rng.normal();
    for (std::size_t i = 0; i < N; ++i)
    {
      const double wave = std::sin(omega * secs + phase[i]) + 0.3 * std::sin(2.0 * omega * secs + phase2[i]);
      values.at(t, i) = amp[i] * wave + spec.noise * (common * shared + own * rng.normal());
    }
  }
  return make_panel(spec.start, spec.step, std::move(ids), std::move(values));
}

InjectionResult inject_anomalies(const SeriesPanel& panel, const InjectionSpec& spec)
{
  spec.validate();
  const std::size_t T = panel.length(), N = panel.width(), L = spec.slice_len;
  if (L > T) throw std::invalid_argument("inject_anomalies: slice_len exceeds panel length");

  InjectionResult result{panel, LabelGrid::zeros(T, N), {}};
  const double wanted = spec.alpha * static_cast<double>(T);
  if (wanted < static_cast<double>(L))
  {
    if (spec.alpha > 0.0) warn("inject_anomalies: alpha*T is below one slice; no anomalies injected");
    return result;
  }
  const std::size_t slots = T / L;
  std::size_t budget = std::min(static_cast<std::size_t>(std::ceil(wanted / static_cast<double>(L))), slots);
  const std::size_t per_slice = std::min(N, static_cast<std::size_t>(std::ceil(spec.beta * static_cast<double>(N))));
  if (per_slice == 0)
  {
    warn("inject_anomalies: beta selects no features; no anomalies injected");
    return result;
  }

  std::vector<std::int64_t> day(T);
  for (std::size_t t = 0; t < T; ++t) day[t] = day_index(panel.timestamps[t]);
  // Largest |x| per feature and calendar day, taken from the clean panel.
  std::vector<std::vector<double>> magnitude(N, std::vector<double>(T, 0.0));
  for (std::size_t i = 0; i < N; ++i)
  {
    std::size_t begin = 0;
    while (begin < T)
    {
      std::size_t end = begin;
      double g = 0.0;
      while (end < T && day[end] == day[begin]) g = std::max(g, std::abs(panel.at(end++, i)));
      for (std::size_t t = begin; t < end; ++t) magnitude[i][t] = g;
      begin = end;
    }
  }

  Rng rng(spec.seed);
  std::vector<bool> occupied(slots, false);
  std::size_t free_slots = slots;
  std::size_t point_slots = 0, contextual_slots = 0;
  Array& x = result.panel.values;
  Array& labels = result.labels.cells;

  auto random_free_slot = [&]() {
    std::size_t k = static_cast<std::size_t>(rng.below(free_slots));
    for (std::size_t s = 0; s < slots; ++s)
    {
      if (occupied[s]) continue;
      if (k-- == 0) return s;
    }
    return slots;
  };
  auto take = [&](std::size_t s) {
    occupied[s] = true;
    --free_slots;
    --budget;
  };

  while (budget > 0 && free_slots > 0)
  {
    const std::size_t s = random_free_slot();
    const std::vector<std::size_t> features = choose(N, per_slice, rng);
    bool contextual = budget >= 2 && contextual_slots < point_slots;
    std::size_t low = slots, high = slots;
    if (contextual)
    {
      // Free slots lying entirely on the drawn slot's day.
      const std::int64_t d = day[s * L];
      double low_avg = 0.0, high_avg = 0.0;
      for (std::size_t c = 0; c < slots; ++c)
      {
        if (occupied[c] || day[c * L] != d || day[c * L + L - 1] != d) continue;
        double avg = 0.0;
        for (std::size_t i : features)
          for (std::size_t t = c * L; t < (c + 1) * L; ++t) avg += x.at(t, i);
        if (low == slots || avg < low_avg) low = c, low_avg = avg;
        if (high == slots || avg > high_avg) high = c, high_avg = avg;
      }
      contextual = low != slots && high != slots && low != high;
    }

    InjectionEvent event;
    event.features = features;
    if (contextual)
    {
      event.kind = AnomalyKind::kContextual;
      event.row_starts = {low * L, high * L};
      for (std::size_t i : features)
      {
        for (std::size_t r = 0; r < L; ++r)
        {
          const std::size_t a = low * L + r, b = high * L + r;
          std::swap(x.at(a, i), x.at(b, i));
          if (x.at(a, i) != panel.at(a, i)) labels.at(a, i) = 1.0;
          if (x.at(b, i) != panel.at(b, i)) labels.at(b, i) = 1.0;
        }
      }
      take(low);
      take(high);
      contextual_slots += 2;
    }
    else
    {
      event.kind = AnomalyKind::kPoint;
      event.row_starts = {s * L};
      for (std::size_t i : features)
      {
        for (std::size_t t = s * L; t < (s + 1) * L; ++t)
        {
          const double g = magnitude[i][t];
          const double u = rng.uniform(-g, g);
          x.at(t, i) += u;
          if (x.at(t, i) != panel.at(t, i)) labels.at(t, i) = 1.0;
        }
      }
      take(s);
      ++point_slots;
    }
    result.events.push_back(std::move(event));
  }
  return result;
}

SeriesPanel label_panel(const SeriesPanel& like, const LabelGrid& labels)
{
  SeriesPanel out = like;
  out.values = labels.cells;
  return out;
}

LabelGrid labels_from_panel(const SeriesPanel& panel)
{
  LabelGrid g{panel.values};
  for (double& v : g.cells.data())
  {
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("labels: cells must be 0 or 1");
  }
  return g;
}

}  // namespace flowad
