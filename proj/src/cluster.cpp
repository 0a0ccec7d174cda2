#include "flowad/cluster.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "flowad/log.hpp"
#include "flowad/rng.hpp"

namespace flowad
{

namespace
{

constexpr std::int64_t kWeek = 7 * 86400;
constexpr std::int64_t kFirstMonday = 4 * 86400;  // 1970-01-05T00:00:00Z

std::size_t band_width(std::optional<double> fraction, std::size_t length)
{
  if (!fraction) return 0;
  if (!(*fraction > 0.0)) throw std::invalid_argument("dtw: band fraction must be positive");
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(*fraction * static_cast<double>(length))));
}

std::pair<std::size_t, std::size_t> window_rows(const SeriesPanel& panel, const std::optional<PrototypeWindow>& window)
{
  const PrototypeWindow w = window ? *window : first_full_week(panel);
  const std::size_t end = w.length == 0 ? panel.length() : w.begin + w.length;
  if (w.begin >= end || end > panel.length())
  {
    throw std::invalid_argument("cluster: prototype window [" + std::to_string(w.begin) + ", " + std::to_string(end) +
                                ") lies outside the panel");
  }
  return {w.begin, end};
}

std::vector<double> column_slice(const SeriesPanel& panel, std::size_t i, std::pair<std::size_t, std::size_t> rows)
{
  std::vector<double> out;
  out.reserve(rows.second - rows.first);
  for (std::size_t t = rows.first; t < rows.second; ++t)
  {
    const double v = panel.at(t, i);
    if (std::isnan(v)) throw std::invalid_argument("cluster: missing value for feature " + panel.feature_ids[i]);
    out.push_back(v);
  }
  return out;
}

/// Runs fn(i) for i in [0, n) over a small pool.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn)
{
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1)
  {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t k = 0; k < threads; ++k)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

/// Extends a steep region while at most min_pts consecutive non-steep points
/// keep the same direction.
std::size_t extend_region(const std::vector<bool>& steep, const std::vector<bool>& xward, std::size_t start,
                          std::size_t min_pts)
{
  std::size_t non_xward = 0, end = start;
  for (std::size_t index = start; index < steep.size(); ++index)
  {
    if (steep[index])
    {
      non_xward = 0;
      end = index;
    }
    else if (!xward[index])
    {
      if (++non_xward > min_pts) break;
    }
    else
    {
      return end;
    }
  }
  return end;
}

struct SteepDownArea
{
  std::size_t start, end;
  double mib;
};

void update_filter(std::vector<SteepDownArea>& areas, double mib, double xi_complement, const std::vector<double>& r)
{
  if (std::isinf(mib))
  {
    areas.clear();
    return;
  }
  std::erase_if(areas, [&](const SteepDownArea& a) { return !(mib <= r[a.start] * xi_complement); });
  for (SteepDownArea& a : areas) a.mib = std::max(a.mib, mib);
}

bool correct_predecessor(const std::vector<double>& r, const std::vector<std::size_t>& pred,
                         const std::vector<std::size_t>& ordering, std::size_t& s, std::size_t& e)
{
  while (s < e)
  {
    if (r[s] > r[e]) return true;
    const std::size_t p = pred[e];
    for (std::size_t i = s; i < e; ++i)
      if (ordering[i] == p) return true;
    --e;
  }
  return false;
}

}  // namespace

PrototypeWindow first_full_week(const SeriesPanel& panel)
{
  const std::int64_t step = panel.step();
  if (step > 0 && kWeek % step == 0)
  {
    const std::size_t rows = static_cast<std::size_t>(kWeek / step);
    for (std::size_t t = 0; t + rows <= panel.length(); ++t)
    {
      const std::int64_t offset = ((panel.timestamps[t] - kFirstMonday) % kWeek + kWeek) % kWeek;
      if (offset == 0) return {t, rows};
    }
  }
  warn("cluster: no full Monday-aligned week in the panel; using all rows");
  return {0, panel.length()};
}

void DistanceMatrix::validate() const
{
  const std::size_t m = ids.size();
  if (values.rows() != m || values.cols() != m)
  {
    throw std::invalid_argument("distance matrix: expected " + std::to_string(m) + "x" + std::to_string(m) + ", got " +
                                to_string(values.shape()));
  }
  for (std::size_t i = 0; i < m; ++i)
  {
    if (values.at(i, i) != 0.0) throw std::invalid_argument("distance matrix: nonzero diagonal at " + ids[i]);
    for (std::size_t j = 0; j < m; ++j)
    {
      const double v = values.at(i, j);
      if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("distance matrix: invalid entry");
      if (v != values.at(j, i)) throw std::invalid_argument("distance matrix: not symmetric");
    }
  }
}

double dtw_distance(std::span<const double> a, std::span<const double> b, std::optional<std::size_t> band)
{
  if (a.empty() || b.empty()) throw std::invalid_argument("dtw: sequences must be nonempty");
  const std::size_t n = a.size(), m = b.size();
  const std::size_t gap = n > m ? n - m : m - n;
  const std::size_t w = band ? std::max(*band, gap) : std::max(n, m);
  constexpr double inf = std::numeric_limits<double>::infinity();

  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i)
  {
    std::fill(cur.begin(), cur.end(), inf);
    const std::size_t lo = i > w ? i - w : 1;
    const std::size_t hi = std::min(m, i + w);
    for (std::size_t j = lo; j <= hi; ++j)
    {
      const double d = a[i - 1] - b[j - 1];
      const double best = std::min({prev[j - 1], prev[j], cur[j - 1]});
      cur[j] = best + d * d;
    }
    std::swap(prev, cur);
  }
  return std::sqrt(prev[m]);
}

DistanceMatrix build_distance_matrix(const SeriesPanel& panel, const DistanceOptions& options)
{
  const std::size_t N = panel.width();
  if (options.sample_size == 0 || options.sample_size > N)
  {
    throw std::invalid_argument("build_distance_matrix: sample_size " + std::to_string(options.sample_size) +
                                " must lie in [1, " + std::to_string(N) + "]");
  }
  std::vector<std::size_t> picked(N);
  std::iota(picked.begin(), picked.end(), std::size_t{0});
  if (options.sample_size < N)
  {
    Rng rng(options.seed);
    rng.shuffle(std::span<std::size_t>(picked));
    picked.resize(options.sample_size);
    std::sort(picked.begin(), picked.end());
  }

  const auto rows = window_rows(panel, options.window);
  const std::size_t band = band_width(options.band_fraction, rows.second - rows.first);
  std::vector<std::vector<double>> series;
  DistanceMatrix out;
  for (std::size_t i : picked)
  {
    series.push_back(column_slice(panel, i, rows));
    out.ids.push_back(panel.feature_ids[i]);
  }
  const std::size_t M = picked.size();
  out.values = Array::zeros(M, M);
  parallel_for(M, options.threads, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < M; ++j)
    {
      out.values.at(i, j) = dtw_distance(series[i], series[j], band ? std::optional(band) : std::nullopt);
    }
  });
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = i + 1; j < M; ++j) out.values.at(j, i) = out.values.at(i, j);
  return out;
}

std::vector<double> OpticsResult::reachability_plot() const
{
  std::vector<double> out;
  out.reserve(ordering.size());
  for (std::size_t p : ordering) out.push_back(reachability[p]);
  return out;
}

OpticsResult optics(const Array& distances, std::size_t min_pts)
{
  const std::size_t n = distances.rows();
  if (distances.cols() != n) throw ShapeError("optics: distance matrix is " + to_string(distances.shape()));
  if (min_pts < 2) throw std::invalid_argument("optics: min_pts must be at least 2");
  constexpr double inf = std::numeric_limits<double>::infinity();

  OpticsResult r;
  r.reachability.assign(n, inf);
  r.predecessor.assign(n, OpticsResult::kNone);
  r.core_distance.assign(n, inf);
  for (std::size_t i = 0; i < n; ++i)
  {
    if (min_pts > n) continue;
    std::vector<double> row(distances.row_span(i).begin(), distances.row_span(i).end());
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(min_pts - 1), row.end());
    r.core_distance[i] = row[min_pts - 1];
  }

  std::vector<bool> processed(n, false);
  for (std::size_t step = 0; step < n; ++step)
  {
    std::size_t point = OpticsResult::kNone;
    for (std::size_t i = 0; i < n; ++i)
    {
      if (processed[i]) continue;
      if (point == OpticsResult::kNone || r.reachability[i] < r.reachability[point]) point = i;
    }
    processed[point] = true;
    r.ordering.push_back(point);
    const double core = r.core_distance[point];
    if (std::isinf(core)) continue;
    for (std::size_t i = 0; i < n; ++i)
    {
      if (processed[i]) continue;
      const double reach = std::max(distances.at(point, i), core);
      if (reach < r.reachability[i])
      {
        r.reachability[i] = reach;
        r.predecessor[i] = point;
      }
    }
  }
  return r;
}

std::vector<XiCluster> xi_clusters(const OpticsResult& result, double xi, std::size_t min_pts,
                                   std::size_t min_cluster_size)
{
  if (!(xi > 0.0 && xi < 1.0)) throw std::invalid_argument("extract_xi: xi must lie in (0, 1)");
  const std::size_t n = result.ordering.size();
  constexpr double inf = std::numeric_limits<double>::infinity();

  std::vector<double> r = result.reachability_plot();
  r.push_back(inf);
  std::vector<std::size_t> pred;
  for (std::size_t p : result.ordering) pred.push_back(result.predecessor[p]);

  const double xc = 1.0 - xi;
  std::vector<bool> steep_up(n), steep_down(n), down(n), up(n);
  for (std::size_t i = 0; i < n; ++i)
  {
    const double ratio = r[i] / r[i + 1];  // NaN compares false
    steep_up[i] = ratio <= xc;
    steep_down[i] = ratio >= 1.0 / xc;
    down[i] = ratio > 1.0;
    up[i] = ratio < 1.0;
  }

  std::vector<SteepDownArea> areas;
  std::vector<XiCluster> clusters;
  std::size_t index = 0;
  double mib = 0.0;
  for (std::size_t s = 0; s < n; ++s)
  {
    if (!(steep_up[s] || steep_down[s]) || s < index) continue;
    mib = std::max(mib, *std::max_element(r.begin() + static_cast<std::ptrdiff_t>(index),
                                          r.begin() + static_cast<std::ptrdiff_t>(s + 1)));
    if (steep_down[s])
    {
      update_filter(areas, mib, xc, r);
      const std::size_t end = extend_region(steep_down, up, s, min_pts);
      areas.push_back({s, end, 0.0});
      index = end + 1;
      mib = r[index];
      continue;
    }

    update_filter(areas, mib, xc, r);
    const std::size_t u_start = s;
    const std::size_t u_end = extend_region(steep_up, down, s, min_pts);
    index = u_end + 1;
    mib = r[index];

    std::vector<XiCluster> found;
    for (const SteepDownArea& d : areas)
    {
      std::size_t c_start = d.start, c_end = u_end;
      if (r[c_end + 1] * xc < d.mib) continue;
      const double d_max = r[d.start];
      if (d_max * xc >= r[c_end + 1])
      {
        while (r[c_start + 1] > r[c_end + 1] && c_start < d.end) ++c_start;
      }
      else if (r[c_end + 1] * xc >= d_max)
      {
        while (r[c_end - 1] > d_max && c_end > u_start) --c_end;
      }
      if (!correct_predecessor(r, pred, result.ordering, c_start, c_end)) continue;
      if (c_end - c_start + 1 < min_cluster_size) continue;
      if (c_start > d.end) continue;
      if (c_end < u_start) continue;
      found.push_back({c_start, c_end});
    }
    clusters.insert(clusters.end(), found.rbegin(), found.rend());
  }

  return clusters;
}

std::vector<int> extract_xi(const OpticsResult& result, double xi, std::size_t min_pts, std::size_t min_cluster_size)
{
  const std::vector<XiCluster> candidates = xi_clusters(result, xi, min_pts, min_cluster_size);
  const std::size_t n = result.ordering.size();
  std::vector<double> r = result.reachability_plot();
  r.push_back(std::numeric_limits<double>::infinity());

  // Candidates form a containment tree; visit smallest first so children
  // are settled before their parents.
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return candidates[x].size() < candidates[y].size();
  });
  auto contains = [](const XiCluster& outer, const XiCluster& inner) {
    return outer.start <= inner.start && inner.end <= outer.end;
  };
  auto disjoint = [](const XiCluster& x, const XiCluster& y) { return x.end < y.start || y.end < x.start; };

  std::vector<std::size_t> parent(candidates.size(), OpticsResult::kNone);
  std::vector<bool> usable(candidates.size(), true);
  for (std::size_t a = 0; a < order.size(); ++a)
  {
    const std::size_t c = order[a];
    for (std::size_t b = 0; b < a && usable[c]; ++b)
    {
      const std::size_t d = order[b];
      if (!usable[d] || contains(candidates[c], candidates[d]) || disjoint(candidates[c], candidates[d])) continue;
      usable[c] = false;  // overlaps a smaller cluster without nesting
    }
    if (!usable[c]) continue;
    for (std::size_t b = 0; b < a; ++b)
    {
      const std::size_t d = order[b];
      if (usable[d] && parent[d] == OpticsResult::kNone && contains(candidates[c], candidates[d]) && d != c) parent[d] = c;
    }
  }

  std::vector<double> best(candidates.size(), 0.0);
  std::vector<std::vector<std::size_t>> chosen(candidates.size());
  for (std::size_t c : order)
  {
    if (!usable[c]) continue;
    const XiCluster& k = candidates[c];
    const double interior = k.size() > 1 ? *std::max_element(r.begin() + static_cast<std::ptrdiff_t>(k.start + 1),
                                                             r.begin() + static_cast<std::ptrdiff_t>(k.end + 1))
                                         : 0.0;
    const double boundary = std::min(r[k.start], r[k.end + 1]);
    const double stability = std::max(0.0, static_cast<double>(k.size()) * (1.0 / interior - 1.0 / boundary));
    double children = 0.0;
    std::vector<std::size_t> below;
    for (std::size_t d = 0; d < candidates.size(); ++d)
    {
      if (parent[d] != c) continue;
      children += best[d];
      below.insert(below.end(), chosen[d].begin(), chosen[d].end());
    }
    if (below.empty() || stability >= children)
    {
      best[c] = stability;
      chosen[c] = {c};
    }
    else
    {
      best[c] = children;
      chosen[c] = std::move(below);
    }
  }

  std::vector<std::size_t> selected;
  for (std::size_t c = 0; c < candidates.size(); ++c)
    if (usable[c] && parent[c] == OpticsResult::kNone) selected.insert(selected.end(), chosen[c].begin(), chosen[c].end());
  std::sort(selected.begin(), selected.end(), [&](std::size_t x, std::size_t y) {
    return candidates[x].start < candidates[y].start;
  });

  std::vector<int> labels(n, -1);
  int label = 0;
  for (std::size_t c : selected)
  {
    for (std::size_t k = candidates[c].start; k <= candidates[c].end; ++k) labels[result.ordering[k]] = label;
    ++label;
  }
  return labels;
}

int ClusterAssignment::label_of(const std::string& feature_id) const
{
  const auto it = std::find(feature_ids.begin(), feature_ids.end(), feature_id);
  if (it == feature_ids.end()) throw std::invalid_argument("cluster assignment: unknown feature " + feature_id);
  return labels[static_cast<std::size_t>(it - feature_ids.begin())];
}

std::vector<std::string> ClusterAssignment::members(int label) const
{
  std::vector<std::string> out;
  for (std::size_t i = 0; i < feature_ids.size(); ++i)
    if (labels[i] == label) out.push_back(feature_ids[i]);
  return out;
}

void ClusterAssignment::validate() const
{
  if (labels.size() != feature_ids.size()) throw std::invalid_argument("cluster assignment: label count mismatch");
  const int k = static_cast<int>(medoids.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
  {
    if (labels[i] < 0 || labels[i] >= k)
    {
      throw std::invalid_argument("cluster assignment: feature " + feature_ids[i] + " has invalid label " +
                                  std::to_string(labels[i]));
    }
  }
  for (int c = 0; c < k; ++c)
  {
    if (label_of(medoids[static_cast<std::size_t>(c)]) != c)
      throw std::invalid_argument("cluster assignment: medoid of cluster " + std::to_string(c) + " is not a member");
  }
}

std::size_t medoid_of(const Array& distances, std::span<const std::size_t> members)
{
  if (members.empty()) throw std::invalid_argument("medoid_of: empty cluster");
  std::size_t best = members[0];
  double best_sum = std::numeric_limits<double>::infinity();
  for (std::size_t i : members)
  {
    double sum = 0.0;
    for (std::size_t j : members) sum += distances.at(i, j);
    if (sum < best_sum)
    {
      best_sum = sum;
      best = i;
    }
  }
  return best;
}

ClusterAssignment cluster_features(const DistanceMatrix& matrix, std::size_t min_pts, double xi)
{
  matrix.validate();
  const std::size_t M = matrix.size();
  if (M == 0) throw std::invalid_argument("cluster_features: empty distance matrix");
  ClusterAssignment out;
  out.feature_ids = matrix.ids;
  out.sample_ids = matrix.ids;
  out.min_pts = min_pts;
  out.xi = xi;
  out.optics = optics(matrix.values, min_pts);

  std::vector<int> labels;
  if (M < min_pts)
  {
    warn("cluster_features: fewer features than min_pts; using a single cluster");
    labels.assign(M, 0);
  }
  else
  {
    labels = extract_xi(out.optics, xi, min_pts, min_pts);
    if (std::all_of(labels.begin(), labels.end(), [](int v) { return v < 0; }))
    {
      warn("cluster_features: no cluster found; using a single cluster");
      labels.assign(M, 0);
    }
  }

  const int k = *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<std::size_t> medoid(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c)
  {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < M; ++i)
      if (labels[i] == c) members.push_back(i);
    medoid[static_cast<std::size_t>(c)] = medoid_of(matrix.values, members);
  }
  for (std::size_t i = 0; i < M; ++i)
  {
    if (labels[i] >= 0) continue;
    int best = 0;
    for (int c = 1; c < k; ++c)
      if (matrix.values.at(i, medoid[static_cast<std::size_t>(c)]) < matrix.values.at(i, medoid[static_cast<std::size_t>(best)]))
        best = c;
    labels[i] = best;
  }
  out.labels = labels;
  for (std::size_t m : medoid) out.medoids.push_back(matrix.ids[m]);
  return out;
}

ClusterAssignment assign_remaining(const SeriesPanel& panel, ClusterAssignment assignment,
                                   std::optional<PrototypeWindow> window, std::optional<double> band_fraction)
{
  if (assignment.medoids.empty()) throw std::invalid_argument("assign_remaining: no clusters");
  const auto rows = window_rows(panel, window);
  const std::size_t band = band_width(band_fraction, rows.second - rows.first);
  auto column_index = [&](const std::string& id) {
    const auto it = std::find(panel.feature_ids.begin(), panel.feature_ids.end(), id);
    if (it == panel.feature_ids.end()) throw std::invalid_argument("assign_remaining: medoid " + id + " not in panel");
    return static_cast<std::size_t>(it - panel.feature_ids.begin());
  };
  std::vector<std::vector<double>> medoid_series;
  for (const std::string& id : assignment.medoids) medoid_series.push_back(column_slice(panel, column_index(id), rows));

  std::map<std::string, int> known;
  for (std::size_t i = 0; i < assignment.feature_ids.size(); ++i) known[assignment.feature_ids[i]] = assignment.labels[i];

  ClusterAssignment out = std::move(assignment);
  out.feature_ids.clear();
  out.labels.clear();
  for (std::size_t i = 0; i < panel.width(); ++i)
  {
    const std::string& id = panel.feature_ids[i];
    out.feature_ids.push_back(id);
    if (const auto it = known.find(id); it != known.end())
    {
      out.labels.push_back(it->second);
      continue;
    }
    const std::vector<double> series = column_slice(panel, i, rows);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < medoid_series.size(); ++c)
    {
      const double d = dtw_distance(series, medoid_series[c], band ? std::optional(band) : std::nullopt);
      if (d < best_d)
      {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    out.labels.push_back(best);
  }
  return out;
}

void write_assignment(std::ostream& out, const ClusterAssignment& a)
{
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + v[i];
    return s;
  };
  out << "# seed: " << a.seed << '\n';
  out << "# min_pts: " << a.min_pts << '\n';
  out << "# xi: " << format_double(a.xi) << '\n';
  out << "# sample_ids: " << join(a.sample_ids) << '\n';
  out << "# medoids: " << join(a.medoids) << '\n';
  out << "feature_id,cluster_label\n";
  for (std::size_t i = 0; i < a.feature_ids.size(); ++i) out << a.feature_ids[i] << ',' << a.labels[i] << '\n';
}

void write_assignment(const std::string& path, const ClusterAssignment& assignment)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_assignment(out, assignment);
  if (!out) throw std::runtime_error("failed writing " + path);
}

ClusterAssignment read_assignment(std::istream& in)
{
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ';');)
      if (!item.empty()) out.push_back(item);
    return out;
  };
  ClusterAssignment a;
  std::string line;
  bool header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line))
  {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.starts_with("#"))
    {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      std::string key = line.substr(1, colon - 1);
      std::string value = line.substr(colon + 1);
      std::erase(key, ' ');
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      if (key == "seed") a.seed = std::stoull(value);
      else if (key == "min_pts") a.min_pts = std::stoull(value);
      else if (key == "xi") a.xi = std::stod(value);
      else if (key == "sample_ids") a.sample_ids = split(value);
      else if (key == "medoids") a.medoids = split(value);
      continue;
    }
    if (!header)
    {
      if (line != "feature_id,cluster_label") throw std::invalid_argument("cluster file: unexpected header '" + line + "'");
      header = true;
      continue;
    }
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) throw std::invalid_argument("cluster file: line " + std::to_string(line_no) + " lacks a comma");
    a.feature_ids.push_back(line.substr(0, comma));
    try
    {
      a.labels.push_back(std::stoi(line.substr(comma + 1)));
    }
    catch (const std::exception&)
    {
      throw std::invalid_argument("cluster file: bad label on line " + std::to_string(line_no));
    }
  }
  if (!header) throw std::invalid_argument("cluster file: missing header");
  a.validate();
  return a;
}

ClusterAssignment read_assignment(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_assignment(in);
}

}  // namespace flowad
