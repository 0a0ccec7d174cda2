#include "flowad/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "flowad/log.hpp"

namespace flowad
{

namespace chr = std::chrono;

namespace
{

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr std::int64_t kDay = 86400;

chr::sys_days to_days(Timestamp ts)
{
  const std::int64_t d = ts >= 0 ? ts / kDay : -((-ts + kDay - 1) / kDay);
  return chr::sys_days{chr::days{d}};
}

std::int64_t seconds_of_day(Timestamp ts)
{
  const std::int64_t r = ts % kDay;
  return r < 0 ? r + kDay : r;
}

/// Monday = 0.
unsigned weekday_index(chr::sys_days day) { return chr::weekday{day}.iso_encoding() - 1; }

unsigned iso_week(chr::sys_days day)
{
  const chr::sys_days thursday = day + chr::days{3 - static_cast<int>(weekday_index(day))};
  const chr::year y = chr::year_month_day{thursday}.year();
  const chr::sys_days jan1 = chr::sys_days{y / chr::January / 1};
  return static_cast<unsigned>((thursday - jan1).count() / 7 + 1);
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line)
{
  std::vector<std::string> out;
  std::string cell;
  for (char ch : line)
  {
    if (ch == ',')
    {
      out.push_back(cell);
      cell.clear();
    }
    else if (ch != '\r')
    {
      cell.push_back(ch);
    }
  }
  out.push_back(cell);
  for (std::string& c : out)
  {
    const auto first = c.find_first_not_of(" \t");
    const auto last = c.find_last_not_of(" \t");
    c = first == std::string::npos ? std::string() : c.substr(first, last - first + 1);
  }
  return out;
}

double parse_cell(const std::string& cell, const std::filesystem::path& path, std::size_t line)
{
  if (cell.empty() || cell == "NaN" || cell == "nan" || cell == "NAN") return kNaN;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
  {
    throw std::invalid_argument(path.string() + ":" + std::to_string(line) + ": not a number: '" + cell + "'");
  }
  return v;
}

std::int64_t SeriesPanel::step() const
{
  if (timestamps.size() < 2) return 0;
  return timestamps[1] - timestamps[0];
}

bool SeriesPanel::has_gaps() const
{
  return std::any_of(values.data().begin(), values.data().end(), [](double v) { return std::isnan(v); });
}

std::vector<double> SeriesPanel::column(std::size_t i) const
{
  std::vector<double> out(length());
  for (std::size_t t = 0; t < length(); ++t) out[t] = values.at(t, i);
  return out;
}

void SeriesPanel::validate() const
{
  if (feature_ids.empty()) throw std::invalid_argument("panel: no features");
  if (timestamps.size() < 2) throw std::invalid_argument("panel: need at least two timestamps");
  if (values.rows() != timestamps.size() || values.cols() != feature_ids.size())
  {
    throw std::invalid_argument("panel: values are " + to_string(values.shape()) + ", expected " +
                                std::to_string(timestamps.size()) + "x" + std::to_string(feature_ids.size()));
  }
  const std::int64_t dt = step();
  if (dt <= 0) throw std::invalid_argument("panel: timestamps must be strictly increasing");
  for (std::size_t t = 1; t < timestamps.size(); ++t)
  {
    if (timestamps[t] - timestamps[t - 1] != dt)
    {
      throw std::invalid_argument("panel: irregular spacing at row " + std::to_string(t) + " (" +
                                  format_timestamp(timestamps[t]) + ")");
    }
  }
}

SeriesPanel SeriesPanel::slice_rows(std::size_t begin, std::size_t end) const
{
  SeriesPanel out;
  out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                        timestamps.begin() + static_cast<std::ptrdiff_t>(end));
  out.feature_ids = feature_ids;
  out.values = flowad::slice_rows(values, begin, end);
  return out;
}

SeriesPanel SeriesPanel::select_features(std::span<const std::size_t> columns) const
{
  SeriesPanel out;
  out.timestamps = timestamps;
  out.values = Array::zeros(length(), columns.size());
  for (std::size_t k = 0; k < columns.size(); ++k)
  {
    out.feature_ids.push_back(feature_ids.at(columns[k]));
    for (std::size_t t = 0; t < length(); ++t) out.values.at(t, k) = values.at(t, columns[k]);
  }
  return out;
}

SeriesPanel make_panel(Timestamp start, std::int64_t step, std::vector<std::string> feature_ids, Array values)
{
  SeriesPanel p;
  p.timestamps.resize(values.rows());
  for (std::size_t t = 0; t < p.timestamps.size(); ++t) p.timestamps[t] = start + static_cast<std::int64_t>(t) * step;
  p.feature_ids = std::move(feature_ids);
  p.values = std::move(values);
  return p;
}

Array Standardizer::apply(const Array& values) const
{
  Array out = values;
  const std::size_t n = values.cols();
  if (n != mean.size()) throw ShapeError("standardizer: width " + std::to_string(n) + " vs " + std::to_string(mean.size()));
  for (std::size_t r = 0; r < values.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) out.at(r, c) = (values.at(r, c) - mean[c]) / stddev[c];
  return out;
}

Array Standardizer::invert(const Array& values) const
{
  Array out = values;
  const std::size_t n = values.cols();
  if (n != mean.size()) throw ShapeError("standardizer: width " + std::to_string(n) + " vs " + std::to_string(mean.size()));
  for (std::size_t r = 0; r < values.rows(); ++r)
    for (std::size_t c = 0; c < n; ++c) out.at(r, c) = values.at(r, c) * stddev[c] + mean[c];
  return out;
}

SeriesPanel Standardizer::apply(const SeriesPanel& panel) const
{
  SeriesPanel out = panel;
  out.values = apply(panel.values);
  return out;
}

SeriesPanel Standardizer::invert(const SeriesPanel& panel) const
{
  SeriesPanel out = panel;
  out.values = invert(panel.values);
  return out;
}

double congestion_rate(double historical, double observed, double free_flow)
{
  if (!(free_flow > 0.0)) throw std::invalid_argument("congestion_rate: free-flow speed must be positive");
  return (historical - observed) / free_flow;
}

SeriesPanel congestion_panel(const SpeedPanel& speeds)
{
  const SeriesPanel& obs = speeds.observed;
  const SeriesPanel& hist = speeds.historical;
  if (!obs.values.same_shape(hist.values) || obs.width() != speeds.free_flow.size())
  {
    throw std::invalid_argument("congestion_panel: observed, historical and free-flow widths disagree");
  }
  SeriesPanel out = obs;
  for (std::size_t t = 0; t < obs.length(); ++t)
  {
    for (std::size_t i = 0; i < obs.width(); ++i)
    {
      const double v = obs.at(t, i), h = hist.at(t, i);
      out.values.at(t, i) = (std::isnan(v) || std::isnan(h)) ? kNaN : congestion_rate(h, v, speeds.free_flow[i]);
    }
  }
  return out;
}

double quantile(std::span<const double> values, double q)
{
  if (values.empty()) throw std::invalid_argument("quantile: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double free_flow_speed(std::span<const double> observations)
{
  if (observations.empty()) throw std::invalid_argument("free_flow_speed: no observations");
  return quantile(observations, 0.85);
}

std::size_t hour_of_week(Timestamp ts)
{
  const chr::sys_days day = to_days(ts);
  return weekday_index(day) * 24 + static_cast<std::size_t>(seconds_of_day(ts) / 3600);
}

HistoricalProfile HistoricalProfile::fit(const SeriesPanel& panel)
{
  const std::size_t n = panel.width();
  Array sums = Array::zeros(kSlots, n);
  Array counts = Array::zeros(kSlots, n);
  for (std::size_t t = 0; t < panel.length(); ++t)
  {
    const std::size_t slot = hour_of_week(panel.timestamps[t]);
    for (std::size_t i = 0; i < n; ++i)
    {
      const double v = panel.at(t, i);
      if (std::isnan(v)) continue;
      sums.at(slot, i) += v;
      counts.at(slot, i) += 1.0;
    }
  }
  HistoricalProfile p;
  p.averages = Array(sums.shape(), kNaN);
  for (std::size_t k = 0; k < sums.size(); ++k)
    if (counts[k] > 0) p.averages[k] = sums[k] / counts[k];
  return p;
}

double HistoricalProfile::lookup(Timestamp ts, std::size_t feature) const
{
  if (averages.rows() != kSlots || feature >= averages.cols()) return kNaN;
  return averages.at(hour_of_week(ts), feature);
}

SeriesPanel impute(const SeriesPanel& panel, const NeighborMap& neighbors, const HistoricalProfile& history)
{
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < panel.width(); ++i) index[panel.feature_ids[i]] = i;
  std::vector<std::vector<std::size_t>> adjacency(panel.width());
  for (std::size_t i = 0; i < panel.width(); ++i)
  {
    const auto it = neighbors.find(panel.feature_ids[i]);
    if (it == neighbors.end())
    {
      throw std::invalid_argument("impute: neighbour map has no entry for feature '" + panel.feature_ids[i] + "'");
    }
    for (const std::string& name : it->second)
    {
      const auto j = index.find(name);
      if (j == index.end()) throw std::invalid_argument("impute: unknown neighbour '" + name + "'");
      adjacency[i].push_back(j->second);
    }
  }

  SeriesPanel out = panel;
  for (std::size_t t = 0; t < panel.length(); ++t)
  {
    for (std::size_t i = 0; i < panel.width(); ++i)
    {
      if (!std::isnan(panel.at(t, i))) continue;
      double acc = 0.0;
      std::size_t used = 0;
      for (std::size_t j : adjacency[i])
      {
        const double v = panel.at(t, j);
        if (std::isnan(v)) continue;
        acc += v;
        ++used;
      }
      double filled = used > 0 ? acc / static_cast<double>(used) : history.lookup(panel.timestamps[t], i);
      if (std::isnan(filled))
      {
        throw std::invalid_argument("impute: cannot fill feature '" + panel.feature_ids[i] + "' at " +
                                    format_timestamp(panel.timestamps[t]) + " (row " + std::to_string(t) +
                                    "): no observed neighbour and no historical average");
      }
      out.values.at(t, i) = filled;
    }
  }
  return out;
}

TimeFeatures time_features(Timestamp ts)
{
  const chr::sys_days day = to_days(ts);
  TimeFeatures f;
  f.hour_of_day = static_cast<double>(seconds_of_day(ts) / 3600) / 23.0;
  f.day_of_week = static_cast<double>(weekday_index(day)) / 6.0;
  f.week_of_year = static_cast<double>(iso_week(day) - 1) / 52.0;
  return f;
}

Array time_feature_rows(std::span<const Timestamp> timestamps)
{
  Array out = Array::zeros(timestamps.size(), TimeFeatures::kWidth);
  for (std::size_t t = 0; t < timestamps.size(); ++t)
  {
    const TimeFeatures f = time_features(timestamps[t]);
    out.at(t, 0) = f.week_of_year;
    out.at(t, 1) = f.day_of_week;
    out.at(t, 2) = f.hour_of_day;
  }
  return out;
}

std::vector<SlidingWindow> make_windows(const SeriesPanel& panel, std::size_t context_len, std::size_t pred_len,
                                        std::size_t stride)
{
  if (context_len == 0 || pred_len == 0) throw std::invalid_argument("make_windows: lengths must be positive");
  if (stride == 0) throw std::invalid_argument("make_windows: stride must be at least 1");
  const std::size_t total = context_len + pred_len;
  std::vector<SlidingWindow> out;
  if (panel.length() < total)
  {
    warn("make_windows: panel of length " + std::to_string(panel.length()) + " is shorter than one window (" +
         std::to_string(total) + ")");
    return out;
  }
  const Array times = time_feature_rows(panel.timestamps);
  for (std::size_t start = 0; start + total <= panel.length(); start += stride)
  {
    SlidingWindow w;
    w.start = start;
    w.context = flowad::slice_rows(panel.values, start, start + context_len);
    w.prediction = flowad::slice_rows(panel.values, start + context_len, start + total);
    w.context_time = flowad::slice_rows(times, start, start + context_len);
    w.prediction_time = flowad::slice_rows(times, start + context_len, start + total);
    out.push_back(std::move(w));
  }
  return out;
}

Standardizer fit_standardizer(const SeriesPanel& panel)
{
  if (panel.length() < 2) throw std::invalid_argument("fit_standardizer: need at least two rows");
  Standardizer s;
  const double n = static_cast<double>(panel.length());
  for (std::size_t i = 0; i < panel.width(); ++i)
  {
    double m = 0.0;
    for (std::size_t t = 0; t < panel.length(); ++t) m += panel.at(t, i);
    m /= n;
    double var = 0.0;
    for (std::size_t t = 0; t < panel.length(); ++t) var += (panel.at(t, i) - m) * (panel.at(t, i) - m);
    double sd = std::sqrt(var / n);
    if (sd < Standardizer::kMinStd)
    {
      warn("fit_standardizer: feature '" + panel.feature_ids[i] + "' is constant; std floored");
      sd = Standardizer::kMinStd;
    }
    s.mean.push_back(m);
    s.stddev.push_back(sd);
  }
  return s;
}

Timestamp parse_timestamp(const std::string& text)
{
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char sep = 0;
  int consumed = 0;
  const int got = std::sscanf(text.c_str(), "%4d-%2d-%2d%c%2d:%2d%n", &y, &mo, &d, &sep, &h, &mi, &consumed);
  if (got < 6 || (sep != 'T' && sep != ' '))
  {
    throw std::invalid_argument("parse_timestamp: not ISO-8601: '" + text + "'");
  }
  std::size_t pos = static_cast<std::size_t>(consumed);
  if (pos < text.size() && text[pos] == ':')
  {
    int more = 0;
    if (std::sscanf(text.c_str() + pos, ":%2d%n", &s, &more) != 1)
      throw std::invalid_argument("parse_timestamp: bad seconds in '" + text + "'");
    pos += static_cast<std::size_t>(more);
  }
  if (pos < text.size() && text.substr(pos) != "Z")
  {
    throw std::invalid_argument("parse_timestamp: unsupported suffix in '" + text + "'");
  }
  const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(mo)}, chr::day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 59) throw std::invalid_argument("parse_timestamp: invalid date '" + text + "'");
  const std::int64_t days = chr::sys_days{ymd}.time_since_epoch().count();
  return days * kDay + h * 3600 + mi * 60 + s;
}

std::string format_timestamp(Timestamp ts)
{
  const chr::year_month_day ymd{to_days(ts)};
  const std::int64_t sod = seconds_of_day(ts);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), static_cast<int>(sod / 3600),
                static_cast<int>(sod / 60 % 60), static_cast<int>(sod % 60));
  return buf;
}

std::string format_double(double v)
{
  if (std::isnan(v)) return "";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

SeriesPanel read_panel(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("read_panel: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("read_panel: " + path.string() + " is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);
  std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "timestamp")
  {
    throw std::invalid_argument("read_panel: " + path.string() + ": header must be 'timestamp' then feature ids");
  }
  SeriesPanel panel;
  panel.feature_ids.assign(header.begin() + 1, header.end());
  std::vector<double> data;
  std::size_t lineno = 1;
  while (std::getline(in, line))
  {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
    {
      throw std::invalid_argument("read_panel: " + path.string() + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    }
    panel.timestamps.push_back(parse_timestamp(cells[0]));
    for (std::size_t c = 1; c < cells.size(); ++c) data.push_back(parse_cell(cells[c], path, lineno));
  }
  panel.values = Array({panel.timestamps.size(), panel.feature_ids.size()}, std::move(data));
  return panel;
}

void write_panel(const std::filesystem::path& path, const SeriesPanel& panel)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("write_panel: cannot open " + path.string());
  out << "timestamp";
  for (const std::string& id : panel.feature_ids) out << ',' << id;
  out << '\n';
  for (std::size_t t = 0; t < panel.length(); ++t)
  {
    out << format_timestamp(panel.timestamps[t]);
    for (std::size_t i = 0; i < panel.width(); ++i) out << ',' << format_double(panel.at(t, i));
    out << '\n';
  }
}

std::vector<double> read_feature_row(const std::filesystem::path& path, const std::vector<std::string>& feature_ids)
{
  const SeriesPanel p = read_panel(path);
  if (p.length() < 1) throw std::invalid_argument("read_feature_row: " + path.string() + " has no data row");
  std::vector<double> out;
  for (const std::string& id : feature_ids)
  {
    const auto it = std::find(p.feature_ids.begin(), p.feature_ids.end(), id);
    if (it == p.feature_ids.end()) throw std::invalid_argument("read_feature_row: missing feature '" + id + "'");
    out.push_back(p.at(0, static_cast<std::size_t>(it - p.feature_ids.begin())));
  }
  return out;
}

}  // namespace flowad
