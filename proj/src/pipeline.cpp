#include "flowad/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <regex>
#include <thread>

#include "flowad/log.hpp"

namespace flowad
{

namespace
{

std::vector<std::size_t> columns_of(const SeriesPanel& panel, std::span<const std::string> ids)
{
  std::vector<std::size_t> out;
  for (const std::string& id : ids)
  {
    const auto it = std::find(panel.feature_ids.begin(), panel.feature_ids.end(), id);
    if (it == panel.feature_ids.end()) throw std::invalid_argument("feature '" + id + "' is missing from the panel");
    out.push_back(static_cast<std::size_t>(it - panel.feature_ids.begin()));
  }
  return out;
}

}  // namespace

CondFlowModel prepare_model(const SeriesPanel& history, std::span<const std::string> feature_ids, const ModelConfig& config,
                            std::uint64_t seed)
{
  if (config.data_width != feature_ids.size())
    throw std::invalid_argument("prepare_model: config width " + std::to_string(config.data_width) + " does not match " +
                                std::to_string(feature_ids.size()) + " features");
  CondFlowModel model = CondFlowModel::init(config, seed);
  model.feature_ids.assign(feature_ids.begin(), feature_ids.end());
  model.standardizer = fit_standardizer(history.select_features(columns_of(history, feature_ids)));
  return model;
}

FitResult train_cluster(const SeriesPanel& history, std::span<const std::string> feature_ids, const ModelConfig& config,
                        const TrainConfig& train, std::size_t stride, const EpochCallback& on_epoch)
{
  CondFlowModel model = prepare_model(history, feature_ids, config, train.seed);
  const SeriesPanel scaled = model.standardizer.apply(history.select_features(columns_of(history, feature_ids)));
  if (scaled.has_gaps()) throw std::invalid_argument("train_cluster: history has missing values; impute first");
  const std::vector<SlidingWindow> windows = make_windows(scaled, config.context_len, config.pred_len, stride);
  if (windows.size() < 2)
    throw std::invalid_argument("train_cluster: history yields " + std::to_string(windows.size()) +
                                " windows; at least 2 are needed");
  return fit(windows, std::move(model), train, on_epoch);
}

std::vector<FitResult> train_clusters(const SeriesPanel& history, const ClusterAssignment& assignment, const RunConfig& config,
                                      std::size_t threads)
{
  const std::size_t K = assignment.cluster_count();
  if (K == 0) throw std::invalid_argument("train_clusters: the assignment has no clusters");
  Rng seeds(config.seed);
  std::vector<std::uint64_t> cluster_seeds(K);
  for (std::uint64_t& s : cluster_seeds) s = seeds.split();

  std::vector<std::optional<FitResult>> results(K);
  std::vector<std::exception_ptr> errors(K);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < K; k = next++)
    {
      try
      {
        const std::vector<std::string> ids = assignment.members(static_cast<int>(k));
        TrainConfig train = config.train;
        train.seed = cluster_seeds[k];
        info("train: cluster " + std::to_string(k) + " with " + std::to_string(ids.size()) + " features");
        results[k] = train_cluster(history, ids, config.model_config(ids.size()), train, config.window.stride,
                                   [k](const EpochRecord& e) {
                                     log_message(LogLevel::kDebug, "cluster " + std::to_string(k) + " epoch " +
                                                                       std::to_string(e.epoch) + " train " +
                                                                       format_double(e.train_loss) + " validation " +
                                                                       format_double(e.validation_loss));
                                   });
      }
      catch (...)
      {
        errors[k] = std::current_exception();
      }
    }
  };
  std::size_t n_threads = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  n_threads = std::min(n_threads, K);
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<FitResult> out;
  for (std::optional<FitResult>& r : results) out.push_back(std::move(*r));
  return out;
}

AnomalyScoreSeries score_models(std::span<const CondFlowModel> models, const SeriesPanel& panel, std::size_t stride)
{
  if (models.empty()) throw std::invalid_argument("score_models: no models");
  std::vector<AnomalyScoreSeries> parts;
  for (const CondFlowModel& m : models) parts.push_back(score_panel(m, panel, stride == 0 ? m.config.pred_len : stride));
  return combine_scores(parts);
}

std::string checkpoint_name(std::size_t label) { return "cluster_" + std::to_string(label) + ".ckpt"; }

std::vector<std::filesystem::path> checkpoint_files(const std::filesystem::path& dir)
{
  if (!std::filesystem::is_directory(dir)) throw std::invalid_argument("checkpoint directory '" + dir.string() + "' does not exist");
  const std::regex pattern(R"(cluster_(\d+)\.ckpt)");
  std::vector<std::pair<std::size_t, std::filesystem::path>> found;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
  {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && std::regex_match(name, m, pattern)) found.emplace_back(std::stoull(m[1].str()), entry.path());
  }
  if (found.empty()) throw std::invalid_argument("no cluster_<k>.ckpt files in '" + dir.string() + "'");
  std::sort(found.begin(), found.end());
  std::vector<std::filesystem::path> out;
  for (auto& [k, p] : found) out.push_back(std::move(p));
  return out;
}

std::vector<CondFlowModel> load_models(const std::filesystem::path& dir)
{
  std::vector<CondFlowModel> out;
  for (const auto& path : checkpoint_files(dir)) out.push_back(load_checkpoint(path).model);
  return out;
}

Heatmap bucket_average(std::span<const Timestamp> timestamps, std::vector<std::string> columns, const Array& values,
                       std::int64_t bucket_seconds)
{
  if (bucket_seconds <= 0) throw std::invalid_argument("bucket_average: bucket length must be positive");
  if (values.rows() != timestamps.size() || values.cols() != columns.size())
    throw std::invalid_argument("bucket_average: values do not match timestamps and columns");
  Heatmap h;
  h.columns = std::move(columns);
  if (timestamps.empty())
  {
    h.values = Array::zeros(0, h.columns.size());
    return h;
  }
  const Timestamp t0 = timestamps.front();
  for (std::size_t t = 1; t < timestamps.size(); ++t)
    if (timestamps[t] <= timestamps[t - 1]) throw std::invalid_argument("bucket_average: timestamps must increase");
  const auto n_buckets = static_cast<std::size_t>((timestamps.back() - t0) / bucket_seconds) + 1;
  Array sums = Array::zeros(n_buckets, h.columns.size()), counts = Array::zeros(n_buckets, h.columns.size());
  for (std::size_t t = 0; t < timestamps.size(); ++t)
  {
    const auto b = static_cast<std::size_t>((timestamps[t] - t0) / bucket_seconds);
    for (std::size_t j = 0; j < h.columns.size(); ++j)
      if (std::isfinite(values.at(t, j)))
      {
        sums.at(b, j) += values.at(t, j);
        counts.at(b, j) += 1.0;
      }
  }
  h.values = Array::zeros(n_buckets, h.columns.size());
  for (std::size_t b = 0; b < n_buckets; ++b)
  {
    h.bucket_starts.push_back(t0 + static_cast<std::int64_t>(b) * bucket_seconds);
    for (std::size_t j = 0; j < h.columns.size(); ++j)
      h.values.at(b, j) = counts.at(b, j) > 0.0 ? sums.at(b, j) / counts.at(b, j) : std::numeric_limits<double>::quiet_NaN();
  }
  return h;
}

void write_heatmap(const std::filesystem::path& path, const Heatmap& heatmap)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_heatmap: cannot open " + path.string());
  out << "bucket_start";
  for (const std::string& c : heatmap.columns) out << ',' << c;
  out << '\n';
  for (std::size_t b = 0; b < heatmap.bucket_starts.size(); ++b)
  {
    out << format_timestamp(heatmap.bucket_starts[b]);
    for (std::size_t j = 0; j < heatmap.columns.size(); ++j) out << ',' << format_double(heatmap.values.at(b, j));
    out << '\n';
  }
  if (!out) throw std::runtime_error("write_heatmap: write to " + path.string() + " failed");
}

}  // namespace flowad
