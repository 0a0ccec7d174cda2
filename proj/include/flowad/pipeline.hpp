#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "flowad/cluster.hpp"
#include "flowad/config.hpp"
#include "flowad/detect.hpp"
#include "flowad/train.hpp"

namespace flowad
{

/// Fresh model over `feature_ids` of `history` with its standardizer fitted there.
CondFlowModel prepare_model(const SeriesPanel& history, std::span<const std::string> feature_ids, const ModelConfig& config,
                            std::uint64_t seed);

/// Standardizes the cluster's features, cuts windows every `stride` steps and fits.
FitResult train_cluster(const SeriesPanel& history, std::span<const std::string> feature_ids, const ModelConfig& config,
                        const TrainConfig& train, std::size_t stride, const EpochCallback& on_epoch = {});

/// One model per cluster, in label order, trained on up to `threads` workers
/// (0 = hardware concurrency). Cluster k uses the k-th seed split from config.seed.
std::vector<FitResult> train_clusters(const SeriesPanel& history, const ClusterAssignment& assignment, const RunConfig& config,
                                      std::size_t threads = 0);

/// Summed score of every model over `panel`; stride 0 means each model's prediction length.
AnomalyScoreSeries score_models(std::span<const CondFlowModel> models, const SeriesPanel& panel, std::size_t stride = 0);

/// cluster_<k>.ckpt file name for label k.
std::string checkpoint_name(std::size_t label);

/// Checkpoints in `dir` named cluster_<k>.ckpt, ordered by k; throws if none exist.
std::vector<std::filesystem::path> checkpoint_files(const std::filesystem::path& dir);
std::vector<CondFlowModel> load_models(const std::filesystem::path& dir);

/// Column-wise averages over fixed time buckets starting at the first timestamp.
struct Heatmap
{
  std::vector<Timestamp> bucket_starts;
  std::vector<std::string> columns;
  Array values;  // buckets x columns; NaN where a bucket has no finite value
};

/// Averages the finite entries of `values` (rows parallel to `timestamps`)
/// per bucket; yields ceil(span / bucket) rows for evenly spaced input.
Heatmap bucket_average(std::span<const Timestamp> timestamps, std::vector<std::string> columns, const Array& values,
                       std::int64_t bucket_seconds);

/// bucket_start followed by one column per entry of `columns`.
void write_heatmap(const std::filesystem::path& path, const Heatmap& heatmap);

}  // namespace flowad
