#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flowad/model.hpp"
#include "flowad/optim.hpp"

namespace flowad
{

struct TrainConfig
{
  std::size_t max_epochs = 300;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  double validation_fraction = 0.3;
  std::size_t patience = 10;
  std::uint64_t seed = 0;
  double clip_norm = 5.0;

  void validate() const;
};

struct EpochRecord
{
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

struct TrainHistory
{
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_validation_loss = 0.0;
  bool early_stopped = false;
};

/// Raised when the training loss turns non-finite; carries the best model
/// seen so far.
class DivergenceError : public TrainingError
{
public:
  DivergenceError(const std::string& what, std::shared_ptr<const CondFlowModel> last_good, TrainHistory history)
      : TrainingError(what), last_good(std::move(last_good)), history(std::move(history))
  {
  }

  std::shared_ptr<const CondFlowModel> last_good;  // null before the first validation
  TrainHistory history;
};

/// Mean negative log-density over every prediction row of the batch.
template <typename Ctx, typename V = typename Ctx::Value>
V nll_loss(const Ctx& ctx, const CondFlowModel& model, const WindowBatch& batch, FlowMode mode,
           BatchMoments* moments = nullptr)
{
  return scale(mean(window_log_prob(ctx, model, batch, mode, moments)), -1.0);
}

/// Inference-mode loss over the given windows, evaluated in chunks.
double evaluate_loss(const CondFlowModel& model, std::span<const SlidingWindow> windows,
                     std::span<const std::size_t> indices, std::size_t chunk = 256);

/// Per-window inference-mode negative log-density.
std::vector<double> window_losses(const CondFlowModel& model, std::span<const SlidingWindow> windows);

struct FitResult
{
  CondFlowModel model;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Chronological split (last `validation_fraction` of windows by start),
/// Adam on shuffled training batches, early stopping on validation loss.
FitResult fit(std::span<const SlidingWindow> windows, CondFlowModel model, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

inline constexpr char kCheckpointMagic[] = "CRNVP1";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint
{
  CondFlowModel model;
  TrainHistory history;
  TrainConfig train_config;
};

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace flowad
