#include "flowad/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "flowad/log.hpp"

namespace flowad
{

void TrainConfig::validate() const
{
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw std::invalid_argument("train: validation_fraction must lie in (0, 1)");
  if (batch_size == 0) throw std::invalid_argument("train: batch_size must be at least 1");
  if (max_epochs == 0) throw std::invalid_argument("train: max_epochs must be at least 1");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train: learning_rate must be positive");
  if (!(clip_norm > 0.0)) throw std::invalid_argument("train: clip_norm must be positive");
}

namespace
{

/// Index of the first window whose inference-mode loss is non-finite, or the
/// first one in `indices` when every window is finite on its own.
std::size_t first_bad_window(const CondFlowModel& model, std::span<const SlidingWindow> windows,
                             std::span<const std::size_t> indices)
{
  for (std::size_t idx : indices)
  {
    try
    {
      const std::size_t one[] = {idx};
      const Array lp = window_log_prob(EagerContext{}, model, make_batch(windows, one), FlowMode::kInference);
      if (!lp.all_finite()) return idx;
    }
    catch (const NumericalError&)
    {
      return idx;
    }
  }
  return indices.front();
}

std::vector<std::size_t> chronological_order(std::span<const SlidingWindow> windows)
{
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return windows[a].start < windows[b].start; });
  return order;
}

}  // namespace

double evaluate_loss(const CondFlowModel& model, std::span<const SlidingWindow> windows,
                     std::span<const std::size_t> indices, std::size_t chunk)
{
  if (indices.empty()) throw std::invalid_argument("evaluate_loss: no windows");
  chunk = std::max<std::size_t>(chunk, 1);
  double total = 0.0;
  std::size_t rows = 0;
  for (std::size_t begin = 0; begin < indices.size(); begin += chunk)
  {
    const auto part = indices.subspan(begin, std::min(chunk, indices.size() - begin));
    const Array lp = window_log_prob(EagerContext{}, model, make_batch(windows, part), FlowMode::kInference);
    for (double v : lp.data()) total -= v;
    rows += lp.rows();
  }
  return total / static_cast<double>(rows);
}

std::vector<double> window_losses(const CondFlowModel& model, std::span<const SlidingWindow> windows)
{
  std::vector<double> out;
  out.reserve(windows.size());
  const std::size_t chunk = 256;
  std::vector<std::size_t> idx(windows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t begin = 0; begin < idx.size(); begin += chunk)
  {
    const auto part = std::span<const std::size_t>(idx).subspan(begin, std::min(chunk, idx.size() - begin));
    const Array lp = window_log_prob(EagerContext{}, model, make_batch(windows, part), FlowMode::kInference);
    for (double m : window_means(lp, part.size())) out.push_back(-m);
  }
  return out;
}

FitResult fit(std::span<const SlidingWindow> windows, CondFlowModel model, const TrainConfig& config,
              const EpochCallback& on_epoch)
{
  config.validate();
  if (windows.size() < 2) throw std::invalid_argument("fit: need at least 2 windows, got " + std::to_string(windows.size()));
  const std::vector<std::size_t> order = chronological_order(windows);
  const std::size_t n = order.size();
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(config.validation_fraction * static_cast<double>(n))), 1, n - 1);
  std::vector<std::size_t> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_val));
  const std::vector<std::size_t> validation(order.end() - static_cast<std::ptrdiff_t>(n_val), order.end());

  Rng rng(config.seed);
  std::vector<Parameter*> params = model.parameters();
  AdamState adam = make_adam_state(params, {.learning_rate = config.learning_rate});

  FitResult result{model, {}};
  result.history.best_validation_loss = std::numeric_limits<double>::infinity();
  std::shared_ptr<const CondFlowModel> last_good;
  std::size_t since_best = 0;

  auto diverge = [&](const std::string& why, std::size_t epoch) -> DivergenceError {
    std::string msg = "fit: " + why + " in epoch " + std::to_string(epoch);
    msg += last_good ? "; last good model is from epoch " + std::to_string(result.history.best_epoch)
                     : "; no validated model yet";
    return DivergenceError(msg, last_good, result.history);
  };

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch)
  {
    rng.shuffle(std::span(train));
    double loss_sum = 0.0;
    std::size_t loss_rows = 0;
    for (std::size_t begin = 0; begin < train.size(); begin += config.batch_size)
    {
      const auto part = std::span<const std::size_t>(train).subspan(begin, std::min(config.batch_size, train.size() - begin));
      const WindowBatch batch = make_batch(windows, part);
      zero_grads(params);
      Tape tape;
      TapeContext ctx{&tape};
      BatchMoments moments;
      Var lp;
      try
      {
        lp = window_log_prob(ctx, model, batch, FlowMode::kTraining, &moments);
      }
      catch (const NumericalError& e)
      {
        throw diverge(std::string(e.what()) + " at window " + std::to_string(first_bad_window(model, windows, part)), epoch);
      }
      const Var loss = scale(mean(lp), -1.0);
      if (!std::isfinite(loss.value().item()))
      {
        const std::vector<double> per = window_means(lp.value(), part.size());
        std::size_t bad = part.front();
        for (std::size_t k = 0; k < per.size(); ++k)
          if (!std::isfinite(per[k]))
          {
            bad = part[k];
            break;
          }
        throw diverge("non-finite loss at window " + std::to_string(bad), epoch);
      }
      tape.backward(loss);
      try
      {
        clip_grad_norm(params, config.clip_norm);
      }
      catch (const TrainingError& e)
      {
        throw diverge(e.what(), epoch);
      }
      adam_step(params, adam);
      update_running_stats(model.flow, moments);
      loss_sum += loss.value().item() * static_cast<double>(lp.value().rows());
      loss_rows += lp.value().rows();
    }

    EpochRecord record{epoch, loss_sum / static_cast<double>(loss_rows), 0.0};
    try
    {
      record.validation_loss = evaluate_loss(model, windows, validation);
    }
    catch (const NumericalError& e)
    {
      throw diverge(std::string("validation: ") + e.what(), epoch);
    }
    if (!std::isfinite(record.validation_loss)) throw diverge("non-finite validation loss", epoch);
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);
    log_message(LogLevel::kDebug, "epoch " + std::to_string(epoch) + " train " + std::to_string(record.train_loss) +
                                      " validation " + std::to_string(record.validation_loss));

    if (record.validation_loss < result.history.best_validation_loss)
    {
      result.history.best_validation_loss = record.validation_loss;
      result.history.best_epoch = epoch;
      result.model = model;
      last_good = std::make_shared<const CondFlowModel>(model);
      since_best = 0;
    }
    else if (++since_best > config.patience)
    {
      result.history.early_stopped = true;
      break;
    }
  }
  return result;
}

namespace
{

using nlohmann::json;

struct TensorRef
{
  std::string name;
  Array* value;
};

/// Every stored array in payload order.
std::vector<TensorRef> tensors_of(CondFlowModel& model, Array& std_mean, Array& std_dev)
{
  std::vector<TensorRef> out;
  for (Parameter* p : model.parameters()) out.push_back({p->name, &p->value});
  for (std::size_t k = 0; k < model.flow.norms.size(); ++k)
  {
    out.push_back({"flow.bn" + std::to_string(k) + ".running_mean", &model.flow.norms[k].running_mean});
    out.push_back({"flow.bn" + std::to_string(k) + ".running_var", &model.flow.norms[k].running_var});
  }
  out.push_back({"standardizer.mean", &std_mean});
  out.push_back({"standardizer.stddev", &std_dev});
  return out;
}

json model_config_json(const ModelConfig& c)
{
  return {{"data_width", c.data_width},       {"hidden", c.hidden},
          {"st_hidden", c.st_hidden},         {"st_layers", c.st_layers},
          {"coupling_blocks", c.coupling_blocks}, {"bn_momentum", c.bn_momentum},
          {"bn_epsilon", c.bn_epsilon},       {"context_len", c.context_len},
          {"pred_len", c.pred_len}};
}

ModelConfig model_config_from(const json& j)
{
  ModelConfig c;
  c.data_width = j.at("data_width").get<std::size_t>();
  c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.st_hidden = j.at("st_hidden").get<std::size_t>();
  c.st_layers = j.at("st_layers").get<std::size_t>();
  c.coupling_blocks = j.at("coupling_blocks").get<std::size_t>();
  c.bn_momentum = j.at("bn_momentum").get<double>();
  c.bn_epsilon = j.at("bn_epsilon").get<double>();
  c.context_len = j.at("context_len").get<std::size_t>();
  c.pred_len = j.at("pred_len").get<std::size_t>();
  return c;
}

json train_config_json(const TrainConfig& c)
{
  return {{"max_epochs", c.max_epochs}, {"batch_size", c.batch_size},   {"learning_rate", c.learning_rate},
          {"validation_fraction", c.validation_fraction}, {"patience", c.patience},
          {"seed", c.seed},             {"clip_norm", c.clip_norm}};
}

TrainConfig train_config_from(const json& j)
{
  TrainConfig c;
  c.max_epochs = j.at("max_epochs").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.validation_fraction = j.at("validation_fraction").get<double>();
  c.patience = j.at("patience").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.clip_norm = j.at("clip_norm").get<double>();
  return c;
}

json history_json(const TrainHistory& h)
{
  json epochs = json::array();
  for (const EpochRecord& r : h.epochs) epochs.push_back({r.epoch, r.train_loss, r.validation_loss});
  json best = std::isfinite(h.best_validation_loss) ? json(h.best_validation_loss) : json(nullptr);
  return {{"epochs", epochs}, {"best_epoch", h.best_epoch}, {"best_validation_loss", best}, {"early_stopped", h.early_stopped}};
}

TrainHistory history_from(const json& j)
{
  TrainHistory h;
  for (const json& r : j.at("epochs"))
    h.epochs.push_back({r.at(0).get<std::size_t>(), r.at(1).get<double>(), r.at(2).get<double>()});
  h.best_epoch = j.at("best_epoch").get<std::size_t>();
  const json& best = j.at("best_validation_loss");
  h.best_validation_loss = best.is_null() ? std::numeric_limits<double>::infinity() : best.get<double>();
  h.early_stopped = j.at("early_stopped").get<bool>();
  return h;
}

void put_u64(std::string& out, std::uint64_t v)
{
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view bytes)
{
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[static_cast<std::size_t>(i)]);
  return v;
}

[[noreturn]] void reject(const std::string& why) { throw std::runtime_error("checkpoint: " + why); }

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint)
{
  CondFlowModel model = checkpoint.model;
  Array std_mean = Array::row(model.standardizer.mean), std_dev = Array::row(model.standardizer.stddev);
  const std::vector<TensorRef> tensors = tensors_of(model, std_mean, std_dev);
  json names = json::array();
  for (const TensorRef& t : tensors) names.push_back({{"name", t.name}, {"shape", {t.value->rows(), t.value->cols()}}});
  const json meta = {{"format", kCheckpointMagic},
                     {"version", kCheckpointVersion},
                     {"model_config", model_config_json(model.config)},
                     {"train_config", train_config_json(checkpoint.train_config)},
                     {"feature_ids", model.feature_ids},
                     {"history", history_json(checkpoint.history)},
                     {"tensors", names}};
  const std::string text = meta.dump();

  std::string bytes(kCheckpointMagic);
  put_u64(bytes, text.size());
  bytes += text;
  for (const TensorRef& t : tensors)
    for (double v : t.value->data()) put_u64(bytes, std::bit_cast<std::uint64_t>(v));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) reject("write failed");
}

Checkpoint read_checkpoint(std::istream& in)
{
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const std::string_view view(bytes);
  const std::size_t magic_len = sizeof(kCheckpointMagic) - 1;
  if (view.size() < magic_len + 8) reject("file too short (" + std::to_string(view.size()) + " bytes)");
  if (view.substr(0, magic_len) != kCheckpointMagic) reject("bad magic bytes");
  const std::uint64_t meta_len = get_u64(view.substr(magic_len, 8));
  const std::size_t meta_begin = magic_len + 8;
  if (meta_len > view.size() - meta_begin) reject("metadata truncated");

  json meta;
  try
  {
    meta = json::parse(view.substr(meta_begin, meta_len));
  }
  catch (const json::exception& e)
  {
    reject(std::string("metadata unreadable: ") + e.what());
  }

  Checkpoint cp;
  try
  {
    const int version = meta.at("version").get<int>();
    if (version != kCheckpointVersion)
      reject("version " + std::to_string(version) + " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
    cp.model = CondFlowModel::init(model_config_from(meta.at("model_config")), 0);
    cp.model.feature_ids = meta.at("feature_ids").get<std::vector<std::string>>();
    cp.train_config = train_config_from(meta.at("train_config"));
    cp.history = history_from(meta.at("history"));
  }
  catch (const json::exception& e)
  {
    reject(std::string("metadata incomplete: ") + e.what());
  }
  catch (const std::invalid_argument& e)
  {
    reject(std::string("metadata invalid: ") + e.what());
  }
  if (cp.model.feature_ids.size() != cp.model.config.data_width) reject("feature_ids do not match data_width");

  const std::size_t N = cp.model.config.data_width;
  Array std_mean = Array::zeros(1, N), std_dev = Array::zeros(1, N);
  const std::vector<TensorRef> tensors = tensors_of(cp.model, std_mean, std_dev);
  const json& listed = meta.at("tensors");
  if (!listed.is_array() || listed.size() != tensors.size())
    reject("expected " + std::to_string(tensors.size()) + " tensors, metadata lists " + std::to_string(listed.size()));

  std::size_t pos = meta_begin + meta_len;
  for (std::size_t k = 0; k < tensors.size(); ++k)
  {
    const TensorRef& t = tensors[k];
    const std::string name = listed[k].at("name").get<std::string>();
    const auto shape = listed[k].at("shape").get<std::vector<std::size_t>>();
    if (name != t.name || shape != std::vector<std::size_t>{t.value->rows(), t.value->cols()})
      reject("tensor " + std::to_string(k) + " (" + name + ") does not match the model layout");
    for (double& v : t.value->data())
    {
      if (view.size() - pos < 8) reject("payload truncated in tensor " + name);
      v = std::bit_cast<double>(get_u64(view.substr(pos, 8)));
      pos += 8;
    }
  }
  if (pos != view.size()) reject(std::to_string(view.size() - pos) + " trailing bytes after payload");
  cp.model.standardizer.mean = std_mean.data();
  cp.model.standardizer.stddev = std_dev.data();
  for (Parameter* p : cp.model.parameters()) p->zero_grad();
  return cp;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) reject("cannot open " + path.string() + " for writing");
  write_checkpoint(out, checkpoint);
}

Checkpoint load_checkpoint(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) reject("cannot open " + path.string());
  return read_checkpoint(in);
}

}  // namespace flowad
