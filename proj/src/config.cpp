#include "flowad/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace flowad
{

static_assert(std::is_same_v<std::uint64_t, std::size_t>, "seed and size fields share one reader");

namespace
{

std::string join_issues(const std::vector<std::string>& issues)
{
  std::string out = "invalid configuration:";
  for (const std::string& issue : issues) out += "\n  " + issue;
  return out;
}

/// Walks one JSON object, converting known keys and recording problems by path.
class Reader
{
public:
  Reader(const nlohmann::json& node, std::string path, std::vector<std::string>& issues)
      : node_(node), path_(std::move(path)), issues_(issues)
  {
    if (!node_.is_object()) fail("", "expected an object");
  }

  ~Reader()
  {
    if (!node_.is_object()) return;
    for (const auto& item : node_.items())
      if (!seen_.contains(item.key())) fail(item.key(), "unknown key");
  }

  Reader(const Reader&) = delete;
  Reader& operator=(const Reader&) = delete;

  const nlohmann::json* find(const std::string& key)
  {
    seen_.insert(key);
    if (!node_.is_object() || !node_.contains(key)) return nullptr;
    return &node_.at(key);
  }

  std::optional<Reader> child(const std::string& key)
  {
    const nlohmann::json* v = find(key);
    if (!v) return std::nullopt;
    return std::optional<Reader>(std::in_place, *v, field(key), issues_);
  }

  void get(const std::string& key, std::size_t& out)
  {
    if (const nlohmann::json* v = find(key)) convert_size(*v, key, out);
  }

  void get(const std::string& key, std::int64_t& out)
  {
    const nlohmann::json* v = find(key);
    if (!v) return;
    if (v->is_number_integer())
      out = v->get<std::int64_t>();
    else
      fail(key, "expected an integer");
  }

  void get(const std::string& key, double& out)
  {
    const nlohmann::json* v = find(key);
    if (!v) return;
    if (v->is_number())
      out = v->get<double>();
    else
      fail(key, "expected a number");
  }

  void get(const std::string& key, std::optional<double>& out)
  {
    const nlohmann::json* v = find(key);
    if (!v) return;
    if (v->is_null())
      out.reset();
    else if (v->is_number())
      out = v->get<double>();
    else
      fail(key, "expected a number or null");
  }

  void get(const std::string& key, std::string& out)
  {
    const nlohmann::json* v = find(key);
    if (!v) return;
    if (v->is_string())
      out = v->get<std::string>();
    else
      fail(key, "expected a string");
  }

  void get(const std::string& key, std::vector<std::size_t>& out)
  {
    const nlohmann::json* v = find(key);
    if (!v) return;
    if (!v->is_array()) return fail(key, "expected an array of integers");
    std::vector<std::size_t> values;
    for (const auto& e : *v)
    {
      if (!e.is_number_unsigned()) return fail(key, "expected an array of nonnegative integers");
      values.push_back(e.get<std::size_t>());
    }
    out = std::move(values);
  }

  void get(const std::string& key, std::vector<double>& out)
  {
    const nlohmann::json* v = find(key);
    if (!v) return;
    if (!v->is_array()) return fail(key, "expected an array of numbers");
    std::vector<double> values;
    for (const auto& e : *v)
    {
      if (!e.is_number()) return fail(key, "expected an array of numbers");
      values.push_back(e.get<double>());
    }
    out = std::move(values);
  }

  void fail(const std::string& key, const std::string& message) { issues_.push_back(field(key) + ": " + message); }

private:
  std::string field(const std::string& key) const
  {
    if (key.empty()) return path_.empty() ? "<root>" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  template <typename T>
  void convert_size(const nlohmann::json& v, const std::string& key, T& out)
  {
    if (v.is_number_unsigned())
      out = v.get<T>();
    else
      fail(key, "expected a nonnegative integer");
  }

  const nlohmann::json& node_;
  std::string path_;
  std::vector<std::string>& issues_;
  std::set<std::string> seen_;
};

class Checker
{
public:
  void require(bool ok, const std::string& field, const std::string& message)
  {
    if (!ok) issues.push_back(field + ": " + message);
  }

  void positive(std::size_t v, const std::string& field) { require(v > 0, field, "must be at least 1"); }
  void positive(double v, const std::string& field) { require(v > 0.0, field, "must be positive"); }
  void open_unit(double v, const std::string& field) { require(v > 0.0 && v < 1.0, field, "must lie in (0, 1)"); }
  void closed_unit(double v, const std::string& field) { require(v >= 0.0 && v <= 1.0, field, "must lie in [0, 1]"); }

  void path(const std::string& p, const std::string& field)
  {
    if (!p.empty()) require(std::filesystem::exists(p), field, "path '" + p + "' does not exist");
  }

  std::vector<std::string> issues;
};

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues) : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

std::string to_string(ThresholdMode mode) { return mode == ThresholdMode::kStatic ? "static" : "spot"; }

void RunConfig::validate() const
{
  Checker c;
  c.path(data.panel, "data.panel");
  c.path(data.history, "data.history");
  c.path(data.labels, "data.labels");
  c.path(data.assignment, "data.assignment");
  c.path(data.checkpoints, "data.checkpoints");
  c.path(data.scores, "data.scores");

  c.require(cluster.sample_size >= 2, "cluster.sample_size", "must be at least 2");
  c.require(cluster.min_pts >= 2, "cluster.min_pts", "must be at least 2");
  c.open_unit(cluster.xi, "cluster.xi");
  if (cluster.band_fraction) c.require(*cluster.band_fraction > 0.0 && *cluster.band_fraction <= 1.0, "cluster.band_fraction", "must lie in (0, 1]");

  c.positive(window.context, "window.context");
  c.positive(window.prediction, "window.prediction");
  c.positive(window.stride, "window.stride");

  c.require(!model.hidden.empty(), "model.hidden", "needs at least one layer width");
  for (std::size_t h : model.hidden) c.require(h > 0, "model.hidden", "widths must be positive");
  c.positive(model.st_hidden, "model.st_hidden");
  c.positive(model.st_layers, "model.st_layers");
  c.positive(model.coupling_blocks, "model.coupling_blocks");
  c.require(model.bn_momentum >= 0.0 && model.bn_momentum < 1.0, "model.bn_momentum", "must lie in [0, 1)");
  c.require(model.bn_epsilon >= 0.0, "model.bn_epsilon", "must be nonnegative");

  c.positive(train.max_epochs, "train.max_epochs");
  c.positive(train.batch_size, "train.batch_size");
  c.positive(train.learning_rate, "train.learning_rate");
  c.open_unit(train.validation_fraction, "train.validation_fraction");
  c.positive(train.clip_norm, "train.clip_norm");

  c.open_unit(threshold.prefix_fraction, "threshold.prefix_fraction");
  c.require(threshold.grid_size >= 2, "threshold.grid_size", "must be at least 2");
  c.open_unit(threshold.level, "threshold.level");
  c.require(threshold.q > 0.0 && threshold.q < 1.0 - threshold.level, "threshold.q", "must lie in (0, 1 - threshold.level)");
  c.require(threshold.init_size >= 100, "threshold.init_size", "must be at least 100");

  c.require(diagnosis.sigma >= 2, "diagnosis.sigma", "must be at least 2");
  c.open_unit(diagnosis.validation_fraction, "diagnosis.validation_fraction");

  c.require(synth.source == "sinusoid" || synth.source == "gaussian", "synth.source", "must be \"sinusoid\" or \"gaussian\"");
  c.closed_unit(synth.alpha, "synth.alpha");
  c.closed_unit(synth.beta, "synth.beta");
  c.positive(synth.slice_len, "synth.slice_len");
  c.positive(synth.features, "synth.features");
  c.require(synth.length >= 2, "synth.length", "must be at least 2");
  c.require(synth.step > 0, "synth.step", "must be positive");
  c.require(synth.noise >= 0.0, "synth.noise", "must be nonnegative");
  c.closed_unit(synth.correlation, "synth.correlation");
  c.open_unit(synth.holdout, "synth.holdout");

  c.positive(generate.length, "generate.length");
  c.positive(generate.datasets, "generate.datasets");

  c.positive(classifier.hidden, "classifier.hidden");
  c.positive(classifier.max_epochs, "classifier.max_epochs");
  c.positive(classifier.batch_size, "classifier.batch_size");
  c.positive(classifier.learning_rate, "classifier.learning_rate");
  c.require(classifier.tolerance >= 0.0, "classifier.tolerance", "must be nonnegative");
  c.positive(classifier.patience, "classifier.patience");

  c.require(!eval.alphas.empty(), "eval.alphas", "needs at least one value");
  for (double a : eval.alphas) c.closed_unit(a, "eval.alphas");
  c.require(!eval.betas.empty(), "eval.betas", "needs at least one value");
  for (double b : eval.betas) c.closed_unit(b, "eval.betas");
  c.closed_unit(eval.fixed_alpha, "eval.fixed_alpha");
  c.closed_unit(eval.fixed_beta, "eval.fixed_beta");
  c.positive(eval.replicates, "eval.replicates");
  c.positive(eval.ar_lag, "eval.ar_lag");

  c.require(report.bucket_minutes > 0, "report.bucket_minutes", "must be at least 1");

  if (!c.issues.empty()) throw ConfigError(std::move(c.issues));
}

ModelConfig RunConfig::model_config(std::size_t data_width) const
{
  ModelConfig m;
  m.data_width = data_width;
  m.hidden = model.hidden;
  m.st_hidden = model.st_hidden;
  m.st_layers = model.st_layers;
  m.coupling_blocks = model.coupling_blocks;
  m.bn_momentum = model.bn_momentum;
  m.bn_epsilon = model.bn_epsilon;
  m.context_len = window.context;
  m.pred_len = window.prediction;
  return m;
}

DistanceOptions RunConfig::distance_options() const
{
  DistanceOptions d;
  d.sample_size = cluster.sample_size;
  d.seed = seed;
  d.band_fraction = cluster.band_fraction;
  return d;
}

SpotOptions RunConfig::spot_options() const { return {threshold.level, threshold.q, threshold.init_size}; }

DiagnosisOptions RunConfig::diagnosis_options() const
{
  DiagnosisOptions d;
  d.sigma = diagnosis.sigma;
  d.validation_fraction = diagnosis.validation_fraction;
  return d;
}

InjectionSpec RunConfig::injection_spec() const { return {synth.alpha, synth.beta, synth.slice_len, seed}; }

SinusoidSpec RunConfig::sinusoid_spec() const
{
  SinusoidSpec s;
  s.features = synth.features;
  s.length = synth.length;
  s.step = synth.step;
  s.noise = synth.noise;
  s.correlation = synth.correlation;
  s.seed = seed;
  return s;
}

RunConfig config_from_json(const nlohmann::json& doc)
{
  RunConfig c;
  std::vector<std::string> issues;
  {
    Reader root(doc, "", issues);
    root.get("seed", c.seed);
    if (auto r = root.child("data"))
    {
      r->get("panel", c.data.panel);
      r->get("history", c.data.history);
      r->get("labels", c.data.labels);
      r->get("assignment", c.data.assignment);
      r->get("checkpoints", c.data.checkpoints);
      r->get("scores", c.data.scores);
    }
    if (auto r = root.child("cluster"))
    {
      r->get("sample_size", c.cluster.sample_size);
      r->get("min_pts", c.cluster.min_pts);
      r->get("xi", c.cluster.xi);
      r->get("band_fraction", c.cluster.band_fraction);
    }
    if (auto r = root.child("window"))
    {
      r->get("context", c.window.context);
      r->get("prediction", c.window.prediction);
      r->get("stride", c.window.stride);
    }
    if (auto r = root.child("model"))
    {
      r->get("hidden", c.model.hidden);
      r->get("st_hidden", c.model.st_hidden);
      r->get("st_layers", c.model.st_layers);
      r->get("coupling_blocks", c.model.coupling_blocks);
      r->get("bn_momentum", c.model.bn_momentum);
      r->get("bn_epsilon", c.model.bn_epsilon);
    }
    if (auto r = root.child("train"))
    {
      r->get("max_epochs", c.train.max_epochs);
      r->get("batch_size", c.train.batch_size);
      r->get("learning_rate", c.train.learning_rate);
      r->get("validation_fraction", c.train.validation_fraction);
      r->get("patience", c.train.patience);
      r->get("clip_norm", c.train.clip_norm);
    }
    if (auto r = root.child("threshold"))
    {
      std::string mode = to_string(c.threshold.mode);
      r->get("mode", mode);
      if (mode == "static")
        c.threshold.mode = ThresholdMode::kStatic;
      else if (mode == "spot")
        c.threshold.mode = ThresholdMode::kSpot;
      else
        r->fail("mode", "must be \"static\" or \"spot\"");
      r->get("prefix_fraction", c.threshold.prefix_fraction);
      r->get("grid_size", c.threshold.grid_size);
      r->get("q", c.threshold.q);
      r->get("level", c.threshold.level);
      r->get("init_size", c.threshold.init_size);
    }
    if (auto r = root.child("diagnosis"))
    {
      r->get("sigma", c.diagnosis.sigma);
      r->get("validation_fraction", c.diagnosis.validation_fraction);
    }
    if (auto r = root.child("synth"))
    {
      r->get("source", c.synth.source);
      r->get("alpha", c.synth.alpha);
      r->get("beta", c.synth.beta);
      r->get("slice_len", c.synth.slice_len);
      r->get("features", c.synth.features);
      r->get("length", c.synth.length);
      r->get("step", c.synth.step);
      r->get("noise", c.synth.noise);
      r->get("correlation", c.synth.correlation);
      r->get("holdout", c.synth.holdout);
    }
    if (auto r = root.child("generate"))
    {
      r->get("length", c.generate.length);
      r->get("datasets", c.generate.datasets);
    }
    if (auto r = root.child("classifier"))
    {
      r->get("hidden", c.classifier.hidden);
      r->get("hidden_layers", c.classifier.hidden_layers);
      r->get("max_epochs", c.classifier.max_epochs);
      r->get("batch_size", c.classifier.batch_size);
      r->get("learning_rate", c.classifier.learning_rate);
      r->get("tolerance", c.classifier.tolerance);
      r->get("patience", c.classifier.patience);
    }
    if (auto r = root.child("eval"))
    {
      r->get("alphas", c.eval.alphas);
      r->get("betas", c.eval.betas);
      r->get("fixed_alpha", c.eval.fixed_alpha);
      r->get("fixed_beta", c.eval.fixed_beta);
      r->get("replicates", c.eval.replicates);
      r->get("ar_lag", c.eval.ar_lag);
    }
    if (auto r = root.child("report")) r->get("bucket_minutes", c.report.bucket_minutes);
  }
  if (!issues.empty()) throw ConfigError(std::move(issues));
  c.train.seed = c.seed;
  c.classifier.seed = c.seed;
  return c;
}

RunConfig load_config(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError({"config: cannot open '" + path.string() + "'"});
  nlohmann::json doc;
  try
  {
    doc = nlohmann::json::parse(in);
  }
  catch (const nlohmann::json::parse_error& e)
  {
    throw ConfigError({"config: " + path.string() + " is not valid JSON (" + e.what() + ")"});
  }
  return config_from_json(doc);
}

nlohmann::json config_to_json(const RunConfig& c)
{
  nlohmann::json j;
  j["seed"] = c.seed;
  j["data"] = {{"panel", c.data.panel},           {"history", c.data.history},
               {"labels", c.data.labels},         {"assignment", c.data.assignment},
               {"checkpoints", c.data.checkpoints}, {"scores", c.data.scores}};
  j["cluster"] = {{"sample_size", c.cluster.sample_size}, {"min_pts", c.cluster.min_pts}, {"xi", c.cluster.xi}};
  j["cluster"]["band_fraction"] = c.cluster.band_fraction ? nlohmann::json(*c.cluster.band_fraction) : nlohmann::json(nullptr);
  j["window"] = {{"context", c.window.context}, {"prediction", c.window.prediction}, {"stride", c.window.stride}};
  j["model"] = {{"hidden", c.model.hidden},       {"st_hidden", c.model.st_hidden},
                {"st_layers", c.model.st_layers}, {"coupling_blocks", c.model.coupling_blocks},
                {"bn_momentum", c.model.bn_momentum}, {"bn_epsilon", c.model.bn_epsilon}};
  j["train"] = {{"max_epochs", c.train.max_epochs},
                {"batch_size", c.train.batch_size},
                {"learning_rate", c.train.learning_rate},
                {"validation_fraction", c.train.validation_fraction},
                {"patience", c.train.patience},
                {"clip_norm", c.train.clip_norm}};
  j["threshold"] = {{"mode", to_string(c.threshold.mode)}, {"prefix_fraction", c.threshold.prefix_fraction},
                    {"grid_size", c.threshold.grid_size},  {"q", c.threshold.q},
                    {"level", c.threshold.level},          {"init_size", c.threshold.init_size}};
  j["diagnosis"] = {{"sigma", c.diagnosis.sigma}, {"validation_fraction", c.diagnosis.validation_fraction}};
  j["synth"] = {{"source", c.synth.source}, {"alpha", c.synth.alpha},   {"beta", c.synth.beta},
                {"slice_len", c.synth.slice_len}, {"features", c.synth.features}, {"length", c.synth.length},
                {"step", c.synth.step},     {"noise", c.synth.noise},   {"correlation", c.synth.correlation},
                {"holdout", c.synth.holdout}};
  j["generate"] = {{"length", c.generate.length}, {"datasets", c.generate.datasets}};
  j["classifier"] = {{"hidden", c.classifier.hidden},
                     {"hidden_layers", c.classifier.hidden_layers},
                     {"max_epochs", c.classifier.max_epochs},
                     {"batch_size", c.classifier.batch_size},
                     {"learning_rate", c.classifier.learning_rate},
                     {"tolerance", c.classifier.tolerance},
                     {"patience", c.classifier.patience}};
  j["eval"] = {{"alphas", c.eval.alphas},         {"betas", c.eval.betas},
               {"fixed_alpha", c.eval.fixed_alpha}, {"fixed_beta", c.eval.fixed_beta},
               {"replicates", c.eval.replicates}, {"ar_lag", c.eval.ar_lag}};
  j["report"] = {{"bucket_minutes", c.report.bucket_minutes}};
  return j;
}

}  // namespace flowad
