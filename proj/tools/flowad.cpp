#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowad/config.hpp"
#include "flowad/evalgen.hpp"
#include "flowad/log.hpp"
#include "flowad/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace flowad
{
namespace
{

/// Raised for invalid command-line usage; maps to exit code 2.
class UsageError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Flags shared by every subcommand.
struct CommonOptions
{
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::vector<std::string> sets;
  std::map<std::string, std::string> data;  // data.<key> overrides from path flags
};

void set_at(json& doc, const std::string& dotted, json value)
{
  json* node = &doc;
  std::size_t begin = 0;
  while (true)
  {
    const std::size_t dot = dotted.find('.', begin);
    const std::string key = dotted.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
    if (key.empty()) throw UsageError("--set: malformed key '" + dotted + "'");
    if (dot == std::string::npos)
    {
      (*node)[key] = std::move(value);
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
    node = &(*node)[key];
    begin = dot + 1;
  }
}

RunConfig resolve_config(const CommonOptions& o)
{
  json doc = json::object();
  if (!o.config_path.empty())
  {
    std::ifstream in(o.config_path);
    if (!in) throw ConfigError({"--config: cannot open '" + o.config_path + "'"});
    try
    {
      doc = json::parse(in);
    }
    catch (const json::parse_error& e)
    {
      throw ConfigError({"--config: '" + o.config_path + "' is not valid JSON: " + e.what()});
    }
  }
  for (const std::string& s : o.sets)
  {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    const std::string text = s.substr(eq + 1);
    json value;
    try
    {
      value = json::parse(text);
    }
    catch (const json::parse_error&)
    {
      value = text;
    }
    set_at(doc, s.substr(0, eq), std::move(value));
  }
  if (o.seed) doc["seed"] = *o.seed;
  for (const auto& [key, path] : o.data)
    if (!path.empty()) set_at(doc, "data." + key, path);
  RunConfig config = config_from_json(doc);
  config.validate();
  return config;
}

const std::string& need(const std::string& value, const std::string& flag)
{
  if (value.empty()) throw UsageError("missing input: pass --" + flag + " or set data." + flag + " in the config");
  return value;
}

fs::path out_dir(const CommonOptions& o)
{
  fs::create_directories(o.out);
  return o.out;
}

void write_json(const fs::path& path, const json& doc)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("write to " + path.string() + " failed");
}

json metrics_json(const MetricsRecord& m)
{
  return {{"tp", m.tp},
          {"fp", m.fp},
          {"fn", m.fn},
          {"tn", m.tn},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"auc", std::isnan(m.auc) ? json(nullptr) : json(m.auc)}};
}

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

/// Per-timestamp labels (any feature) looked up by timestamp; -1 where absent.
std::vector<int> labels_for(std::span<const Timestamp> timestamps, const SeriesPanel& label_panel)
{
  const std::vector<int> per_row = labels_from_panel(label_panel).timestamp_labels();
  std::map<Timestamp, int> by_ts;
  for (std::size_t t = 0; t < per_row.size(); ++t) by_ts[label_panel.timestamps[t]] = per_row[t];
  std::vector<int> out;
  for (Timestamp ts : timestamps)
  {
    const auto it = by_ts.find(ts);
    out.push_back(it == by_ts.end() ? -1 : it->second);
  }
  return out;
}

SeriesPanel concat_rows(const SeriesPanel& a, const SeriesPanel& b)
{
  if (a.feature_ids != b.feature_ids) throw std::invalid_argument("panels disagree on features");
  Array values = Array::zeros(a.length() + b.length(), a.width());
  for (std::size_t t = 0; t < a.length(); ++t)
    for (std::size_t i = 0; i < a.width(); ++i) values.at(t, i) = a.at(t, i);
  for (std::size_t t = 0; t < b.length(); ++t)
    for (std::size_t i = 0; i < b.width(); ++i) values.at(a.length() + t, i) = b.at(t, i);
  SeriesPanel out = make_panel(a.timestamps.front(), a.step(), a.feature_ids, std::move(values));
  if (out.timestamps.back() != b.timestamps.back()) throw std::invalid_argument("panels are not contiguous in time");
  return out;
}

int cmd_cluster(const CommonOptions& o)
{
  const RunConfig cfg = resolve_config(o);
  const SeriesPanel panel = read_panel(need(cfg.data.panel, "panel"));
  if (panel.has_gaps()) throw std::invalid_argument("cluster: panel has missing values; impute first");
  DistanceOptions d = cfg.distance_options();
  if (d.sample_size > panel.width())
  {
    info("cluster: sample_size exceeds the feature count; using all " + std::to_string(panel.width()) + " features");
    d.sample_size = panel.width();
  }
  const DistanceMatrix matrix = build_distance_matrix(panel, d);
  ClusterAssignment assignment = cluster_features(matrix, cfg.cluster.min_pts, cfg.cluster.xi);
  assignment.seed = cfg.seed;
  assignment = assign_remaining(panel, std::move(assignment), std::nullopt, cfg.cluster.band_fraction);
  const fs::path out = out_dir(o) / "assignment.txt";
  write_assignment(out.string(), assignment);
  info("cluster: " + std::to_string(assignment.cluster_count()) + " clusters written to " + out.string());
  return 0;
}

int cmd_train(const CommonOptions& o, std::size_t threads)
{
  const RunConfig cfg = resolve_config(o);
  const SeriesPanel history = read_panel(need(cfg.data.panel, "panel"));
  ClusterAssignment assignment;
  if (cfg.data.assignment.empty())
  {
    assignment.feature_ids = history.feature_ids;
    assignment.labels.assign(history.width(), 0);
    assignment.medoids = {history.feature_ids.front()};
  }
  else
  {
    assignment = read_assignment(cfg.data.assignment);
  }
  const std::vector<FitResult> fits = train_clusters(history, assignment, cfg, threads);
  const fs::path out = out_dir(o);
  json summary = json::array();
  for (std::size_t k = 0; k < fits.size(); ++k)
  {
    save_checkpoint(out / checkpoint_name(k), {fits[k].model, fits[k].history, cfg.train});
    summary.push_back({{"cluster", k},
                       {"features", fits[k].model.feature_ids},
                       {"epochs", fits[k].history.epochs.size()},
                       {"best_epoch", fits[k].history.best_epoch},
                       {"best_validation_loss", fits[k].history.best_validation_loss},
                       {"early_stopped", fits[k].history.early_stopped}});
  }
  write_json(out / "train_summary.json", summary);
  return 0;
}

int cmd_score(const CommonOptions& o, std::size_t stride)
{
  const RunConfig cfg = resolve_config(o);
  const std::vector<CondFlowModel> models = load_models(need(cfg.data.checkpoints, "checkpoints"));
  const SeriesPanel panel = read_panel(need(cfg.data.panel, "panel"));
  const fs::path out = out_dir(o);
  std::vector<AnomalyScoreSeries> parts;
  for (std::size_t k = 0; k < models.size(); ++k)
  {
    parts.push_back(score_panel(models[k], panel, stride == 0 ? models[k].config.pred_len : stride));
    write_score_file(out / ("scores_cluster_" + std::to_string(k) + ".csv"), parts.back(),
                     std::vector<int>(parts.back().score.size(), 0));
  }
  const AnomalyScoreSeries total = combine_scores(parts);
  write_score_file(out / "scores.csv", total, std::vector<int>(total.score.size(), 0));
  return 0;
}

int cmd_detect(const CommonOptions& o)
{
  const RunConfig cfg = resolve_config(o);
  ScoreFile scores = read_score_file(need(cfg.data.scores, "scores"));
  const AnomalyScoreSeries& s = scores.series;
  const std::vector<std::size_t> scored = s.scored_indices();
  std::vector<int> flags(s.score.size(), 0);
  json report{{"mode", to_string(cfg.threshold.mode)}};

  std::vector<int> labels;
  if (!cfg.data.labels.empty()) labels = labels_for(s.timestamps, read_panel(cfg.data.labels));

  if (cfg.threshold.mode == ThresholdMode::kStatic)
  {
    if (labels.empty()) throw UsageError("detect: static thresholding needs --labels (or use threshold.mode=spot)");
    std::vector<std::size_t> usable;
    for (std::size_t t : scored)
      if (labels[t] >= 0) usable.push_back(t);
    if (usable.empty()) throw std::invalid_argument("detect: no scored timestamp has a label");
    const auto n_prefix = static_cast<std::size_t>(std::floor(cfg.threshold.prefix_fraction * static_cast<double>(usable.size())));
    std::vector<double> pre_s;
    std::vector<int> pre_l;
    for (std::size_t k = 0; k < n_prefix; ++k)
    {
      pre_s.push_back(s.score[usable[k]]);
      pre_l.push_back(labels[usable[k]]);
    }
    const StaticThreshold th = static_threshold(pre_s, pre_l, cfg.threshold.grid_size);
    for (std::size_t t : scored) flags[t] = s.score[t] >= th.epsilon ? 1 : 0;
    report["epsilon"] = th.epsilon;
    report["prefix_rows"] = n_prefix;
    if (n_prefix < usable.size())
    {
      std::vector<int> f, l;
      std::vector<double> sc;
      for (std::size_t k = n_prefix; k < usable.size(); ++k)
      {
        f.push_back(flags[usable[k]]);
        l.push_back(labels[usable[k]]);
        sc.push_back(s.score[usable[k]]);
      }
      report["evaluation_begin"] = format_timestamp(s.timestamps[usable[n_prefix]]);
      report["metrics"] = metrics_json(metrics(f, l, sc));
    }
  }
  else
  {
    std::vector<double> values;
    for (std::size_t t : scored) values.push_back(s.score[t]);
    ThresholdState state;
    const std::vector<int> spot = spot_run(values, cfg.spot_options(), &state);
    for (std::size_t k = 0; k < scored.size(); ++k) flags[scored[k]] = spot[k];
    report["initial_threshold"] = state.t;
    report["final_alarm_level"] = state.z_q;
    const std::size_t n_init = std::min(cfg.threshold.init_size, scored.size());
    report["init_rows"] = n_init;
    if (!labels.empty())
    {
      std::vector<int> f, l;
      std::vector<double> sc;
      for (std::size_t k = n_init; k < scored.size(); ++k)
        if (labels[scored[k]] >= 0)
        {
          f.push_back(spot[k]);
          l.push_back(labels[scored[k]]);
          sc.push_back(values[k]);
        }
      if (!f.empty()) report["metrics"] = metrics_json(metrics(f, l, sc));
    }
  }
  const fs::path out = out_dir(o);
  write_score_file(out / "flags.csv", s, flags);
  write_json(out / "detect.json", report);
  return 0;
}

int cmd_diagnose(const CommonOptions& o)
{
  const RunConfig cfg = resolve_config(o);
  const ScoreFile flagged = read_score_file(need(cfg.data.scores, "scores"));
  const SeriesPanel history = read_panel(need(cfg.data.history, "history"));
  const SeriesPanel observed = read_panel(need(cfg.data.panel, "panel"));
  std::vector<Timestamp> at;
  for (std::size_t t = 0; t < flagged.flags.size(); ++t)
    if (flagged.flags[t]) at.push_back(flagged.series.timestamps[t]);
  const DiagnosisResult result = diagnose(history, observed, at, cfg.diagnosis_options());
  const fs::path out = out_dir(o);
  std::ofstream csv(out / "diagnosis.csv");
  csv << "timestamp,feature_id,density,threshold\n";
  for (const auto& [ts, features] : result.implicated)
    for (const ImplicatedFeature& f : features)
      csv << format_timestamp(ts) << ',' << f.feature_id << ',' << format_double(f.density) << ','
          << format_double(f.threshold) << '\n';
  if (!csv) throw std::runtime_error("diagnose: write to diagnosis.csv failed");
  write_score_file(out / "flags_diagnosed.csv", flagged.series, flagged.flags, &result);
  return 0;
}

int cmd_synth(const CommonOptions& o)
{
  const RunConfig cfg = resolve_config(o);
  Rng seeds(cfg.seed);
  const std::uint64_t data_seed = seeds.split(), inject_seed = seeds.split();
  SeriesPanel history, clean_test;
  if (cfg.synth.source == "sinusoid")
  {
    SinusoidSpec spec = cfg.sinusoid_spec();
    spec.seed = data_seed;
    const SeriesPanel full = sinusoid_panel(spec);
    const auto n_test = static_cast<std::size_t>(std::llround(cfg.synth.holdout * static_cast<double>(full.length())));
    if (n_test == 0 || n_test >= full.length()) throw std::invalid_argument("synth: holdout leaves an empty history or test");
    history = full.slice_rows(0, full.length() - n_test);
    clean_test = full.slice_rows(full.length() - n_test, full.length());
  }
  else
  {
    history = read_panel(need(cfg.data.panel, "panel"));
    if (history.has_gaps()) throw std::invalid_argument("synth: panel has missing values; impute first");
    const GaussianGroundTruth truth = fit_gaussian(history);
    clean_test = sample_ground_truth(truth, cfg.synth.length, data_seed, history.timestamps.back() + history.step(),
                                     history.step(), history.feature_ids);
  }
  InjectionSpec spec = cfg.injection_spec();
  spec.seed = inject_seed;
  const InjectionResult injected = inject_anomalies(clean_test, spec);
  const fs::path out = out_dir(o);
  write_panel(out / "history.csv", history);
  write_panel(out / "test_clean.csv", clean_test);
  write_panel(out / "test.csv", injected.panel);
  write_panel(out / "labels.csv", label_panel(injected.panel, injected.labels));
  write_panel(out / "panel.csv", concat_rows(history, injected.panel));
  return 0;
}

int cmd_generate(const CommonOptions& o)
{
  const RunConfig cfg = resolve_config(o);
  const std::vector<CondFlowModel> models = load_models(need(cfg.data.checkpoints, "checkpoints"));
  const SeriesPanel warmup = read_panel(need(cfg.data.panel, "panel"));
  const fs::path out = out_dir(o);
  Rng seeds(cfg.seed);
  for (std::size_t d = 0; d < cfg.generate.datasets; ++d)
  {
    InjectionSpec spec = cfg.injection_spec();
    spec.seed = seeds.split();
    const GeneratedDataset set = make_labeled_set(models, warmup, cfg.generate.length, spec);
    write_panel(out / ("generated_" + std::to_string(d) + ".csv"), set.panel);
    write_panel(out / ("generated_" + std::to_string(d) + "_labels.csv"), label_panel(set.panel, set.labels));
  }
  return 0;
}

int cmd_classify(const CommonOptions& o, const std::string& generated_dir)
{
  const RunConfig cfg = resolve_config(o);
  if (generated_dir.empty()) throw UsageError("classify: pass --generated DIR");
  std::vector<SeriesPanel> panels;
  std::vector<std::vector<int>> labels;
  for (std::size_t d = 0;; ++d)
  {
    const fs::path p = fs::path(generated_dir) / ("generated_" + std::to_string(d) + ".csv");
    const fs::path l = fs::path(generated_dir) / ("generated_" + std::to_string(d) + "_labels.csv");
    if (!fs::exists(p)) break;
    panels.push_back(read_panel(p));
    labels.push_back(labels_from_panel(read_panel(l)).timestamp_labels());
  }
  if (panels.empty()) throw std::invalid_argument("classify: no generated_<d>.csv files in '" + generated_dir + "'");
  const bool external = !cfg.data.panel.empty();
  if (panels.size() < 2 && !external) throw UsageError("classify: one generated set needs --panel and --labels for evaluation");

  const std::size_t n_train = external ? panels.size() : panels.size() - 1;
  std::size_t rows = 0;
  for (std::size_t d = 0; d < n_train; ++d) rows += panels[d].length();
  const std::vector<std::string>& ids = panels.front().feature_ids;
  Array x = Array::zeros(rows, ids.size());
  std::vector<int> y;
  std::size_t r = 0;
  for (std::size_t d = 0; d < n_train; ++d)
  {
    const SeriesPanel sel = panels[d].select_features(columns_of(panels[d], ids));
    for (std::size_t t = 0; t < sel.length(); ++t, ++r)
      for (std::size_t i = 0; i < ids.size(); ++i) x.at(r, i) = sel.at(t, i);
    y.insert(y.end(), labels[d].begin(), labels[d].end());
  }
  const MlpClassifier clf = train_classifier(x, y, cfg.classifier);

  auto evaluate = [&](const SeriesPanel& panel, const std::vector<int>& truth) {
    const SeriesPanel sel = panel.select_features(columns_of(panel, ids));
    const std::vector<double> p = predict(clf, sel.values);
    std::vector<int> flags;
    for (double v : p) flags.push_back(v >= 0.5 ? 1 : 0);
    return metrics_json(metrics(flags, truth, p));
  };
  json report{{"train_sets", n_train}, {"train_rows", rows}};
  if (external)
  {
    const SeriesPanel test = read_panel(cfg.data.panel);
    if (cfg.data.labels.empty()) throw UsageError("classify: --panel needs --labels");
    report["test"] = evaluate(test, labels_for(test.timestamps, read_panel(cfg.data.labels)));
  }
  else
  {
    report["held_out_generated"] = evaluate(panels.back(), labels.back());
  }
  write_json(out_dir(o) / "classifier_metrics.json", report);
  return 0;
}

int cmd_eval(const CommonOptions& o)
{
  const RunConfig cfg = resolve_config(o);
  ExperimentSetup setup;
  setup.models = load_models(need(cfg.data.checkpoints, "checkpoints"));
  setup.history = read_panel(need(cfg.data.history, "history"));
  setup.test = read_panel(need(cfg.data.panel, "panel"));
  setup.slice_len = cfg.synth.slice_len;
  setup.prefix_fraction = cfg.threshold.prefix_fraction;
  setup.grid_size = cfg.threshold.grid_size;
  setup.ar_lag = cfg.eval.ar_lag;
  const fs::path out = out_dir(o);
  write_grid_table(out / "effectiveness.csv",
                   run_effectiveness(setup, cfg.eval.alphas, cfg.eval.fixed_beta, cfg.eval.replicates, cfg.seed));
  write_grid_table(out / "sensitivity.csv",
                   run_sensitivity(setup, cfg.eval.betas, cfg.eval.fixed_alpha, cfg.eval.replicates, cfg.seed));
  return 0;
}

int cmd_report(const CommonOptions& o, const std::vector<std::string>& score_paths)
{
  const RunConfig cfg = resolve_config(o);
  std::vector<std::string> paths = score_paths;
  if (paths.empty()) paths.push_back(need(cfg.data.scores, "scores"));
  std::vector<ScoreFile> files;
  for (const std::string& p : paths) files.push_back(read_score_file(p));
  const std::vector<Timestamp>& ts = files.front().series.timestamps;
  for (const ScoreFile& f : files)
    if (f.series.timestamps != ts) throw std::invalid_argument("report: score files cover different timestamps");

  std::vector<std::string> columns;
  for (const std::string& p : paths) columns.push_back(fs::path(p).stem().string());
  std::optional<SeriesPanel> panel;
  if (!cfg.data.panel.empty())
  {
    panel = read_panel(cfg.data.panel);
    if (panel->timestamps != ts) throw std::invalid_argument("report: panel and scores cover different timestamps");
    columns.insert(columns.end(), panel->feature_ids.begin(), panel->feature_ids.end());
  }
  Array values = Array::zeros(ts.size(), columns.size());
  for (std::size_t t = 0; t < ts.size(); ++t)
  {
    for (std::size_t k = 0; k < files.size(); ++k) values.at(t, k) = files[k].series.score[t];
    if (panel)
      for (std::size_t i = 0; i < panel->width(); ++i) values.at(t, files.size() + i) = panel->at(t, i);
  }
  const auto bucket = static_cast<std::int64_t>(cfg.report.bucket_minutes) * 60;
  write_heatmap(out_dir(o) / "heatmap.csv", bucket_average(ts, std::move(columns), values, bucket));
  return 0;
}

void add_common(CLI::App* sub, CommonOptions& o)
{
  sub->add_option("--config", o.config_path, "JSON run configuration");
  sub->add_option("--seed", o.seed, "Seed overriding the config");
  sub->add_option("--out", o.out, "Output directory")->capture_default_str();
  sub->add_option("--set", o.sets, "Config override key.path=value (repeatable)");
}

void add_data(CLI::App* sub, CommonOptions& o, const std::string& key, const std::string& help)
{
  sub->add_option("--" + key, o.data[key], help);
}

}  // namespace
}  // namespace flowad

int main(int argc, char** argv)
{
  using namespace flowad;
  CLI::App app{"Conditional normalizing-flow anomaly detection for multivariate time series"};
  app.require_subcommand(1);

  std::map<std::string, CommonOptions> opts;
  std::size_t threads = 0, stride = 0;
  std::string generated;
  std::vector<std::string> report_scores;
  std::map<std::string, std::function<int()>> run;

  auto make = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, opts[name]);
    return sub;
  };

  auto* c = make("cluster", "Cluster features by DTW + OPTICS; writes assignment.txt");
  add_data(c, opts["cluster"], "panel", "Panel CSV");
  run["cluster"] = [&] { return cmd_cluster(opts["cluster"]); };

  auto* t = make("train", "Train one model per cluster; writes cluster_<k>.ckpt");
  add_data(t, opts["train"], "panel", "Training panel CSV");
  add_data(t, opts["train"], "assignment", "Cluster assignment (default: one cluster)");
  t->add_option("--threads", threads, "Worker threads (0 = all cores)");
  run["train"] = [&] { return cmd_train(opts["train"], threads); };

  auto* s = make("score", "Score a panel; writes scores.csv and per-cluster scores");
  add_data(s, opts["score"], "checkpoints", "Checkpoint directory");
  add_data(s, opts["score"], "panel", "Panel CSV to score");
  s->add_option("--stride", stride, "Window stride (0 = prediction length)");
  run["score"] = [&] { return cmd_score(opts["score"], stride); };

  auto* d = make("detect", "Threshold scores; writes flags.csv and detect.json");
  add_data(d, opts["detect"], "scores", "Score file");
  add_data(d, opts["detect"], "labels", "Label panel CSV (required for static mode)");
  run["detect"] = [&] { return cmd_detect(opts["detect"]); };

  auto* g = make("diagnose", "Implicate features at flagged timestamps; writes diagnosis.csv");
  add_data(g, opts["diagnose"], "scores", "Flag file from detect");
  add_data(g, opts["diagnose"], "history", "Clean history panel CSV");
  add_data(g, opts["diagnose"], "panel", "Observed panel CSV");
  run["diagnose"] = [&] { return cmd_diagnose(opts["diagnose"]); };

  auto* y = make("synth", "Build a labeled synthetic panel; writes history, test and labels CSVs");
  add_data(y, opts["synth"], "panel", "Source panel for synth.source=gaussian");
  run["synth"] = [&] { return cmd_synth(opts["synth"]); };

  auto* n = make("generate", "Generate labeled datasets from trained models");
  add_data(n, opts["generate"], "checkpoints", "Checkpoint directory");
  add_data(n, opts["generate"], "panel", "Panel whose tail is the warm-up");
  run["generate"] = [&] { return cmd_generate(opts["generate"]); };

  auto* k = make("classify", "Train the MLP classifier on generated data; writes classifier_metrics.json");
  k->add_option("--generated", generated, "Directory with generated_<d>.csv files")->required();
  add_data(k, opts["classify"], "panel", "Optional labeled evaluation panel");
  add_data(k, opts["classify"], "labels", "Labels for --panel");
  run["classify"] = [&] { return cmd_classify(opts["classify"], generated); };

  auto* e = make("eval", "Effectiveness and sensitivity grids; writes effectiveness.csv and sensitivity.csv");
  add_data(e, opts["eval"], "checkpoints", "Checkpoint directory");
  add_data(e, opts["eval"], "history", "Clean history panel CSV");
  add_data(e, opts["eval"], "panel", "Clean test panel CSV that follows the history");
  run["eval"] = [&] { return cmd_eval(opts["eval"]); };

  auto* r = make("report", "Bucket-averaged score heatmap; writes heatmap.csv");
  r->add_option("--scores", report_scores, "Score files, one column each (repeatable)");
  add_data(r, opts["report"], "panel", "Optional panel whose features become extra columns");
  run["report"] = [&] { return cmd_report(opts["report"], report_scores); };

  try
  {
    app.parse(argc, argv);
  }
  catch (const CLI::ParseError& err)
  {
    return app.exit(err);
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try
  {
    return run.at(name)();
  }
  catch (const ConfigError& err)
  {
    std::cerr << "flowad " << name << ": " << err.what() << '\n';
    return 2;
  }
  catch (const UsageError& err)
  {
    std::cerr << "flowad " << name << ": " << err.what() << '\n';
    return 2;
  }
  catch (const std::exception& err)
  {
    std::cerr << "flowad " << name << ": error: " << err.what() << '\n';
    return 1;
  }
}
