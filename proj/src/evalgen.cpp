#include "flowad/evalgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "flowad/log.hpp"
#include "flowad/optim.hpp"

namespace flowad
{

double auc_score(std::span<const double> scores, std::span<const int> labels)
{
  if (scores.size() != labels.size()) throw std::invalid_argument("auc_score: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t pos = 0, n_pos = 0;
  for (std::size_t i = 0; i < order.size();)
  {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] != 0)
      {
        rank_sum += midrank;
        ++n_pos;
      }
    i = j;
  }
  pos = n_pos;
  const std::size_t n_neg = scores.size() - pos;
  if (pos == 0 || n_neg == 0) throw std::invalid_argument("auc_score: both classes are required");
  const double np = static_cast<double>(pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

MetricsRecord metrics(std::span<const int> flags, std::span<const int> labels, std::span<const double> scores)
{
  if (flags.empty()) throw std::invalid_argument("metrics: empty input");
  if (!scores.empty() && scores.size() != labels.size()) throw std::invalid_argument("metrics: scores and labels differ in length");
  const BinaryMetrics m = binary_metrics(flags, labels);
  MetricsRecord r{m.tp, m.fp, m.fn, m.tn, m.precision(), m.recall(), m.f1()};
  const bool both = m.tp + m.fn > 0 && m.fp + m.tn > 0;
  if (!scores.empty() && both) r.auc = auc_score(scores, labels);
  return r;
}

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

/// Rows of `a` from `from` onward followed by all of `b`; timestamps must continue.
SeriesPanel join_panels(const SeriesPanel& a, std::size_t from, const SeriesPanel& b)
{
  if (a.feature_ids != b.feature_ids) throw std::invalid_argument("join_panels: feature ids differ");
  const std::size_t head = a.length() - from;
  if (head > 0 && b.length() > 0 && b.timestamps.front() != a.timestamps.back() + a.step())
    throw std::invalid_argument("join_panels: the second panel does not continue the first");
  SeriesPanel out;
  out.feature_ids = a.feature_ids;
  out.values = Array::zeros(head + b.length(), a.width());
  for (std::size_t t = 0; t < head; ++t)
  {
    out.timestamps.push_back(a.timestamps[from + t]);
    for (std::size_t i = 0; i < a.width(); ++i) out.values.at(t, i) = a.at(from + t, i);
  }
  for (std::size_t t = 0; t < b.length(); ++t)
  {
    out.timestamps.push_back(b.timestamps[t]);
    for (std::size_t i = 0; i < b.width(); ++i) out.values.at(head + t, i) = b.at(t, i);
  }
  return out;
}

}  // namespace

SeriesPanel generate_sequence(const CondFlowModel& model, const SeriesPanel& warmup, std::size_t length, std::uint64_t seed)
{
  const std::size_t C = model.config.context_len, P = model.config.pred_len, N = model.config.data_width;
  if (warmup.length() != C)
    throw std::invalid_argument("generate_sequence: warm-up has " + std::to_string(warmup.length()) + " rows, context is " +
                                std::to_string(C));
  if (length == 0) throw std::invalid_argument("generate_sequence: length must be positive");
  const std::int64_t step = warmup.step();
  if (step <= 0) throw std::invalid_argument("generate_sequence: warm-up needs at least two evenly spaced rows");
  const SeriesPanel selected = warmup.select_features(columns_of(warmup, model.feature_ids));
  if (selected.has_gaps()) throw std::invalid_argument("generate_sequence: warm-up has missing values");

  Array context = model.standardizer.apply(selected.values);
  std::vector<Timestamp> context_ts = selected.timestamps;
  Array out = Array::zeros(length, N);
  std::vector<Timestamp> out_ts;
  Rng rng(seed);
  while (out_ts.size() < length)
  {
    std::vector<Timestamp> future;
    for (std::size_t p = 0; p < P; ++p) future.push_back(context_ts.back() + step * static_cast<std::int64_t>(p + 1));
    const Array ctx_time = time_feature_rows(context_ts), fut_time = time_feature_rows(future);
    std::vector<Array> values, times, pred_times;
    for (std::size_t t = 0; t < C; ++t)
    {
      values.push_back(slice_rows(context, t, t + 1));
      times.push_back(slice_rows(ctx_time, t, t + 1));
    }
    for (std::size_t p = 0; p < P; ++p) pred_times.push_back(slice_rows(fut_time, p, p + 1));
    const auto enc = encode(EagerContext{}, model.encdec, values, times);
    const std::vector<Array> h = decode(EagerContext{}, model.encdec, enc, pred_times);
    const Array parts[] = {concat_rows(std::span<const Array>(h)), fut_time};
    const Array x = flow_sample(model.flow, concat_cols(std::span<const Array>(parts)), rng);
    for (std::size_t p = 0; p < P && out_ts.size() < length; ++p)
    {
      for (std::size_t j = 0; j < N; ++j)
        if (!std::isfinite(x.at(p, j)))
          throw NumericalError("generate_sequence: non-finite sample at step " + std::to_string(out_ts.size()));
      for (std::size_t j = 0; j < N; ++j) out.at(out_ts.size(), j) = x.at(p, j);
      out_ts.push_back(future[p]);
    }
    const Array parts_ctx[] = {context, x};
    const Array joined = concat_rows(std::span<const Array>(parts_ctx));
    context = slice_rows(joined, P, P + C);
    context_ts.insert(context_ts.end(), future.begin(), future.end());
    context_ts.erase(context_ts.begin(), context_ts.begin() + static_cast<std::ptrdiff_t>(P));
  }
  return make_panel(out_ts.front(), step, model.feature_ids, model.standardizer.invert(out));
}

GeneratedDataset make_labeled_set(std::span<const CondFlowModel> models, const SeriesPanel& warmup, std::size_t length,
                                  const InjectionSpec& spec)
{
  if (models.empty()) throw std::invalid_argument("make_labeled_set: no models");
  spec.validate();
  std::vector<int> owner(warmup.width(), -1);
  std::size_t max_context = 0;
  for (std::size_t k = 0; k < models.size(); ++k)
  {
    for (std::size_t c : columns_of(warmup, models[k].feature_ids))
    {
      if (owner[c] >= 0) throw std::invalid_argument("make_labeled_set: feature " + warmup.feature_ids[c] + " belongs to two models");
      owner[c] = static_cast<int>(k);
    }
    max_context = std::max(max_context, models[k].config.context_len);
  }
  if (warmup.length() < max_context) throw std::invalid_argument("make_labeled_set: warm-up is shorter than a context window");

  Rng seeds(spec.seed);
  std::vector<SeriesPanel> parts;
  for (const CondFlowModel& m : models)
  {
    const SeriesPanel tail = warmup.slice_rows(warmup.length() - m.config.context_len, warmup.length());
    parts.push_back(generate_sequence(m, tail, length, seeds.split()));
  }
  std::vector<std::string> ids;
  std::vector<std::size_t> source_model, source_col;
  for (std::size_t c = 0; c < warmup.width(); ++c)
  {
    if (owner[c] < 0) continue;
    const auto k = static_cast<std::size_t>(owner[c]);
    ids.push_back(warmup.feature_ids[c]);
    source_model.push_back(k);
    source_col.push_back(columns_of(parts[k], std::span(&warmup.feature_ids[c], 1))[0]);
  }
  Array values = Array::zeros(length, ids.size());
  for (std::size_t t = 0; t < length; ++t)
    for (std::size_t j = 0; j < ids.size(); ++j) values.at(t, j) = parts[source_model[j]].at(t, source_col[j]);
  const SeriesPanel clean = make_panel(parts[0].timestamps.front(), warmup.step(), ids, values);

  InjectionResult injected = inject_anomalies(clean, spec);
  return {std::move(injected.panel), std::move(injected.labels), spec.seed,
          warmup.timestamps[warmup.length() - max_context], warmup.timestamps.back()};
}

MlpClassifier train_classifier(const Array& x, std::span<const int> labels, const ClassifierConfig& config)
{
  if (x.rows() != labels.size()) throw std::invalid_argument("train_classifier: rows and labels differ in length");
  const auto positives = std::count_if(labels.begin(), labels.end(), [](int l) { return l != 0; });
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(labels.size()))
    throw std::invalid_argument("train_classifier: both classes are required");
  if (config.batch_size == 0 || config.hidden == 0) throw std::invalid_argument("train_classifier: batch size and width must be positive");

  std::vector<std::string> ids(x.cols());
  for (std::size_t j = 0; j < ids.size(); ++j) ids[j] = std::to_string(j);
  MlpClassifier clf;
  clf.scaler = fit_standardizer(make_panel(0, 1, ids, x));
  const Array xs = clf.scaler.apply(x);

  Rng rng(config.seed);
  std::vector<std::size_t> widths{x.cols()};
  for (std::size_t l = 0; l < config.hidden_layers; ++l) widths.push_back(config.hidden);
  widths.push_back(1);
  clf.net = Mlp::init("classifier", widths, Activation::kRelu, Activation::kIdentity, rng);

  const std::vector<Parameter*> params = clf.net.parameters();
  AdamState adam = make_adam_state(params, {.learning_rate = config.learning_rate});

  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch)
  {
    rng.shuffle(std::span(order));
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size)
    {
      const std::size_t B = std::min(config.batch_size, order.size() - begin);
      Array xb = Array::zeros(B, x.cols()), yb = Array::zeros(B, 1);
      for (std::size_t k = 0; k < B; ++k)
      {
        const std::size_t r = order[begin + k];
        for (std::size_t j = 0; j < x.cols(); ++j) xb.at(k, j) = xs.at(r, j);
        yb[k] = labels[r] != 0 ? 1.0 : 0.0;
      }
      zero_grads(params);
      Tape tape;
      const Var loss = classifier_loss(TapeContext{&tape}, clf, xb, yb);
      tape.backward(loss);
      adam_step(params, adam);
      total += loss.value().item() * static_cast<double>(B);
    }
    const double epoch_loss = total / static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) throw TrainingError("train_classifier: non-finite loss in epoch " + std::to_string(epoch + 1));
    if (epoch_loss < best - config.tolerance)
    {
      best = epoch_loss;
      stale = 0;
    }
    else if (++stale >= config.patience)
    {
      break;
    }
  }
  return clf;
}

MlpClassifier train_classifier(const GeneratedDataset& dataset, const ClassifierConfig& config)
{
  return train_classifier(dataset.panel.values, dataset.labels.timestamp_labels(), config);
}

std::vector<double> predict(const MlpClassifier& classifier, const Array& x)
{
  if (x.cols() != classifier.input_width()) throw ShapeError("predict: expected " + std::to_string(classifier.input_width()) + " columns");
  const Array p = sigmoid(mlp_forward(EagerContext{}, classifier.net, classifier.scaler.apply(x)));
  return p.data();
}

ReplicateResult run_replicate(const ExperimentSetup& setup, const InjectionSpec& spec)
{
  if (setup.models.empty()) throw std::invalid_argument("run_replicate: no models");
  if (!(setup.prefix_fraction > 0.0 && setup.prefix_fraction < 1.0))
    throw std::invalid_argument("run_replicate: prefix_fraction must lie in (0, 1)");
  ReplicateResult r;
  r.injected = inject_anomalies(setup.test, spec);
  r.labels = r.injected.labels.timestamp_labels();

  std::size_t prefix = setup.ar_lag;
  for (const CondFlowModel& m : setup.models) prefix = std::max(prefix, m.config.context_len);
  if (setup.history.length() < prefix) throw std::invalid_argument("run_replicate: history is shorter than the context");
  const SeriesPanel joined = join_panels(setup.history, setup.history.length() - prefix, r.injected.panel);
  const std::size_t T = setup.test.length();
  auto tail = [&](const AnomalyScoreSeries& s) {
    AnomalyScoreSeries out;
    out.timestamps.assign(s.timestamps.begin() + static_cast<std::ptrdiff_t>(prefix), s.timestamps.end());
    out.score.assign(s.score.begin() + static_cast<std::ptrdiff_t>(prefix), s.score.end());
    out.coverage.assign(s.coverage.begin() + static_cast<std::ptrdiff_t>(prefix), s.coverage.end());
    return out;
  };

  std::vector<AnomalyScoreSeries> parts;
  for (const CondFlowModel& m : setup.models)
    parts.push_back(score_panel(m, joined, setup.stride == 0 ? m.config.pred_len : setup.stride));
  r.flow_scores = tail(combine_scores(parts));

  const Standardizer scale = fit_standardizer(setup.history);
  const ArModel ar = ar_fit(scale.apply(setup.history), setup.ar_lag);
  r.ar_scores = tail(ar_score(ar, scale.apply(joined)));

  std::vector<std::size_t> usable;
  for (std::size_t t = 0; t < T; ++t)
    if (r.flow_scores.scored(t) && r.ar_scores.scored(t)) usable.push_back(t);
  const auto n_prefix = static_cast<std::size_t>(std::floor(setup.prefix_fraction * static_cast<double>(usable.size())));
  r.evaluation_begin = n_prefix < usable.size() ? usable[n_prefix] : T;
  r.flow_flags.assign(T, 0);
  r.ar_flags.assign(T, 0);

  auto gather = [&](const AnomalyScoreSeries& s, std::size_t from, std::size_t to, std::vector<double>& scores, std::vector<int>& labels) {
    for (std::size_t k = from; k < to; ++k)
    {
      scores.push_back(s.score[usable[k]]);
      labels.push_back(r.labels[usable[k]]);
    }
  };
  auto evaluate = [&](const AnomalyScoreSeries& s, std::vector<int>& flags_out, MetricsRecord& record) {
    std::vector<double> pre_s, rest_s;
    std::vector<int> pre_l, rest_l;
    gather(s, 0, n_prefix, pre_s, pre_l);
    gather(s, n_prefix, usable.size(), rest_s, rest_l);
    const StaticThreshold th = static_threshold(pre_s, pre_l, setup.grid_size);
    const std::vector<int> flags = apply_threshold(rest_s, th.epsilon);
    for (std::size_t k = 0; k < flags.size(); ++k) flags_out[usable[n_prefix + k]] = flags[k];
    record = metrics(flags, rest_l, rest_s);
    return std::count(rest_l.begin(), rest_l.end(), 1) > 0;
  };
  try
  {
    const bool flow_ok = evaluate(r.flow_scores, r.flow_flags, r.flow);
    const bool ar_ok = evaluate(r.ar_scores, r.ar_flags, r.ar);
    r.applicable = flow_ok && ar_ok;
  }
  catch (const std::invalid_argument& e)
  {
    log_message(LogLevel::kInfo, std::string("run_replicate: not applicable: ") + e.what());
    r.applicable = false;
  }
  return r;
}

namespace
{

struct Moments
{
  double mean = std::numeric_limits<double>::quiet_NaN();
  double stddev = std::numeric_limits<double>::quiet_NaN();
};

Moments moments_of(const std::vector<double>& v)
{
  if (v.empty()) return {};
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0};
}

std::vector<GridCell> run_cell(const ExperimentSetup& setup, double alpha, double beta, std::size_t replicates, Rng& seeds)
{
  std::vector<double> flow_recall, flow_f1, ar_recall, ar_f1;
  for (std::size_t rep = 0; rep < replicates; ++rep)
  {
    const InjectionSpec spec{alpha, beta, setup.slice_len, seeds.split()};
    const ReplicateResult r = run_replicate(setup, spec);
    if (!r.applicable) continue;
    flow_recall.push_back(r.flow.recall);
    flow_f1.push_back(r.flow.f1);
    ar_recall.push_back(r.ar.recall);
    ar_f1.push_back(r.ar.f1);
  }
  auto cell = [&](const std::string& method, const std::vector<double>& recall, const std::vector<double>& f1) {
    const Moments mr = moments_of(recall), mf = moments_of(f1);
    return GridCell{method, alpha, beta, replicates, recall.size(), mr.mean, mr.stddev, mf.mean, mf.stddev};
  };
  return {cell("CondRealNVP", flow_recall, flow_f1), cell("AR", ar_recall, ar_f1)};
}

}  // namespace

std::vector<GridCell> run_effectiveness(const ExperimentSetup& setup, std::span<const double> alphas, double beta,
                                        std::size_t replicates, std::uint64_t seed)
{
  Rng seeds(seed);
  std::vector<GridCell> out;
  for (double alpha : alphas)
    for (GridCell& c : run_cell(setup, alpha, beta, replicates, seeds)) out.push_back(std::move(c));
  return out;
}

std::vector<GridCell> run_sensitivity(const ExperimentSetup& setup, std::span<const double> betas, double alpha,
                                      std::size_t replicates, std::uint64_t seed)
{
  Rng seeds(seed);
  std::vector<GridCell> out;
  for (double beta : betas)
    for (GridCell& c : run_cell(setup, alpha, beta, replicates, seeds)) out.push_back(std::move(c));
  return out;
}

void write_grid_table(const std::filesystem::path& path, std::span<const GridCell> cells)
{
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_grid_table: cannot open " + path.string());
  auto num = [](double v) { return std::isnan(v) ? std::string("NA") : format_double(v); };
  out << "method,alpha,beta,replicates,applicable,recall_mean,recall_std,f1_mean,f1_std\n";
  for (const GridCell& c : cells)
    out << c.method << ',' << format_double(c.alpha) << ',' << format_double(c.beta) << ',' << c.replicates << ','
        << c.applicable << ',' << num(c.recall_mean) << ',' << num(c.recall_std) << ',' << num(c.f1_mean) << ','
        << num(c.f1_std) << '\n';
  if (!out) throw std::runtime_error("write_grid_table: write to " + path.string() + " failed");
}

}  // namespace flowad
