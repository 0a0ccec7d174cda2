#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowad/cluster.hpp"
#include "flowad/detect.hpp"
#include "flowad/evalgen.hpp"
#include "flowad/model.hpp"
#include "flowad/synth.hpp"
#include "flowad/train.hpp"

namespace flowad
{

/// Raised for an invalid configuration; `issues` holds one "field: problem" entry each.
class ConfigError : public std::runtime_error
{
public:
  explicit ConfigError(std::vector<std::string> issues);

  const std::vector<std::string>& issues() const { return issues_; }

private:
  std::vector<std::string> issues_;
};

enum class ThresholdMode
{
  kStatic,
  kSpot,
};

struct RunConfig
{
  std::uint64_t seed = 0;

  struct Data
  {
    std::string panel;       // observed panel CSV
    std::string history;     // clean history panel CSV (diagnosis, AR baseline)
    std::string labels;      // 0/1 label panel CSV aligned with `panel`
    std::string assignment;  // cluster assignment file
    std::string checkpoints; // directory holding cluster_<k>.ckpt files
    std::string scores;      // score file
  } data;

  struct Cluster
  {
    std::size_t sample_size = 100;
    std::size_t min_pts = 5;
    double xi = 0.05;
    std::optional<double> band_fraction;
  } cluster;

  struct Window
  {
    std::size_t context = 72;
    std::size_t prediction = 12;
    std::size_t stride = 12;
  } window;

  struct Model
  {
    std::vector<std::size_t> hidden{64, 32};
    std::size_t st_hidden = 32;
    std::size_t st_layers = 2;
    std::size_t coupling_blocks = 5;
    double bn_momentum = 0.99;
    double bn_epsilon = 1e-5;
  } model;

  TrainConfig train;

  struct Threshold
  {
    ThresholdMode mode = ThresholdMode::kStatic;
    double prefix_fraction = 0.3;  // N% of the test scores searched by the static method
    std::size_t grid_size = 1000;
    double q = 1e-4;
    double level = 0.98;
    std::size_t init_size = 1000;
  } threshold;

  struct Diagnosis
  {
    std::size_t sigma = 12;
    double validation_fraction = 0.3;
  } diagnosis;

  struct Synth
  {
    std::string source = "sinusoid";  // "sinusoid" or "gaussian" (fitted to data.panel)
    double alpha = 0.05;
    double beta = 0.5;
    std::size_t slice_len = 6;
    std::size_t features = 8;
    std::size_t length = 8640;
    std::int64_t step = 300;
    double noise = 0.2;
    double correlation = 0.5;
    double holdout = 0.1;  // trailing fraction that receives anomalies
  } synth;

  struct Generate
  {
    std::size_t length = 8640;
    std::size_t datasets = 5;
  } generate;

  ClassifierConfig classifier;

  struct Eval
  {
    std::vector<double> alphas{0.05, 0.03, 0.01};
    std::vector<double> betas{1.0, 0.5, 0.25};
    double fixed_alpha = 0.05;
    double fixed_beta = 0.5;
    std::size_t replicates = 5;
    std::size_t ar_lag = 12;
  } eval;

  struct Report
  {
    std::size_t bucket_minutes = 15;
  } report;

  /// Throws ConfigError listing every invalid field, including data paths
  /// that are set but do not exist.
  void validate() const;

  ModelConfig model_config(std::size_t data_width) const;
  DistanceOptions distance_options() const;
  SpotOptions spot_options() const;
  DiagnosisOptions diagnosis_options() const;
  InjectionSpec injection_spec() const;
  SinusoidSpec sinusoid_spec() const;
};

/// Reads a JSON document; missing keys keep their defaults and unknown keys are errors.
RunConfig config_from_json(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const RunConfig& config);

std::string to_string(ThresholdMode mode);

}  // namespace flowad
