#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "varinf/checkpoint.hpp"
#include "varinf/datasets.hpp"
#include "varinf/em.hpp"
#include "varinf/gan.hpp"
#include "varinf/vae.hpp"
#include "varinf/variants.hpp"

namespace varinf {

inline constexpr const char* kVersion = "0.1.0";

enum class ModelKind { kEm, kVae, kGan, kGanReg, kAae, kAli };
std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& name);

struct EvalConfig {
  std::size_t interval = 500;
  std::size_t samples = 4096;
  std::size_t bins = 40;
  // Histogram window; unset means the data bounding box padded by 10%.
  std::optional<double> lower;
  std::optional<double> upper;
  // Capture radius; unset means 3 component standard deviations.
  std::optional<double> mode_radius;
  bool write_samples = true;
  bool write_ppm = false;
};

struct ExperimentConfig {
  std::vector<ModelKind> models{ModelKind::kGan};
  DatasetSpec dataset;
  std::vector<std::uint64_t> seeds{1};
  std::filesystem::path output_dir = "runs/default";
  EvalConfig eval;
  std::size_t jobs = 1;

  std::size_t em_components = 8;
  EmConfig em;
  VaeConfig vae;
  GanConfig gan;
  AaeConfig aae;
  // AAE latent-space histogram (square window, same bins per axis).
  std::size_t aae_latent_bins = 20;
  double aae_latent_range = 3.0;
  AliConfig ali;

  // Throws ConfigError with a readable message.
  void validate() const;
};

// The normalized document: every field present, model always a list.
nlohmann::json config_to_json(const ExperimentConfig& c);
// Unknown keys and wrongly typed values raise ConfigError naming the path.
ExperimentConfig config_from_json(const nlohmann::json& doc);
// Applies "dotted.path=value"; the value is parsed as JSON when it parses,
// otherwise taken as a string. Creates intermediate objects as needed.
void apply_override(nlohmann::json& doc, const std::string& assignment);
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});
// FNV-1a of the normalized document, hex.
std::string config_hash(const nlohmann::json& normalized);

struct SeedOutcome {
  ModelKind model = ModelKind::kGan;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::map<std::string, double> final_metrics;
  std::filesystem::path directory;
};

struct ExperimentResult {
  std::vector<SeedOutcome> outcomes;
  nlohmann::json summary;
};

// Trains every (model, seed) pair, writes per-seed outputs, manifest.json and
// summary.json. A failing seed is recorded and does not stop the others.
ExperimentResult run_experiment(const ExperimentConfig& config);

// Directory of one run: output/seed-<s> for a single model,
// output/<model>/seed-<s> when several are compared.
std::filesystem::path seed_directory(const ExperimentConfig& config, ModelKind model,
                                     std::uint64_t seed);

// Histogram window used for sample-space KL on this data.
HistogramEstimator sample_histogram(const EvalConfig& eval, const Tensor& data);
// Eval setup (reference, histogram, modes) for a dataset.
EvalSetup make_eval_setup(const EvalConfig& eval, const Dataset& data);

// Draws `count` samples from whatever generative model a checkpoint holds.
Tensor sample_checkpoint(const Checkpoint& ckpt, std::size_t count, Rng& rng);
// The network a Taylor probe perturbs: the sample-space generator.
Mlp checkpoint_generator(const Checkpoint& ckpt);

// Median and interquartile range (linear interpolation between order stats).
struct Spread {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};
Spread spread(std::vector<double> values);

}  // namespace varinf
