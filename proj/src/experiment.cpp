#include "varinf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <thread>

#include "varinf/errors.hpp"
#include "varinf/io.hpp"
#include "varinf/metrics.hpp"

namespace varinf {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kEm:
      return "em";
    case ModelKind::kVae:
      return "vae";
    case ModelKind::kGan:
      return "gan";
    case ModelKind::kGanReg:
      return "gan-reg";
    case ModelKind::kAae:
      return "aae";
    case ModelKind::kAli:
      return "ali";
  }
  return "gan";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "em") return ModelKind::kEm;
  if (name == "vae") return ModelKind::kVae;
  if (name == "gan") return ModelKind::kGan;
  if (name == "gan-reg") return ModelKind::kGanReg;
  if (name == "aae") return ModelKind::kAae;
  if (name == "ali") return ModelKind::kAli;
  throw ConfigError("unknown model '" + name + "' (expected em, vae, gan, gan-reg, aae or ali)");
}

// ---------------------------------------------------------------- json

namespace {

json net_json(const NetConfig& n) {
  return {{"hidden", n.hidden}, {"activation", to_string(n.activation)}};
}

json opt_json(const OptimizerConfig& o) {
  return {{"kind", to_string(o.kind)}, {"lr", o.learning_rate}, {"momentum", o.momentum},
          {"beta1", o.beta1},          {"beta2", o.beta2},      {"epsilon", o.epsilon}};
}

json opt_or_null(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json variant_common_json(const VariantConfig& c, const char* generator_key) {
  return {{"latent_dim", c.latent_dim},
          {"encoder", net_json(c.encoder_net)},
          {generator_key, net_json(c.generator_net)},
          {"discriminator", net_json(c.discriminator_net)},
          {"eg_optimizer", opt_json(c.eg_optimizer)},
          {"d_optimizer", opt_json(c.d_optimizer)},
          {"d_steps", c.d_steps},
          {"eg_steps", c.eg_steps},
          {"periods", c.periods},
          {"batch", c.batch}};
}

// Reads j[key] as T, reporting the dotted path on failure.
template <class T>
T field(const json& j, const std::string& key, const std::string& path) {
  const std::string where = path.empty() ? key : path + "." + key;
  if (!j.contains(key)) throw ConfigError("missing field '" + where + "'");
  const json& v = j.at(key);
  if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) throw ConfigError("'" + where + "' must be a number");
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError("'" + where + "' must be true or false");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_unsigned()) {
      throw ConfigError("'" + where + "' must be a non-negative integer");
    }
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ConfigError("'" + where + "' must be a string");
  }
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError("'" + where + "': " + e.what());
  }
}

std::optional<double> optional_number(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return field<double>(j, key, path);
}

std::vector<std::size_t> size_list(const json& j, const std::string& key, const std::string& path) {
  const std::string where = path + "." + key;
  if (!j.at(key).is_array()) throw ConfigError("'" + where + "' must be a list of integers");
  std::vector<std::size_t> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number_unsigned() || v.get<std::size_t>() == 0) {
      throw ConfigError("'" + where + "' entries must be positive integers");
    }
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

template <class F>
auto wrap(const std::string& where, F f) -> decltype(f()) {
  try {
    return f();
  } catch (const ContractError& e) {
    throw ConfigError("'" + where + "': " + e.what());
  }
}

NetConfig parse_net(const json& j, const std::string& path) {
  NetConfig n;
  n.hidden = size_list(j, "hidden", path);
  const std::string act = field<std::string>(j, "activation", path);
  if (act == "relu") n.activation = Activation::kRelu;
  else if (act == "tanh") n.activation = Activation::kTanh;
  else if (act == "sigmoid") n.activation = Activation::kSigmoid;
  else if (act == "identity") n.activation = Activation::kIdentity;
  else throw ConfigError("'" + path + ".activation': unknown activation '" + act + "'");
  return n;
}

OptimizerConfig parse_opt(const json& j, const std::string& path) {
  OptimizerConfig o;
  const std::string kind = field<std::string>(j, "kind", path);
  if (kind == "sgd") o.kind = OptimizerKind::kSgd;
  else if (kind == "sgd-momentum") o.kind = OptimizerKind::kMomentum;
  else if (kind == "adam") o.kind = OptimizerKind::kAdam;
  else throw ConfigError("'" + path + ".kind': unknown optimizer '" + kind + "'");
  o.learning_rate = field<double>(j, "lr", path);
  o.momentum = field<double>(j, "momentum", path);
  o.beta1 = field<double>(j, "beta1", path);
  o.beta2 = field<double>(j, "beta2", path);
  o.epsilon = field<double>(j, "epsilon", path);
  if (o.learning_rate < 0.0) throw ConfigError("'" + path + ".lr' must be >= 0");
  return o;
}

VariantConfig parse_variant_common(const json& j, const std::string& path,
                                   const char* generator_key) {
  VariantConfig c;
  c.latent_dim = field<std::size_t>(j, "latent_dim", path);
  c.encoder_net = parse_net(j.at("encoder"), path + ".encoder");
  c.generator_net = parse_net(j.at(generator_key), path + "." + generator_key);
  c.discriminator_net = parse_net(j.at("discriminator"), path + ".discriminator");
  c.eg_optimizer = parse_opt(j.at("eg_optimizer"), path + ".eg_optimizer");
  c.d_optimizer = parse_opt(j.at("d_optimizer"), path + ".d_optimizer");
  c.d_steps = field<std::size_t>(j, "d_steps", path);
  c.eg_steps = field<std::size_t>(j, "eg_steps", path);
  c.periods = field<std::size_t>(j, "periods", path);
  c.batch = field<std::size_t>(j, "batch", path);
  return c;
}

// Copies `user` over `base`, rejecting any key `base` does not have.
void merge_checked(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) {
    throw ConfigError("'" + (path.empty() ? std::string("<root>") : path) + "' must be an object");
  }
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string where = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + where + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_checked(slot, it.value(), where);
    } else {
      slot = it.value();
    }
  }
}

}  // namespace

json config_to_json(const ExperimentConfig& c) {
  json models = json::array();
  for (ModelKind m : c.models) models.push_back(to_string(m));
  json j;
  j["model"] = models;
  j["dataset"] = {{"kind", to_string(c.dataset.kind)},
                  {"size", c.dataset.size},
                  {"noise", c.dataset.noise},
                  {"seed", c.dataset.seed},
                  {"path", c.dataset.path.string()}};
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir.string();
  j["jobs"] = c.jobs;
  j["eval"] = {{"interval", c.eval.interval},
               {"samples", c.eval.samples},
               {"bins", c.eval.bins},
               {"lower", opt_or_null(c.eval.lower)},
               {"upper", opt_or_null(c.eval.upper)},
               {"mode_radius", opt_or_null(c.eval.mode_radius)},
               {"write_samples", c.eval.write_samples},
               {"write_ppm", c.eval.write_ppm}};
  j["em"] = {{"components", c.em_components},
             {"max_iterations", c.em.max_iterations},
             {"tolerance", c.em.relative_tolerance},
             {"variance_floor", c.em.variance_floor}};
  j["vae"] = {{"latent_dim", c.vae.latent_dim},
              {"net", net_json(c.vae.net)},
              {"decoder_log_var", c.vae.decoder_log_var},
              {"optimizer", opt_json(c.vae.optimizer)},
              {"steps", c.vae.steps},
              {"batch", c.vae.batch}};
  j["gan"] = {{"latent_dim", c.gan.latent_dim},
              {"generator", net_json(c.gan.generator_net)},
              {"discriminator", net_json(c.gan.discriminator_net)},
              {"lambda", c.gan.lambda},
              {"d_steps", c.gan.d_steps},
              {"g_steps", c.gan.g_steps},
              {"snapshot_lag", c.gan.snapshot_lag},
              {"p_real", c.gan.p_real},
              {"p_fake", c.gan.p_fake},
              {"g_optimizer", opt_json(c.gan.g_optimizer)},
              {"d_optimizer", opt_json(c.gan.d_optimizer)},
              {"periods", c.gan.periods},
              {"batch", c.gan.batch}};
  json aae = variant_common_json(c.aae.common, "decoder");
  aae["lambda_rec"] = c.aae.lambda_rec;
  aae["latent_bins"] = c.aae_latent_bins;
  aae["latent_range"] = c.aae_latent_range;
  j["aae"] = aae;
  json ali = variant_common_json(c.ali.common, "generator");
  ali["variant"] = to_string(c.ali.variant);
  ali["generator_kl_weight"] = c.ali.generator_kl_weight;
  ali["snapshot_lag"] = c.ali.snapshot_lag;
  j["ali"] = ali;
  return j;
}

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  json user = doc;
  if (user.contains("model") && user["model"].is_string()) {
    user["model"] = json::array({user["model"]});
  }
  json j = config_to_json(ExperimentConfig{});
  merge_checked(j, user, "");

  ExperimentConfig c;
  if (!j["model"].is_array() || j["model"].empty()) {
    throw ConfigError("'model' must be a model name or a non-empty list of names");
  }
  c.models.clear();
  for (const auto& m : j["model"]) {
    if (!m.is_string()) throw ConfigError("'model' entries must be strings");
    c.models.push_back(model_kind_from_string(m.get<std::string>()));
  }

  const json& d = j["dataset"];
  c.dataset.kind = dataset_kind_from_string(field<std::string>(d, "kind", "dataset"));
  c.dataset.size = field<std::size_t>(d, "size", "dataset");
  c.dataset.noise = field<double>(d, "noise", "dataset");
  c.dataset.seed = field<std::uint64_t>(d, "seed", "dataset");
  c.dataset.path = field<std::string>(d, "path", "dataset");

  if (!j["seeds"].is_array()) throw ConfigError("'seeds' must be a list of integers");
  c.seeds.clear();
  for (const auto& s : j["seeds"]) {
    if (!s.is_number_unsigned()) throw ConfigError("'seeds' entries must be non-negative integers");
    c.seeds.push_back(s.get<std::uint64_t>());
  }
  c.output_dir = field<std::string>(j, "output_dir", "");
  c.jobs = field<std::size_t>(j, "jobs", "");

  const json& e = j["eval"];
  c.eval.interval = field<std::size_t>(e, "interval", "eval");
  c.eval.samples = field<std::size_t>(e, "samples", "eval");
  c.eval.bins = field<std::size_t>(e, "bins", "eval");
  c.eval.lower = optional_number(e, "lower", "eval");
  c.eval.upper = optional_number(e, "upper", "eval");
  c.eval.mode_radius = optional_number(e, "mode_radius", "eval");
  c.eval.write_samples = field<bool>(e, "write_samples", "eval");
  c.eval.write_ppm = field<bool>(e, "write_ppm", "eval");

  const json& em = j["em"];
  c.em_components = field<std::size_t>(em, "components", "em");
  c.em.max_iterations = field<std::size_t>(em, "max_iterations", "em");
  c.em.relative_tolerance = field<double>(em, "tolerance", "em");
  c.em.variance_floor = field<double>(em, "variance_floor", "em");

  const json& v = j["vae"];
  c.vae.latent_dim = field<std::size_t>(v, "latent_dim", "vae");
  c.vae.net = parse_net(v["net"], "vae.net");
  c.vae.decoder_log_var = field<double>(v, "decoder_log_var", "vae");
  c.vae.optimizer = parse_opt(v["optimizer"], "vae.optimizer");
  c.vae.steps = field<std::size_t>(v, "steps", "vae");
  c.vae.batch = field<std::size_t>(v, "batch", "vae");

  const json& g = j["gan"];
  c.gan.latent_dim = field<std::size_t>(g, "latent_dim", "gan");
  c.gan.generator_net = parse_net(g["generator"], "gan.generator");
  c.gan.discriminator_net = parse_net(g["discriminator"], "gan.discriminator");
  c.gan.lambda = field<double>(g, "lambda", "gan");
  c.gan.d_steps = field<std::size_t>(g, "d_steps", "gan");
  c.gan.g_steps = field<std::size_t>(g, "g_steps", "gan");
  c.gan.snapshot_lag = field<std::size_t>(g, "snapshot_lag", "gan");
  c.gan.p_real = field<double>(g, "p_real", "gan");
  c.gan.p_fake = field<double>(g, "p_fake", "gan");
  c.gan.g_optimizer = parse_opt(g["g_optimizer"], "gan.g_optimizer");
  c.gan.d_optimizer = parse_opt(g["d_optimizer"], "gan.d_optimizer");
  c.gan.periods = field<std::size_t>(g, "periods", "gan");
  c.gan.batch = field<std::size_t>(g, "batch", "gan");

  const json& a = j["aae"];
  c.aae.common = parse_variant_common(a, "aae", "decoder");
  c.aae.lambda_rec = field<double>(a, "lambda_rec", "aae");
  c.aae_latent_bins = field<std::size_t>(a, "latent_bins", "aae");
  c.aae_latent_range = field<double>(a, "latent_range", "aae");

  const json& l = j["ali"];
  c.ali.common = parse_variant_common(l, "ali", "generator");
  c.ali.variant = wrap("ali.variant", [&] {
    return ali_variant_from_string(field<std::string>(l, "variant", "ali"));
  });
  c.ali.generator_kl_weight = field<double>(l, "generator_kl_weight", "ali");
  c.ali.snapshot_lag = field<std::size_t>(l, "snapshot_lag", "ali");

  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  if (models.empty()) throw ConfigError("at least one model is required");
  if (seeds.empty()) throw ConfigError("'seeds' must not be empty");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (std::size_t k = i + 1; k < seeds.size(); ++k) {
      if (seeds[i] == seeds[k]) throw ConfigError("'seeds' contains a duplicate");
    }
  }
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t k = i + 1; k < models.size(); ++k) {
      if (models[i] == models[k]) throw ConfigError("'model' contains a duplicate");
    }
  }
  if (output_dir.empty()) throw ConfigError("'output_dir' must not be empty");
  if (jobs == 0) throw ConfigError("'jobs' must be >= 1");
  dataset.validate();
  if (eval.samples == 0) throw ConfigError("'eval.samples' must be >= 1");
  if (eval.bins < 2) throw ConfigError("'eval.bins' must be >= 2");
  if (eval.lower.has_value() != eval.upper.has_value()) {
    throw ConfigError("'eval.lower' and 'eval.upper' must be given together");
  }
  if (eval.lower && !(*eval.upper > *eval.lower)) {
    throw ConfigError("'eval.upper' must exceed 'eval.lower'");
  }
  if (eval.mode_radius && !(*eval.mode_radius > 0.0)) {
    throw ConfigError("'eval.mode_radius' must be > 0");
  }
  if (em_components == 0) throw ConfigError("'em.components' must be >= 1");
  if (!(em.variance_floor > 0.0)) throw ConfigError("'em.variance_floor' must be > 0");
  if (vae.latent_dim == 0 || vae.batch == 0) {
    throw ConfigError("'vae.latent_dim' and 'vae.batch' must be >= 1");
  }
  gan.validate();
  aae.common.validate();
  ali.common.validate();
  if (aae.lambda_rec < 0.0) throw ConfigError("'aae.lambda_rec' must be >= 0");
  if (aae_latent_bins < 2 || !(aae_latent_range > 0.0)) {
    throw ConfigError("'aae.latent_bins' must be >= 2 and 'aae.latent_range' > 0");
  }
  if (ali.snapshot_lag == 0) throw ConfigError("'ali.snapshot_lag' must be >= 1");
  if (ali.generator_kl_weight < 0.0) throw ConfigError("'ali.generator_kl_weight' must be >= 0");
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like path.to.field=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("override path '" + path + "' has an empty segment");
    if (!node->is_object()) throw ConfigError("override path '" + path + "' crosses a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) (*node)[key] = json::object();
    node = &(*node)[key];
    start = dot + 1;
  }
}

ExperimentConfig load_config(const fs::path& path, const std::vector<std::string>& overrides) {
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path.string());
  json doc = json::parse(read_text(path), nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

std::string config_hash(const json& normalized) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : normalized.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- evaluation

HistogramEstimator sample_histogram(const EvalConfig& eval, const Tensor& data) {
  const std::size_t d = data.cols();
  if (eval.lower && eval.upper) return HistogramEstimator::uniform(d, *eval.lower, *eval.upper, eval.bins);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (double v : data.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const double pad = hi > lo ? 0.1 * (hi - lo) : 1.0;
  return HistogramEstimator::uniform(d, lo - pad, hi + pad, eval.bins);
}

EvalSetup make_eval_setup(const EvalConfig& eval, const Dataset& data) {
  EvalSetup s;
  s.interval = eval.interval;
  s.samples = eval.samples;
  s.reference = data.samples;
  s.histogram = sample_histogram(eval, data.samples);
  if (data.truth) {
    ModeSpec spec = mode_spec_for(*data.truth);
    if (eval.mode_radius) spec.radius = *eval.mode_radius;
    s.modes = spec;
  }
  return s;
}

fs::path seed_directory(const ExperimentConfig& config, ModelKind model, std::uint64_t seed) {
  const std::string leaf = "seed-" + std::to_string(seed);
  if (config.models.size() == 1) return config.output_dir / leaf;
  return config.output_dir / to_string(model) / leaf;
}

Spread spread(std::vector<double> v) {
  if (v.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan, nan};
  }
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {q(0.5), q(0.25), q(0.75)};
}

// ---------------------------------------------------------------- checkpoints

namespace {

Tensor gaussian_head_sample(const Tensor& head, std::size_t d, Rng& rng) {
  const double floor_lv = std::log(kVarianceFloor);
  Tensor x = Tensor::matrix(head.rows(), d);
  for (std::size_t r = 0; r < head.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      x.at(r, c) = head.at(r, c) + std::exp(0.5 * std::max(head.at(r, d + c), floor_lv)) * rng.normal();
    }
  }
  return x;
}

std::string checkpoint_kind(const Checkpoint& ckpt) {
  if (!ckpt.meta.contains("model") || !ckpt.meta["model"].is_string()) {
    throw ConfigError("checkpoint has no model kind in its metadata");
  }
  return ckpt.meta["model"].get<std::string>();
}

}  // namespace

Tensor sample_checkpoint(const Checkpoint& ckpt, std::size_t count, Rng& rng) {
  const ModelKind kind = model_kind_from_string(checkpoint_kind(ckpt));
  switch (kind) {
    case ModelKind::kEm:
      return gmm_sample(GmmModel::from_json(ckpt.meta.at("gmm")), rng, count).x;
    case ModelKind::kAli: {
      const Mlp gen = ckpt.mlp("generator");
      const Tensor head = forward(gen, normal_noise(rng, {count, gen.input_dim()}));
      return gaussian_head_sample(head, gen.output_dim() / 2, rng);
    }
    default: {
      const Mlp gen = checkpoint_generator(ckpt);
      return forward(gen, normal_noise(rng, {count, gen.input_dim()}));
    }
  }
}

Mlp checkpoint_generator(const Checkpoint& ckpt) {
  const ModelKind kind = model_kind_from_string(checkpoint_kind(ckpt));
  switch (kind) {
    case ModelKind::kGan:
    case ModelKind::kGanReg:
      return ckpt.mlp("generator");
    case ModelKind::kVae:
    case ModelKind::kAae:
      return ckpt.mlp("decoder");
    default:
      throw ConfigError("checkpoint of kind '" + to_string(kind) +
                        "' has no deterministic sample-space generator");
  }
}

// ---------------------------------------------------------------- runs

namespace {

struct RunContext {
  const ExperimentConfig& config;
  const Dataset& data;
};

void add_scores(std::map<std::string, double>& out, const SampleScores& s) {
  out["mode_coverage"] = s.mode_coverage;
  out["captured_fraction"] = s.captured_fraction;
  out["kl_est"] = s.kl_est;
}

void last_row(std::map<std::string, double>& out, const MetricLog& log) {
  if (log.empty()) return;
  for (std::size_t i = 0; i < log.columns().size(); ++i) out[log.columns()[i]] = log.back().values[i];
}

EvalSetup seed_eval(const RunContext& ctx, const fs::path& dir, const std::string& prefix) {
  EvalSetup eval = make_eval_setup(ctx.config.eval, ctx.data);
  const EvalConfig& ec = ctx.config.eval;
  const HistogramEstimator window = *eval.histogram;
  if (ec.write_samples || ec.write_ppm) {
    eval.on_samples = [dir, prefix, ec, window](std::size_t step, const Tensor& samples) {
      if (ec.write_samples) {
        write_point_cloud(dir / (prefix + "-" + std::to_string(step) + ".csv"), samples);
      }
      if (ec.write_ppm && samples.cols() >= 2) {
        write_scatter_ppm(dir / "snapshots" / (prefix + "-" + std::to_string(step) + ".ppm"), samples,
                          window.lower[0], window.upper[0]);
      }
    };
  }
  return eval;
}

std::map<std::string, double> run_em(const RunContext& ctx, std::uint64_t seed, const fs::path& dir) {
  EmConfig cfg = ctx.config.em;
  cfg.seed = seed;
  const EmResult r = em_fit(ctx.data.samples, ctx.config.em_components, cfg);
  write_text(dir / "metrics.csv", loglik_csv(r.loglik_history));
  write_text(dir / "model.json", r.model.to_json().dump(2) + "\n");
  Checkpoint ckpt;
  ckpt.meta = {{"model", "em"}, {"gmm", r.model.to_json()}, {"seed", seed}};
  save_checkpoint(dir / "checkpoint.bin", ckpt);
  std::string events;
  for (const auto& e : r.events) events += e + "\n";
  if (!events.empty()) write_text(dir / "events.txt", events);

  std::map<std::string, double> out;
  out["loglik"] = r.loglik_history.back();
  out["iterations"] = static_cast<double>(r.loglik_history.size() - 1);
  out["reseeds"] = static_cast<double>(r.events.size());
  if (ctx.data.truth && ctx.data.truth->components() == r.model.components()) {
    double worst = 0.0;
    for (std::size_t k = 0; k < r.model.components(); ++k) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < r.model.components(); ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < r.model.dim(); ++c) {
          const double diff = ctx.data.truth->means.at(k, c) - r.model.means.at(j, c);
          s += diff * diff;
        }
        best = std::min(best, std::sqrt(s));
      }
      worst = std::max(worst, best);
    }
    out["max_mean_error"] = worst;
  }
  const EvalSetup eval = seed_eval(ctx, dir, "samples");
  Rng rng(seed, Stream::kEval);
  const Tensor samples = gmm_sample(r.model, rng, eval.samples).x;
  if (eval.on_samples) eval.on_samples(r.loglik_history.size() - 1, samples);
  add_scores(out, score_samples(eval, samples));
  return out;
}

std::map<std::string, double> run_vae(const RunContext& ctx, std::uint64_t seed, const fs::path& dir) {
  VaeConfig cfg = ctx.config.vae;
  cfg.seed = seed;
  Rng init(seed, Stream::kInit);
  VaeModel model = VaeModel::create(ctx.data.samples.cols(), cfg, init);
  const EvalSetup eval = seed_eval(ctx, dir, "samples");
  std::map<std::string, double> out;
  {
    Rng rng(seed, Stream::kProbe);
    out["kl_est_initial"] = score_samples(eval, vae_generate(model, eval.samples, rng)).kl_est;
  }
  const MetricLog log = vae_train(model, ctx.data.samples, cfg, &eval);
  write_text(dir / "metrics.csv", log.to_csv());
  Checkpoint ckpt;
  ckpt.add("encoder", model.encoder);
  ckpt.add("decoder", model.decoder);
  ckpt.meta = {{"model", "vae"}, {"decoder_log_var", model.decoder_log_var},
               {"latent_dim", model.latent_dim}, {"seed", seed}};
  save_checkpoint(dir / "checkpoint.bin", ckpt);
  last_row(out, log);
  Rng rng(seed, Stream::kProbe);
  add_scores(out, score_samples(eval, vae_generate(model, eval.samples, rng)));
  return out;
}

std::map<std::string, double> run_gan(const RunContext& ctx, std::uint64_t seed, const fs::path& dir,
                                      bool regularized) {
  GanConfig cfg = ctx.config.gan;
  cfg.seed = seed;
  if (!regularized) cfg.lambda = 0.0;
  Rng init(seed, Stream::kInit);
  GanModel model = GanModel::create(ctx.data.samples.cols(), cfg, init);
  const EvalSetup eval = seed_eval(ctx, dir, "samples");
  const GanRun run = gan_train(model, ctx.data.samples, cfg, eval);
  write_text(dir / "metrics.csv", run.log.to_csv());
  std::string drift = "refresh,drift\n";
  for (std::size_t i = 0; i < run.drift.size(); ++i) {
    drift += std::to_string(i + 1) + "," + format_double(run.drift[i]) + "\n";
  }
  write_text(dir / "drift.csv", drift);
  Checkpoint ckpt;
  ckpt.add("generator", model.generator);
  ckpt.add("discriminator", model.discriminator);
  ckpt.meta = {{"model", regularized ? "gan-reg" : "gan"}, {"lambda", cfg.lambda},
               {"latent_dim", model.latent_dim}, {"seed", seed}};
  save_checkpoint(dir / "checkpoint.bin", ckpt);
  std::map<std::string, double> out;
  last_row(out, run.log);
  return out;
}

std::map<std::string, double> run_aae(const RunContext& ctx, std::uint64_t seed, const fs::path& dir) {
  AaeConfig cfg = ctx.config.aae;
  cfg.common.seed = seed;
  Rng init(seed, Stream::kInit);
  AaeModel model = AaeModel::create(ctx.data.samples.cols(), cfg.common, init);
  const EvalSetup eval = seed_eval(ctx, dir, "codes");
  const auto latent = HistogramEstimator::uniform(cfg.common.latent_dim, -ctx.config.aae_latent_range,
                                                  ctx.config.aae_latent_range, ctx.config.aae_latent_bins);
  std::map<std::string, double> out;
  {
    Rng rng(seed, Stream::kProbe);
    out["latent_kl_initial"] = aae_latent_kl(model, ctx.data.samples, latent, rng);
  }
  const VariantRun run = variant_train(model, ctx.data.samples, cfg, eval, latent);
  write_text(dir / "metrics.csv", run.log.to_csv());
  Checkpoint ckpt;
  ckpt.add("encoder", model.encoder);
  ckpt.add("decoder", model.decoder);
  ckpt.add("discriminator", model.discriminator);
  ckpt.meta = {{"model", "aae"}, {"latent_dim", model.latent_dim}, {"seed", seed}};
  save_checkpoint(dir / "checkpoint.bin", ckpt);
  last_row(out, run.log);
  Rng rng(seed, Stream::kProbe);
  const Tensor samples = forward(model.decoder, normal_noise(rng, {eval.samples, model.latent_dim}));
  if (ctx.config.eval.write_samples) write_point_cloud(dir / "samples-final.csv", samples);
  add_scores(out, score_samples(eval, samples));
  return out;
}

std::map<std::string, double> run_ali(const RunContext& ctx, std::uint64_t seed, const fs::path& dir) {
  AliConfig cfg = ctx.config.ali;
  cfg.common.seed = seed;
  Rng init(seed, Stream::kInit);
  AliModel model = AliModel::create(ctx.data.samples.cols(), cfg.common, init);
  const EvalSetup eval = seed_eval(ctx, dir, "samples");
  const VariantRun run = variant_train(model, ctx.data.samples, cfg, eval);
  write_text(dir / "metrics.csv", run.log.to_csv());
  Checkpoint ckpt;
  ckpt.add("encoder", model.encoder);
  ckpt.add("generator", model.generator);
  ckpt.add("discriminator", model.discriminator);
  ckpt.meta = {{"model", "ali"}, {"variant", to_string(cfg.variant)},
               {"latent_dim", model.latent_dim}, {"seed", seed}};
  save_checkpoint(dir / "checkpoint.bin", ckpt);
  std::map<std::string, double> out;
  last_row(out, run.log);
  return out;
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Dataset data = make_dataset(config.dataset);
  const json normalized = config_to_json(config);
  fs::create_directories(config.output_dir);
  write_text(config.output_dir / "config.json", normalized.dump(2) + "\n");
  json manifest = {{"version", kVersion},
                   {"config", normalized},
                   {"config_hash", config_hash(normalized)},
                   {"models", normalized["model"]},
                   {"seeds", config.seeds},
                   {"dataset_rows", data.samples.rows()},
                   {"note",
                    "network widths, step counts and learning rates are desk-scale defaults of this "
                    "implementation; rerun with `varinf train --config config.json`"}};
  write_text(config.output_dir / "manifest.json", manifest.dump(2) + "\n");

  std::vector<SeedOutcome> outcomes;
  for (ModelKind m : config.models) {
    for (std::uint64_t s : config.seeds) {
      SeedOutcome o;
      o.model = m;
      o.seed = s;
      o.directory = seed_directory(config, m, s);
      outcomes.push_back(o);
    }
  }

  const RunContext ctx{config, data};
  auto run_one = [&](SeedOutcome& o) {
    try {
      fs::create_directories(o.directory);
      switch (o.model) {
        case ModelKind::kEm:
          o.final_metrics = run_em(ctx, o.seed, o.directory);
          break;
        case ModelKind::kVae:
          o.final_metrics = run_vae(ctx, o.seed, o.directory);
          break;
        case ModelKind::kGan:
        case ModelKind::kGanReg:
          o.final_metrics = run_gan(ctx, o.seed, o.directory, o.model == ModelKind::kGanReg);
          break;
        case ModelKind::kAae:
          o.final_metrics = run_aae(ctx, o.seed, o.directory);
          break;
        case ModelKind::kAli:
          o.final_metrics = run_ali(ctx, o.seed, o.directory);
          break;
      }
      json fin = json::object();
      for (const auto& [k, v] : o.final_metrics) fin[k] = number_or_null(v);
      write_text(o.directory / "final.json", fin.dump(2) + "\n");
      o.ok = true;
    } catch (const std::exception& e) {
      o.ok = false;
      o.error = e.what();
      try {
        write_text(o.directory / "error.txt", o.error + "\n");
      } catch (...) {
      }
    }
  };

  const std::size_t workers = std::min(config.jobs, outcomes.size());
  if (workers <= 1) {
    for (auto& o : outcomes) run_one(o);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < outcomes.size(); i = next++) run_one(outcomes[i]);
      });
    }
    for (auto& t : pool) t.join();
  }

  json summary = {{"config_hash", config_hash(normalized)}, {"models", json::object()}};
  const double k_modes = data.truth ? static_cast<double>(data.truth->components()) : -1.0;
  for (ModelKind m : config.models) {
    json entry = {{"seeds_ok", 0}, {"failures", json::array()}, {"metrics", json::object()}};
    std::map<std::string, std::vector<double>> values;
    std::size_t all_modes = 0;
    for (const auto& o : outcomes) {
      if (o.model != m) continue;
      if (!o.ok) {
        entry["failures"].push_back({{"seed", o.seed}, {"error", o.error}});
        continue;
      }
      entry["seeds_ok"] = entry["seeds_ok"].get<int>() + 1;
      for (const auto& [k, v] : o.final_metrics) {
        if (std::isfinite(v)) values[k].push_back(v);
      }
      auto cov = o.final_metrics.find("mode_coverage");
      if (cov != o.final_metrics.end() && cov->second == k_modes) ++all_modes;
    }
    for (const auto& [k, vs] : values) {
      const Spread sp = spread(vs);
      entry["metrics"][k] = {{"median", sp.median}, {"q1", sp.q1}, {"q3", sp.q3},
                             {"iqr", sp.q3 - sp.q1}, {"values", vs}};
    }
    if (data.truth) entry["all_modes_count"] = all_modes;
    summary["models"][to_string(m)] = entry;
  }

  if (config.models.size() > 1) {
    std::string csv = "seed";
    for (ModelKind m : config.models) csv += "," + to_string(m);
    csv += "\n";
    json rows = json::array();
    for (std::uint64_t s : config.seeds) {
      json row = {{"seed", s}};
      csv += std::to_string(s);
      for (ModelKind m : config.models) {
        double v = std::numeric_limits<double>::quiet_NaN();
        for (const auto& o : outcomes) {
          if (o.model == m && o.seed == s && o.ok && o.final_metrics.count("mode_coverage")) {
            v = o.final_metrics.at("mode_coverage");
          }
        }
        row[to_string(m)] = number_or_null(v);
        csv += "," + format_double(v);
      }
      csv += "\n";
      rows.push_back(row);
    }
    summary["paired_mode_coverage"] = rows;
    write_text(config.output_dir / "paired_mode_coverage.csv", csv);
  }
  write_text(config.output_dir / "summary.json", summary.dump(2) + "\n");
  return {std::move(outcomes), std::move(summary)};
}

}  // namespace varinf
