#include "varinf/variants.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "varinf/errors.hpp"

namespace varinf {

void VariantConfig::validate() const {
  if (latent_dim == 0) throw ConfigError("latent_dim must be >= 1");
  if (batch == 0) throw ConfigError("batch must be >= 1");
}

// ----------------------------------------------------------------- AAE

AaeModel AaeModel::create(std::size_t data_dim, const VariantConfig& c, Rng& init) {
  c.validate();
  AaeModel m{Mlp(make_spec(data_dim, c.encoder_net, c.latent_dim), init),
             Mlp(make_spec(c.latent_dim, c.generator_net, data_dim), init),
             Mlp(make_spec(c.latent_dim, c.discriminator_net, 1), init), c.latent_dim};
  m.validate();
  return m;
}

void AaeModel::validate() const {
  if (encoder.output_dim() != latent_dim || decoder.input_dim() != latent_dim ||
      discriminator.input_dim() != latent_dim) {
    throw DimensionError("aae: encoder output, decoder input and discriminator input must agree");
  }
  if (discriminator.output_dim() != 1) throw DimensionError("aae: discriminator must be scalar");
  if (decoder.output_dim() != encoder.input_dim()) {
    throw DimensionError("aae: decoder output must match encoder input");
  }
}

AaeDGraph build_aae_d_loss(Graph& g, const AaeModel& model, const Tensor& data,
                           const Tensor& prior) {
  if (data.rows() == 0 || prior.rows() == 0) throw ContractError("aae_d_loss: empty batch");
  AaeDGraph out;
  out.encoder_params = model.encoder.bind(g, true);
  out.discriminator_params = model.discriminator.bind(g, true);
  NodeId codes = g.detach(model.encoder.apply(g, out.encoder_params, g.constant(data)));
  NodeId d_codes = g.sigmoid(model.discriminator.apply(g, out.discriminator_params, codes));
  NodeId d_prior =
      g.sigmoid(model.discriminator.apply(g, out.discriminator_params, g.constant(prior)));
  out.loss = g.scale(g.add(g.mean(clamped_log1m(g, d_codes)), g.mean(clamped_log(g, d_prior))),
                     -1.0);
  return out;
}

AaeJointGraph build_aae_joint_loss(Graph& g, const AaeModel& model, const Tensor& data,
                                   double lambda_rec) {
  if (data.rows() == 0) throw ContractError("aae_joint_loss: empty batch");
  if (!(lambda_rec >= 0.0)) throw ContractError("aae_joint_loss: lambda_rec must be >= 0");
  AaeJointGraph out;
  out.encoder_params = model.encoder.bind(g, true);
  out.decoder_params = model.decoder.bind(g, true);
  out.discriminator_params = model.discriminator.bind(g, false);
  NodeId x = g.constant(data);
  NodeId codes = model.encoder.apply(g, out.encoder_params, x);
  NodeId d_codes = g.sigmoid(model.discriminator.apply(g, out.discriminator_params, codes));
  out.adversarial = g.scale(g.mean(clamped_log(g, d_codes)), -1.0);
  NodeId recon = model.decoder.apply(g, out.decoder_params, codes);
  out.reconstruction = g.mean(g.row_sum(g.square(g.sub(x, recon))));
  out.loss = lambda_rec == 0.0 ? out.adversarial
                               : g.add(out.adversarial, g.scale(out.reconstruction, lambda_rec));
  return out;
}

double aae_d_loss(const AaeModel& model, const Tensor& data, const Tensor& prior) {
  Graph g;
  return g.scalar(build_aae_d_loss(g, model, data, prior).loss);
}

AaeJointLoss aae_joint_loss(const AaeModel& model, const Tensor& data, double lambda_rec) {
  Graph g;
  const auto r = build_aae_joint_loss(g, model, data, lambda_rec);
  return {g.scalar(r.loss), g.scalar(r.adversarial), g.scalar(r.reconstruction)};
}

double aae_latent_kl(const AaeModel& model, const Tensor& data, const HistogramEstimator& est,
                     Rng& rng) {
  const Tensor codes = forward(model.encoder, data);
  const Tensor prior = normal_noise(rng, {data.rows(), model.latent_dim});
  return kl_histogram(codes, prior, est);
}

double aae_reconstruction_error(const AaeModel& model, const Tensor& data) {
  return dirac_penalty(data, forward(model.decoder, forward(model.encoder, data)));
}

// ----------------------------------------------------------------- ALI

std::string to_string(AliVariant v) {
  switch (v) {
    case AliVariant::kPaper:
      return "paper";
    case AliVariant::kMinmaxA:
      return "minmax-a";
    case AliVariant::kMinmaxB:
      return "minmax-b";
  }
  return "paper";
}

AliVariant ali_variant_from_string(const std::string& name) {
  if (name == "paper") return AliVariant::kPaper;
  if (name == "minmax-a") return AliVariant::kMinmaxA;
  if (name == "minmax-b") return AliVariant::kMinmaxB;
  throw ContractError("unknown ALI variant '" + name + "'");
}

AliModel AliModel::create(std::size_t data_dim, const VariantConfig& c, Rng& init) {
  c.validate();
  AliModel m{Mlp(make_spec(data_dim, c.encoder_net, 2 * c.latent_dim), init),
             Mlp(make_spec(c.latent_dim, c.generator_net, 2 * data_dim), init),
             Mlp(make_spec(data_dim + c.latent_dim, c.discriminator_net, 1), init),
             data_dim,
             c.latent_dim,
             std::nullopt};
  m.validate();
  return m;
}

void AliModel::validate() const {
  if (encoder.input_dim() != data_dim || encoder.output_dim() != 2 * latent_dim) {
    throw DimensionError("ali: encoder must map d_x -> 2 d_z");
  }
  if (generator.input_dim() != latent_dim || generator.output_dim() != 2 * data_dim) {
    throw DimensionError("ali: generator must map d_z -> 2 d_x");
  }
  if (discriminator.input_dim() != data_dim + latent_dim || discriminator.output_dim() != 1) {
    throw DimensionError("ali: discriminator must map d_x + d_z -> 1");
  }
}

namespace {

struct GaussianHead {
  NodeId mean, log_var;
};

GaussianHead split_head(Graph& g, NodeId out, std::size_t d) {
  return {g.slice_cols(out, 0, d), floor_log_var(g, g.slice_cols(out, d, 2 * d))};
}

void check_ali_inputs(const AliModel& model, const Tensor& data, const Tensor& prior,
                      const AliNoise& noise) {
  if (data.rows() == 0 || prior.rows() == 0) throw ContractError("ali: empty batch");
  if (noise.encoder.rows() != data.rows() || noise.encoder.cols() != model.latent_dim) {
    throw DimensionError("ali: encoder noise must be data rows x d_z");
  }
  if (noise.generator.rows() != prior.rows() || noise.generator.cols() != model.data_dim) {
    throw DimensionError("ali: generator noise must be prior rows x d_x");
  }
}

}  // namespace

AliDGraph build_ali_d_loss(Graph& g, const AliModel& model, const Tensor& data,
                           const Tensor& prior, const AliNoise& noise) {
  check_ali_inputs(model, data, prior, noise);
  AliDGraph out;
  out.encoder_params = model.encoder.bind(g, true);
  out.generator_params = model.generator.bind(g, true);
  out.discriminator_params = model.discriminator.bind(g, true);
  NodeId x = g.constant(data);
  NodeId z = g.constant(prior);
  auto enc = split_head(g, model.encoder.apply(g, out.encoder_params, x), model.latent_dim);
  NodeId z_hat = g.detach(reparam_sample(g, enc.mean, enc.log_var, g.constant(noise.encoder)));
  auto gen = split_head(g, model.generator.apply(g, out.generator_params, z), model.data_dim);
  NodeId x_hat = g.detach(reparam_sample(g, gen.mean, gen.log_var, g.constant(noise.generator)));
  NodeId d_enc =
      g.sigmoid(model.discriminator.apply(g, out.discriminator_params, g.concat_cols(x, z_hat)));
  NodeId d_gen =
      g.sigmoid(model.discriminator.apply(g, out.discriminator_params, g.concat_cols(x_hat, z)));
  out.loss =
      g.scale(g.add(g.mean(clamped_log(g, d_enc)), g.mean(clamped_log1m(g, d_gen))), -1.0);
  return out;
}

AliGGraph build_ali_g_loss(Graph& g, const AliModel& model, const Tensor& data,
                           const Tensor& prior, const AliNoise& noise, AliVariant variant,
                           double generator_kl_weight) {
  check_ali_inputs(model, data, prior, noise);
  AliGGraph out;
  out.encoder_params = model.encoder.bind(g, true);
  out.generator_params = model.generator.bind(g, true);
  out.discriminator_params = model.discriminator.bind(g, false);
  NodeId x = g.constant(data);
  NodeId z = g.constant(prior);
  auto enc = split_head(g, model.encoder.apply(g, out.encoder_params, x), model.latent_dim);
  NodeId z_hat = reparam_sample(g, enc.mean, enc.log_var, g.constant(noise.encoder));
  NodeId gen_out = model.generator.apply(g, out.generator_params, z);
  auto gen = split_head(g, gen_out, model.data_dim);
  NodeId x_hat = reparam_sample(g, gen.mean, gen.log_var, g.constant(noise.generator));
  NodeId d_enc =
      g.sigmoid(model.discriminator.apply(g, out.discriminator_params, g.concat_cols(x, z_hat)));
  NodeId d_gen =
      g.sigmoid(model.discriminator.apply(g, out.discriminator_params, g.concat_cols(x_hat, z)));

  switch (variant) {
    case AliVariant::kPaper:
      out.encoder_term = g.scale(g.mean(clamped_log(g, d_enc)), -1.0);
      out.generator_term = g.scale(g.mean(clamped_log(g, d_gen)), -1.0);
      break;
    case AliVariant::kMinmaxA:
      out.encoder_term = g.mean(clamped_log(g, d_enc));
      out.generator_term = g.mean(clamped_log1m(g, d_gen));
      break;
    case AliVariant::kMinmaxB:
      out.encoder_term = g.scale(g.mean(clamped_log1m(g, d_enc)), -1.0);
      out.generator_term = g.scale(g.mean(clamped_log(g, d_gen)), -1.0);
      break;
  }
  out.loss = g.add(out.encoder_term, out.generator_term);

  if (generator_kl_weight > 0.0) {
    if (!model.generator_snapshot) {
      throw ContractError("ali: generator KL term requested without a generator snapshot");
    }
    const Tensor old = forward(model.generator, *model.generator_snapshot, prior);
    NodeId old_n = g.constant(old);
    NodeId old_mean = g.slice_cols(old_n, 0, model.data_dim);
    NodeId old_lv = floor_log_var(g, g.slice_cols(old_n, model.data_dim, 2 * model.data_dim));
    out.generator_kl =
        g.mean(kl_diag_gaussian_rows(g, gen.mean, gen.log_var, old_mean, old_lv));
    out.loss = g.add(out.loss, g.scale(*out.generator_kl, generator_kl_weight));
  }
  return out;
}

double ali_d_loss(const AliModel& model, const Tensor& data, const Tensor& prior,
                  const AliNoise& noise) {
  Graph g;
  return g.scalar(build_ali_d_loss(g, model, data, prior, noise).loss);
}

double ali_g_loss(const AliModel& model, const Tensor& data, const Tensor& prior,
                  const AliNoise& noise, AliVariant variant) {
  Graph g;
  return g.scalar(build_ali_g_loss(g, model, data, prior, noise, variant).loss);
}

Tensor ali_generate(const AliModel& model, std::size_t count, Rng& rng) {
  const Tensor z = normal_noise(rng, {count, model.latent_dim});
  const Tensor head = forward(model.generator, z);
  const std::size_t d = model.data_dim;
  const double floor_lv = std::log(kVarianceFloor);
  Tensor x = Tensor::matrix(count, d);
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double lv = std::max(head.at(r, d + c), floor_lv);
      x.at(r, c) = head.at(r, c) + std::exp(0.5 * lv) * rng.normal();
    }
  }
  return x;
}

Tensor ali_encode_mean(const AliModel& model, const Tensor& data) {
  const Tensor head = forward(model.encoder, data);
  Tensor z = Tensor::matrix(data.rows(), model.latent_dim);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    for (std::size_t c = 0; c < model.latent_dim; ++c) z.at(r, c) = head.at(r, c);
  }
  return z;
}

// ----------------------------------------------------------------- driver

namespace {

// Alternates `d_phase` and `eg_phase` per period and appends one metric row
// per evaluation interval from `evaluate(period, last_d, last_eg)`.
template <class DPhase, class EgPhase, class Evaluate>
void alternate(const VariantConfig& c, const EvalSetup& eval, MetricLog& log, DPhase d_phase,
               EgPhase eg_phase, Evaluate evaluate) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<double> last_d, last_eg;
  for (std::size_t period = 1; period <= c.periods; ++period) {
    for (std::size_t s = 0; s < c.d_steps; ++s) last_d = d_phase(period);
    for (std::size_t s = 0; s < c.eg_steps; ++s) last_eg = eg_phase(period);
    if (eval.interval > 0 && (period % eval.interval == 0 || period == c.periods)) {
      std::vector<double> row = evaluate(period, last_d, last_eg);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      log.add(period, std::move(row), secs);
    }
  }
}

double first_or_nan(const std::vector<double>& v, std::size_t i = 0) {
  return v.size() > i ? v[i] : std::numeric_limits<double>::quiet_NaN();
}

std::string checksum_note(const std::vector<const Mlp*>& nets) {
  std::string s;
  for (const Mlp* n : nets) s += " " + std::to_string(params_checksum(n->params().values));
  return s;
}

}  // namespace

VariantRun variant_train(AaeModel& model, const Tensor& data, const AaeConfig& config,
                         const EvalSetup& eval, const HistogramEstimator& latent_histogram) {
  const VariantConfig& c = config.common;
  c.validate();
  model.validate();
  Rng rng(c.seed, Stream::kTrain);
  Rng eval_rng(c.seed, Stream::kEval);
  Optimizer enc_opt(c.eg_optimizer, model.encoder.param_count());
  Optimizer dec_opt(c.eg_optimizer, model.decoder.param_count());
  Optimizer d_opt(c.d_optimizer, model.discriminator.param_count());
  const Tensor& eval_data = eval.reference.size() > 0 ? eval.reference : data;

  VariantRun run{MetricLog(
      {"d_loss", "eg_loss", "adversarial", "reconstruction", "latent_kl", "recon_error"})};
  auto diag = [&](const char* phase, std::size_t period) {
    return std::string(phase) + " at period " + std::to_string(period) + ", checksums" +
           checksum_note({&model.encoder, &model.decoder, &model.discriminator});
  };

  alternate(
      c, eval, run.log,
      [&](std::size_t period) {
        const Tensor x = sample_rows(data, c.batch, rng);
        const Tensor prior = normal_noise(rng, {c.batch, model.latent_dim});
        Graph g;
        const auto r = build_aae_d_loss(g, model, x, prior);
        const double loss = g.scalar(r.loss);
        require_finite_loss(loss, diag("aae d_loss", period));
        g.backward(r.loss);
        d_opt.step(model.discriminator.params(), g.grad(r.discriminator_params).values());
        return std::vector<double>{loss};
      },
      [&](std::size_t period) {
        const Tensor x = sample_rows(data, c.batch, rng);
        Graph g;
        const auto r = build_aae_joint_loss(g, model, x, config.lambda_rec);
        const double loss = g.scalar(r.loss);
        require_finite_loss(loss, diag("aae joint loss", period));
        g.backward(r.loss);
        enc_opt.step(model.encoder.params(), g.grad(r.encoder_params).values());
        dec_opt.step(model.decoder.params(), g.grad(r.decoder_params).values());
        return std::vector<double>{loss, g.scalar(r.adversarial), g.scalar(r.reconstruction)};
      },
      [&](std::size_t period, const std::vector<double>& d, const std::vector<double>& eg) {
        const double latent_kl = aae_latent_kl(model, eval_data, latent_histogram, eval_rng);
        const double recon = aae_reconstruction_error(model, eval_data);
        if (eval.on_samples) eval.on_samples(period, forward(model.encoder, eval_data));
        return std::vector<double>{first_or_nan(d),      first_or_nan(eg), first_or_nan(eg, 1),
                                   first_or_nan(eg, 2), latent_kl,        recon};
      });
  return run;
}

VariantRun variant_train(AliModel& model, const Tensor& data, const AliConfig& config,
                         const EvalSetup& eval) {
  const VariantConfig& c = config.common;
  c.validate();
  model.validate();
  if (config.snapshot_lag < 1) throw ConfigError("ali: snapshot_lag must be >= 1");
  Rng rng(c.seed, Stream::kTrain);
  Rng eval_rng(c.seed, Stream::kEval);
  Optimizer enc_opt(c.eg_optimizer, model.encoder.param_count());
  Optimizer gen_opt(c.eg_optimizer, model.generator.param_count());
  Optimizer d_opt(c.d_optimizer, model.discriminator.param_count());
  const Tensor& eval_data = eval.reference.size() > 0 ? eval.reference : data;
  std::size_t eg_step_count = 0;

  VariantRun run{MetricLog(
      {"d_loss", "eg_loss", "generator_kl", "recon_error", "mode_coverage", "kl_est"})};
  auto diag = [&](const char* phase, std::size_t period) {
    return std::string(phase) + " (" + to_string(config.variant) + ") at period " +
           std::to_string(period) + ", checksums" +
           checksum_note({&model.encoder, &model.generator, &model.discriminator});
  };
  auto noise_for = [&](std::size_t rows) {
    return AliNoise{normal_noise(rng, {rows, model.latent_dim}),
                    normal_noise(rng, {rows, model.data_dim})};
  };

  alternate(
      c, eval, run.log,
      [&](std::size_t period) {
        const Tensor x = sample_rows(data, c.batch, rng);
        const Tensor prior = normal_noise(rng, {c.batch, model.latent_dim});
        const AliNoise noise = noise_for(c.batch);
        Graph g;
        const auto r = build_ali_d_loss(g, model, x, prior, noise);
        const double loss = g.scalar(r.loss);
        require_finite_loss(loss, diag("ali d_loss", period));
        g.backward(r.loss);
        d_opt.step(model.discriminator.params(), g.grad(r.discriminator_params).values());
        return std::vector<double>{loss};
      },
      [&](std::size_t period) {
        if (config.generator_kl_weight > 0.0 && eg_step_count % config.snapshot_lag == 0) {
          model.generator_snapshot = snapshot(model.generator.params());
        }
        const Tensor x = sample_rows(data, c.batch, rng);
        const Tensor prior = normal_noise(rng, {c.batch, model.latent_dim});
        const AliNoise noise = noise_for(c.batch);
        Graph g;
        const auto r = build_ali_g_loss(g, model, x, prior, noise, config.variant,
                                        config.generator_kl_weight);
        const double loss = g.scalar(r.loss);
        require_finite_loss(loss, diag("ali eg loss", period));
        g.backward(r.loss);
        enc_opt.step(model.encoder.params(), g.grad(r.encoder_params).values());
        gen_opt.step(model.generator.params(), g.grad(r.generator_params).values());
        ++eg_step_count;
        return std::vector<double>{
            loss, r.generator_kl ? g.scalar(*r.generator_kl)
                                 : std::numeric_limits<double>::quiet_NaN()};
      },
      [&](std::size_t period, const std::vector<double>& d, const std::vector<double>& eg) {
        const Tensor samples = ali_generate(model, eval.samples, eval_rng);
        const SampleScores sc = score_samples(eval, samples);
        const Tensor z = ali_encode_mean(model, eval_data);
        const Tensor head = forward(model.generator, z);
        Tensor recon = Tensor::matrix(eval_data.rows(), model.data_dim);
        for (std::size_t r = 0; r < recon.rows(); ++r) {
          for (std::size_t k = 0; k < model.data_dim; ++k) recon.at(r, k) = head.at(r, k);
        }
        const double recon_error = dirac_penalty(eval_data, recon);
        if (eval.on_samples) eval.on_samples(period, samples);
        return std::vector<double>{first_or_nan(d), first_or_nan(eg), first_or_nan(eg, 1),
                                   recon_error, sc.mode_coverage, sc.kl_est};
      });
  return run;
}

}  // namespace varinf
