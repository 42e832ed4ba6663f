#include "varinf/gan.hpp"

#include <chrono>
#include <cmath>

#include "varinf/errors.hpp"

namespace varinf {

void GanConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("gan: lambda must be >= 0");
  if (snapshot_lag < 1) throw ConfigError("gan: snapshot_lag must be >= 1");
  if (std::abs(p_real + p_fake - 1.0) > 1e-12 || p_real <= 0.0 || p_fake <= 0.0) {
    throw ConfigError("gan: class priors must be positive and sum to 1");
  }
  if (batch == 0) throw ConfigError("gan: batch must be >= 1");
  if (latent_dim == 0) throw ConfigError("gan: latent_dim must be >= 1");
}

GanModel GanModel::create(std::size_t data_dim, const GanConfig& c, Rng& init) {
  c.validate();
  GanModel m{Mlp(make_spec(c.latent_dim, c.generator_net, data_dim), init),
             Mlp(make_spec(data_dim, c.discriminator_net, 1), init), c.latent_dim, std::nullopt};
  m.refresh_snapshot();
  m.validate();
  return m;
}

void GanModel::validate() const {
  if (generator.input_dim() != latent_dim) throw DimensionError("gan: generator input != latent");
  if (discriminator.output_dim() != 1) throw DimensionError("gan: discriminator must be scalar");
  if (discriminator.input_dim() != generator.output_dim()) {
    throw DimensionError("gan: discriminator input != generator output");
  }
  if (snapshot && !(snapshot->params().layout == generator.params().layout)) {
    throw DimensionError("gan: snapshot layout differs from generator");
  }
}

DLossGraph build_d_loss(Graph& g, const GanModel& model, const Tensor& real, const Tensor& z,
                        double p_real, double p_fake) {
  if (real.rows() == 0 || z.rows() == 0) throw ContractError("d_loss: empty batch");
  DLossGraph out;
  out.generator_params = model.generator.bind(g, true);
  out.discriminator_params = model.discriminator.bind(g, true);
  NodeId fake = g.detach(model.generator.apply(g, out.generator_params, g.constant(z)));
  NodeId d_real = g.sigmoid(model.discriminator.apply(g, out.discriminator_params,
                                                      g.constant(real)));
  NodeId d_fake = g.sigmoid(model.discriminator.apply(g, out.discriminator_params, fake));
  NodeId real_term = g.scale(g.mean(clamped_log(g, d_real)), -2.0 * p_real);
  NodeId fake_term = g.scale(g.mean(clamped_log1m(g, d_fake)), -2.0 * p_fake);
  out.loss = g.add(real_term, fake_term);
  return out;
}

GLossGraph build_g_loss(Graph& g, const GanModel& model, const Tensor& z,
                        std::optional<double> lambda) {
  if (z.rows() == 0) throw ContractError("g_loss: empty batch");
  GLossGraph out;
  out.generator_params = model.generator.bind(g, true);
  out.discriminator_params = model.discriminator.bind(g, false);
  NodeId zn = g.constant(z);
  NodeId fake = model.generator.apply(g, out.generator_params, zn);
  NodeId d_fake = g.sigmoid(model.discriminator.apply(g, out.discriminator_params, fake));
  out.adversarial = g.scale(g.mean(clamped_log(g, d_fake)), -1.0);
  out.loss = out.adversarial;
  if (lambda) {
    if (!model.snapshot) throw ContractError("g_loss_regularized: generator snapshot missing");
    if (*lambda < 0.0) throw ContractError("g_loss_regularized: lambda must be >= 0");
    NodeId old = g.constant(forward(model.generator, *model.snapshot, z));
    out.regularizer = dirac_penalty(g, fake, old);
    if (*lambda > 0.0) out.loss = g.add(out.adversarial, g.scale(*out.regularizer, *lambda));
  }
  return out;
}

double d_loss(const GanModel& model, const Tensor& real, const Tensor& z) {
  Graph g;
  return g.scalar(build_d_loss(g, model, real, z).loss);
}

double g_loss_standard(const GanModel& model, const Tensor& z) {
  Graph g;
  return g.scalar(build_g_loss(g, model, z, std::nullopt).loss);
}

GLoss g_loss_regularized(const GanModel& model, const Tensor& z, double lambda) {
  Graph g;
  const GLossGraph r = build_g_loss(g, model, z, lambda);
  return {g.scalar(r.loss), g.scalar(r.adversarial), g.scalar(*r.regularizer)};
}

Tensor gan_generate(const GanModel& model, std::size_t count, Rng& rng) {
  return forward(model.generator, normal_noise(rng, {count, model.latent_dim}));
}

std::vector<double> discriminator_probs(const Mlp& discriminator, const Tensor& x) {
  const Tensor logits = forward(discriminator, x);
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = 1.0 / (1.0 + std::exp(-logits[i]));
  return p;
}

GanRun gan_train(GanModel& model, const Tensor& data, const GanConfig& config,
                 const EvalSetup& eval) {
  config.validate();
  model.validate();
  Rng rng(config.seed, Stream::kTrain);
  Rng eval_rng(config.seed, Stream::kEval);
  Optimizer g_opt(config.g_optimizer, model.generator.param_count());
  Optimizer d_opt(config.d_optimizer, model.discriminator.param_count());
  const Tensor drift_z = normal_noise(eval_rng, {512, model.latent_dim});
  const auto start = std::chrono::steady_clock::now();

  GanRun run;
  double last_d = std::nan(""), last_g = std::nan(""), last_reg = std::nan("");
  std::size_t g_step_count = 0;

  auto diag = [&](const char* phase, std::size_t period) {
    return std::string(phase) + " at period " + std::to_string(period) + " (lambda " +
           format_double(config.lambda) + ", seed " + std::to_string(config.seed) +
           ", generator checksum " + std::to_string(params_checksum(model.generator.params().values)) +
           ", discriminator checksum " +
           std::to_string(params_checksum(model.discriminator.params().values)) + ")";
  };

  for (std::size_t period = 1; period <= config.periods; ++period) {
    for (std::size_t s = 0; s < config.d_steps; ++s) {
      const Tensor real = sample_rows(data, config.batch, rng);
      const Tensor z = normal_noise(rng, {config.batch, model.latent_dim});
      Graph g;
      const DLossGraph r = build_d_loss(g, model, real, z, config.p_real, config.p_fake);
      last_d = g.scalar(r.loss);
      require_finite_loss(last_d, diag("d_loss", period));
      g.backward(r.loss);
      d_opt.step(model.discriminator.params(), g.grad(r.discriminator_params).values());
    }
    for (std::size_t s = 0; s < config.g_steps; ++s) {
      if (g_step_count % config.snapshot_lag == 0) {
        if (g_step_count > 0 && model.snapshot) {
          run.drift.push_back(dirac_penalty(forward(model.generator, drift_z),
                                            forward(model.generator, *model.snapshot, drift_z)));
        }
        model.refresh_snapshot();
      }
      const Tensor z = normal_noise(rng, {config.batch, model.latent_dim});
      Graph g;
      const GLossGraph r = build_g_loss(g, model, z, config.lambda);
      last_g = g.scalar(r.loss);
      last_reg = g.scalar(*r.regularizer);
      require_finite_loss(last_g, diag("g_loss", period));
      g.backward(r.loss);
      g_opt.step(model.generator.params(), g.grad(r.generator_params).values());
      ++g_step_count;
    }
    if (eval.interval > 0 && (period % eval.interval == 0 || period == config.periods)) {
      const Tensor samples = gan_generate(model, eval.samples, eval_rng);
      const SampleScores sc = score_samples(eval, samples);
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      run.log.add(period, {last_d, last_g, last_reg, sc.mode_coverage, sc.kl_est}, secs);
      if (eval.on_samples) eval.on_samples(period, samples);
    }
  }
  return run;
}

double optimal_d_reference(const GmmModel& p, const GmmModel& q, std::span<const double> x) {
  const double lp = gmm_logpdf(p, x);
  const double lq = gmm_logpdf(q, x);
  if (!std::isfinite(lp) && !std::isfinite(lq)) {
    throw DegeneratePointError("optimal_d_reference: both densities underflow");
  }
  // p / (p + q) = sigmoid(log p - log q)
  const double t = lp - lq;
  return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

}  // namespace varinf
