#include "varinf/vae.hpp"

#include <chrono>
#include <cmath>

#include "varinf/distributions.hpp"
#include "varinf/errors.hpp"

namespace varinf {

VaeModel VaeModel::create(std::size_t data_dim, const VaeConfig& c, Rng& init) {
  VaeModel m{Mlp(make_spec(data_dim, c.net, 2 * c.latent_dim), init),
             Mlp(make_spec(c.latent_dim, c.net, data_dim), init), c.decoder_log_var,
             c.latent_dim};
  m.validate();
  return m;
}

void VaeModel::validate() const {
  if (encoder.output_dim() != 2 * latent_dim) {
    throw DimensionError("vae: encoder must emit 2 * latent_dim values");
  }
  if (decoder.input_dim() != latent_dim) throw DimensionError("vae: decoder input != latent_dim");
  if (encoder.input_dim() != decoder.output_dim()) {
    throw DimensionError("vae: encoder input and decoder output widths differ");
  }
  if (!std::isfinite(decoder_log_var)) throw ContractError("vae: decoder log-variance not finite");
}

VaeGraph build_vae_loss(Graph& g, const VaeModel& model, const Tensor& batch,
                        const Tensor& noise) {
  model.validate();
  if (batch.rank() != 2 || batch.cols() != model.data_dim()) {
    throw DimensionError("vae_loss: batch must be N x d_x");
  }
  if (noise.rows() != batch.rows() || noise.cols() != model.latent_dim) {
    throw DimensionError("vae_loss: noise must be N x d_z");
  }
  const std::size_t dz = model.latent_dim;
  const auto dx = static_cast<double>(model.data_dim());
  VaeGraph out;
  out.encoder_params = model.encoder.bind(g, true);
  out.decoder_params = model.decoder.bind(g, true);

  NodeId x = g.constant(batch);
  NodeId enc = model.encoder.apply(g, out.encoder_params, x);
  NodeId mu = g.slice_cols(enc, 0, dz);
  NodeId lv = floor_log_var(g, g.slice_cols(enc, dz, 2 * dz));
  NodeId z = reparam_sample(g, mu, lv, g.constant(noise));
  NodeId x_mean = model.decoder.apply(g, out.decoder_params, z);

  // -log N(x; mean, s^2 I) = ||x - mean||^2 / (2 s^2) + d/2 log(2 pi s^2)
  const double inv_var = std::exp(-model.decoder_log_var);
  NodeId sq = g.row_sum(g.square(g.sub(x, x_mean)));
  NodeId nll = g.add_scalar(g.scale(sq, 0.5 * inv_var),
                            0.5 * dx * (kLog2Pi + model.decoder_log_var));
  out.recon = g.mean(nll);
  out.kl = g.mean(kl_standard_normal_rows(g, mu, lv));
  out.total = g.add(out.recon, out.kl);
  return out;
}

VaeLoss vae_loss(const VaeModel& model, const Tensor& batch, const Tensor& noise) {
  Graph g;
  const VaeGraph v = build_vae_loss(g, model, batch, noise);
  return {g.scalar(v.total), g.scalar(v.recon), g.scalar(v.kl)};
}

Tensor vae_generate(const VaeModel& model, std::size_t count, Rng& rng) {
  return forward(model.decoder, normal_noise(rng, {count, model.latent_dim}));
}

MetricLog vae_train(VaeModel& model, const Tensor& data, const VaeConfig& config,
                    const EvalSetup* eval) {
  model.validate();
  if (config.batch == 0) throw ConfigError("vae: batch must be >= 1");
  Rng rng(config.seed, Stream::kTrain);
  Rng eval_rng(config.seed, Stream::kEval);
  Optimizer enc_opt(config.optimizer, model.encoder.param_count());
  Optimizer dec_opt(config.optimizer, model.decoder.param_count());
  MetricLog log({"total", "recon", "kl"});
  const auto start = std::chrono::steady_clock::now();

  for (std::size_t step = 1; step <= config.steps; ++step) {
    const Tensor batch = sample_rows(data, config.batch, rng);
    const Tensor noise = normal_noise(rng, {config.batch, model.latent_dim});
    Graph g;
    const VaeGraph v = build_vae_loss(g, model, batch, noise);
    const double total = g.scalar(v.total);
    require_finite_loss(total, "vae step " + std::to_string(step) + " encoder checksum " +
                                   std::to_string(params_checksum(model.encoder.params().values)));
    g.backward(v.total);
    enc_opt.step(model.encoder.params(), g.grad(v.encoder_params).values());
    dec_opt.step(model.decoder.params(), g.grad(v.decoder_params).values());
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log.add(step, {total, g.scalar(v.recon), g.scalar(v.kl)}, secs);
    if (eval && eval->on_samples && eval->interval > 0 &&
        (step % eval->interval == 0 || step == config.steps)) {
      eval->on_samples(step, vae_generate(model, eval->samples, eval_rng));
    }
  }
  return log;
}

}  // namespace varinf
