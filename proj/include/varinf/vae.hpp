#pragma once

#include <cstdint>

#include "varinf/graph.hpp"
#include "varinf/mlp.hpp"
#include "varinf/optim.hpp"
#include "varinf/training.hpp"

namespace varinf {

struct VaeConfig {
  std::size_t latent_dim = 2;
  NetConfig net;
  double decoder_log_var = 0.0;  // log sigma_dec^2, fixed
  OptimizerConfig optimizer{OptimizerKind::kAdam, 1e-3};
  std::size_t steps = 3000;
  std::size_t batch = 128;
  std::uint64_t seed = 0;
};

// Gaussian encoder p(z|x) emitting [mean | log-variance], Gaussian decoder
// q(x|z) with a learned mean and a fixed variance, standard normal prior.
struct VaeModel {
  Mlp encoder;  // d_x -> 2 d_z
  Mlp decoder;  // d_z -> d_x
  double decoder_log_var = 0.0;
  std::size_t latent_dim = 2;

  static VaeModel create(std::size_t data_dim, const VaeConfig& config, Rng& init);
  void validate() const;
  std::size_t data_dim() const { return decoder.output_dim(); }
};

struct VaeLoss {
  double total = 0.0;
  double recon = 0.0;  // mean of -log q(x|z)
  double kl = 0.0;     // mean of KL(p(z|x) || N(0, I))
};

struct VaeGraph {
  NodeId total, recon, kl;
  NodeId encoder_params, decoder_params;
};

// Batch-mean of -log q(x|z) + KL(p(z|x) || q(z)) with a single reparametrized
// z per row; `noise` is batch x d_z standard normal.
VaeGraph build_vae_loss(Graph& g, const VaeModel& model, const Tensor& batch, const Tensor& noise);
VaeLoss vae_loss(const VaeModel& model, const Tensor& batch, const Tensor& noise);

// Decoder means at prior draws.
Tensor vae_generate(const VaeModel& model, std::size_t count, Rng& rng);

// Logs (step, total, recon, kl) every step. Throws DivergenceError on NaN.
MetricLog vae_train(VaeModel& model, const Tensor& data, const VaeConfig& config,
                    const EvalSetup* eval = nullptr);

}  // namespace varinf
