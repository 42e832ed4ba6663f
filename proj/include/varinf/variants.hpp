#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "varinf/distributions.hpp"
#include "varinf/graph.hpp"
#include "varinf/mlp.hpp"
#include "varinf/optim.hpp"
#include "varinf/training.hpp"

namespace varinf {

// Shared settings of the alternating driver used by both AAE and ALI.
struct VariantConfig {
  std::size_t latent_dim = 2;
  NetConfig encoder_net;
  NetConfig generator_net;
  NetConfig discriminator_net;
  OptimizerConfig eg_optimizer{OptimizerKind::kAdam, 1e-3, 0.9, 0.5, 0.999, 1e-8};
  OptimizerConfig d_optimizer{OptimizerKind::kAdam, 1e-3, 0.9, 0.5, 0.999, 1e-8};
  std::size_t d_steps = 1;
  std::size_t eg_steps = 1;
  std::size_t periods = 3000;
  std::size_t batch = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

// ---------------------------------------------------------------------------
// Adversarial autoencoder.
//
// Convention: the code discriminator outputs D(z) = p(y = 0 | z), the
// probability that z is a draw from the prior q(z) = N(0, I). This is the
// opposite orientation from the GAN discriminator; an encoder output that
// looks like a prior draw has D(E(x)) near 1.
// ---------------------------------------------------------------------------
struct AaeModel {
  Mlp encoder;        // x -> z (deterministic)
  Mlp decoder;        // z -> x
  Mlp discriminator;  // z -> logit of p(y = 0 | z)
  std::size_t latent_dim = 2;

  static AaeModel create(std::size_t data_dim, const VariantConfig& config, Rng& init);
  void validate() const;
};

struct AaeConfig {
  VariantConfig common;
  double lambda_rec = 1.0;
};

struct AaeDGraph {
  NodeId loss;
  NodeId encoder_params, discriminator_params;
};
struct AaeJointGraph {
  NodeId loss, adversarial, reconstruction;
  NodeId encoder_params, decoder_params, discriminator_params;
};

// -mean log(1 - D(E(x))) - mean log D(z_prior); codes are detached.
AaeDGraph build_aae_d_loss(Graph& g, const AaeModel& model, const Tensor& data,
                           const Tensor& prior);
// mean[-log D(E(x)) + lambda_rec ||x - G(E(x))||^2]; D bound as constant.
AaeJointGraph build_aae_joint_loss(Graph& g, const AaeModel& model, const Tensor& data,
                                   double lambda_rec);

double aae_d_loss(const AaeModel& model, const Tensor& data, const Tensor& prior);

struct AaeJointLoss {
  double total = 0.0;
  double adversarial = 0.0;
  double reconstruction = 0.0;  // unweighted mean squared reconstruction error
};
AaeJointLoss aae_joint_loss(const AaeModel& model, const Tensor& data, double lambda_rec);

// ---------------------------------------------------------------------------
// Adversarially learned inference with Gaussian encoder and generator.
// D(x, z) = p(y = 1 | x, z), the probability that the pair came from the
// encoder side (x real, z ~ p(z|x)).
// ---------------------------------------------------------------------------
struct AliModel {
  Mlp encoder;        // x -> [mean | log-var] of z
  Mlp generator;      // z -> [mean | log-var] of x
  Mlp discriminator;  // concat(x, z) -> logit
  std::size_t data_dim = 2;
  std::size_t latent_dim = 2;
  std::optional<NetSnapshot> generator_snapshot;

  static AliModel create(std::size_t data_dim, const VariantConfig& config, Rng& init);
  void validate() const;
};

enum class AliVariant { kPaper, kMinmaxA, kMinmaxB };
std::string to_string(AliVariant v);
AliVariant ali_variant_from_string(const std::string& name);

struct AliConfig {
  VariantConfig common;
  AliVariant variant = AliVariant::kPaper;
  // Weight of the optional analytic term E_z KL(q(x|z) || q_old(x|z)); 0 drops it.
  double generator_kl_weight = 0.0;
  std::size_t snapshot_lag = 5;
};

// Noise for both reparametrized directions.
struct AliNoise {
  Tensor encoder;    // data rows x d_z
  Tensor generator;  // prior rows x d_x
};

struct AliDGraph {
  NodeId loss;
  NodeId encoder_params, generator_params, discriminator_params;
};
struct AliGGraph {
  NodeId loss;
  NodeId encoder_term, generator_term;
  std::optional<NodeId> generator_kl;
  NodeId encoder_params, generator_params, discriminator_params;
};

// -mean log D(x, z~p(z|x)) - mean log(1 - D(x~q(x|z), z)); samples detached.
AliDGraph build_ali_d_loss(Graph& g, const AliModel& model, const Tensor& data,
                           const Tensor& prior, const AliNoise& noise);
// Encoder/generator loss for the chosen variant; D bound as constant.
//   paper:    -E_enc log D - E_gen log D
//   minmax-a: +E_enc log D + E_gen log(1 - D)
//   minmax-b: -E_enc log(1 - D) - E_gen log D
// generator_kl_weight > 0 adds the Gaussian KL of the generator against its
// snapshot, averaged over the prior batch.
AliGGraph build_ali_g_loss(Graph& g, const AliModel& model, const Tensor& data,
                           const Tensor& prior, const AliNoise& noise, AliVariant variant,
                           double generator_kl_weight = 0.0);

double ali_d_loss(const AliModel& model, const Tensor& data, const Tensor& prior,
                  const AliNoise& noise);
double ali_g_loss(const AliModel& model, const Tensor& data, const Tensor& prior,
                  const AliNoise& noise, AliVariant variant);

// Generated x: generator mean + sigma * noise at prior draws.
Tensor ali_generate(const AliModel& model, std::size_t count, Rng& rng);
// Encoder means for each data row.
Tensor ali_encode_mean(const AliModel& model, const Tensor& data);

// Column sets of the logs produced by variant_train.
struct VariantRun {
  MetricLog log;
};

// AAE metrics: d_loss, eg_loss, adversarial, reconstruction, latent_kl,
// recon_error. latent_kl compares encoded eval data against prior draws with
// `latent_histogram`.
VariantRun variant_train(AaeModel& model, const Tensor& data, const AaeConfig& config,
                         const EvalSetup& eval, const HistogramEstimator& latent_histogram);
// ALI metrics: d_loss, eg_loss, generator_kl, recon_error, mode_coverage, kl_est.
VariantRun variant_train(AliModel& model, const Tensor& data, const AliConfig& config,
                         const EvalSetup& eval);

// Histogram KL between encoded data and prior draws.
double aae_latent_kl(const AaeModel& model, const Tensor& data, const HistogramEstimator& est,
                     Rng& rng);
// Mean ||x - G(E(x))||^2 over rows.
double aae_reconstruction_error(const AaeModel& model, const Tensor& data);

}  // namespace varinf
