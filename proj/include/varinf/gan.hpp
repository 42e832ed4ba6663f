#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "varinf/distributions.hpp"
#include "varinf/graph.hpp"
#include "varinf/mlp.hpp"
#include "varinf/optim.hpp"
#include "varinf/training.hpp"

namespace varinf {

struct GanConfig {
  std::size_t latent_dim = 2;
  NetConfig generator_net;
  NetConfig discriminator_net;
  double lambda = 0.5;            // weight of ||G(z) - G_old(z)||^2
  std::size_t d_steps = 1;        // discriminator updates per period
  std::size_t g_steps = 1;        // generator updates per period
  std::size_t snapshot_lag = 5;   // generator steps between snapshot refreshes
  double p_real = 0.5;            // class priors of the label variable
  double p_fake = 0.5;
  OptimizerConfig g_optimizer{OptimizerKind::kAdam, 1e-3, 0.9, 0.5, 0.999, 1e-8};
  OptimizerConfig d_optimizer{OptimizerKind::kAdam, 1e-3, 0.9, 0.5, 0.999, 1e-8};
  std::size_t periods = 3000;
  std::size_t batch = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

// Generator G: z -> x (deterministic, i.e. q(x|z) is a point mass at G(z)).
// Discriminator D: x -> logit of p(y = 1 | x), the probability x is real.
// `snapshot` holds the frozen earlier generator G_old.
struct GanModel {
  Mlp generator;
  Mlp discriminator;
  std::size_t latent_dim = 2;
  std::optional<NetSnapshot> snapshot;

  static GanModel create(std::size_t data_dim, const GanConfig& config, Rng& init);
  void validate() const;
  void refresh_snapshot() { snapshot = varinf::snapshot(generator.params()); }
};

struct DLossGraph {
  NodeId loss;
  NodeId generator_params, discriminator_params;
};

struct GLossGraph {
  NodeId loss;
  NodeId adversarial;
  std::optional<NodeId> regularizer;  // unweighted mean ||G(z) - G_old(z)||^2
  NodeId generator_params, discriminator_params;
};

// -2 p_real mean log D(x_real) - 2 p_fake mean log(1 - D(G(z))). With the
// default priors of 1/2 the weights are 1. G(z) is detached, so the generator
// parameter node never receives gradient.
DLossGraph build_d_loss(Graph& g, const GanModel& model, const Tensor& real, const Tensor& z,
                        double p_real = 0.5, double p_fake = 0.5);
// -mean log D(G(z)) (+ lambda * mean ||G(z) - G_old(z)||^2 when regularized).
// D is bound as a constant.
GLossGraph build_g_loss(Graph& g, const GanModel& model, const Tensor& z,
                        std::optional<double> lambda);

double d_loss(const GanModel& model, const Tensor& real, const Tensor& z);
double g_loss_standard(const GanModel& model, const Tensor& z);

struct GLoss {
  double total = 0.0;
  double adversarial = 0.0;
  double regularizer = 0.0;  // unweighted penalty
};
// Requires a snapshot (ContractError otherwise). lambda == 0 returns exactly
// the standard loss.
GLoss g_loss_regularized(const GanModel& model, const Tensor& z, double lambda);

// Generator samples for latent draws.
Tensor gan_generate(const GanModel& model, std::size_t count, Rng& rng);
// D(x) as probabilities, one per row.
std::vector<double> discriminator_probs(const Mlp& discriminator, const Tensor& x);

struct GanRun {
  MetricLog log{{"d_loss", "g_loss", "reg_term", "mode_coverage", "kl_est"}};
  // mean ||G(z) - G_old(z)||^2 on a fixed latent batch, measured right before
  // each snapshot refresh after the first.
  std::vector<double> drift;
};

// Alternating optimization: per period, d_steps discriminator updates then
// g_steps generator updates; the snapshot is refreshed every snapshot_lag
// generator steps (before the step). Metrics are logged every eval interval.
GanRun gan_train(GanModel& model, const Tensor& data, const GanConfig& config,
                 const EvalSetup& eval);

// p(x) / (p(x) + q(x)) from exact mixture densities.
double optimal_d_reference(const GmmModel& p, const GmmModel& q, std::span<const double> x);

}  // namespace varinf
