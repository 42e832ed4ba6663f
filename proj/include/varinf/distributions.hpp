#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "varinf/graph.hpp"
#include "varinf/rng.hpp"
#include "varinf/tensor.hpp"

namespace varinf {

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any log.
inline constexpr double kProbClamp = 1e-7;
// Floor applied to variances produced by networks and by EM.
inline constexpr double kVarianceFloor = 1e-6;

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Diagonal Gaussian N(mean, diag(exp(log_var))).
struct DiagGaussian {
  std::vector<double> mean;
  std::vector<double> log_var;

  DiagGaussian(std::vector<double> mean, std::vector<double> log_var);
  static DiagGaussian standard(std::size_t dim);

  std::size_t dim() const { return mean.size(); }
  double log_pdf(std::span<const double> x) const;
};

// Conditional Bernoulli p(y = 1 | .). Stored probability is clamped strictly
// inside (0, 1).
class BernoulliCond {
 public:
  explicit BernoulliCond(double p_one);
  double p_one() const { return p_; }
  double log_prob(bool y) const;

 private:
  double p_;
};

// Mixture of K diagonal Gaussians in d dimensions. Rows of `means` and
// `log_vars` are components.
struct GmmModel {
  std::vector<double> weights;
  Tensor means;     // K x d
  Tensor log_vars;  // K x d

  GmmModel() = default;
  GmmModel(std::vector<double> weights, Tensor means, Tensor log_vars);

  std::size_t components() const { return weights.size(); }
  std::size_t dim() const { return means.cols(); }
  // Throws ContractError on a bad simplex or mismatched shapes.
  void validate() const;
  DiagGaussian component(std::size_t k) const;

  nlohmann::json to_json() const;
  static GmmModel from_json(const nlohmann::json& j);
};

// Narrow Gaussian standing in for a Dirac delta; the density the limit is
// taken over.
struct DiracApprox {
  double sigma;
  explicit DiracApprox(double sigma);
  double log_density(std::span<const double> x, std::span<const double> center) const;
};

double kl_diag_gaussian(const DiagGaussian& p, const DiagGaussian& q);

// mean + exp(log_var / 2) * noise. `noise` is [d] or [N, d].
Tensor reparam_sample(const DiagGaussian& g, const Tensor& noise);

// log w_k + log N(x; mu_k, Sigma_k) for every k.
std::vector<double> gmm_component_log_joint(const GmmModel& m, std::span<const double> x);
double gmm_logpdf(const GmmModel& m, std::span<const double> x);
inline double gmm_logpdf(const GmmModel& m, const Tensor& x) {
  return gmm_logpdf(m, x.values());
}

struct GmmDraw {
  std::vector<double> x;
  std::size_t component;
};
GmmDraw gmm_sample(const GmmModel& m, Rng& rng);

struct GmmBatch {
  Tensor x;  // n x d
  std::vector<std::size_t> components;
};
GmmBatch gmm_sample(const GmmModel& m, Rng& rng, std::size_t n);

// Mean over the batch of the squared Euclidean distance between paired rows.
double dirac_penalty(const Tensor& g_out, const Tensor& g_old_out);

// Standard normal noise of the given shape.
Tensor normal_noise(Rng& rng, Shape shape);

// ---- graph-side counterparts (differentiable) ----

// log(clamp(p, kProbClamp, 1 - kProbClamp)).
NodeId clamped_log(Graph& g, NodeId prob);
// log(1 - clamp(p, ...)).
NodeId clamped_log1m(Graph& g, NodeId prob);

NodeId reparam_sample(Graph& g, NodeId mean, NodeId log_var, NodeId noise);
// Per-row KL(N(mu_p, e^lv_p) || N(mu_q, e^lv_q)), shape [N, 1].
NodeId kl_diag_gaussian_rows(Graph& g, NodeId mu_p, NodeId lv_p, NodeId mu_q, NodeId lv_q);
// Per-row KL(N(mu, e^lv) || N(0, I)), shape [N, 1].
NodeId kl_standard_normal_rows(Graph& g, NodeId mu, NodeId lv);
// Scalar mean of per-row squared distances.
NodeId dirac_penalty(Graph& g, NodeId a, NodeId b);
// max(lv, log kVarianceFloor) without a kink at the floor being hit in
// practice; implemented as clamp.
NodeId floor_log_var(Graph& g, NodeId lv);

}  // namespace varinf
