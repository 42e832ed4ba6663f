#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "varinf/mlp.hpp"
#include "varinf/rng.hpp"
#include "varinf/tensor.hpp"

namespace varinf {

// sum_i p_i log(p_i / q_i). Terms with p_i == 0 contribute 0; q_i == 0 where
// p_i > 0 raises SupportError.
double kl_discrete(std::span<const double> p, std::span<const double> q);

// Joint pmf over (x, z): rows index x, columns index z.
struct DiscreteJoint {
  Tensor table;

  explicit DiscreteJoint(Tensor table);
  std::size_t x_size() const { return table.rows(); }
  std::size_t z_size() const { return table.cols(); }
  std::vector<double> x_marginal() const;
};

// Random joint with Dirichlet(alpha)-distributed cells.
DiscreteJoint random_joint(Rng& rng, std::size_t m, std::size_t n, double alpha = 1.0);

struct BoundCheck {
  double kl_joint = 0.0;
  double kl_marginal = 0.0;
  bool holds = true;
};

// KL between joints vs KL between their x-marginals; the joint divergence
// must dominate (within 1e-12).
BoundCheck joint_bound_check(const DiscreteJoint& p, const DiscreteJoint& q);

struct BoundSweep {
  std::size_t trials = 0;
  std::size_t holds = 0;
  double min_gap = 0.0;  // min over trials of kl_joint - kl_marginal
};
BoundSweep bound_sweep(std::size_t trials, std::uint64_t seed, std::size_t m = 4,
                       std::size_t n = 4);

struct HistogramEstimator {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::size_t> bins;
  double pseudo_count = 0.5;

  // Same range and bin count along every dimension.
  static HistogramEstimator uniform(std::size_t dim, double lo, double hi, std::size_t bins,
                                    double pseudo_count = 0.5);
  std::size_t dim() const { return bins.size(); }
  std::size_t total_bins() const;
  void validate() const;
  // Bin index of a point; coordinates outside the range fall in the edge bin
  // and set *clipped.
  std::size_t bin_of(std::span<const double> x, bool* clipped) const;
  // Smoothed, normalized histogram of the sample rows.
  std::vector<double> density(const Tensor& samples, std::size_t* clipped = nullptr) const;
};

struct HistogramKl {
  double kl = 0.0;
  std::size_t clipped = 0;  // samples that fell outside the estimator range
};

HistogramKl kl_histogram_detail(const Tensor& samples_p, const Tensor& samples_q,
                                const HistogramEstimator& est);
inline double kl_histogram(const Tensor& samples_p, const Tensor& samples_q,
                           const HistogramEstimator& est) {
  return kl_histogram_detail(samples_p, samples_q, est).kl;
}

struct ModeSpec {
  Tensor centers;  // K x d
  double radius = 0.15;
  // Samples needed within `radius` for a mode to count as covered;
  // 0 selects max(5, 0.1 * N / K).
  std::size_t min_hits = 0;

  ModeSpec(Tensor centers, double radius, std::size_t min_hits = 0);
};

struct ModeCoverage {
  std::size_t modes_covered = 0;
  double captured_fraction = 0.0;
};

ModeCoverage mode_coverage(const Tensor& samples, const ModeSpec& spec);

struct TaylorProbeResult {
  std::vector<std::pair<double, double>> points;  // (epsilon, kl estimate)
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  bool inconclusive = false;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

std::vector<double> random_unit_direction(std::size_t n, Rng& rng);

// Pushes one shared batch of latent draws through G_theta and
// G_{theta - eps * direction} and estimates KL(q_theta || q_perturbed) between
// the two point clouds with the histogram estimator, for every epsilon. Reusing
// the same latents for both clouds removes sampling noise from the
// comparison. A least-squares line through (log eps, log KL) gives the slope.
TaylorProbeResult taylor_scaling_probe(const Mlp& generator, std::span<const double> direction,
                                       std::span<const double> epsilons, std::size_t z_count,
                                       const HistogramEstimator& est, std::uint64_t seed);

std::string taylor_probe_csv(const TaylorProbeResult& r);

}  // namespace varinf
