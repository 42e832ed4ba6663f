#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "varinf/distributions.hpp"
#include "varinf/rng.hpp"
#include "varinf/tensor.hpp"

namespace varinf {

struct EmConfig {
  std::size_t max_iterations = 500;
  double relative_tolerance = 1e-8;
  double variance_floor = kVarianceFloor;
  std::uint64_t seed = 0;
};

// Alternating maximization for a diagonal GMM. `responsibilities` is the
// posterior over the component index for every data row (the E-step's
// closed-form optimum); the M-step is the closed-form optimum of the mixture
// parameters given them.
struct EmState {
  GmmModel model;
  Tensor data;              // N x d
  Tensor responsibilities;  // N x K
  std::size_t iteration = 0;
  std::vector<double> loglik_history;
  std::vector<std::string> events;
  double variance_floor = kVarianceFloor;

  EmState(GmmModel model, Tensor data);
};

// Fills `responsibilities` from the current model (log-space normalization)
// and returns the data log-likelihood sum_n log p(x_n).
double e_step(EmState& state);

// Re-estimates weights, means and floored variances from the current
// responsibilities. A component whose responsibility mass is below 1e-12 is
// re-seeded at the data point with the lowest model density; an event is
// recorded.
const GmmModel& m_step(EmState& state);

// Distance-weighted seeding of the means, uniform weights, global variances.
GmmModel em_initialize(const Tensor& data, std::size_t k, Rng& rng,
                       double variance_floor = kVarianceFloor);

struct EmResult {
  GmmModel model;
  std::vector<double> loglik_history;
  std::size_t iterations = 0;
  std::vector<std::string> events;
};

EmResult em_fit(const Tensor& data, std::size_t k, const EmConfig& config);
EmResult em_fit(const Tensor& data, GmmModel init, const EmConfig& config);

// "iteration,loglik" rows with a header line.
std::string loglik_csv(const std::vector<double>& history);

}  // namespace varinf
