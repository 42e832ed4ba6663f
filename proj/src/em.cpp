#include "varinf/em.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "varinf/errors.hpp"

namespace varinf {
namespace {

constexpr double kEmptyComponentMass = 1e-12;

std::vector<double> global_variance(const Tensor& data, double floor) {
  const std::size_t n = data.rows(), d = data.cols();
  std::vector<double> mean(d, 0.0), var(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) mean[c] += data.at(r, c);
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double dv = data.at(r, c) - mean[c];
      var[c] += dv * dv;
    }
  }
  for (auto& v : var) v = std::max(v / static_cast<double>(n), floor);
  return var;
}

}  // namespace

EmState::EmState(GmmModel m, Tensor x) : model(std::move(m)), data(std::move(x)) {
  model.validate();
  if (data.rank() != 2 || data.cols() != model.dim()) {
    throw DimensionError("em: data must be N x d with d matching the model");
  }
  responsibilities = Tensor::matrix(data.rows(), model.components());
}

double e_step(EmState& s) {
  const std::size_t n = s.data.rows(), k = s.model.components();
  if (s.responsibilities.rows() != n || s.responsibilities.cols() != k) {
    s.responsibilities = Tensor::matrix(n, k);
  }
  double loglik = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto lj = gmm_component_log_joint(s.model, s.data.row_span(r));
    const double top = *std::max_element(lj.begin(), lj.end());
    if (!std::isfinite(top)) {
      throw DegeneratePointError("e_step: every component density underflows at row " +
                                 std::to_string(r));
    }
    double z = 0.0;
    for (double v : lj) z += std::exp(v - top);
    const double lse = top + std::log(z);
    for (std::size_t j = 0; j < k; ++j) s.responsibilities.at(r, j) = std::exp(lj[j] - lse);
    loglik += lse;
  }
  return loglik;
}

const GmmModel& m_step(EmState& s) {
  const std::size_t n = s.data.rows(), k = s.model.components(), d = s.data.cols();
  std::vector<double> mass(k, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < k; ++j) mass[j] += s.responsibilities.at(r, j);
  }

  Tensor means = Tensor::matrix(k, d), log_vars = Tensor::matrix(k, d);
  std::vector<double> weights(k);
  std::vector<double> fallback_var;
  for (std::size_t j = 0; j < k; ++j) {
    if (mass[j] < kEmptyComponentMass) {
      // Lowest-density point under the current model.
      std::size_t worst = 0;
      double worst_lp = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < n; ++r) {
        const double lp = gmm_logpdf(s.model, s.data.row_span(r));
        if (lp < worst_lp) {
          worst_lp = lp;
          worst = r;
        }
      }
      if (fallback_var.empty()) fallback_var = global_variance(s.data, s.variance_floor);
      for (std::size_t c = 0; c < d; ++c) {
        means.at(j, c) = s.data.at(worst, c);
        log_vars.at(j, c) = std::log(fallback_var[c]);
      }
      weights[j] = 1.0 / static_cast<double>(n);
      s.events.push_back("iteration " + std::to_string(s.iteration) + ": component " +
                         std::to_string(j) + " empty, reseeded at row " + std::to_string(worst));
      continue;
    }
    weights[j] = mass[j] / static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      const double w = s.responsibilities.at(r, j);
      for (std::size_t c = 0; c < d; ++c) means.at(j, c) += w * s.data.at(r, c);
    }
    for (std::size_t c = 0; c < d; ++c) means.at(j, c) /= mass[j];
    std::vector<double> var(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const double w = s.responsibilities.at(r, j);
      for (std::size_t c = 0; c < d; ++c) {
        const double dv = s.data.at(r, c) - means.at(j, c);
        var[c] += w * dv * dv;
      }
    }
    for (std::size_t c = 0; c < d; ++c) {
      log_vars.at(j, c) = std::log(std::max(var[c] / mass[j], s.variance_floor));
    }
  }
  double total = 0.0;
  for (double w : weights) total += w;
  for (double& w : weights) w /= total;

  s.model = GmmModel(std::move(weights), std::move(means), std::move(log_vars));
  ++s.iteration;
  return s.model;
}

GmmModel em_initialize(const Tensor& data, std::size_t k, Rng& rng, double variance_floor) {
  const std::size_t n = data.rows(), d = data.cols();
  if (k == 0 || n < k) throw ContractError("em: need N >= K >= 1");
  Tensor means = Tensor::matrix(k, d);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());

  std::size_t pick = rng.index(n);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t c = 0; c < d; ++c) means.at(j, c) = data.at(pick, c);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      double sq = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double dv = data.at(r, c) - means.at(j, c);
        sq += dv * dv;
      }
      nearest[r] = std::min(nearest[r], sq);
      total += nearest[r];
    }
    if (j + 1 == k) break;
    if (total <= 0.0) {
      pick = rng.index(n);
      continue;
    }
    double u = rng.uniform() * total;
    pick = n - 1;
    for (std::size_t r = 0; r < n; ++r) {
      u -= nearest[r];
      if (u < 0.0) {
        pick = r;
        break;
      }
    }
  }

  const auto var = global_variance(data, variance_floor);
  Tensor log_vars = Tensor::matrix(k, d);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t c = 0; c < d; ++c) log_vars.at(j, c) = std::log(var[c]);
  }
  return GmmModel(std::vector<double>(k, 1.0 / static_cast<double>(k)), std::move(means),
                  std::move(log_vars));
}

EmResult em_fit(const Tensor& data, std::size_t k, const EmConfig& config) {
  if (data.rank() != 2) throw DimensionError("em_fit: data must be N x d");
  Rng rng(config.seed, Stream::kInit);
  return em_fit(data, em_initialize(data, k, rng, config.variance_floor), config);
}

EmResult em_fit(const Tensor& data, GmmModel init, const EmConfig& config) {
  if (data.rows() < init.components()) throw ContractError("em_fit: need N >= K");
  EmState state(std::move(init), data);
  state.variance_floor = config.variance_floor;
  double ll = e_step(state);
  state.loglik_history.push_back(ll);
  for (std::size_t it = 0; it < config.max_iterations; ++it) {
    m_step(state);
    const double next = e_step(state);
    state.loglik_history.push_back(next);
    const bool converged = std::abs(next - ll) < config.relative_tolerance * std::abs(ll);
    ll = next;
    if (converged) break;
  }
  return {std::move(state.model), std::move(state.loglik_history), state.iteration,
          std::move(state.events)};
}

std::string loglik_csv(const std::vector<double>& history) {
  std::string out = "iteration,loglik\n";
  char buf[64];
  for (std::size_t i = 0; i < history.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, history[i]);
    out += buf;
  }
  return out;
}

}  // namespace varinf
