#include "varinf/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "varinf/errors.hpp"

namespace varinf {

DiagGaussian::DiagGaussian(std::vector<double> m, std::vector<double> lv)
    : mean(std::move(m)), log_var(std::move(lv)) {
  if (mean.empty()) throw ContractError("DiagGaussian: dimension must be >= 1");
  if (mean.size() != log_var.size()) throw DimensionError("DiagGaussian: mean/log_var size");
  for (std::size_t i = 0; i < mean.size(); ++i) {
    if (!std::isfinite(mean[i]) || !std::isfinite(log_var[i])) {
      throw ContractError("DiagGaussian: non-finite parameter");
    }
  }
}

DiagGaussian DiagGaussian::standard(std::size_t dim) {
  return DiagGaussian(std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0));
}

double DiagGaussian::log_pdf(std::span<const double> x) const {
  if (x.size() != dim()) throw DimensionError("DiagGaussian::log_pdf: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - mean[i];
    s += kLog2Pi + log_var[i] + d * d * std::exp(-log_var[i]);
  }
  return -0.5 * s;
}

BernoulliCond::BernoulliCond(double p_one) : p_(std::clamp(p_one, kProbClamp, 1.0 - kProbClamp)) {
  if (std::isnan(p_one)) throw ContractError("BernoulliCond: NaN probability");
}

double BernoulliCond::log_prob(bool y) const { return y ? std::log(p_) : std::log1p(-p_); }

GmmModel::GmmModel(std::vector<double> w, Tensor m, Tensor lv)
    : weights(std::move(w)), means(std::move(m)), log_vars(std::move(lv)) {
  validate();
}

void GmmModel::validate() const {
  if (weights.empty()) throw ContractError("GmmModel: no components");
  if (means.rows() != weights.size() || log_vars.rows() != weights.size() ||
      means.shape() != log_vars.shape() || means.rank() != 2) {
    throw DimensionError("GmmModel: weights/means/log_vars shapes disagree");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ContractError("GmmModel: negative weight");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ContractError("GmmModel: weights must sum to 1");
  if (!means.all_finite() || !log_vars.all_finite()) {
    throw ContractError("GmmModel: non-finite parameter");
  }
}

DiagGaussian GmmModel::component(std::size_t k) const {
  auto m = means.row_span(k);
  auto lv = log_vars.row_span(k);
  return DiagGaussian({m.begin(), m.end()}, {lv.begin(), lv.end()});
}

nlohmann::json GmmModel::to_json() const {
  nlohmann::json j;
  j["weights"] = weights;
  auto rows = [](const Tensor& t) {
    nlohmann::json a = nlohmann::json::array();
    for (std::size_t r = 0; r < t.rows(); ++r) {
      auto s = t.row_span(r);
      a.push_back(std::vector<double>(s.begin(), s.end()));
    }
    return a;
  };
  j["means"] = rows(means);
  j["log_vars"] = rows(log_vars);
  return j;
}

GmmModel GmmModel::from_json(const nlohmann::json& j) {
  try {
    auto w = j.at("weights").get<std::vector<double>>();
    auto m = j.at("means").get<std::vector<std::vector<double>>>();
    auto lv = j.at("log_vars").get<std::vector<std::vector<double>>>();
    if (m.empty() || m.size() != lv.size()) throw ConfigError("gmm json: means/log_vars rows");
    const std::size_t d = m.front().size();
    std::vector<double> mf, lf;
    for (std::size_t k = 0; k < m.size(); ++k) {
      if (m[k].size() != d || lv[k].size() != d) throw ConfigError("gmm json: ragged rows");
      mf.insert(mf.end(), m[k].begin(), m[k].end());
      lf.insert(lf.end(), lv[k].begin(), lv[k].end());
    }
    return GmmModel(std::move(w), Tensor({m.size(), d}, std::move(mf)),
                    Tensor({m.size(), d}, std::move(lf)));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("gmm json: ") + e.what());
  }
}

DiracApprox::DiracApprox(double s) : sigma(s) {
  if (!(sigma > 0.0)) throw ContractError("DiracApprox: sigma must be > 0");
}

double DiracApprox::log_density(std::span<const double> x, std::span<const double> center) const {
  if (x.size() != center.size()) throw DimensionError("DiracApprox: dimension mismatch");
  double sq = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sq += (x[i] - center[i]) * (x[i] - center[i]);
  const double d = static_cast<double>(x.size());
  return -0.5 * d * (kLog2Pi + 2.0 * std::log(sigma)) - sq / (2.0 * sigma * sigma);
}

double kl_diag_gaussian(const DiagGaussian& p, const DiagGaussian& q) {
  if (p.dim() != q.dim()) throw ContractError("kl_diag_gaussian: dimension mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.dim(); ++i) {
    const double d = p.mean[i] - q.mean[i];
    kl += 0.5 * (std::exp(p.log_var[i] - q.log_var[i]) + d * d * std::exp(-q.log_var[i]) - 1.0 +
                 q.log_var[i] - p.log_var[i]);
  }
  return std::max(kl, 0.0);
}

Tensor reparam_sample(const DiagGaussian& g, const Tensor& noise) {
  if (noise.cols() != g.dim()) throw DimensionError("reparam_sample: noise width != dim");
  Tensor out(noise.shape());
  const std::size_t d = g.dim();
  for (std::size_t i = 0; i < noise.size(); ++i) {
    const std::size_t k = i % d;
    out[i] = g.mean[k] + std::exp(0.5 * g.log_var[k]) * noise[i];
  }
  return out;
}

std::vector<double> gmm_component_log_joint(const GmmModel& m, std::span<const double> x) {
  if (x.size() != m.dim()) throw DimensionError("gmm: point dimension mismatch");
  std::vector<double> out(m.components());
  for (std::size_t k = 0; k < m.components(); ++k) {
    const double logw = m.weights[k] > 0.0 ? std::log(m.weights[k])
                                           : -std::numeric_limits<double>::infinity();
    double s = 0.0;
    auto mu = m.means.row_span(k);
    auto lv = m.log_vars.row_span(k);
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - mu[i];
      s += kLog2Pi + lv[i] + d * d * std::exp(-lv[i]);
    }
    out[k] = logw - 0.5 * s;
  }
  return out;
}

double gmm_logpdf(const GmmModel& m, std::span<const double> x) {
  const auto lj = gmm_component_log_joint(m, x);
  const double top = *std::max_element(lj.begin(), lj.end());
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (double v : lj) s += std::exp(v - top);
  return top + std::log(s);
}

GmmDraw gmm_sample(const GmmModel& m, Rng& rng) {
  const double u = rng.uniform();
  std::size_t k = 0;
  double acc = 0.0;
  for (; k + 1 < m.components(); ++k) {
    acc += m.weights[k];
    if (u < acc) break;
  }
  // Skip zero-weight components that the cumulative walk can land on at the
  // tail due to rounding.
  while (m.weights[k] == 0.0 && k > 0) --k;
  GmmDraw draw{std::vector<double>(m.dim()), k};
  auto mu = m.means.row_span(k);
  auto lv = m.log_vars.row_span(k);
  for (std::size_t i = 0; i < m.dim(); ++i) {
    draw.x[i] = mu[i] + std::exp(0.5 * lv[i]) * rng.normal();
  }
  return draw;
}

GmmBatch gmm_sample(const GmmModel& m, Rng& rng, std::size_t n) {
  GmmBatch batch{Tensor::matrix(n, m.dim()), std::vector<std::size_t>(n)};
  for (std::size_t r = 0; r < n; ++r) {
    auto draw = gmm_sample(m, rng);
    std::copy(draw.x.begin(), draw.x.end(), batch.x.row_span(r).begin());
    batch.components[r] = draw.component;
  }
  return batch;
}

double dirac_penalty(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dirac_penalty");
  if (a.size() == 0) return 0.0;
  double total = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double sq = 0.0;
    auto ra = a.row_span(r);
    auto rb = b.row_span(r);
    for (std::size_t c = 0; c < ra.size(); ++c) sq += (ra[c] - rb[c]) * (ra[c] - rb[c]);
    total += sq;
  }
  return total / static_cast<double>(a.rows());
}

Tensor normal_noise(Rng& rng, Shape shape) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.normal();
  return t;
}

NodeId clamped_log(Graph& g, NodeId prob) {
  return g.log(g.clamp(prob, kProbClamp, 1.0 - kProbClamp));
}

NodeId clamped_log1m(Graph& g, NodeId prob) {
  NodeId c = g.clamp(prob, kProbClamp, 1.0 - kProbClamp);
  return g.log(g.add_scalar(g.scale(c, -1.0), 1.0));
}

NodeId reparam_sample(Graph& g, NodeId mean, NodeId log_var, NodeId noise) {
  return g.add(mean, g.mul(g.exp(g.scale(log_var, 0.5)), noise));
}

NodeId kl_diag_gaussian_rows(Graph& g, NodeId mu_p, NodeId lv_p, NodeId mu_q, NodeId lv_q) {
  NodeId ratio = g.exp(g.sub(lv_p, lv_q));
  NodeId maha = g.mul(g.square(g.sub(mu_p, mu_q)), g.exp(g.scale(lv_q, -1.0)));
  NodeId inner = g.add_scalar(g.add(g.add(ratio, maha), g.sub(lv_q, lv_p)), -1.0);
  return g.scale(g.row_sum(inner), 0.5);
}

NodeId kl_standard_normal_rows(Graph& g, NodeId mu, NodeId lv) {
  NodeId inner = g.add_scalar(g.sub(g.add(g.exp(lv), g.square(mu)), lv), -1.0);
  return g.scale(g.row_sum(inner), 0.5);
}

NodeId dirac_penalty(Graph& g, NodeId a, NodeId b) {
  return g.mean(g.row_sum(g.square(g.sub(a, b))));
}

NodeId floor_log_var(Graph& g, NodeId lv) {
  return g.clamp(lv, std::log(kVarianceFloor), std::numeric_limits<double>::max());
}

}  // namespace varinf
