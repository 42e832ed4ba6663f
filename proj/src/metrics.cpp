#include "varinf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "varinf/distributions.hpp"
#include "varinf/errors.hpp"

namespace varinf {

double kl_discrete(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError("kl_discrete: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0.0 || q[i] < 0.0) throw ContractError("kl_discrete: negative probability");
    if (p[i] == 0.0) continue;
    if (q[i] == 0.0) {
      throw SupportError("kl_discrete: q is zero where p = " + std::to_string(p[i]));
    }
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

DiscreteJoint::DiscreteJoint(Tensor t) : table(std::move(t)) {
  if (table.rank() != 2) throw DimensionError("DiscreteJoint: table must be m x n");
  double total = 0.0;
  for (double v : table.values()) {
    if (!(v >= 0.0)) throw ContractError("DiscreteJoint: negative entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ContractError("DiscreteJoint: entries must sum to 1");
}

std::vector<double> DiscreteJoint::x_marginal() const {
  std::vector<double> m(x_size(), 0.0);
  for (std::size_t r = 0; r < x_size(); ++r) {
    for (double v : table.row_span(r)) m[r] += v;
  }
  return m;
}

DiscreteJoint random_joint(Rng& rng, std::size_t m, std::size_t n, double alpha) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  Tensor t = Tensor::matrix(m, n);
  double total = 0.0;
  for (auto& v : t.values()) {
    v = gamma(rng.engine());
    total += v;
  }
  for (auto& v : t.values()) v /= total;
  // Push rounding residue into the largest cell so the sum is 1 to ~1 ulp.
  double s = 0.0;
  for (double v : t.values()) s += v;
  auto big = std::max_element(t.values().begin(), t.values().end());
  *big += 1.0 - s;
  return DiscreteJoint(std::move(t));
}

BoundCheck joint_bound_check(const DiscreteJoint& p, const DiscreteJoint& q) {
  require_same_shape(p.table, q.table, "joint_bound_check");
  BoundCheck out;
  out.kl_joint = kl_discrete(p.table.values(), q.table.values());
  const auto pm = p.x_marginal();
  const auto qm = q.x_marginal();
  out.kl_marginal = kl_discrete(pm, qm);
  out.holds = out.kl_joint >= out.kl_marginal - 1e-12;
  return out;
}

BoundSweep bound_sweep(std::size_t trials, std::uint64_t seed, std::size_t m, std::size_t n) {
  Rng rng(seed, Stream::kEval);
  BoundSweep sweep;
  sweep.trials = trials;
  sweep.min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < trials; ++t) {
    const auto p = random_joint(rng, m, n);
    const auto q = random_joint(rng, m, n);
    const auto r = joint_bound_check(p, q);
    if (r.holds) ++sweep.holds;
    sweep.min_gap = std::min(sweep.min_gap, r.kl_joint - r.kl_marginal);
  }
  return sweep;
}

HistogramEstimator HistogramEstimator::uniform(std::size_t dim, double lo, double hi,
                                               std::size_t bins, double pseudo_count) {
  HistogramEstimator est{std::vector<double>(dim, lo), std::vector<double>(dim, hi),
                         std::vector<std::size_t>(dim, bins), pseudo_count};
  est.validate();
  return est;
}

std::size_t HistogramEstimator::total_bins() const {
  std::size_t t = 1;
  for (auto b : bins) t *= b;
  return t;
}

void HistogramEstimator::validate() const {
  if (bins.empty() || lower.size() != bins.size() || upper.size() != bins.size()) {
    throw ContractError("histogram: bounds and bins must have one entry per dimension");
  }
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (bins[i] < 2) throw ContractError("histogram: need >= 2 bins per dimension");
    if (!(upper[i] > lower[i])) throw ContractError("histogram: empty range");
  }
  if (!(pseudo_count > 0.0)) throw ContractError("histogram: pseudo-count must be > 0");
}

std::size_t HistogramEstimator::bin_of(std::span<const double> x, bool* clipped) const {
  std::size_t index = 0;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    const double u = (x[i] - lower[i]) / (upper[i] - lower[i]);
    double pos = std::floor(u * static_cast<double>(bins[i]));
    if (!(pos >= 0.0)) {  // also catches NaN
      pos = 0.0;
      if (clipped) *clipped = true;
    } else if (pos >= static_cast<double>(bins[i])) {
      if (u > 1.0 && clipped) *clipped = true;
      pos = static_cast<double>(bins[i] - 1);
    }
    index = index * bins[i] + static_cast<std::size_t>(pos);
  }
  return index;
}

std::vector<double> HistogramEstimator::density(const Tensor& samples,
                                                std::size_t* clipped) const {
  validate();
  if (samples.cols() != dim()) throw DimensionError("histogram: sample width != dim");
  if (samples.rows() == 0) throw ContractError("histogram: no samples");
  std::vector<double> h(total_bins(), pseudo_count);
  std::size_t n_clipped = 0;
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    bool c = false;
    h[bin_of(samples.row_span(r), &c)] += 1.0;
    if (c) ++n_clipped;
  }
  const double total =
      static_cast<double>(samples.rows()) + pseudo_count * static_cast<double>(h.size());
  for (auto& v : h) v /= total;
  if (clipped) *clipped = n_clipped;
  return h;
}

HistogramKl kl_histogram_detail(const Tensor& samples_p, const Tensor& samples_q,
                                const HistogramEstimator& est) {
  std::size_t cp = 0, cq = 0;
  const auto p = est.density(samples_p, &cp);
  const auto q = est.density(samples_q, &cq);
  return {kl_discrete(p, q), cp + cq};
}

ModeSpec::ModeSpec(Tensor c, double r, std::size_t hits)
    : centers(std::move(c)), radius(r), min_hits(hits) {
  if (!(radius > 0.0)) throw ContractError("ModeSpec: radius must be > 0");
  if (centers.rank() != 2 || centers.rows() == 0) throw DimensionError("ModeSpec: centers K x d");
}

ModeCoverage mode_coverage(const Tensor& samples, const ModeSpec& spec) {
  const std::size_t k = spec.centers.rows(), n = samples.rows();
  if (n > 0 && samples.cols() != spec.centers.cols()) {
    throw DimensionError("mode_coverage: sample width != center width");
  }
  const double r2 = spec.radius * spec.radius;
  std::vector<std::size_t> hits(k, 0);
  std::size_t captured = 0;
  for (std::size_t i = 0; i < n; ++i) {
    auto x = samples.row_span(i);
    bool any = false;
    for (std::size_t j = 0; j < k; ++j) {
      auto c = spec.centers.row_span(j);
      double sq = 0.0;
      for (std::size_t t = 0; t < x.size(); ++t) sq += (x[t] - c[t]) * (x[t] - c[t]);
      if (sq <= r2) {
        ++hits[j];
        any = true;
      }
    }
    if (any) ++captured;
  }
  const std::size_t need =
      spec.min_hits > 0
          ? spec.min_hits
          : std::max<std::size_t>(5, static_cast<std::size_t>(std::ceil(
                                         0.1 * static_cast<double>(n) / static_cast<double>(k))));
  ModeCoverage out;
  for (auto h : hits) {
    if (h >= need) ++out.modes_covered;
  }
  out.captured_fraction = n > 0 ? static_cast<double>(captured) / static_cast<double>(n) : 0.0;
  return out;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("fit_line: need >= 2 points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw ContractError("fit_line: degenerate x values");
  LineFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return f;
}

std::vector<double> random_unit_direction(std::size_t n, Rng& rng) {
  std::vector<double> d(n);
  double norm = 0.0;
  for (auto& v : d) {
    v = rng.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (auto& v : d) v /= norm;
  return d;
}

TaylorProbeResult taylor_scaling_probe(const Mlp& generator, std::span<const double> direction,
                                       std::span<const double> epsilons, std::size_t z_count,
                                       const HistogramEstimator& est, std::uint64_t seed) {
  if (direction.size() != generator.param_count()) {
    throw DimensionError("taylor probe: direction length != parameter count");
  }
  double norm = 0.0;
  for (double v : direction) norm += v * v;
  if (std::abs(std::sqrt(norm) - 1.0) > 1e-9) {
    throw ContractError("taylor probe: direction must be unit norm");
  }
  if (epsilons.empty() || !std::is_sorted(epsilons.begin(), epsilons.end()) ||
      epsilons.front() <= 0.0) {
    throw ContractError("taylor probe: epsilons must be positive and sorted");
  }
  Rng rng(seed, Stream::kProbe);
  const Tensor z = normal_noise(rng, {z_count, generator.input_dim()});
  const Tensor base = forward(generator, z);

  TaylorProbeResult out;
  std::vector<double> lx, ly;
  for (double eps : epsilons) {
    std::vector<double> moved(generator.params().values);
    for (std::size_t i = 0; i < moved.size(); ++i) moved[i] -= eps * direction[i];
    const Tensor shifted = forward(generator.spec(), moved, z);
    const double kl = kl_histogram(base, shifted, est);
    out.points.emplace_back(eps, kl);
    if (kl > 1e-14) {
      lx.push_back(std::log(eps));
      ly.push_back(std::log(kl));
    }
  }
  if (lx.size() < 2) {
    out.inconclusive = true;
    return out;
  }
  const LineFit f = fit_line(lx, ly);
  out.slope = f.slope;
  out.intercept = f.intercept;
  out.r2 = f.r2;
  out.inconclusive = lx.size() < epsilons.size();
  return out;
}

std::string taylor_probe_csv(const TaylorProbeResult& r) {
  std::string out = "epsilon,kl_estimate\n";
  char buf[96];
  for (const auto& [eps, kl] : r.points) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", eps, kl);
    out += buf;
  }
  return out;
}

}  // namespace varinf
