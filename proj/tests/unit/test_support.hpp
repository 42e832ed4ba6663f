#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "varinf/graph.hpp"
#include "varinf/mlp.hpp"
#include "varinf/rng.hpp"

namespace varinf::testing {

// Central differences of f at w with step h.
inline std::vector<double> central_differences(const std::function<double(const std::vector<double>&)>& f,
                                               std::vector<double> w, double h = 1e-3) {
  std::vector<double> g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double orig = w[i];
    w[i] = orig + h;
    const double up = f(w);
    w[i] = orig - h;
    const double down = f(w);
    w[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// ||a - b|| / max(||a||, ||b||), or the absolute difference when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  return scale < 1e-12 ? std::sqrt(diff) : std::sqrt(diff) / scale;
}

// Composite Simpson rule on [a, b] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

inline double normal_pdf(double x, double mean, double var) {
  return std::exp(-0.5 * (x - mean) * (x - mean) / var) / std::sqrt(2.0 * M_PI * var);
}

// Closed-form KL of 1D Gaussians by quadrature of p log(p/q).
inline double kl_by_quadrature(double mp, double vp, double mq, double vq) {
  const double sd = std::sqrt(std::max(vp, vq));
  const double lo = std::min(mp, mq) - 14.0 * sd, hi = std::max(mp, mq) + 14.0 * sd;
  return simpson(
      [&](double x) {
        const double p = normal_pdf(x, mp, vp);
        if (p <= 0.0) return 0.0;
        const double log_ratio = -0.5 * (x - mp) * (x - mp) / vp - 0.5 * std::log(vp) +
                                 0.5 * (x - mq) * (x - mq) / vq + 0.5 * std::log(vq);
        return p * log_ratio;
      },
      lo, hi, 40000);
}

inline Tensor random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Tensor t = Tensor::matrix(rows, cols);
  for (auto& v : t.values()) v = scale * rng.normal();
  return t;
}

}  // namespace varinf::testing
