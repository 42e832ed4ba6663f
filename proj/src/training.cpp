#include "varinf/training.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#include "varinf/errors.hpp"

namespace varinf {

MetricLog::MetricLog(std::vector<std::string> columns) : columns_(std::move(columns)) {}

void MetricLog::add(std::size_t step, std::vector<double> values, double wall_time) {
  if (values.size() != columns_.size()) throw ContractError("metric row width mismatch");
  if (!rows_.empty() && step <= rows_.back().step) {
    throw ContractError("metric steps must be strictly increasing");
  }
  rows_.push_back({step, std::move(values), wall_time});
}

std::size_t MetricLog::index_of(const std::string& column) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i] == column) return i;
  }
  throw ContractError("no metric column '" + column + "'");
}

double MetricLog::last(const std::string& column) const {
  if (rows_.empty()) throw ContractError("metric log is empty");
  return rows_.back().values[index_of(column)];
}

std::vector<double> MetricLog::column(const std::string& column) const {
  const std::size_t i = index_of(column);
  std::vector<double> out;
  out.reserve(rows_.size());
  for (const auto& r : rows_) out.push_back(r.values[i]);
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string MetricLog::to_csv() const {
  std::string out = "step";
  for (const auto& c : columns_) out += "," + c;
  out += "\n";
  for (const auto& r : rows_) {
    out += std::to_string(r.step);
    for (double v : r.values) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

SampleScores score_samples(const EvalSetup& eval, const Tensor& samples) {
  SampleScores s;
  s.mode_coverage = std::numeric_limits<double>::quiet_NaN();
  s.captured_fraction = std::numeric_limits<double>::quiet_NaN();
  s.kl_est = std::numeric_limits<double>::quiet_NaN();
  if (eval.modes) {
    const auto mc = mode_coverage(samples, *eval.modes);
    s.mode_coverage = static_cast<double>(mc.modes_covered);
    s.captured_fraction = mc.captured_fraction;
  }
  if (eval.histogram && eval.reference.size() > 0) {
    s.kl_est = kl_histogram(eval.reference, samples, *eval.histogram);
  }
  return s;
}

Tensor sample_rows(const Tensor& data, std::size_t count, Rng& rng) {
  const std::size_t d = data.cols();
  Tensor out = Tensor::matrix(count, d);
  for (std::size_t r = 0; r < count; ++r) {
    const std::size_t src = rng.index(data.rows());
    std::memcpy(out.data() + r * d, data.data() + src * d, d * sizeof(double));
  }
  return out;
}

std::uint64_t params_checksum(const std::vector<double>& values) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a over the raw bytes
  for (double v : values) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

void require_finite_loss(double loss, const std::string& context) {
  if (!std::isfinite(loss)) throw DivergenceError("non-finite loss: " + context);
}

}  // namespace varinf
