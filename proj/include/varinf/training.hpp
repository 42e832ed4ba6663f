#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "varinf/metrics.hpp"
#include "varinf/rng.hpp"
#include "varinf/tensor.hpp"

namespace varinf {

struct MetricsRecord {
  std::size_t step = 0;
  std::vector<double> values;  // aligned with MetricLog::columns
  double wall_time = 0.0;      // seconds since training start; not written to CSV
};

// Column-ordered metric table. CSV output excludes wall time so that reruns
// with the same configuration are byte-identical.
class MetricLog {
 public:
  explicit MetricLog(std::vector<std::string> columns = {});

  // Steps must be strictly increasing.
  void add(std::size_t step, std::vector<double> values, double wall_time = 0.0);
  const std::vector<std::string>& columns() const { return columns_; }
  const std::vector<MetricsRecord>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }
  const MetricsRecord& back() const { return rows_.back(); }
  // Value of a named column in the last row.
  double last(const std::string& column) const;
  std::vector<double> column(const std::string& column) const;
  std::string to_csv() const;

 private:
  std::size_t index_of(const std::string& column) const;
  std::vector<std::string> columns_;
  std::vector<MetricsRecord> rows_;
};

// Everything a trainer needs to score its samples periodically.
struct EvalSetup {
  std::size_t interval = 500;  // in training steps; 0 disables periodic evaluation
  std::size_t samples = 4096;
  Tensor reference;  // real data used for the sample-KL estimate
  std::optional<HistogramEstimator> histogram;
  std::optional<ModeSpec> modes;
  // Called with every batch of evaluation samples (sample dumps, rasters).
  std::function<void(std::size_t step, const Tensor& samples)> on_samples;
};

struct SampleScores {
  double mode_coverage = 0.0;    // NaN when no mode spec
  double captured_fraction = 0.0;
  double kl_est = 0.0;           // NaN when no estimator/reference
};
SampleScores score_samples(const EvalSetup& eval, const Tensor& samples);

// Uniformly drawn rows (with replacement).
Tensor sample_rows(const Tensor& data, std::size_t count, Rng& rng);

// Order-independent-ish fingerprint of a parameter array for diagnostics.
std::uint64_t params_checksum(const std::vector<double>& values);

// Throws DivergenceError if `loss` is not finite.
void require_finite_loss(double loss, const std::string& context);

std::string format_double(double v);

}  // namespace varinf
