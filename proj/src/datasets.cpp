#include "varinf/datasets.hpp"

#include <cmath>
#include <numbers>

#include "varinf/errors.hpp"
#include "varinf/io.hpp"
#include "varinf/rng.hpp"

namespace varinf {

std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::kRing8:
      return "ring8";
    case DatasetKind::kGrid25:
      return "grid25";
    case DatasetKind::kSpiral:
      return "spiral";
    case DatasetKind::kGmmFile:
      return "gmm-file";
    case DatasetKind::kPointFile:
      return "point-file";
  }
  return "ring8";
}

DatasetKind dataset_kind_from_string(const std::string& name) {
  if (name == "ring8") return DatasetKind::kRing8;
  if (name == "grid25") return DatasetKind::kGrid25;
  if (name == "spiral") return DatasetKind::kSpiral;
  if (name == "gmm-file") return DatasetKind::kGmmFile;
  if (name == "point-file") return DatasetKind::kPointFile;
  throw ConfigError("unknown dataset kind '" + name + "'");
}

void DatasetSpec::validate() const {
  if (size < 1) throw ConfigError("dataset size must be >= 1");
  if (!(noise > 0.0)) throw ConfigError("dataset noise must be > 0");
  if ((kind == DatasetKind::kGmmFile || kind == DatasetKind::kPointFile) && path.empty()) {
    throw ConfigError("dataset kind " + to_string(kind) + " needs a path");
  }
}

GmmModel ring8_model(double sigma) {
  Tensor means = Tensor::matrix(8, 2);
  for (std::size_t k = 0; k < 8; ++k) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(k) / 8.0;
    means.at(k, 0) = std::cos(a);
    means.at(k, 1) = std::sin(a);
  }
  return GmmModel(std::vector<double>(8, 1.0 / 8.0), std::move(means),
                  Tensor::matrix(8, 2, std::log(sigma * sigma)));
}

GmmModel grid25_model(double sigma) {
  Tensor means = Tensor::matrix(25, 2);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      means.at(i * 5 + j, 0) = static_cast<double>(i) - 2.0;
      means.at(i * 5 + j, 1) = static_cast<double>(j) - 2.0;
    }
  }
  return GmmModel(std::vector<double>(25, 1.0 / 25.0), std::move(means),
                  Tensor::matrix(25, 2, std::log(sigma * sigma)));
}

Dataset make_dataset(const DatasetSpec& spec) {
  spec.validate();
  Rng rng(spec.seed, Stream::kData);
  Dataset ds;
  switch (spec.kind) {
    case DatasetKind::kRing8:
      ds.truth = ring8_model(spec.noise);
      break;
    case DatasetKind::kGrid25:
      ds.truth = grid25_model(spec.noise);
      break;
    case DatasetKind::kGmmFile:
      ds.truth = GmmModel::from_json(nlohmann::json::parse(read_text(spec.path)));
      break;
    case DatasetKind::kSpiral: {
      ds.samples = Tensor::matrix(spec.size, 2);
      for (std::size_t r = 0; r < spec.size; ++r) {
        const double t = rng.uniform();
        const double angle = 3.0 * std::numbers::pi * t;
        const double radius = 0.2 + t;
        ds.samples.at(r, 0) = radius * std::cos(angle) + spec.noise * rng.normal();
        ds.samples.at(r, 1) = radius * std::sin(angle) + spec.noise * rng.normal();
      }
      return ds;
    }
    case DatasetKind::kPointFile: {
      ds.samples = read_point_cloud(spec.path);
      if (ds.samples.rows() > spec.size) {
        Tensor head = Tensor::matrix(spec.size, ds.samples.cols());
        std::copy_n(ds.samples.data(), head.size(), head.data());
        ds.samples = std::move(head);
      }
      return ds;
    }
  }
  ds.samples = gmm_sample(*ds.truth, rng, spec.size).x;
  return ds;
}

ModeSpec mode_spec_for(const GmmModel& truth) {
  double sigma = 0.0;
  for (double lv : truth.log_vars.values()) sigma = std::max(sigma, std::exp(0.5 * lv));
  return ModeSpec(truth.means, 3.0 * sigma);
}

}  // namespace varinf
