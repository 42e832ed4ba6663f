#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "varinf/distributions.hpp"
#include "varinf/metrics.hpp"
#include "varinf/tensor.hpp"

namespace varinf {

enum class DatasetKind { kRing8, kGrid25, kSpiral, kGmmFile, kPointFile };

std::string to_string(DatasetKind k);
DatasetKind dataset_kind_from_string(const std::string& name);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kRing8;
  std::size_t size = 4096;
  double noise = 0.05;  // per-component std for ring8/grid25, jitter for spiral
  std::uint64_t seed = 0;
  std::filesystem::path path;  // gmm-file / point-file

  void validate() const;
};

struct Dataset {
  Tensor samples;                  // N x d
  std::optional<GmmModel> truth;   // generating mixture, when there is one
};

// 8 equal-weight components on the unit circle.
GmmModel ring8_model(double sigma = 0.05);
// 5 x 5 grid with unit spacing centred on the origin.
GmmModel grid25_model(double sigma = 0.05);

Dataset make_dataset(const DatasetSpec& spec);

// Component means with a capture radius of 3 component standard deviations.
ModeSpec mode_spec_for(const GmmModel& truth);

}  // namespace varinf
