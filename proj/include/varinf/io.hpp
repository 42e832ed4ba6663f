#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "varinf/tensor.hpp"

namespace varinf {

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// One sample per row, header x0,x1,...
std::string point_cloud_csv(const Tensor& samples);
void write_point_cloud(const std::filesystem::path& path, const Tensor& samples);
// Accepts an optional non-numeric header row; all rows must have equal width.
Tensor read_point_cloud(const std::filesystem::path& path);

// Binary PPM (P6) scatter of the first two columns over the given square
// window; background white, points dark.
void write_scatter_ppm(const std::filesystem::path& path, const Tensor& samples, double lo,
                       double hi, int size = 512);

}  // namespace varinf
