#include "varinf/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "varinf/errors.hpp"
#include "varinf/training.hpp"

namespace varinf {

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string point_cloud_csv(const Tensor& samples) {
  std::string out;
  for (std::size_t c = 0; c < samples.cols(); ++c) {
    out += (c ? ",x" : "x") + std::to_string(c);
  }
  out += "\n";
  for (std::size_t r = 0; r < samples.rows(); ++r) {
    for (std::size_t c = 0; c < samples.cols(); ++c) {
      if (c) out += ",";
      out += format_double(samples.at(r, c));
    }
    out += "\n";
  }
  return out;
}

void write_point_cloud(const std::filesystem::path& path, const Tensor& samples) {
  write_text(path, point_cloud_csv(samples));
}

Tensor read_point_cloud(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<double> values;
  std::size_t width = 0, rows = 0;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ls, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw ConfigError("point file " + path.string() + ": non-numeric row " +
                        std::to_string(rows + 1));
    }
    first = false;
    if (width == 0) width = row.size();
    if (row.size() != width) throw ConfigError("point file " + path.string() + ": ragged rows");
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw ConfigError("point file " + path.string() + " has no rows");
  return Tensor({rows, width}, std::move(values));
}

void write_scatter_ppm(const std::filesystem::path& path, const Tensor& samples, double lo,
                       double hi, int size) {
  std::vector<unsigned char> pixels(static_cast<std::size_t>(size * size * 3), 255);
  auto plot = [&](int px, int py) {
    if (px < 0 || py < 0 || px >= size || py >= size) return;
    const std::size_t i = static_cast<std::size_t>((py * size + px) * 3);
    pixels[i] = 30;
    pixels[i + 1] = 60;
    pixels[i + 2] = 160;
  };
  if (samples.cols() >= 2) {
    for (std::size_t r = 0; r < samples.rows(); ++r) {
      const double u = (samples.at(r, 0) - lo) / (hi - lo);
      const double v = (samples.at(r, 1) - lo) / (hi - lo);
      if (!std::isfinite(u) || !std::isfinite(v)) continue;
      const int px = static_cast<int>(std::floor(u * size));
      const int py = size - 1 - static_cast<int>(std::floor(v * size));
      plot(px, py);
      plot(px + 1, py);
      plot(px, py + 1);
      plot(px + 1, py + 1);
    }
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "P6\n" << size << " " << size << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
}

}  // namespace varinf
