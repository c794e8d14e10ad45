#pragma once

// Binary PGM (P5) map of prediction-set sizes: intensity = round(255 * |C| / K),
// pixels without a set stay black.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "sacp/grid.hpp"

namespace sacp {

inline std::vector<unsigned char> encode_size_map(const PredictionSetGrid& sets) {
  const Extent ext = sets.extent();
  const std::string header = "P5\n" + std::to_string(ext.width) + " " + std::to_string(ext.height) + "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  const double k = static_cast<double>(sets.num_classes());
  for (std::size_t i = 0; i < ext.pixels(); ++i) {
    if (!sets.defined(i)) {
      out.push_back(0);
      continue;
    }
    out.push_back(static_cast<unsigned char>(std::lround(255.0 * static_cast<double>(sets.size(i)) / k)));
  }
  return out;
}

inline void render_size_map(const PredictionSetGrid& sets, const std::filesystem::path& path) {
  const auto bytes = encode_size_map(sets);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  require(out.good(), ErrorCode::IoFailure, "cannot write " + path.string());
}

}  // namespace sacp
