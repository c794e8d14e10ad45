#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <string>
#include <vector>

#include "sacp/sacp.hpp"

namespace sacp::test {

inline ProbabilityGrid probs_1x1(std::vector<double> p) {
  const auto k = p.size();
  return ProbabilityGrid({1, 1}, k, std::move(p));
}

inline SplitMask uniform_mask(Extent ext, Role role) { return SplitMask(ext, std::vector<Role>(ext.pixels(), role)); }

/// Single-channel score field from a row-major list; every pixel valid.
inline ScoreField field_from(Extent ext, std::size_t k, std::vector<double> values) {
  return ScoreField(ext, k, std::move(values), std::vector<std::uint8_t>(ext.pixels(), 1));
}

inline PredictionSetGrid sets_from(Extent ext, std::size_t k, const std::vector<std::vector<std::size_t>>& members) {
  std::vector<std::uint64_t> bits(ext.pixels() * PredictionSetGrid::words_for(k), 0);
  std::vector<std::uint8_t> defined(ext.pixels(), 1);
  for (std::size_t i = 0; i < members.size(); ++i) {
    for (auto y : members[i]) bits[i * PredictionSetGrid::words_for(k) + y / 64] |= std::uint64_t{1} << (y % 64);
  }
  return PredictionSetGrid(ext, k, std::move(bits), std::move(defined));
}

inline std::vector<unsigned char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Fresh scratch directory under the system temp dir.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("sacp_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Random probability vector of length k.
inline std::vector<double> random_simplex(CounterRng& rng, std::size_t k) {
  std::vector<double> p(k);
  double s = 0.0;
  for (auto& v : p) {
    v = -std::log(1.0 - rng.uniform());
    s += v;
  }
  for (auto& v : p) v /= s;
  return p;
}

inline ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected sacp::Error";
  return ErrorCode::IoFailure;
}

}  // namespace sacp::test
