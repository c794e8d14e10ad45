#pragma once

// Grid container: a directory holding
//   meta.json    {"height","width","classes","dtype","layout","kind"}
//   payload.bin  little-endian, no padding, H*W*(K or 1) elements
// Labels and masks may also be imported from CSV (one line per grid row).

#include <bit>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "sacp/grid.hpp"

namespace sacp {

namespace fs = std::filesystem;

enum class GridKind { Probabilities, Labels, Mask, Scores, Sets };
enum class Dtype { F32, F64, I32, U8 };

inline std::string to_string(GridKind kind) {
  switch (kind) {
    case GridKind::Probabilities: return "probabilities";
    case GridKind::Labels: return "labels";
    case GridKind::Mask: return "mask";
    case GridKind::Scores: return "scores";
    case GridKind::Sets: return "sets";
  }
  return "?";
}

inline std::string to_string(Dtype dtype) {
  switch (dtype) {
    case Dtype::F32: return "f32";
    case Dtype::F64: return "f64";
    case Dtype::I32: return "i32";
    case Dtype::U8: return "u8";
  }
  return "?";
}

inline std::size_t dtype_size(Dtype dtype) {
  switch (dtype) {
    case Dtype::F32: return 4;
    case Dtype::F64: return 8;
    case Dtype::I32: return 4;
    case Dtype::U8: return 1;
  }
  return 0;
}

inline GridKind parse_kind(const std::string& s) {
  for (auto k : {GridKind::Probabilities, GridKind::Labels, GridKind::Mask, GridKind::Scores, GridKind::Sets}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::InvariantViolation, "unknown grid kind '" + s + "'");
}

inline Dtype parse_dtype(const std::string& s) {
  for (auto d : {Dtype::F32, Dtype::F64, Dtype::I32, Dtype::U8}) {
    if (to_string(d) == s) return d;
  }
  fail(ErrorCode::InvariantViolation, "unknown dtype '" + s + "'");
}

struct GridMeta {
  Extent extent;
  std::size_t classes = 1;
  Dtype dtype = Dtype::F64;
  GridKind kind = GridKind::Probabilities;

  std::size_t channels() const {
    return (kind == GridKind::Probabilities || kind == GridKind::Scores || kind == GridKind::Sets) ? classes : 1;
  }
  std::size_t elements() const { return extent.pixels() * channels(); }
};

inline fs::path meta_path(const fs::path& dir) { return dir / "meta.json"; }
inline fs::path payload_path(const fs::path& dir) { return dir / "payload.bin"; }

namespace detail {

inline std::vector<unsigned char> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::MissingFile, path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename Bits>
Bits load_le(const unsigned char* p) {
  Bits v = 0;
  for (std::size_t b = 0; b < sizeof(Bits); ++b) v |= static_cast<Bits>(p[b]) << (8 * b);
  return v;
}

template <typename Bits>
void store_le(std::vector<unsigned char>& out, Bits v) {
  for (std::size_t b = 0; b < sizeof(Bits); ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

/// Decodes element i of a payload as double (integer dtypes are exact).
inline double decode(const std::vector<unsigned char>& bytes, Dtype dtype, std::size_t i) {
  const unsigned char* p = bytes.data() + i * dtype_size(dtype);
  switch (dtype) {
    case Dtype::F32: return static_cast<double>(std::bit_cast<float>(load_le<std::uint32_t>(p)));
    case Dtype::F64: return std::bit_cast<double>(load_le<std::uint64_t>(p));
    case Dtype::I32: return static_cast<double>(std::bit_cast<std::int32_t>(load_le<std::uint32_t>(p)));
    case Dtype::U8: return static_cast<double>(*p);
  }
  return 0.0;
}

inline void encode(std::vector<unsigned char>& out, Dtype dtype, double v) {
  switch (dtype) {
    case Dtype::F32: store_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); break;
    case Dtype::F64: store_le(out, std::bit_cast<std::uint64_t>(v)); break;
    case Dtype::I32: store_le(out, std::bit_cast<std::uint32_t>(static_cast<std::int32_t>(v))); break;
    case Dtype::U8: out.push_back(static_cast<unsigned char>(v)); break;
  }
}

inline void check_dtype(const GridMeta& meta) {
  const bool ok = [&] {
    switch (meta.kind) {
      case GridKind::Probabilities:
      case GridKind::Scores: return meta.dtype == Dtype::F32 || meta.dtype == Dtype::F64;
      case GridKind::Labels:
      case GridKind::Mask: return meta.dtype == Dtype::I32 || meta.dtype == Dtype::U8;
      case GridKind::Sets: return meta.dtype == Dtype::U8;
    }
    return false;
  }();
  require(ok, ErrorCode::InvariantViolation, "dtype " + to_string(meta.dtype) + " not allowed for " + to_string(meta.kind));
}

inline void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  require(out.good(), ErrorCode::IoFailure, "cannot write " + path.string());
}

inline void prepare_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec && fs::is_directory(dir), ErrorCode::IoFailure, "cannot create " + dir.string() + (ec ? ": " + ec.message() : ""));
}

}  // namespace detail

inline GridMeta read_meta(const fs::path& dir) {
  require(fs::exists(meta_path(dir)), ErrorCode::MissingFile, meta_path(dir).string());
  const auto bytes = detail::read_bytes(meta_path(dir));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvariantViolation, meta_path(dir).string() + ": " + e.what());
  }
  GridMeta meta;
  try {
    meta.extent = {j.at("height").get<std::size_t>(), j.at("width").get<std::size_t>()};
    meta.classes = j.at("classes").get<std::size_t>();
    meta.dtype = parse_dtype(j.at("dtype").get<std::string>());
    meta.kind = parse_kind(j.at("kind").get<std::string>());
    require(j.value("layout", std::string("row-major")) == "row-major", ErrorCode::InvariantViolation,
            "only row-major layout is supported");
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvariantViolation, meta_path(dir).string() + ": " + e.what());
  }
  require(meta.extent.pixels() > 0 && meta.classes > 0, ErrorCode::InvariantViolation, "empty grid in " + dir.string());
  detail::check_dtype(meta);
  return meta;
}

namespace detail {

struct RawGrid {
  GridMeta meta;
  std::vector<unsigned char> payload;
  double operator[](std::size_t i) const { return decode(payload, meta.dtype, i); }
};

inline RawGrid read_container(const fs::path& dir, GridKind expected) {
  require(fs::exists(dir), ErrorCode::MissingFile, dir.string());
  RawGrid raw{read_meta(dir), {}};
  require(raw.meta.kind == expected, ErrorCode::InvariantViolation,
          dir.string() + " holds " + to_string(raw.meta.kind) + ", expected " + to_string(expected));
  require(fs::exists(payload_path(dir)), ErrorCode::MissingFile, payload_path(dir).string());
  raw.payload = read_bytes(payload_path(dir));
  const std::size_t want = raw.meta.elements() * dtype_size(raw.meta.dtype);
  require(raw.payload.size() == want, ErrorCode::HeaderPayloadMismatch,
          payload_path(dir).string() + ": " + std::to_string(raw.payload.size()) + " bytes, header implies " +
              std::to_string(want));
  return raw;
}

inline void write_container(const fs::path& dir, const GridMeta& meta, const std::vector<unsigned char>& payload) {
  prepare_dir(dir);
  nlohmann::ordered_json j;
  j["height"] = meta.extent.height;
  j["width"] = meta.extent.width;
  j["classes"] = meta.classes;
  j["dtype"] = to_string(meta.dtype);
  j["layout"] = "row-major";
  j["kind"] = to_string(meta.kind);
  write_file(meta_path(dir), j.dump(2) + "\n");
  write_file(payload_path(dir), std::string(payload.begin(), payload.end()));
}

inline std::vector<std::int64_t> read_csv_integers(const fs::path& path, Extent& extent) {
  require(fs::exists(path), ErrorCode::MissingFile, path.string());
  std::ifstream in(path);
  require(in.good(), ErrorCode::MissingFile, path.string());
  std::vector<std::int64_t> values;
  std::string line;
  extent = {0, 0};
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::stringstream row(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(row, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stoll(cell, &used));
        require(cell.find_first_not_of(" \t", used) == std::string::npos, ErrorCode::InvariantViolation,
                "bad CSV cell '" + cell + "'");
      } catch (const std::logic_error&) {
        fail(ErrorCode::InvariantViolation, path.string() + " row " + std::to_string(extent.height) + ": bad cell '" + cell + "'");
      }
      ++cols;
    }
    require(extent.height == 0 || cols == extent.width, ErrorCode::HeaderPayloadMismatch,
            path.string() + " row " + std::to_string(extent.height) + " has " + std::to_string(cols) + " columns");
    extent.width = cols;
    ++extent.height;
  }
  return values;
}

}  // namespace detail

inline ProbabilityGrid load_probabilities(const fs::path& dir) {
  const auto raw = detail::read_container(dir, GridKind::Probabilities);
  std::vector<double> values(raw.meta.elements());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = raw[i];
  return ProbabilityGrid(raw.meta.extent, raw.meta.classes, std::move(values));
}

/// Labels from a container, or from CSV when `path` ends in .csv (num_classes
/// is then required since CSV carries no header).
inline LabelGrid load_labels(const fs::path& path, std::size_t num_classes = 0) {
  if (path.extension() == ".csv") {
    require(num_classes > 0, ErrorCode::InvariantViolation, "CSV labels need the class count");
    Extent extent;
    const auto cells = detail::read_csv_integers(path, extent);
    std::vector<std::int32_t> labels;
    labels.reserve(cells.size());
    for (auto v : cells) {
      require(v >= std::numeric_limits<std::int32_t>::min() && v <= std::numeric_limits<std::int32_t>::max(),
              ErrorCode::InvariantViolation, "label out of 32-bit range");
      labels.push_back(static_cast<std::int32_t>(v));
    }
    return LabelGrid(extent, num_classes, std::move(labels));
  }
  const auto raw = detail::read_container(path, GridKind::Labels);
  std::vector<std::int32_t> labels(raw.meta.elements());
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::int32_t>(raw[i]);
  return LabelGrid(raw.meta.extent, raw.meta.classes, std::move(labels));
}

inline SplitMask load_mask(const fs::path& path) {
  auto to_role = [](std::int64_t code, std::size_t i, std::size_t width) {
    require(code >= 0 && code <= 3, ErrorCode::InvariantViolation,
            pixel_str(i, width) + ": mask code " + std::to_string(code) + " not in {0,1,2,3}");
    return static_cast<Role>(code);
  };
  std::vector<Role> roles;
  Extent extent;
  if (path.extension() == ".csv") {
    const auto cells = detail::read_csv_integers(path, extent);
    for (std::size_t i = 0; i < cells.size(); ++i) roles.push_back(to_role(cells[i], i, extent.width));
  } else {
    const auto raw = detail::read_container(path, GridKind::Mask);
    extent = raw.meta.extent;
    for (std::size_t i = 0; i < raw.meta.elements(); ++i) roles.push_back(to_role(static_cast<std::int64_t>(raw[i]), i, extent.width));
  }
  return SplitMask(extent, std::move(roles));
}

/// Invalid pixels are stored as NaN.
inline ScoreField load_scores(const fs::path& dir) {
  const auto raw = detail::read_container(dir, GridKind::Scores);
  const std::size_t k = raw.meta.classes;
  std::vector<double> scores(raw.meta.elements(), 0.0);
  std::vector<std::uint8_t> valid(raw.meta.extent.pixels(), 0);
  for (std::size_t i = 0; i < valid.size(); ++i) {
    bool any_nan = false, all_nan = true;
    for (std::size_t y = 0; y < k; ++y) {
      const double v = raw[i * k + y];
      any_nan |= std::isnan(v);
      all_nan &= std::isnan(v);
    }
    require(any_nan == all_nan, ErrorCode::InvariantViolation, pixel_str(i, raw.meta.extent.width) + ": partially missing scores");
    valid[i] = any_nan ? 0 : 1;
    if (valid[i]) {
      for (std::size_t y = 0; y < k; ++y) scores[i * k + y] = raw[i * k + y];
    }
  }
  return ScoreField(raw.meta.extent, k, std::move(scores), std::move(valid));
}

/// Membership bytes are 0/1; an undefined pixel is a run of 0xFF.
inline PredictionSetGrid load_sets(const fs::path& dir) {
  const auto raw = detail::read_container(dir, GridKind::Sets);
  const std::size_t k = raw.meta.classes, words = PredictionSetGrid::words_for(k);
  std::vector<std::uint64_t> bits(raw.meta.extent.pixels() * words, 0);
  std::vector<std::uint8_t> defined(raw.meta.extent.pixels(), 1);
  for (std::size_t i = 0; i < defined.size(); ++i) {
    if (raw.payload[i * k] == 0xFF) {
      defined[i] = 0;
      continue;
    }
    for (std::size_t y = 0; y < k; ++y) {
      const auto b = raw.payload[i * k + y];
      require(b <= 1, ErrorCode::InvariantViolation, pixel_str(i, raw.meta.extent.width) + ": membership byte not 0/1");
      if (b) bits[i * words + y / 64] |= std::uint64_t{1} << (y % 64);
    }
  }
  return PredictionSetGrid(raw.meta.extent, k, std::move(bits), std::move(defined));
}

using AnyGrid = std::variant<ProbabilityGrid, LabelGrid, SplitMask>;

inline AnyGrid load_grid(const fs::path& path, GridKind kind, std::size_t num_classes = 0) {
  switch (kind) {
    case GridKind::Probabilities: return load_probabilities(path);
    case GridKind::Labels: return load_labels(path, num_classes);
    case GridKind::Mask: return load_mask(path);
    default: fail(ErrorCode::InvariantViolation, "load_grid handles probabilities, labels and mask");
  }
}

inline void save_grid(const ProbabilityGrid& grid, const fs::path& dir, Dtype dtype = Dtype::F64) {
  require(dtype == Dtype::F32 || dtype == Dtype::F64, ErrorCode::InvariantViolation, "probabilities are f32 or f64");
  std::vector<unsigned char> payload;
  payload.reserve(grid.values().size() * dtype_size(dtype));
  for (double v : grid.values()) detail::encode(payload, dtype, v);
  detail::write_container(dir, {grid.extent(), grid.num_classes(), dtype, GridKind::Probabilities}, payload);
}

inline void save_grid(const LabelGrid& grid, const fs::path& dir) {
  std::vector<unsigned char> payload;
  for (auto y : grid.values()) detail::encode(payload, Dtype::I32, y);
  detail::write_container(dir, {grid.extent(), grid.num_classes(), Dtype::I32, GridKind::Labels}, payload);
}

inline void save_grid(const SplitMask& mask, const fs::path& dir) {
  std::vector<unsigned char> payload;
  for (auto r : mask.values()) payload.push_back(static_cast<unsigned char>(r));
  detail::write_container(dir, {mask.extent(), 1, Dtype::U8, GridKind::Mask}, payload);
}

inline void save_grid(const ScoreField& field, const fs::path& dir) {
  std::vector<unsigned char> payload;
  const std::size_t k = field.num_classes();
  for (std::size_t i = 0; i < field.pixels(); ++i) {
    for (std::size_t y = 0; y < k; ++y) {
      detail::encode(payload, Dtype::F64, field.valid(i) ? field.at(i, y) : std::numeric_limits<double>::quiet_NaN());
    }
  }
  detail::write_container(dir, {field.extent(), k, Dtype::F64, GridKind::Scores}, payload);
}

inline void save_grid(const PredictionSetGrid& sets, const fs::path& dir) {
  std::vector<unsigned char> payload;
  const std::size_t k = sets.num_classes();
  for (std::size_t i = 0; i < sets.pixels(); ++i) {
    for (std::size_t y = 0; y < k; ++y) {
      payload.push_back(sets.defined(i) ? static_cast<unsigned char>(sets.contains(i, y)) : 0xFF);
    }
  }
  detail::write_container(dir, {sets.extent(), k, Dtype::U8, GridKind::Sets}, payload);
}

}  // namespace sacp
