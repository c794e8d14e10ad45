#pragma once

// Grid data model. Every grid is row-major; multi-channel grids index
// (row, col, class) with class fastest. Invariants are validated in the
// constructors and the objects are immutable afterwards.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sacp/error.hpp"

namespace sacp {

inline constexpr std::int32_t kUnlabeled = -1;
inline constexpr double kSimplexTolerance = 1e-6;

enum class Role : std::uint8_t { Ignore = 0, Train = 1, Cal = 2, Test = 3 };

inline std::string to_string(Role role) {
  switch (role) {
    case Role::Ignore: return "ignore";
    case Role::Train: return "train";
    case Role::Cal: return "cal";
    case Role::Test: return "test";
  }
  return "?";
}

/// Small bitmask over the four roles.
class RoleSet {
 public:
  constexpr RoleSet() = default;
  constexpr RoleSet(std::initializer_list<Role> roles) {
    for (Role r : roles) bits_ |= bit(r);
  }

  constexpr bool contains(Role r) const noexcept { return (bits_ & bit(r)) != 0; }
  constexpr RoleSet& insert(Role r) noexcept {
    bits_ |= bit(r);
    return *this;
  }
  constexpr bool operator==(const RoleSet&) const = default;

 private:
  static constexpr std::uint8_t bit(Role r) { return static_cast<std::uint8_t>(1u << static_cast<unsigned>(r)); }
  std::uint8_t bits_ = 0;
};

inline std::string pixel_str(std::size_t index, std::size_t width) {
  return "pixel (" + std::to_string(index / width) + ", " + std::to_string(index % width) + ")";
}

/// Height and width shared by every grid kind.
struct Extent {
  std::size_t height = 0;
  std::size_t width = 0;

  constexpr std::size_t pixels() const noexcept { return height * width; }
  constexpr std::size_t index(std::size_t row, std::size_t col) const noexcept { return row * width + col; }
  constexpr bool operator==(const Extent&) const = default;
};

inline void require_same_extent(Extent a, Extent b, const char* what) {
  require(a == b, ErrorCode::ShapeMismatch,
          std::string(what) + ": " + std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
              std::to_string(b.height) + "x" + std::to_string(b.width));
}

inline std::size_t checked_volume(Extent extent, std::size_t channels) {
  require(extent.height > 0 && extent.width > 0 && channels > 0, ErrorCode::InvariantViolation,
          "grid dimensions must be positive");
  return extent.pixels() * channels;
}

/// Per-pixel softmax distributions, H x W x K.
class ProbabilityGrid {
 public:
  ProbabilityGrid(Extent extent, std::size_t num_classes, std::vector<double> values)
      : extent_(extent), classes_(num_classes), values_(std::move(values)) {
    require(values_.size() == checked_volume(extent_, classes_), ErrorCode::InvariantViolation,
            "values length " + std::to_string(values_.size()) + " != height*width*classes");
    for (std::size_t i = 0; i < extent_.pixels(); ++i) {
      double sum = 0.0;
      for (double v : pixel(i)) {
        require(v >= 0.0 && v <= 1.0, ErrorCode::InvariantViolation,
                pixel_str(i, extent_.width) + ": probability " + std::to_string(v) + " outside [0, 1]");
        sum += v;
      }
      require(std::abs(sum - 1.0) <= kSimplexTolerance, ErrorCode::InvariantViolation,
              pixel_str(i, extent_.width) + ": probabilities sum to " + std::to_string(sum));
    }
  }

  Extent extent() const noexcept { return extent_; }
  std::size_t height() const noexcept { return extent_.height; }
  std::size_t width() const noexcept { return extent_.width; }
  std::size_t num_classes() const noexcept { return classes_; }
  std::size_t pixels() const noexcept { return extent_.pixels(); }

  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> pixel(std::size_t index) const noexcept {
    return std::span<const double>(values_).subspan(index * classes_, classes_);
  }
  std::span<const double> pixel(std::size_t row, std::size_t col) const noexcept {
    return pixel(extent_.index(row, col));
  }
  double at(std::size_t row, std::size_t col, std::size_t label) const noexcept {
    return values_[extent_.index(row, col) * classes_ + label];
  }

  bool operator==(const ProbabilityGrid&) const = default;

 private:
  Extent extent_;
  std::size_t classes_;
  std::vector<double> values_;
};

/// Ground-truth labels; kUnlabeled marks background pixels.
class LabelGrid {
 public:
  LabelGrid(Extent extent, std::size_t num_classes, std::vector<std::int32_t> labels)
      : extent_(extent), classes_(num_classes), labels_(std::move(labels)) {
    require(labels_.size() == checked_volume(extent_, classes_) / classes_, ErrorCode::InvariantViolation,
            "labels length " + std::to_string(labels_.size()) + " != height*width");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      const auto y = labels_[i];
      require(y == kUnlabeled || (y >= 0 && static_cast<std::size_t>(y) < classes_),
              ErrorCode::InvariantViolation,
              pixel_str(i, extent_.width) + ": label " + std::to_string(y) + " outside [-1, " +
                  std::to_string(classes_) + ")");
    }
  }

  Extent extent() const noexcept { return extent_; }
  std::size_t num_classes() const noexcept { return classes_; }
  std::size_t pixels() const noexcept { return extent_.pixels(); }

  std::span<const std::int32_t> values() const noexcept { return labels_; }
  std::int32_t operator[](std::size_t index) const noexcept { return labels_[index]; }
  std::int32_t at(std::size_t row, std::size_t col) const noexcept { return labels_[extent_.index(row, col)]; }
  bool labeled(std::size_t index) const noexcept { return labels_[index] != kUnlabeled; }

  std::size_t labeled_count() const noexcept {
    return static_cast<std::size_t>(std::count_if(labels_.begin(), labels_.end(), [](auto y) { return y != kUnlabeled; }));
  }

  bool operator==(const LabelGrid&) const = default;

 private:
  Extent extent_;
  std::size_t classes_;
  std::vector<std::int32_t> labels_;
};

/// One role per pixel: Train / Cal / Test / Ignore.
class SplitMask {
 public:
  SplitMask(Extent extent, std::vector<Role> roles) : extent_(extent), roles_(std::move(roles)) {
    require(roles_.size() == checked_volume(extent_, 1), ErrorCode::InvariantViolation,
            "roles length " + std::to_string(roles_.size()) + " != height*width");
    for (std::size_t i = 0; i < roles_.size(); ++i) {
      require(static_cast<unsigned>(roles_[i]) <= 3u, ErrorCode::InvariantViolation,
              pixel_str(i, extent_.width) + ": mask code " + std::to_string(static_cast<unsigned>(roles_[i])));
    }
  }

  Extent extent() const noexcept { return extent_; }
  std::size_t pixels() const noexcept { return extent_.pixels(); }

  std::span<const Role> values() const noexcept { return roles_; }
  Role operator[](std::size_t index) const noexcept { return roles_[index]; }
  Role at(std::size_t row, std::size_t col) const noexcept { return roles_[extent_.index(row, col)]; }

  std::size_t count(Role role) const noexcept {
    return static_cast<std::size_t>(std::count(roles_.begin(), roles_.end(), role));
  }

  bool operator==(const SplitMask&) const = default;

 private:
  Extent extent_;
  std::vector<Role> roles_;
};

/// Cal and Test pixels need a ground-truth label for calibration and metrics.
inline void require_labeled(const LabelGrid& labels, const SplitMask& mask, Role role, ErrorCode code) {
  require_same_extent(labels.extent(), mask.extent(), "labels/mask");
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (mask[i] == role && !labels.labeled(i)) {
      fail(code, pixel_str(i, mask.extent().width) + " has role " + to_string(role) + " but no label");
    }
  }
}

/// Per-pixel, per-label non-conformity scores. Pixels flagged invalid carry
/// no score and are never read.
class ScoreField {
 public:
  ScoreField(Extent extent, std::size_t num_classes, std::vector<double> scores, std::vector<std::uint8_t> valid)
      : extent_(extent), classes_(num_classes), scores_(std::move(scores)), valid_(std::move(valid)) {
    require(scores_.size() == checked_volume(extent_, classes_) && valid_.size() == extent_.pixels(),
            ErrorCode::InvariantViolation, "score field buffers do not match height*width*classes");
    for (std::size_t i = 0; i < valid_.size(); ++i) {
      if (!valid_[i]) continue;
      for (double s : pixel(i)) {
        require(std::isfinite(s), ErrorCode::InvariantViolation, pixel_str(i, extent_.width) + ": non-finite score");
      }
    }
  }

  Extent extent() const noexcept { return extent_; }
  std::size_t num_classes() const noexcept { return classes_; }
  std::size_t pixels() const noexcept { return extent_.pixels(); }

  bool valid(std::size_t index) const noexcept { return valid_[index] != 0; }
  std::span<const std::uint8_t> validity() const noexcept { return valid_; }
  std::span<const double> values() const noexcept { return scores_; }
  std::span<const double> pixel(std::size_t index) const noexcept {
    return std::span<const double>(scores_).subspan(index * classes_, classes_);
  }
  double at(std::size_t index, std::size_t label) const noexcept { return scores_[index * classes_ + label]; }
  double at(std::size_t row, std::size_t col, std::size_t label) const noexcept {
    return at(extent_.index(row, col), label);
  }

  /// Bitwise equality (distinguishes -0.0 and NaN payloads).
  bool identical(const ScoreField& other) const noexcept {
    if (extent_ != other.extent_ || classes_ != other.classes_ || valid_ != other.valid_) return false;
    for (std::size_t i = 0; i < scores_.size(); ++i) {
      if (std::bit_cast<std::uint64_t>(scores_[i]) != std::bit_cast<std::uint64_t>(other.scores_[i])) return false;
    }
    return true;
  }

 private:
  Extent extent_;
  std::size_t classes_;
  std::vector<double> scores_;
  std::vector<std::uint8_t> valid_;
};

/// Per-pixel label subsets, stored as a fixed-width bitset per pixel.
class PredictionSetGrid {
 public:
  static constexpr std::size_t words_for(std::size_t num_classes) noexcept { return (num_classes + 63) / 64; }

  PredictionSetGrid(Extent extent, std::size_t num_classes, std::vector<std::uint64_t> bits,
                    std::vector<std::uint8_t> defined)
      : extent_(extent), classes_(num_classes), words_(words_for(num_classes)), bits_(std::move(bits)),
        defined_(std::move(defined)) {
    require(bits_.size() == checked_volume(extent_, words_) && defined_.size() == extent_.pixels(),
            ErrorCode::InvariantViolation, "prediction set buffers do not match grid size");
    const std::size_t tail = num_classes % 64;
    if (tail != 0) {
      for (std::size_t i = 0; i < extent_.pixels(); ++i) {
        require((bits_[i * words_ + words_ - 1] >> tail) == 0, ErrorCode::InvariantViolation,
                pixel_str(i, extent_.width) + ": set contains label >= K");
      }
    }
  }

  Extent extent() const noexcept { return extent_; }
  std::size_t num_classes() const noexcept { return classes_; }
  std::size_t pixels() const noexcept { return extent_.pixels(); }

  bool defined(std::size_t index) const noexcept { return defined_[index] != 0; }
  bool contains(std::size_t index, std::size_t label) const noexcept {
    return (bits_[index * words_ + label / 64] >> (label % 64)) & 1u;
  }
  std::size_t size(std::size_t index) const noexcept {
    std::size_t n = 0;
    for (std::size_t w = 0; w < words_; ++w) n += static_cast<std::size_t>(std::popcount(bits_[index * words_ + w]));
    return n;
  }
  std::vector<std::size_t> labels(std::size_t index) const {
    std::vector<std::size_t> out;
    for (std::size_t y = 0; y < classes_; ++y) {
      if (contains(index, y)) out.push_back(y);
    }
    return out;
  }

  bool operator==(const PredictionSetGrid&) const = default;

 private:
  Extent extent_;
  std::size_t classes_;
  std::size_t words_;
  std::vector<std::uint64_t> bits_;
  std::vector<std::uint8_t> defined_;
};

namespace detail {

// Stabilized softmax of one row; -inf logits map to exactly 0.
inline void softmax_row(std::span<const double> logits, std::span<double> out) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t y = 0; y < logits.size(); ++y) {
    out[y] = std::exp(logits[y] - top);
    sum += out[y];
  }
  for (double& v : out) v /= sum;
}

}  // namespace detail

/// Converts H x W x K logits into a ProbabilityGrid.
inline ProbabilityGrid softmax_ingest(Extent extent, std::size_t num_classes, std::span<const double> logits) {
  require(logits.size() == checked_volume(extent, num_classes), ErrorCode::ShapeMismatch,
          "logits length does not match height*width*classes");
  for (std::size_t i = 0; i < logits.size(); ++i) {
    require(std::isfinite(logits[i]), ErrorCode::NonFiniteInput,
            pixel_str(i / num_classes, extent.width) + ", class " + std::to_string(i % num_classes) +
                ": non-finite logit");
  }
  std::vector<double> probs(logits.size());
  for (std::size_t i = 0; i < extent.pixels(); ++i) {
    detail::softmax_row(logits.subspan(i * num_classes, num_classes),
                        std::span<double>(probs).subspan(i * num_classes, num_classes));
  }
  return ProbabilityGrid(extent, num_classes, std::move(probs));
}

}  // namespace sacp
