#pragma once

// Split conformal calibration, prediction-set construction and the spatial
// score aggregation operator
//
//   V_k(i, y) = (1 - lambda) V_{k-1}(i, y) + lambda / |N_i| * sum_{j in N_i} V_{k-1}(j, y)
//
// applied per label channel with a simultaneous (Jacobi) update.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "sacp/grid.hpp"
#include "sacp/random.hpp"
#include "sacp/scores.hpp"

namespace sacp {

enum class NeighborhoodShape { FourConnected, EightConnected, Chebyshev };

inline std::string to_string(NeighborhoodShape shape) {
  switch (shape) {
    case NeighborhoodShape::FourConnected: return "four";
    case NeighborhoodShape::EightConnected: return "eight";
    case NeighborhoodShape::Chebyshev: return "chebyshev";
  }
  return "?";
}

inline NeighborhoodShape parse_neighborhood(const std::string& s) {
  if (s == "four" || s == "4") return NeighborhoodShape::FourConnected;
  if (s == "eight" || s == "8") return NeighborhoodShape::EightConnected;
  if (s == "chebyshev") return NeighborhoodShape::Chebyshev;
  fail(ErrorCode::InvalidConfig, "unknown neighborhood '" + s + "' (four|eight|chebyshev)");
}

struct Offset {
  int dr;
  int dc;
};

struct NeighborhoodSpec {
  NeighborhoodShape shape = NeighborhoodShape::EightConnected;
  int radius = 1;  // Chebyshev only
  RoleSet exclude_roles{Role::Train, Role::Ignore};

  /// Relative offsets, center excluded, in raster order.
  std::vector<Offset> offsets() const {
    require(shape != NeighborhoodShape::Chebyshev || radius >= 1, ErrorCode::InvalidConfig, "chebyshev radius must be >= 1");
    const int r = shape == NeighborhoodShape::Chebyshev ? radius : 1;
    std::vector<Offset> out;
    for (int dr = -r; dr <= r; ++dr) {
      for (int dc = -r; dc <= r; ++dc) {
        if (dr == 0 && dc == 0) continue;
        if (shape == NeighborhoodShape::FourConnected && dr != 0 && dc != 0) continue;
        out.push_back({dr, dc});
      }
    }
    return out;
  }
};

struct SacpConfig {
  double lambda = 0.5;
  std::int64_t iterations = 1;
  NeighborhoodSpec neighborhood{};

  void validate() const {
    require(lambda >= 0.0 && lambda <= 1.0, ErrorCode::InvalidConfig, "lambda must lie in [0, 1]");
    require(iterations >= 0, ErrorCode::InvalidConfig, "iterations must be >= 0");
  }
  bool is_identity() const noexcept { return lambda == 0.0 || iterations == 0; }
};

/// Neighbor lists in CSR form. A pixel is a neighbor when it is in bounds,
/// carries a score, and its role is not excluded.
struct NeighborGraph {
  std::vector<std::size_t> start;  // pixels + 1 entries
  std::vector<std::size_t> index;

  std::size_t degree(std::size_t i) const noexcept { return start[i + 1] - start[i]; }
};

inline NeighborGraph build_neighbors(const ScoreField& field, const SplitMask& mask, const NeighborhoodSpec& spec) {
  const Extent ext = field.extent();
  const auto offsets = spec.offsets();
  NeighborGraph g;
  g.start.reserve(ext.pixels() + 1);
  g.start.push_back(0);
  for (std::size_t r = 0; r < ext.height; ++r) {
    for (std::size_t c = 0; c < ext.width; ++c) {
      if (field.valid(ext.index(r, c))) {
        for (const auto& o : offsets) {
          const auto nr = static_cast<std::int64_t>(r) + o.dr;
          const auto nc = static_cast<std::int64_t>(c) + o.dc;
          if (nr < 0 || nc < 0 || nr >= static_cast<std::int64_t>(ext.height) || nc >= static_cast<std::int64_t>(ext.width)) continue;
          const std::size_t j = ext.index(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc));
          if (!field.valid(j) || spec.exclude_roles.contains(mask[j])) continue;
          g.index.push_back(j);
        }
      }
      g.start.push_back(g.index.size());
    }
  }
  return g;
}

/// Applies the aggregation operator `cfg.iterations` times. Pixels without
/// neighbors keep their previous value; lambda = 0 or k = 0 returns the input
/// unchanged bit for bit.
inline ScoreField aggregate(const ScoreField& field, const SplitMask& mask, const SacpConfig& cfg) {
  require_same_extent(field.extent(), mask.extent(), "scores/mask");
  cfg.validate();
  if (cfg.is_identity()) return field;

  const auto graph = build_neighbors(field, mask, cfg.neighborhood);
  const std::size_t k = field.num_classes();
  std::vector<double> cur(field.values().begin(), field.values().end());
  std::vector<double> next = cur;
  for (std::int64_t it = 0; it < cfg.iterations; ++it) {
    for (std::size_t i = 0; i < field.pixels(); ++i) {
      const std::size_t deg = graph.degree(i);
      if (!field.valid(i) || deg == 0) continue;
      for (std::size_t y = 0; y < k; ++y) {
        // mean of neighbor differences: algebraically the operator above, and
        // exactly the identity when the neighborhood is uniform
        const double self = cur[i * k + y];
        double diff = 0.0;
        for (std::size_t e = graph.start[i]; e < graph.start[i + 1]; ++e) diff += cur[graph.index[e] * k + y] - self;
        next[i * k + y] = self + cfg.lambda * (diff / static_cast<double>(deg));
      }
    }
    cur.swap(next);
    next = cur;
  }
  return ScoreField(field.extent(), k, std::move(cur), std::vector<std::uint8_t>(field.validity().begin(), field.validity().end()));
}

struct CalibrationResult {
  double tau = std::numeric_limits<double>::infinity();
  double alpha = 0.1;
  std::size_t n_cal = 0;
  std::vector<double> sorted_cal_scores;

  bool infinite() const noexcept { return std::isinf(tau); }
};

/// 1-based rank ceil((n + 1)(1 - alpha)). The product is snapped to the
/// nearest integer when within 1e-9 so that e.g. 20 * 0.95 yields 19, not 20.
inline std::size_t conformal_rank(std::size_t n, double alpha) {
  const double target = static_cast<double>(n + 1) * (1.0 - alpha);
  const double nearest = std::round(target);
  const double snapped = std::abs(target - nearest) <= 1e-9 * std::max(1.0, target) ? nearest : target;
  return static_cast<std::size_t>(std::ceil(snapped));
}

/// Threshold from a bag of calibration scores.
inline CalibrationResult calibrate_scores(std::vector<double> scores, double alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidConfig, "alpha must lie in (0, 1)");
  require(!scores.empty(), ErrorCode::EmptyCalibrationSet, "no calibration scores");
  std::sort(scores.begin(), scores.end());
  CalibrationResult cal;
  cal.alpha = alpha;
  cal.n_cal = scores.size();
  const std::size_t q = conformal_rank(cal.n_cal, alpha);
  cal.tau = q <= cal.n_cal ? scores[q - 1] : std::numeric_limits<double>::infinity();
  cal.sorted_cal_scores = std::move(scores);
  return cal;
}

/// Scores of the Cal pixels at their true labels, row-major order.
inline std::vector<double> calibration_scores(const ScoreField& field, const LabelGrid& labels, const SplitMask& mask) {
  require_same_extent(field.extent(), mask.extent(), "scores/mask");
  require_same_extent(labels.extent(), mask.extent(), "labels/mask");
  std::vector<double> out;
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (mask[i] != Role::Cal) continue;
    require(labels.labeled(i), ErrorCode::UnlabeledCalPixel, pixel_str(i, mask.extent().width));
    require(field.valid(i), ErrorCode::InvariantViolation, pixel_str(i, mask.extent().width) + ": Cal pixel has no score");
    const auto y = static_cast<std::size_t>(labels[i]);
    require(y < field.num_classes(), ErrorCode::LabelOutOfRange, pixel_str(i, mask.extent().width));
    out.push_back(field.at(i, y));
  }
  return out;
}

inline CalibrationResult calibrate(const ScoreField& field, const LabelGrid& labels, const SplitMask& mask, double alpha) {
  auto scores = calibration_scores(field, labels, mask);
  require(!scores.empty(), ErrorCode::EmptyCalibrationSet, "mask has no Cal pixels");
  return calibrate_scores(std::move(scores), alpha);
}

/// Sets {y : score(y) <= tau} for Test pixels, plus Cal pixels when asked.
inline PredictionSetGrid predict_sets(const ScoreField& field, const SplitMask& mask, const CalibrationResult& cal,
                                      bool include_cal = false) {
  require_same_extent(field.extent(), mask.extent(), "scores/mask");
  const std::size_t k = field.num_classes();
  const std::size_t words = PredictionSetGrid::words_for(k);
  std::vector<std::uint64_t> bits(field.pixels() * words, 0);
  std::vector<std::uint8_t> defined(field.pixels(), 0);
  for (std::size_t i = 0; i < field.pixels(); ++i) {
    const Role role = mask[i];
    if (!(role == Role::Test || (include_cal && role == Role::Cal))) continue;
    require(field.valid(i), ErrorCode::InvariantViolation, pixel_str(i, field.extent().width) + ": no score for set construction");
    defined[i] = 1;
    for (std::size_t y = 0; y < k; ++y) {
      if (field.at(i, y) <= cal.tau) bits[i * words + y / 64] |= std::uint64_t{1} << (y % 64);
    }
  }
  return PredictionSetGrid(field.extent(), k, std::move(bits), std::move(defined));
}

struct PipelineResult {
  ScoreField scores;  // after aggregation
  CalibrationResult calibration;
  PredictionSetGrid sets;
};

/// score -> aggregate -> calibrate -> predict. The randomization field is
/// drawn once from `seed` and shared by every label and iteration.
inline PipelineResult run_pipeline(const ProbabilityGrid& grid, const LabelGrid& labels, const SplitMask& mask,
                                   const ScoreFunctionConfig& score_cfg, const SacpConfig& sacp_cfg, double alpha,
                                   std::uint64_t seed) {
  require_same_extent(grid.extent(), labels.extent(), "probabilities/labels");
  require(labels.num_classes() == grid.num_classes(), ErrorCode::ShapeMismatch, "labels and probabilities disagree on K");
  const auto raw = score_field(grid, mask, score_cfg, RandomizationField(seed));
  auto aggregated = aggregate(raw, mask, sacp_cfg);
  auto cal = calibrate(aggregated, labels, mask, alpha);
  auto sets = predict_sets(aggregated, mask, cal);
  return {std::move(aggregated), std::move(cal), std::move(sets)};
}

}  // namespace sacp
