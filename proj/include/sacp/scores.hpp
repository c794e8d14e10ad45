#pragma once

// APS, RAPS and SAPS non-conformity scores. Lower scores mean a label
// conforms better to the classifier output.
//
// Ties in probability are broken by ascending label index, and the
// "probability mass above y" in APS is the mass of every label ranked ahead
// of y in that total order.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sacp/grid.hpp"
#include "sacp/random.hpp"

namespace sacp {

enum class ScoreKind { APS, RAPS, SAPS };

inline std::string to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::APS: return "aps";
    case ScoreKind::RAPS: return "raps";
    case ScoreKind::SAPS: return "saps";
  }
  return "?";
}

inline ScoreKind parse_score_kind(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto k : {ScoreKind::APS, ScoreKind::RAPS, ScoreKind::SAPS}) {
    if (to_string(k) == s) return k;
  }
  fail(ErrorCode::InvalidConfig, "unknown score function '" + s + "'");
}

struct ScoreFunctionConfig {
  ScoreKind kind = ScoreKind::APS;
  double raps_lambda = 0.01;
  std::int64_t raps_kreg = 1;
  double saps_lambda = 0.2;

  void validate() const {
    require(raps_lambda >= 0.0 && std::isfinite(raps_lambda), ErrorCode::InvalidConfig, "raps_lambda must be >= 0");
    require(raps_kreg >= 1, ErrorCode::InvalidConfig, "raps_kreg must be >= 1");
    require(saps_lambda >= 0.0 && std::isfinite(saps_lambda), ErrorCode::InvalidConfig, "saps_lambda must be >= 0");
  }
};

/// Labels sorted by descending probability; rank is 1-based.
struct RankVector {
  std::vector<std::size_t> order;
  std::vector<std::size_t> rank;
};

inline RankVector rank_labels(std::span<const double> probs) {
  RankVector rv;
  rv.order.resize(probs.size());
  std::iota(rv.order.begin(), rv.order.end(), std::size_t{0});
  std::stable_sort(rv.order.begin(), rv.order.end(), [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  rv.rank.resize(probs.size());
  for (std::size_t pos = 0; pos < rv.order.size(); ++pos) rv.rank[rv.order[pos]] = pos + 1;
  return rv;
}

namespace detail {

inline void check_label(std::span<const double> probs, std::size_t y) {
  require(y < probs.size(), ErrorCode::LabelOutOfRange,
          "label " + std::to_string(y) + " with " + std::to_string(probs.size()) + " classes");
}

// Mass of labels ranked strictly ahead of position `pos`, summed in rank order.
inline double mass_ahead(std::span<const double> probs, const RankVector& rv, std::size_t pos) {
  double mass = 0.0;
  for (std::size_t p = 0; p < pos; ++p) mass += probs[rv.order[p]];
  return mass;
}

inline double aps_from_rank(std::span<const double> probs, const RankVector& rv, std::size_t y, double u) {
  return mass_ahead(probs, rv, rv.rank[y] - 1) + u * probs[y];
}

inline double raps_penalty(std::size_t rank, double lambda, std::int64_t kreg) {
  const auto excess = static_cast<std::int64_t>(rank) - kreg;
  return lambda * static_cast<double>(excess > 0 ? excess : 0);
}

inline double saps_from_rank(std::span<const double> probs, const RankVector& rv, std::size_t y, double u, double lambda) {
  const double top = probs[rv.order.front()];
  const std::size_t rank = rv.rank[y];
  if (rank == 1) return u * top;
  return top + (static_cast<double>(rank) - 2.0 + u) * lambda;
}

}  // namespace detail

inline double aps_score(std::span<const double> probs, std::size_t y, double u) {
  detail::check_label(probs, y);
  return detail::aps_from_rank(probs, rank_labels(probs), y, u);
}

inline double raps_score(std::span<const double> probs, std::size_t y, double u, double lambda, std::int64_t kreg) {
  detail::check_label(probs, y);
  const auto rv = rank_labels(probs);
  return detail::aps_from_rank(probs, rv, y, u) + detail::raps_penalty(rv.rank[y], lambda, kreg);
}

inline double saps_score(std::span<const double> probs, std::size_t y, double u, double lambda) {
  detail::check_label(probs, y);
  return detail::saps_from_rank(probs, rank_labels(probs), y, u, lambda);
}

/// Scores every label of one pixel into `out`. Uses the same arithmetic as
/// the single-label functions, so results agree bit for bit.
inline void score_pixel(std::span<const double> probs, double u, const ScoreFunctionConfig& cfg, std::span<double> out) {
  const auto rv = rank_labels(probs);
  if (cfg.kind == ScoreKind::SAPS) {
    for (std::size_t y = 0; y < probs.size(); ++y) out[y] = detail::saps_from_rank(probs, rv, y, u, cfg.saps_lambda);
    return;
  }
  // walk in rank order, accumulating the mass ahead exactly as mass_ahead does
  double mass = 0.0;
  for (std::size_t pos = 0; pos < rv.order.size(); ++pos) {
    const std::size_t y = rv.order[pos];
    double s = mass + u * probs[y];
    if (cfg.kind == ScoreKind::RAPS) s += detail::raps_penalty(pos + 1, cfg.raps_lambda, cfg.raps_kreg);
    out[y] = s;
    mass += probs[y];
  }
}

inline double score_label(std::span<const double> probs, std::size_t y, double u, const ScoreFunctionConfig& cfg) {
  switch (cfg.kind) {
    case ScoreKind::APS: return aps_score(probs, y, u);
    case ScoreKind::RAPS: return raps_score(probs, y, u, cfg.raps_lambda, cfg.raps_kreg);
    case ScoreKind::SAPS: return saps_score(probs, y, u, cfg.saps_lambda);
  }
  return 0.0;
}

/// Scores all labels at every pixel whose role is in `scored` (Cal and Test
/// by default); every other pixel is marked invalid.
inline ScoreField score_field(const ProbabilityGrid& grid, const SplitMask& mask, const ScoreFunctionConfig& cfg,
                              const RandomizationField& rng, RoleSet scored = {Role::Cal, Role::Test}) {
  require_same_extent(grid.extent(), mask.extent(), "probabilities/mask");
  cfg.validate();
  const std::size_t k = grid.num_classes();
  const std::size_t width = grid.width();
  std::vector<double> scores(grid.pixels() * k, 0.0);
  std::vector<std::uint8_t> valid(grid.pixels(), 0);
  for (std::size_t i = 0; i < grid.pixels(); ++i) {
    if (!scored.contains(mask[i])) continue;
    valid[i] = 1;
    score_pixel(grid.pixel(i), rng(i / width, i % width), cfg, std::span<double>(scores).subspan(i * k, k));
  }
  return ScoreField(grid.extent(), k, std::move(scores), std::move(valid));
}

}  // namespace sacp
