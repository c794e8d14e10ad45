#pragma once

// Coverage, Size, SSCV, OA and AA over the Test pixels of a split.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sacp/grid.hpp"

namespace sacp {

/// Inclusive range of set sizes.
struct SizeBin {
  std::size_t lo;
  std::size_t hi;
  bool operator==(const SizeBin&) const = default;
};

/// {0-1}, {2-3}, {4-6}, {7-10}, {11-K}, clipped to K and with empty bins dropped.
inline std::vector<SizeBin> default_size_bins(std::size_t num_classes) {
  const std::vector<SizeBin> base{{0, 1}, {2, 3}, {4, 6}, {7, 10}, {11, num_classes}};
  std::vector<SizeBin> out;
  for (auto b : base) {
    if (b.lo > num_classes) break;
    out.push_back({b.lo, std::min(b.hi, num_classes)});
  }
  return out;
}

inline void check_bins_partition(const std::vector<SizeBin>& bins, std::size_t num_classes) {
  std::size_t next = 0;
  for (const auto& b : bins) {
    require(b.lo == next && b.hi >= b.lo, ErrorCode::InvalidConfig, "size bins must be contiguous ranges starting at 0");
    next = b.hi + 1;
  }
  require(next == num_classes + 1, ErrorCode::InvalidConfig, "size bins must cover 0..K");
}

struct BinStat {
  SizeBin bin;
  std::size_t count = 0;
  double coverage = 0.0;  // 0 for an empty bin
};

struct MetricReport {
  std::size_t n_test = 0;
  std::size_t covered = 0;
  double coverage = 0.0;
  double mean_size = 0.0;
  double sscv = 0.0;
  double oa = 0.0;
  double aa = 0.0;
  std::vector<BinStat> per_bin;
};

namespace detail {

inline std::vector<std::size_t> test_pixels(const SplitMask& mask) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (mask[i] == Role::Test) out.push_back(i);
  }
  require(!out.empty(), ErrorCode::EmptyTestSet, "mask has no Test pixels");
  return out;
}

inline std::size_t true_label(const LabelGrid& labels, std::size_t i, std::size_t width) {
  require(labels.labeled(i), ErrorCode::InvariantViolation, pixel_str(i, width) + ": Test pixel without label");
  return static_cast<std::size_t>(labels[i]);
}

inline void check_defined(const PredictionSetGrid& sets, std::size_t i) {
  require(sets.defined(i), ErrorCode::InvariantViolation, pixel_str(i, sets.extent().width) + ": no prediction set");
}

}  // namespace detail

inline double coverage(const PredictionSetGrid& sets, const LabelGrid& labels, const SplitMask& mask) {
  require_same_extent(sets.extent(), mask.extent(), "sets/mask");
  require_same_extent(labels.extent(), mask.extent(), "labels/mask");
  const auto pixels = detail::test_pixels(mask);
  std::size_t covered = 0;
  for (auto i : pixels) {
    detail::check_defined(sets, i);
    covered += sets.contains(i, detail::true_label(labels, i, mask.extent().width)) ? 1 : 0;
  }
  return static_cast<double>(covered) / static_cast<double>(pixels.size());
}

inline double mean_size(const PredictionSetGrid& sets, const SplitMask& mask) {
  require_same_extent(sets.extent(), mask.extent(), "sets/mask");
  const auto pixels = detail::test_pixels(mask);
  std::size_t total = 0;
  for (auto i : pixels) {
    detail::check_defined(sets, i);
    total += sets.size(i);
  }
  return static_cast<double>(total) / static_cast<double>(pixels.size());
}

/// Per-bin coverage of Test pixels grouped by set size.
inline std::vector<BinStat> size_stratified_coverage(const PredictionSetGrid& sets, const LabelGrid& labels,
                                                     const SplitMask& mask, const std::vector<SizeBin>& bins) {
  check_bins_partition(bins, sets.num_classes());
  std::vector<BinStat> stats;
  std::vector<std::size_t> hits(bins.size(), 0);
  for (const auto& b : bins) stats.push_back({b, 0, 0.0});
  for (std::size_t i = 0; i < mask.pixels(); ++i) {
    if (mask[i] != Role::Test) continue;
    detail::check_defined(sets, i);
    const std::size_t size = sets.size(i);
    const auto it = std::find_if(bins.begin(), bins.end(), [&](const SizeBin& b) { return size >= b.lo && size <= b.hi; });
    const auto j = static_cast<std::size_t>(it - bins.begin());
    ++stats[j].count;
    hits[j] += sets.contains(i, detail::true_label(labels, i, mask.extent().width)) ? 1 : 0;
  }
  for (std::size_t j = 0; j < stats.size(); ++j) {
    if (stats[j].count > 0) stats[j].coverage = static_cast<double>(hits[j]) / static_cast<double>(stats[j].count);
  }
  return stats;
}

/// 100 * max |(1 - alpha) - coverage| over bins holding at least
/// `min_bin_count` pixels; 0 when no bin qualifies.
inline double sscv_from_bins(const std::vector<BinStat>& stats, double alpha, std::size_t min_bin_count) {
  double worst = 0.0;
  for (const auto& s : stats) {
    if (s.count < min_bin_count) continue;
    worst = std::max(worst, std::abs((1.0 - alpha) - s.coverage));
  }
  return 100.0 * worst;
}

inline double sscv(const PredictionSetGrid& sets, const LabelGrid& labels, const SplitMask& mask, double alpha,
                   const std::vector<SizeBin>& bins, std::size_t min_bin_count = 10) {
  require(min_bin_count >= 1, ErrorCode::InvalidConfig, "min_bin_count must be >= 1");
  return sscv_from_bins(size_stratified_coverage(sets, labels, mask, bins), alpha, min_bin_count);
}

/// Argmax with ties to the lowest label index.
inline std::size_t argmax_label(std::span<const double> probs) {
  return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

struct Accuracy {
  double oa = 0.0;
  double aa = 0.0;
};

/// OA over Test pixels; AA is the mean recall over classes present in Test.
inline Accuracy oa_aa(const ProbabilityGrid& probs, const LabelGrid& labels, const SplitMask& mask) {
  require_same_extent(probs.extent(), mask.extent(), "probabilities/mask");
  require_same_extent(labels.extent(), mask.extent(), "labels/mask");
  const auto pixels = detail::test_pixels(mask);
  const std::size_t k = probs.num_classes();
  std::vector<std::size_t> total(k, 0), correct(k, 0);
  std::size_t hits = 0;
  for (auto i : pixels) {
    const auto y = detail::true_label(labels, i, mask.extent().width);
    require(y < k, ErrorCode::LabelOutOfRange, pixel_str(i, mask.extent().width));
    const bool ok = argmax_label(probs.pixel(i)) == y;
    ++total[y];
    correct[y] += ok ? 1 : 0;
    hits += ok ? 1 : 0;
  }
  double recall_sum = 0.0;
  std::size_t present = 0;
  for (std::size_t y = 0; y < k; ++y) {
    if (total[y] == 0) continue;
    recall_sum += static_cast<double>(correct[y]) / static_cast<double>(total[y]);
    ++present;
  }
  return {static_cast<double>(hits) / static_cast<double>(pixels.size()), recall_sum / static_cast<double>(present)};
}

struct MetricOptions {
  std::vector<SizeBin> bins;  // empty: default_size_bins(K)
  std::size_t min_bin_count = 10;
};

inline MetricReport evaluate_sets(const PredictionSetGrid& sets, const ProbabilityGrid& probs, const LabelGrid& labels,
                                  const SplitMask& mask, double alpha, const MetricOptions& opts = {}) {
  MetricReport rep;
  const auto pixels = detail::test_pixels(mask);
  rep.n_test = pixels.size();
  for (auto i : pixels) {
    detail::check_defined(sets, i);
    rep.covered += sets.contains(i, detail::true_label(labels, i, mask.extent().width)) ? 1 : 0;
  }
  rep.coverage = static_cast<double>(rep.covered) / static_cast<double>(rep.n_test);
  rep.mean_size = mean_size(sets, mask);
  const auto bins = opts.bins.empty() ? default_size_bins(sets.num_classes()) : opts.bins;
  rep.per_bin = size_stratified_coverage(sets, labels, mask, bins);
  rep.sscv = sscv_from_bins(rep.per_bin, alpha, opts.min_bin_count);
  const auto acc = oa_aa(probs, labels, mask);
  rep.oa = acc.oa;
  rep.aa = acc.aa;
  return rep;
}

}  // namespace sacp
