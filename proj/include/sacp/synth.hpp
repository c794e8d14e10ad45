#pragma once

// Synthetic stand-in for a classified hyperspectral scene.
//
// The label map is the per-pixel argmax of K Gaussian-smoothed white-noise
// fields, so classes form blobs whose size grows with `smoothness`. Each
// pixel then gets a noisy class-evidence vector x = signal * e_label + N(0, I)
// and the emitted distribution is the exact Bayes posterior
//
//   p(y | x) ∝ prior(y) * exp(signal * x_y),  prior = class frequencies of the map,
//
// which makes the probabilities calibrated by construction: among pixels
// whose emitted p_y is q, label y occurs with frequency q. Neighboring
// pixels still carry information about a pixel's label through the smooth
// label map, which is what spatial aggregation exploits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "sacp/grid.hpp"
#include "sacp/random.hpp"

namespace sacp {

struct SynthConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t num_classes = 8;
  double smoothness = 4.0;  // Gaussian sigma of the latent fields, in pixels
  double signal = 2.0;
  std::uint64_t noise_seed = 1;
  std::uint64_t label_seed = 0;

  void validate() const {
    require(height > 0 && width > 0, ErrorCode::InvalidConfig, "height and width must be positive");
    require(num_classes >= 2, ErrorCode::InvalidConfig, "need at least two classes");
    require(std::isfinite(smoothness) && smoothness >= 0.0, ErrorCode::InvalidConfig, "smoothness must be >= 0");
    require(std::isfinite(signal) && signal > 0.0, ErrorCode::InvalidConfig, "signal must be positive and finite");
  }
};

struct SyntheticScene {
  ProbabilityGrid probs;
  LabelGrid labels;
};

namespace detail {

inline std::size_t reflect_index(std::int64_t i, std::int64_t n) {
  if (n == 1) return 0;
  const std::int64_t period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return static_cast<std::size_t>(i < n ? i : period - 1 - i);
}

/// Separable Gaussian blur with mirrored borders, truncated at 3 sigma.
inline std::vector<double> gaussian_blur(const std::vector<double>& img, Extent ext, double sigma) {
  if (sigma < 1e-3) return img;
  const auto radius = static_cast<std::int64_t>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double norm = 0.0;
  for (std::int64_t d = -radius; d <= radius; ++d) {
    const double w = std::exp(-0.5 * static_cast<double>(d * d) / (sigma * sigma));
    kernel[static_cast<std::size_t>(d + radius)] = w;
    norm += w;
  }
  for (double& w : kernel) w /= norm;

  const auto h = static_cast<std::int64_t>(ext.height), w = static_cast<std::int64_t>(ext.width);
  std::vector<double> tmp(img.size()), out(img.size());
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::int64_t d = -radius; d <= radius; ++d) {
        acc += kernel[static_cast<std::size_t>(d + radius)] * img[static_cast<std::size_t>(r * w) + reflect_index(c + d, w)];
      }
      tmp[static_cast<std::size_t>(r * w + c)] = acc;
    }
  }
  for (std::int64_t r = 0; r < h; ++r) {
    for (std::int64_t c = 0; c < w; ++c) {
      double acc = 0.0;
      for (std::int64_t d = -radius; d <= radius; ++d) {
        acc += kernel[static_cast<std::size_t>(d + radius)] * tmp[reflect_index(r + d, h) * static_cast<std::size_t>(w) + static_cast<std::size_t>(c)];
      }
      out[static_cast<std::size_t>(r * w + c)] = acc;
    }
  }
  return out;
}

}  // namespace detail

/// Latent label map only (argmax of smoothed noise fields).
inline std::vector<std::int32_t> synthetic_label_map(const SynthConfig& cfg) {
  cfg.validate();
  const Extent ext{cfg.height, cfg.width};
  std::vector<double> best(ext.pixels(), -std::numeric_limits<double>::infinity());
  std::vector<std::int32_t> label(ext.pixels(), 0);
  for (std::size_t k = 0; k < cfg.num_classes; ++k) {
    CounterRng rng(derive_seed(cfg.label_seed, k));
    std::vector<double> noise(ext.pixels());
    for (double& v : noise) v = rng.normal();
    const auto field = detail::gaussian_blur(noise, ext, cfg.smoothness);
    for (std::size_t i = 0; i < ext.pixels(); ++i) {
      if (field[i] > best[i]) {
        best[i] = field[i];
        label[i] = static_cast<std::int32_t>(k);
      }
    }
  }
  return label;
}

inline SyntheticScene generate_synthetic(const SynthConfig& cfg) {
  const auto label = synthetic_label_map(cfg);
  const Extent ext{cfg.height, cfg.width};
  const std::size_t k = cfg.num_classes;

  std::vector<double> log_prior(k, -std::numeric_limits<double>::infinity());
  {
    std::vector<std::size_t> counts(k, 0);
    for (auto y : label) ++counts[static_cast<std::size_t>(y)];
    for (std::size_t y = 0; y < k; ++y) {
      if (counts[y] > 0) log_prior[y] = std::log(static_cast<double>(counts[y]) / static_cast<double>(ext.pixels()));
    }
  }

  CounterRng rng(derive_seed(cfg.noise_seed, 0x0b5e7));
  std::vector<double> logits(k), probs(ext.pixels() * k);
  for (std::size_t i = 0; i < ext.pixels(); ++i) {
    for (std::size_t y = 0; y < k; ++y) {
      const double evidence = (static_cast<std::size_t>(label[i]) == y ? cfg.signal : 0.0) + rng.normal();
      logits[y] = cfg.signal * evidence + log_prior[y];
    }
    detail::softmax_row(logits, std::span<double>(probs).subspan(i * k, k));
  }
  return {ProbabilityGrid(ext, k, std::move(probs)), LabelGrid(ext, k, label)};
}

/// Uniform random roles over labeled pixels: `train_count` Train, the rest
/// split into Cal (fraction cal_ratio, at least one) and Test (at least one).
/// Unlabeled pixels become Ignore.
inline SplitMask sample_split(const LabelGrid& labels, std::size_t train_count, double cal_ratio, std::uint64_t seed) {
  require(cal_ratio > 0.0 && cal_ratio < 1.0, ErrorCode::InvalidConfig, "cal_ratio must lie in (0, 1)");
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < labels.pixels(); ++i) {
    if (labels.labeled(i)) pool.push_back(i);
  }
  require(train_count + 1 < pool.size(), ErrorCode::NotEnoughLabeledPixels,
          std::to_string(pool.size()) + " labeled pixels cannot hold " + std::to_string(train_count) + " train + cal + test");
  CounterRng rng(seed);
  rng.shuffle(std::span<std::size_t>(pool));

  const std::size_t rest = pool.size() - train_count;
  const auto wanted = static_cast<std::size_t>(std::llround(cal_ratio * static_cast<double>(rest)));
  const std::size_t n_cal = std::clamp<std::size_t>(wanted, 1, rest - 1);

  std::vector<Role> roles(labels.pixels(), Role::Ignore);
  for (std::size_t p = 0; p < pool.size(); ++p) {
    roles[pool[p]] = p < train_count ? Role::Train : (p < train_count + n_cal ? Role::Cal : Role::Test);
  }
  return SplitMask(labels.extent(), std::move(roles));
}

}  // namespace sacp
