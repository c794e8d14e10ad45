#pragma once

// Repeated-trial experiments: each trial draws a fresh random split and
// randomization field, then runs standard conformal prediction (no
// aggregation) and SACP on exactly the same split and u field.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "sacp/conformal.hpp"
#include "sacp/metrics.hpp"
#include "sacp/scores.hpp"
#include "sacp/synth.hpp"

namespace sacp {

using ojson = nlohmann::ordered_json;

struct RunConfig {
  double alpha = 0.05;
  ScoreFunctionConfig score{};
  SacpConfig sacp{};
  double cal_ratio = 0.5;
  std::size_t train_count = 128;
  std::size_t trials = 30;
  std::uint64_t seed = 0;
  MetricOptions metrics{};
  std::size_t threads = 1;  // never affects results

  void validate() const {
    require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidConfig, "alpha must lie in (0, 1)");
    require(cal_ratio > 0.0 && cal_ratio < 1.0, ErrorCode::InvalidConfig, "cal_ratio must lie in (0, 1)");
    require(trials >= 1, ErrorCode::InvalidConfig, "trials must be >= 1");
    require(metrics.min_bin_count >= 1, ErrorCode::InvalidConfig, "min_bin_count must be >= 1");
    score.validate();
    sacp.validate();
  }
};

struct TrialRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::size_t n_cal = 0;
  double tau_scp = 0.0;
  double tau_sacp = 0.0;
  MetricReport scp;
  MetricReport sacp;
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd out;
  if (xs.empty()) return out;
  for (double x : xs) out.mean += x;
  out.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return out;
}

struct MetricSummary {
  MeanStd coverage, size, sscv, oa, aa;
};

struct TrialSummary {
  RunConfig config;
  std::vector<TrialRecord> trials;
  MetricSummary scp;
  MetricSummary sacp;
  MeanStd size_delta;  // scp size - sacp size
  std::size_t sacp_smaller = 0;

  /// Recomputes every aggregate from the per-trial records.
  void summarize() {
    auto collect = [&](auto&& get) {
      std::vector<double> v;
      for (const auto& t : trials) v.push_back(get(t));
      return mean_std(v);
    };
    auto fill = [&](MetricSummary& s, auto member) {
      s.coverage = collect([&](const TrialRecord& t) { return (t.*member).coverage; });
      s.size = collect([&](const TrialRecord& t) { return (t.*member).mean_size; });
      s.sscv = collect([&](const TrialRecord& t) { return (t.*member).sscv; });
      s.oa = collect([&](const TrialRecord& t) { return (t.*member).oa; });
      s.aa = collect([&](const TrialRecord& t) { return (t.*member).aa; });
    };
    fill(scp, &TrialRecord::scp);
    fill(sacp, &TrialRecord::sacp);
    size_delta = collect([](const TrialRecord& t) { return t.scp.mean_size - t.sacp.mean_size; });
    sacp_smaller = 0;
    for (const auto& t : trials) sacp_smaller += t.sacp.mean_size < t.scp.mean_size ? 1 : 0;
  }
};

inline std::uint64_t trial_seed(std::uint64_t seed, std::size_t index) { return derive_seed(seed, index); }
inline std::uint64_t split_seed(std::uint64_t trial) { return derive_seed(trial, 0); }
inline std::uint64_t u_seed(std::uint64_t trial) { return derive_seed(trial, 1); }

inline TrialRecord run_trial(const ProbabilityGrid& grid, const LabelGrid& labels, const RunConfig& cfg, std::size_t index) {
  TrialRecord rec;
  rec.index = index;
  rec.seed = trial_seed(cfg.seed, index);
  const auto mask = sample_split(labels, cfg.train_count, cfg.cal_ratio, split_seed(rec.seed));
  SacpConfig standard = cfg.sacp;
  standard.iterations = 0;
  const auto scp = run_pipeline(grid, labels, mask, cfg.score, standard, cfg.alpha, u_seed(rec.seed));
  const auto sacp = run_pipeline(grid, labels, mask, cfg.score, cfg.sacp, cfg.alpha, u_seed(rec.seed));
  rec.n_cal = scp.calibration.n_cal;
  rec.tau_scp = scp.calibration.tau;
  rec.tau_sacp = sacp.calibration.tau;
  rec.scp = evaluate_sets(scp.sets, grid, labels, mask, cfg.alpha, cfg.metrics);
  rec.sacp = evaluate_sets(sacp.sets, grid, labels, mask, cfg.alpha, cfg.metrics);
  return rec;
}

inline TrialSummary run_experiment(const ProbabilityGrid& grid, const LabelGrid& labels, const RunConfig& cfg) {
  cfg.validate();
  require_same_extent(grid.extent(), labels.extent(), "probabilities/labels");
  TrialSummary summary;
  summary.config = cfg;
  summary.trials.resize(cfg.trials);

  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, cfg.trials));
  if (workers == 1) {
    for (std::size_t t = 0; t < cfg.trials; ++t) summary.trials[t] = run_trial(grid, labels, cfg, t);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t t = next++; t < cfg.trials; t = next++) summary.trials[t] = run_trial(grid, labels, cfg, t);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  summary.summarize();
  return summary;
}

enum class SweepParam { Lambda, K, Gamma, Alpha };

inline SweepParam parse_sweep_param(const std::string& s) {
  if (s == "lambda") return SweepParam::Lambda;
  if (s == "k") return SweepParam::K;
  if (s == "gamma") return SweepParam::Gamma;
  if (s == "alpha") return SweepParam::Alpha;
  fail(ErrorCode::InvalidConfig, "unknown sweep parameter '" + s + "' (lambda|k|gamma|alpha)");
}

inline std::string to_string(SweepParam p) {
  switch (p) {
    case SweepParam::Lambda: return "lambda";
    case SweepParam::K: return "k";
    case SweepParam::Gamma: return "gamma";
    case SweepParam::Alpha: return "alpha";
  }
  return "?";
}

inline RunConfig with_param(RunConfig cfg, SweepParam param, double value) {
  switch (param) {
    case SweepParam::Lambda: cfg.sacp.lambda = value; break;
    case SweepParam::K:
      require(value >= 0.0 && value == std::floor(value), ErrorCode::InvalidConfig, "k must be a non-negative integer");
      cfg.sacp.iterations = static_cast<std::int64_t>(value);
      break;
    case SweepParam::Gamma: cfg.cal_ratio = value; break;
    case SweepParam::Alpha: cfg.alpha = value; break;
  }
  cfg.validate();
  return cfg;
}

/// One summary per value; everything else, including the base seed, fixed.
inline std::vector<TrialSummary> sweep(const ProbabilityGrid& grid, const LabelGrid& labels, const RunConfig& cfg,
                                       SweepParam param, const std::vector<double>& values) {
  require(!values.empty(), ErrorCode::InvalidConfig, "sweep needs at least one value");
  std::vector<RunConfig> configs;
  for (double v : values) configs.push_back(with_param(cfg, param, v));
  std::vector<TrialSummary> out;
  for (const auto& c : configs) out.push_back(run_experiment(grid, labels, c));
  return out;
}

// ---- JSON ----------------------------------------------------------------

/// +inf thresholds are written as the string "inf".
inline ojson number_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline ojson to_json(const ScoreFunctionConfig& s) {
  return ojson{{"kind", to_string(s.kind)}, {"raps_lambda", s.raps_lambda}, {"raps_kreg", s.raps_kreg}, {"saps_lambda", s.saps_lambda}};
}

inline ojson to_json(const SacpConfig& s) {
  ojson excluded = ojson::array();
  for (auto r : {Role::Ignore, Role::Train, Role::Cal, Role::Test}) {
    if (s.neighborhood.exclude_roles.contains(r)) excluded.push_back(to_string(r));
  }
  return ojson{{"lambda", s.lambda},
               {"k", s.iterations},
               {"neighborhood", {{"shape", to_string(s.neighborhood.shape)}, {"radius", s.neighborhood.radius}, {"exclude_roles", excluded}}}};
}

inline ojson to_json(const RunConfig& c) {
  ojson bins = ojson::array();
  for (const auto& b : c.metrics.bins) bins.push_back({b.lo, b.hi});
  return ojson{{"alpha", c.alpha},         {"score", to_json(c.score)},      {"sacp", to_json(c.sacp)},
               {"cal_ratio", c.cal_ratio}, {"train_count", c.train_count},   {"trials", c.trials},
               {"seed", c.seed},           {"sscv_bins", bins},              {"sscv_min_bin_count", c.metrics.min_bin_count}};
}

inline ojson to_json(const MetricReport& m) {
  ojson bins = ojson::array();
  for (const auto& b : m.per_bin) bins.push_back({{"lo", b.bin.lo}, {"hi", b.bin.hi}, {"count", b.count}, {"coverage", b.coverage}});
  return ojson{{"n_test", m.n_test}, {"covered", m.covered}, {"coverage", m.coverage}, {"size", m.mean_size},
               {"sscv", m.sscv},     {"oa", m.oa},           {"aa", m.aa},             {"per_bin", bins}};
}

inline ojson to_json(const MeanStd& m) { return ojson{{"mean", m.mean}, {"std", m.std}}; }

inline ojson to_json(const MetricSummary& s) {
  return ojson{{"coverage", to_json(s.coverage)}, {"size", to_json(s.size)}, {"sscv", to_json(s.sscv)},
               {"oa", to_json(s.oa)},             {"aa", to_json(s.aa)}};
}

inline ojson to_json(const TrialSummary& s) {
  ojson trials = ojson::array();
  for (const auto& t : s.trials) {
    trials.push_back({{"trial", t.index},
                      {"seed", t.seed},
                      {"n_cal", t.n_cal},
                      {"tau_scp", number_or_inf(t.tau_scp)},
                      {"tau_sacp", number_or_inf(t.tau_sacp)},
                      {"scp", to_json(t.scp)},
                      {"sacp", to_json(t.sacp)}});
  }
  return ojson{{"config", to_json(s.config)},
               {"scp", to_json(s.scp)},
               {"sacp", to_json(s.sacp)},
               {"size_delta", to_json(s.size_delta)},
               {"sacp_smaller_trials", s.sacp_smaller},
               {"trials", trials}};
}

inline ojson to_json(const SynthConfig& c) {
  return ojson{{"height", c.height},         {"width", c.width},   {"classes", c.num_classes}, {"smoothness", c.smoothness},
               {"signal", c.signal},         {"noise_seed", c.noise_seed}, {"label_seed", c.label_seed}};
}

namespace detail {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline RoleSet parse_roles(const nlohmann::json& arr) {
  RoleSet set;
  for (const auto& r : arr) {
    const auto s = r.get<std::string>();
    bool found = false;
    for (auto role : {Role::Ignore, Role::Train, Role::Cal, Role::Test}) {
      if (to_string(role) == s) {
        set.insert(role);
        found = true;
      }
    }
    require(found, ErrorCode::InvalidConfig, "unknown role '" + s + "'");
  }
  return set;
}

}  // namespace detail

/// Reads nested keys (score.kind, sacp.lambda, ...); absent keys keep `base`.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig cfg = {}) {
  try {
    detail::read_opt(j, "alpha", cfg.alpha);
    detail::read_opt(j, "cal_ratio", cfg.cal_ratio);
    detail::read_opt(j, "train_count", cfg.train_count);
    detail::read_opt(j, "trials", cfg.trials);
    detail::read_opt(j, "seed", cfg.seed);
    detail::read_opt(j, "sscv_min_bin_count", cfg.metrics.min_bin_count);
    if (j.contains("sscv_bins")) {
      cfg.metrics.bins.clear();
      for (const auto& b : j.at("sscv_bins")) cfg.metrics.bins.push_back({b.at(0).get<std::size_t>(), b.at(1).get<std::size_t>()});
    }
    if (j.contains("score")) {
      const auto& s = j.at("score");
      if (s.contains("kind")) cfg.score.kind = parse_score_kind(s.at("kind").get<std::string>());
      detail::read_opt(s, "raps_lambda", cfg.score.raps_lambda);
      detail::read_opt(s, "raps_kreg", cfg.score.raps_kreg);
      detail::read_opt(s, "saps_lambda", cfg.score.saps_lambda);
    }
    if (j.contains("sacp")) {
      const auto& s = j.at("sacp");
      detail::read_opt(s, "lambda", cfg.sacp.lambda);
      detail::read_opt(s, "k", cfg.sacp.iterations);
      if (s.contains("neighborhood")) {
        const auto& n = s.at("neighborhood");
        if (n.contains("shape")) cfg.sacp.neighborhood.shape = parse_neighborhood(n.at("shape").get<std::string>());
        detail::read_opt(n, "radius", cfg.sacp.neighborhood.radius);
        if (n.contains("exclude_roles")) cfg.sacp.neighborhood.exclude_roles = detail::parse_roles(n.at("exclude_roles"));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("run config: ") + e.what());
  }
  return cfg;
}

inline SynthConfig synth_config_from_json(const nlohmann::json& j, SynthConfig cfg = {}) {
  try {
    detail::read_opt(j, "height", cfg.height);
    detail::read_opt(j, "width", cfg.width);
    detail::read_opt(j, "classes", cfg.num_classes);
    detail::read_opt(j, "smoothness", cfg.smoothness);
    detail::read_opt(j, "signal", cfg.signal);
    detail::read_opt(j, "noise_seed", cfg.noise_seed);
    detail::read_opt(j, "label_seed", cfg.label_seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("synth config: ") + e.what());
  }
  return cfg;
}

}  // namespace sacp
