#pragma once

// Oracle report for one seeded split of a scene: the R statistic and the
// integrated-size identity for standard scores, a permutation test of
// cal/test exchangeability, and the R-vs-size equivalence between standard
// and aggregated scores.

#include <cstdint>

#include "sacp/experiment.hpp"
#include "sacp/oracle.hpp"

namespace sacp {

struct OracleReport {
  double r_statistic = 0.0;
  double integral_lhs = 0.0;
  double integral_rhs_closed_form = 0.0;
  double integral_lhs_direct = 0.0;
  double relative_gap = 0.0;
  bool ties_detected = false;
  bool identity_pass = false;
  double permutation_pvalue = 0.0;
  std::size_t permutations = 0;
  oracle::RankSizeResult rank_size;

  bool pass() const { return identity_pass && rank_size.holds && integral_lhs == integral_lhs_direct; }
};

inline constexpr double kIdentityTolerance = 1e-9;

inline OracleReport run_verification(const ProbabilityGrid& grid, const LabelGrid& labels, const RunConfig& cfg,
                                     std::size_t permutations = 999) {
  cfg.validate();
  const auto seed = trial_seed(cfg.seed, 0);
  const auto mask = sample_split(labels, cfg.train_count, cfg.cal_ratio, split_seed(seed));
  const auto raw = score_field(grid, mask, cfg.score, RandomizationField(u_seed(seed)));
  const auto aggregated = aggregate(raw, mask, cfg.sacp);
  const auto plain = oracle::extract_sample(raw, labels, mask);
  const auto spatial = oracle::extract_sample(aggregated, labels, mask);

  OracleReport rep;
  const auto integral = oracle::integrated_set_size(plain.cal, plain.test_all_labels);
  rep.r_statistic = integral.r;
  rep.integral_lhs = integral.lhs;
  rep.integral_lhs_direct = integral.lhs_direct;
  rep.integral_rhs_closed_form = integral.rhs;
  rep.relative_gap = integral.relative_gap();
  rep.ties_detected = integral.ties;
  rep.identity_pass = !integral.ties && rep.relative_gap <= kIdentityTolerance;
  rep.permutations = permutations;
  rep.permutation_pvalue =
      oracle::exchangeability_permutation_test(plain.cal, plain.test_true_labels, permutations, derive_seed(seed, 2));
  rep.rank_size = oracle::rank_size_check(plain, spatial);
  return rep;
}

inline ojson to_json(const OracleReport& r) {
  return ojson{{"r_statistic", r.r_statistic},
               {"integral_lhs", r.integral_lhs},
               {"integral_lhs_direct", r.integral_lhs_direct},
               {"integral_rhs_closed_form", r.integral_rhs_closed_form},
               {"relative_gap", r.relative_gap},
               {"ties_detected", r.ties_detected},
               {"identity_pass", r.identity_pass},
               {"permutation_pvalue", r.permutation_pvalue},
               {"permutations", r.permutations},
               {"rank_size_equivalence",
                {{"r_standard", r.rank_size.r_a},
                 {"r_spatial", r.rank_size.r_b},
                 {"integrated_size_standard", r.rank_size.size_a},
                 {"integrated_size_spatial", r.rank_size.size_b},
                 {"holds", r.rank_size.holds}}},
               {"pass", r.pass()}};
}

}  // namespace sacp
