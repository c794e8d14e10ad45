#pragma once

// Command-line front end. Exit codes: 0 success, 1 usage or validation
// error, 2 filesystem error.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sacp/conformal.hpp"
#include "sacp/experiment.hpp"
#include "sacp/io.hpp"
#include "sacp/metrics.hpp"
#include "sacp/pgm.hpp"
#include "sacp/scores.hpp"
#include "sacp/synth.hpp"
#include "sacp/verify.hpp"

namespace sacp::cli {

namespace detail {

inline nlohmann::json read_json_file(const fs::path& path) {
  require(fs::exists(path), ErrorCode::MissingFile, path.string());
  std::ifstream in(path);
  require(in.good(), ErrorCode::MissingFile, path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
  }
}

inline void emit(const ojson& doc, const std::string& out_path, std::ostream& out) {
  const std::string text = doc.dump(2) + "\n";
  if (out_path.empty()) {
    out << text;
    return;
  }
  const fs::path p(out_path);
  if (p.has_parent_path()) sacp::detail::prepare_dir(p.parent_path());
  sacp::detail::write_file(p, text);
}

/// Flags that override a RunConfig (itself optionally loaded from --config).
struct RunFlags {
  std::string config;
  std::optional<double> alpha, cal_ratio, raps_lambda, saps_lambda, sacp_lambda;
  std::optional<std::int64_t> raps_kreg, sacp_k;
  std::optional<int> radius;
  std::optional<std::string> score, neighborhood;
  std::optional<std::size_t> train_count, trials, threads, min_bin_count;
  std::optional<std::uint64_t> seed;

  void add_score(CLI::App* app) {
    app->add_option("--score", score, "score function: aps|raps|saps");
    app->add_option("--raps.lambda", raps_lambda, "RAPS rank penalty weight");
    app->add_option("--raps.kreg", raps_kreg, "RAPS rank offset");
    app->add_option("--saps.lambda", saps_lambda, "SAPS rank weight");
    app->add_option("--seed", seed, "base seed");
  }
  void add_sacp(CLI::App* app) {
    app->add_option("--sacp.lambda", sacp_lambda, "aggregation weight in [0, 1]");
    app->add_option("--sacp.k", sacp_k, "aggregation iterations");
    app->add_option("--sacp.neighborhood", neighborhood, "four|eight|chebyshev");
    app->add_option("--sacp.radius", radius, "chebyshev radius");
  }
  void add_all(CLI::App* app) {
    app->add_option("--config", config, "run config JSON");
    app->add_option("--alpha", alpha, "target error rate");
    app->add_option("--cal-ratio", cal_ratio, "fraction of non-train pixels used for calibration");
    app->add_option("--train-count", train_count, "pixels assigned to Train");
    app->add_option("--trials", trials, "repeated random splits");
    app->add_option("--threads", threads, "worker threads (results are identical for any value)");
    app->add_option("--sscv.min-count", min_bin_count, "minimum bin population for SSCV");
    add_score(app);
    add_sacp(app);
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config.empty()) cfg = run_config_from_json(read_json_file(config));
    if (alpha) cfg.alpha = *alpha;
    if (cal_ratio) cfg.cal_ratio = *cal_ratio;
    if (train_count) cfg.train_count = *train_count;
    if (trials) cfg.trials = *trials;
    if (threads) cfg.threads = *threads;
    if (min_bin_count) cfg.metrics.min_bin_count = *min_bin_count;
    if (seed) cfg.seed = *seed;
    if (score) cfg.score.kind = parse_score_kind(*score);
    if (raps_lambda) cfg.score.raps_lambda = *raps_lambda;
    if (raps_kreg) cfg.score.raps_kreg = *raps_kreg;
    if (saps_lambda) cfg.score.saps_lambda = *saps_lambda;
    if (sacp_lambda) cfg.sacp.lambda = *sacp_lambda;
    if (sacp_k) cfg.sacp.iterations = *sacp_k;
    if (neighborhood) cfg.sacp.neighborhood.shape = parse_neighborhood(*neighborhood);
    if (radius) cfg.sacp.neighborhood.radius = *radius;
    cfg.validate();
    return cfg;
  }
};

inline std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::logic_error&) {
      fail(ErrorCode::InvalidConfig, "bad value '" + cell + "' in --values");
    }
  }
  return out;
}

inline fs::path or_default(const std::string& given, const fs::path& data, const char* name) {
  return given.empty() ? data / name : fs::path(given);
}

}  // namespace detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Conformal prediction sets for per-pixel class probability maps"};
  app.require_subcommand(1);

  std::string data = ".";
  std::string out_path, mask_path, scores_path, labels_path, cal_path, map_path, sets_path;

  // synth
  auto* synth = app.add_subcommand("synth", "generate a seeded synthetic scene");
  SynthConfig synth_cfg;
  std::string synth_config;
  std::optional<std::uint64_t> synth_seed;
  synth->add_option("--out", out_path, "output directory")->required();
  synth->add_option("--config", synth_config, "synth config JSON");
  synth->add_option("--height", synth_cfg.height);
  synth->add_option("--width", synth_cfg.width);
  synth->add_option("--classes", synth_cfg.num_classes);
  synth->add_option("--smoothness", synth_cfg.smoothness, "spatial correlation length in pixels");
  synth->add_option("--signal", synth_cfg.signal, "class separation of the per-pixel evidence");
  synth->add_option("--seed", synth_seed, "sets label and noise seeds");
  synth->add_option("--label-seed", synth_cfg.label_seed);
  synth->add_option("--noise-seed", synth_cfg.noise_seed);

  // split
  auto* split = app.add_subcommand("split", "sample a Train/Cal/Test mask");
  std::size_t split_train = 128;
  double split_ratio = 0.5;
  std::uint64_t split_seed_value = 0;
  split->add_option("--data", data, "scene directory");
  split->add_option("--labels", labels_path);
  split->add_option("--train-count", split_train);
  split->add_option("--cal-ratio", split_ratio);
  split->add_option("--seed", split_seed_value);
  split->add_option("--out", out_path, "mask container (default <data>/mask)");

  // score
  auto* score = app.add_subcommand("score", "compute non-conformity scores");
  detail::RunFlags score_flags;
  score->add_option("--data", data);
  score->add_option("--mask", mask_path);
  score->add_option("--config", score_flags.config);
  score_flags.add_score(score);
  score->add_option("--out", out_path, "score container (default <data>/scores)");

  // aggregate
  auto* aggregate_cmd = app.add_subcommand("aggregate", "spatially aggregate a score field");
  detail::RunFlags agg_flags;
  aggregate_cmd->add_option("--data", data);
  aggregate_cmd->add_option("--scores", scores_path);
  aggregate_cmd->add_option("--mask", mask_path);
  aggregate_cmd->add_option("--config", agg_flags.config);
  agg_flags.add_sacp(aggregate_cmd);
  aggregate_cmd->add_option("--out", out_path, "score container (default <data>/scores_sacp)");

  // calibrate
  auto* calibrate_cmd = app.add_subcommand("calibrate", "conformal threshold from Cal pixels");
  double cal_alpha = 0.05;
  calibrate_cmd->add_option("--data", data);
  calibrate_cmd->add_option("--scores", scores_path);
  calibrate_cmd->add_option("--labels", labels_path);
  calibrate_cmd->add_option("--mask", mask_path);
  calibrate_cmd->add_option("--alpha", cal_alpha);
  calibrate_cmd->add_option("--out", out_path, "calibration JSON (default stdout)");

  // predict
  auto* predict = app.add_subcommand("predict", "prediction sets for Test pixels");
  bool include_cal = false;
  predict->add_option("--data", data);
  predict->add_option("--scores", scores_path);
  predict->add_option("--mask", mask_path);
  predict->add_option("--calibration", cal_path)->required();
  predict->add_option("--out", out_path, "sets container (default <data>/sets)");
  predict->add_option("--map", map_path, "also write a set-size PGM");
  predict->add_flag("--include-cal", include_cal, "also build sets for Cal pixels");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "repeated-trial SCP vs SACP report, or metrics of saved sets");
  detail::RunFlags eval_flags;
  evaluate->add_option("--data", data);
  evaluate->add_option("--sets", sets_path, "evaluate these saved sets against <data>/mask instead");
  evaluate->add_option("--mask", mask_path);
  evaluate->add_option("--out", out_path, "report JSON (default stdout)");
  evaluate->add_option("--map", map_path, "set-size PGM of the first trial's SACP sets");
  eval_flags.add_all(evaluate);

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "repeat evaluate over one parameter");
  detail::RunFlags sweep_flags;
  std::string sweep_param, sweep_values;
  sweep_cmd->add_option("--data", data);
  sweep_cmd->add_option("--param", sweep_param, "lambda|k|gamma|alpha")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma-separated values")->required();
  sweep_cmd->add_option("--out", out_path);
  sweep_flags.add_all(sweep_cmd);

  // verify
  auto* verify = app.add_subcommand("verify", "oracle identities on a seeded split");
  detail::RunFlags verify_flags;
  std::size_t permutations = 999;
  verify->add_option("--data", data, "scene directory (default: generate the default synthetic scene)");
  verify->add_option("--permutations", permutations);
  verify->add_option("--out", out_path);
  verify_flags.add_all(verify);
  bool verify_has_data = false;

  try {
    app.parse(argc, argv);
    verify_has_data = verify->count("--data") > 0;
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }

  const fs::path dir(data);
  try {
    if (*synth) {
      SynthConfig cfg = synth_config.empty() ? synth_cfg : synth_config_from_json(detail::read_json_file(synth_config), synth_cfg);
      if (synth_seed) {
        cfg.label_seed = *synth_seed;
        cfg.noise_seed = derive_seed(*synth_seed, 1);
      }
      const auto scene = generate_synthetic(cfg);
      const fs::path o(out_path);
      save_grid(scene.probs, o / "probabilities");
      save_grid(scene.labels, o / "labels");
      detail::emit(to_json(cfg), (o / "synth.json").string(), out);
    } else if (*split) {
      const auto labels = load_labels(detail::or_default(labels_path, dir, "labels"));
      const auto mask = sample_split(labels, split_train, split_ratio, split_seed_value);
      save_grid(mask, detail::or_default(out_path, dir, "mask"));
    } else if (*score) {
      const auto cfg = score_flags.resolve();
      const auto probs = load_probabilities(dir / "probabilities");
      const auto mask = load_mask(detail::or_default(mask_path, dir, "mask"));
      const auto field = score_field(probs, mask, cfg.score, RandomizationField(cfg.seed));
      save_grid(field, detail::or_default(out_path, dir, "scores"));
    } else if (*aggregate_cmd) {
      const auto cfg = agg_flags.resolve();
      const auto field = load_scores(detail::or_default(scores_path, dir, "scores"));
      const auto mask = load_mask(detail::or_default(mask_path, dir, "mask"));
      save_grid(aggregate(field, mask, cfg.sacp), detail::or_default(out_path, dir, "scores_sacp"));
    } else if (*calibrate_cmd) {
      const auto field = load_scores(detail::or_default(scores_path, dir, "scores"));
      const auto labels = load_labels(detail::or_default(labels_path, dir, "labels"));
      const auto mask = load_mask(detail::or_default(mask_path, dir, "mask"));
      const auto cal = calibrate(field, labels, mask, cal_alpha);
      detail::emit(ojson{{"tau", number_or_inf(cal.tau)}, {"alpha", cal.alpha}, {"n_cal", cal.n_cal},
                         {"sorted_cal_scores", cal.sorted_cal_scores}},
                   out_path, out);
    } else if (*predict) {
      const auto field = load_scores(detail::or_default(scores_path, dir, "scores"));
      const auto mask = load_mask(detail::or_default(mask_path, dir, "mask"));
      const auto j = detail::read_json_file(cal_path);
      CalibrationResult cal;
      try {
        cal.tau = j.at("tau").is_string() ? std::numeric_limits<double>::infinity() : j.at("tau").get<double>();
        cal.alpha = j.at("alpha").get<double>();
        cal.n_cal = j.at("n_cal").get<std::size_t>();
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::InvalidConfig, cal_path + ": " + e.what());
      }
      const auto sets = predict_sets(field, mask, cal, include_cal);
      save_grid(sets, detail::or_default(out_path, dir, "sets"));
      if (!map_path.empty()) render_size_map(sets, map_path);
    } else if (*evaluate) {
      const auto cfg = eval_flags.resolve();
      const auto probs = load_probabilities(dir / "probabilities");
      const auto labels = load_labels(dir / "labels");
      if (!sets_path.empty()) {
        const auto sets = load_sets(sets_path);
        const auto mask = load_mask(detail::or_default(mask_path, dir, "mask"));
        detail::emit(to_json(evaluate_sets(sets, probs, labels, mask, cfg.alpha, cfg.metrics)), out_path, out);
        if (!map_path.empty()) render_size_map(sets, map_path);
      } else {
        const auto summary = run_experiment(probs, labels, cfg);
        detail::emit(to_json(summary), out_path, out);
        if (!map_path.empty()) {
          const auto seed = trial_seed(cfg.seed, 0);
          const auto mask = sample_split(labels, cfg.train_count, cfg.cal_ratio, split_seed(seed));
          const auto run = run_pipeline(probs, labels, mask, cfg.score, cfg.sacp, cfg.alpha, u_seed(seed));
          render_size_map(run.sets, map_path);
        }
      }
    } else if (*sweep_cmd) {
      const auto cfg = sweep_flags.resolve();
      const auto param = parse_sweep_param(sweep_param);
      const auto values = detail::parse_values(sweep_values);
      const auto probs = load_probabilities(dir / "probabilities");
      const auto labels = load_labels(dir / "labels");
      const auto results = sweep(probs, labels, cfg, param, values);
      ojson doc = ojson::array();
      for (std::size_t i = 0; i < results.size(); ++i) {
        doc.push_back({{"param", to_string(param)}, {"value", values[i]}, {"summary", to_json(results[i])}});
      }
      detail::emit(doc, out_path, out);
    } else if (*verify) {
      const auto cfg = verify_flags.resolve();
      std::optional<SyntheticScene> scene;
      if (verify_has_data) {
        scene.emplace(SyntheticScene{load_probabilities(dir / "probabilities"), load_labels(dir / "labels")});
      } else {
        SynthConfig sc;
        sc.label_seed = cfg.seed;
        sc.noise_seed = derive_seed(cfg.seed, 1);
        scene.emplace(generate_synthetic(sc));
      }
      const auto report = run_verification(scene->probs, scene->labels, cfg, permutations);
      detail::emit(to_json(report), out_path, out);
      return report.pass() ? 0 : 1;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.is_io() ? 2 : 1;
  } catch (const nlohmann::json::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace sacp::cli
