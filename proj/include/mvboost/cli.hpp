#pragma once

#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "mvboost/boosting.hpp"
#include "mvboost/config.hpp"
#include "mvboost/csv.hpp"
#include "mvboost/data_io.hpp"
#include "mvboost/error.hpp"
#include "mvboost/evaluation.hpp"
#include "mvboost/influence.hpp"
#include "mvboost/model_io.hpp"

namespace mvboost::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

namespace detail {

namespace fs = std::filesystem;

inline std::string provenance(std::optional<std::uint64_t> seed) {
  std::string s = kToolVersion;
  if (seed) s += " seed=" + std::to_string(*seed);
  return s;
}

inline fs::path with_suffix(fs::path base, const std::string& suffix) {
  base += suffix;
  return base;
}

struct HyperParamFlags {
  std::string config;
  std::optional<std::size_t> n_trees, max_depth, min_node_size;
  std::optional<double> shrinkage, subsample, holdout_fraction;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "key = value hyperparameter file")
        ->check(CLI::ExistingFile);
    app->add_option("--n-trees", n_trees, "number of boosting iterations");
    app->add_option("--shrinkage", shrinkage, "learning rate in (0, 1]");
    app->add_option("--max-depth", max_depth, "maximum tree depth");
    app->add_option("--min-node-size", min_node_size, "minimum rows per leaf");
    app->add_option("--subsample", subsample, "row subsample fraction in (0, 1]");
    app->add_option("--holdout-fraction", holdout_fraction,
                    "internal holdout for best-iteration selection, 0 disables");
    app->add_option("--seed", seed, "boosting seed");
  }

  HyperParams resolve() const {
    HyperParams hp = config.empty() ? HyperParams{} : read_config(config);
    if (n_trees) hp.n_trees = *n_trees;
    if (max_depth) hp.max_depth = *max_depth;
    if (min_node_size) hp.min_node_size = *min_node_size;
    if (shrinkage) hp.shrinkage = *shrinkage;
    if (subsample) hp.subsample = *subsample;
    if (holdout_fraction) hp.holdout_fraction = *holdout_fraction;
    if (seed) hp.seed = *seed;
    hp.validate();
    return hp;
  }
};

inline Linkage parse_linkage(const std::string& s) {
  if (s == "single") return Linkage::kSingle;
  if (s == "average") return Linkage::kAverage;
  return Linkage::kComplete;
}

// `a=1,b=ria` -> one scenario with two settings.
inline Scenario parse_scenario(const std::string& text) {
  Scenario sc{text, {}};
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string part =
        text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto eq = part.rfind('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == part.size())
      throw CLI::ValidationError("--set", "expected feature=value, got '" + part + "'");
    const std::string feature = part.substr(0, eq);
    const std::string value = part.substr(eq + 1);
    if (auto v = mvboost::detail::parse_number(value))
      sc.settings.push_back({feature, *v});
    else
      sc.settings.push_back({feature, value});
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return sc;
}

inline std::string fixed_score(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

inline std::string format_predictions_csv(const Matrix& pred,
                                          const std::vector<std::string>& names,
                                          std::string_view comment) {
  std::string out = "# " + std::string(comment) + "\n" + csv::join(names) + "\n";
  for (std::size_t r = 0; r < pred.rows(); ++r) {
    csv::Record rec;
    for (std::size_t q = 0; q < pred.cols(); ++q) rec.push_back(csv::format_double(pred(r, q)));
    out += csv::join(rec) + "\n";
  }
  return out;
}

}  // namespace detail

// Entry point shared by the executable and the tests. Returns the process
// exit status; diagnostics go to `err`, tables to `out`.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  namespace fs = std::filesystem;
  using detail::provenance;

  CLI::App app{"Multi-output gradient tree boosting with influence analysis", "mvboost"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "write a seeded synthetic benchmark dataset");
  SyntheticSpec synth_spec;
  std::string synth_out, synth_schema_out;
  synth->add_option("--n", synth_spec.n, "row count (>= 50)")->required();
  synth->add_option("--seed", synth_spec.seed, "generator seed")->required();
  synth->add_option("--noise-corr", synth_spec.noise_corr, "noise correlation in (-1, 1)")
      ->required();
  synth->add_option("--noise-sd", synth_spec.noise_sd, "noise standard deviation");
  synth->add_option("--y2-own", synth_spec.y2_own, "weight of y2's own x3^2 signal");
  synth->add_option("--y2-shared", synth_spec.y2_shared, "weight of x1 in y2");
  synth->add_option("--out", synth_out, "dataset CSV path")->required();
  synth->add_option("--schema-out", synth_schema_out, "also write the matching schema file");

  // train
  auto* train = app.add_subcommand("train", "fit a model and write it with its trace");
  std::string train_data, train_schema, train_model, train_trace;
  bool train_impute = false;
  detail::HyperParamFlags train_hp;
  train->add_option("--data", train_data)->required()->check(CLI::ExistingFile);
  train->add_option("--schema", train_schema)->required()->check(CLI::ExistingFile);
  train->add_option("--out-model", train_model, "model JSON path")->required();
  train->add_option("--trace-out", train_trace, "trace CSV path (default <out-model>.trace.csv)");
  train->add_flag("--impute", train_impute, "mean/mode imputation of missing features");
  train_hp.attach(train);

  // predict
  auto* pred = app.add_subcommand("predict", "predict on the original response scale");
  std::string pred_model, pred_data, pred_out;
  pred->add_option("--model", pred_model)->required()->check(CLI::ExistingFile);
  pred->add_option("--data", pred_data)->required()->check(CLI::ExistingFile);
  pred->add_option("--out", pred_out)->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "seeded 80/20 out-of-sample evaluation");
  std::string eval_data, eval_schema, eval_out, eval_pairs;
  std::uint64_t eval_seed = 0;
  bool eval_impute = false;
  detail::HyperParamFlags eval_hp;
  eval->add_option("--data", eval_data)->required()->check(CLI::ExistingFile);
  eval->add_option("--schema", eval_schema)->required()->check(CLI::ExistingFile);
  eval->add_option("--split-seed", eval_seed)->required();
  eval->add_option("--out", eval_out, "report CSV path");
  eval->add_option("--pairs-out", eval_pairs, "observed-vs-predicted CSV path");
  eval->add_flag("--impute", eval_impute);
  eval_hp.attach(eval);

  // compare
  auto* cmp = app.add_subcommand("compare", "joint versus per-response models");
  std::string cmp_data, cmp_schema, cmp_out;
  std::uint64_t cmp_seed = 0;
  bool cmp_impute = false;
  detail::HyperParamFlags cmp_hp;
  cmp->add_option("--data", cmp_data)->required()->check(CLI::ExistingFile);
  cmp->add_option("--schema", cmp_schema)->required()->check(CLI::ExistingFile);
  cmp->add_option("--split-seed", cmp_seed)->required();
  cmp->add_option("--out", cmp_out, "report CSV path");
  cmp->add_flag("--impute", cmp_impute);
  cmp_hp.attach(cmp);

  // importance
  auto* imp = app.add_subcommand("importance", "relative influence and global ranking");
  std::string imp_model, imp_out, imp_trace;
  imp->add_option("--model", imp_model)->required()->check(CLI::ExistingFile);
  imp->add_option("--out", imp_out, "output prefix")->required();
  imp->add_option("--trace", imp_trace, "trace CSV; adds covariance-explained output")
      ->check(CLI::ExistingFile);

  // cluster
  auto* clu = app.add_subcommand("cluster", "cluster predictors or response pairs");
  std::string clu_model, clu_trace, clu_target, clu_out, clu_linkage = "complete";
  clu->add_option("--model", clu_model)->required()->check(CLI::ExistingFile);
  clu->add_option("--trace", clu_trace)->required()->check(CLI::ExistingFile);
  clu->add_option("--target", clu_target)
      ->required()
      ->check(CLI::IsMember({"predictors", "response-pairs"}));
  clu->add_option("--out", clu_out, "output prefix")->required();
  clu->add_option("--linkage", clu_linkage)
      ->check(CLI::IsMember({"complete", "single", "average"}));

  // scenario
  auto* scn = app.add_subcommand("scenario", "what-if interventions on predictor values");
  std::string scn_model, scn_data, scn_out, scn_rows_out;
  std::vector<std::string> scn_sets;
  scn->add_option("--model", scn_model)->required()->check(CLI::ExistingFile);
  scn->add_option("--data", scn_data)->required()->check(CLI::ExistingFile);
  scn->add_option("--set", scn_sets, "feature=value[,feature=value...]; one scenario per flag")
      ->required();
  scn->add_option("--out", scn_out, "delta CSV path");
  scn->add_option("--rows-out", scn_rows_out, "per-row scenario predictions CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "mvboost: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (*synth) {
      const Dataset d = generate_synthetic(synth_spec);
      csv::write_atomic(synth_out, format_dataset_csv(d, provenance(synth_spec.seed)));
      if (!synth_schema_out.empty()) csv::write_atomic(synth_schema_out, format_schema(d.schema));
    } else if (*train) {
      const HyperParams hp = train_hp.resolve();
      const Dataset d = load_csv(train_data, read_schema(train_schema), train_impute);
      const FitResult res = fit(d, hp);
      const fs::path trace_path =
          train_trace.empty() ? detail::with_suffix(train_model, ".trace.csv") : fs::path(train_trace);
      save_model(res.model, train_model);
      csv::write_atomic(trace_path,
                        format_trace_csv(res.trace, res.model.response_names, provenance(hp.seed)));
      out << "trained " << res.model.trees.size() << " trees, best_iteration "
          << res.model.best_iteration << "\n";
    } else if (*pred) {
      const BoostedModel model = load_model(pred_model);
      const Dataset d = load_csv_for_model(pred_data, model.schema);
      csv::write_atomic(pred_out, detail::format_predictions_csv(predict(model, d.features),
                                                                 model.response_names,
                                                                 provenance(std::nullopt)));
    } else if (*eval) {
      const HyperParams hp = eval_hp.resolve();
      const Dataset d = load_csv(eval_data, read_schema(eval_schema), eval_impute);
      const EvalReport report = evaluate(d, hp, eval_seed);
      out << format_eval_table(report);
      if (!eval_out.empty())
        csv::write_atomic(eval_out, format_eval_csv(report, provenance(eval_seed)));
      if (!eval_pairs.empty())
        csv::write_atomic(eval_pairs, format_observed_predicted_csv(report, provenance(eval_seed)));
    } else if (*cmp) {
      const HyperParams hp = cmp_hp.resolve();
      const Dataset d = load_csv(cmp_data, read_schema(cmp_schema), cmp_impute);
      const ComparisonReport report = compare_models(d, hp, cmp_seed);
      out << format_comparison_table(report);
      if (!cmp_out.empty())
        csv::write_atomic(cmp_out, format_comparison_csv(report, provenance(cmp_seed)));
    } else if (*imp) {
      const BoostedModel model = load_model(imp_model);
      const InfluenceMatrix infl = relative_influence(model);
      const auto ranking = global_importance(infl);
      const auto tag = provenance(std::nullopt);
      csv::write_atomic(detail::with_suffix(imp_out, ".influence.csv"),
                        format_influence_csv(infl, tag));
      csv::write_atomic(detail::with_suffix(imp_out, ".ranking.csv"),
                        format_ranking_csv(ranking, tag));
      if (!imp_trace.empty())
        csv::write_atomic(detail::with_suffix(imp_out, ".covariance.csv"),
                          format_pair_influence_csv(
                              covariance_explained(model, load_trace(imp_trace)), tag));
      for (const auto& e : ranking) out << e.feature << "\t" << detail::fixed_score(e.score) << "\n";
    } else if (*clu) {
      const BoostedModel model = load_model(clu_model);
      const PairInfluenceTensor tensor = covariance_explained(model, load_trace(clu_trace));
      const DistanceMatrix dist = clu_target == "predictors" ? predictor_distances(tensor)
                                                             : response_pair_distances(tensor);
      const Dendrogram dg = hierarchical_cluster(dist, detail::parse_linkage(clu_linkage));
      csv::write_atomic(detail::with_suffix(clu_out, ".distances.csv"),
                        format_distance_csv(dist, provenance(std::nullopt)));
      csv::write_atomic(detail::with_suffix(clu_out, ".dendrogram.json"), dendrogram_to_json(dg));
      csv::write_atomic(detail::with_suffix(clu_out, ".newick"), dendrogram_to_newick(dg));
    } else if (*scn) {
      const BoostedModel model = load_model(scn_model);
      const Dataset d = load_csv_for_model(scn_data, model.schema);
      std::vector<Scenario> scenarios;
      for (const auto& s : scn_sets) scenarios.push_back(detail::parse_scenario(s));
      const auto results = scenario_compare(model, d.features, scenarios);
      out << format_scenario_table(results);
      if (!scn_out.empty())
        csv::write_atomic(scn_out, format_scenario_csv(results, provenance(std::nullopt)));
      if (!scn_rows_out.empty()) {
        std::string rows = "# " + provenance(std::nullopt) + "\n";
        csv::Record header{"scenario", "row"};
        header.insert(header.end(), model.response_names.begin(), model.response_names.end());
        rows += csv::join(header) + "\n";
        for (const auto& sc : scenarios) {
          const Matrix p = predict(model, apply_scenario(model, d.features, sc));
          for (std::size_t r = 0; r < p.rows(); ++r) {
            csv::Record rec{sc.label, std::to_string(r)};
            for (std::size_t q = 0; q < p.cols(); ++q) rec.push_back(csv::format_double(p(r, q)));
            rows += csv::join(rec) + "\n";
          }
        }
        csv::write_atomic(scn_rows_out, rows);
      }
    }
  } catch (const CLI::ValidationError& e) {
    err << "mvboost: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "mvboost: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "mvboost: " << e.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}

}  // namespace mvboost::cli
