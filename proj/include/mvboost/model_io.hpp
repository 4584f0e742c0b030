#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvboost/boosting.hpp"
#include "mvboost/csv.hpp"
#include "mvboost/data_io.hpp"
#include "mvboost/error.hpp"

namespace mvboost {

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kToolVersion = "mvboost 0.1.0";

namespace detail {

using ordered_json = nlohmann::ordered_json;

inline ordered_json schema_to_json(const Schema& schema) {
  ordered_json cols = ordered_json::array();
  for (const auto& c : schema.columns) {
    ordered_json col{{"name", c.name}, {"kind", column_kind_name(c.kind)}};
    if (c.kind == ColumnKind::kCategoricalFeature) col["levels"] = c.levels;
    cols.push_back(std::move(col));
  }
  return ordered_json{{"columns", std::move(cols)}};
}

inline Schema schema_from_json(const ordered_json& j) {
  Schema schema;
  for (const auto& col : j.at("columns")) {
    ColumnSpec spec{col.at("name").get<std::string>(),
                    parse_column_kind(col.at("kind").get<std::string>()),
                    {}};
    if (col.contains("levels")) spec.levels = col.at("levels").get<std::vector<std::string>>();
    schema.columns.push_back(std::move(spec));
  }
  schema.validate();
  return schema;
}

inline ordered_json tree_to_json(const Tree& tree) {
  ordered_json nodes = ordered_json::array();
  for (const auto& node : tree.nodes()) {
    ordered_json jn;
    if (node.is_leaf()) {
      jn["feature"] = nullptr;
      jn["threshold"] = nullptr;
      jn["left"] = nullptr;
      jn["right"] = nullptr;
      jn["leaf_value"] = node.leaf_value;
      jn["per_response_gain"] = nullptr;
    } else {
      jn["feature"] = node.split->feature;
      jn["threshold"] = node.split->threshold;
      jn["left"] = node.left;
      jn["right"] = node.right;
      jn["leaf_value"] = nullptr;
      jn["per_response_gain"] = node.split->per_response_gain;
    }
    jn["n_rows"] = node.n_rows;
    nodes.push_back(std::move(jn));
  }
  return ordered_json{{"nodes", std::move(nodes)}};
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kCorruptModelFile, what);
}

inline Tree tree_from_json(const ordered_json& j, std::size_t n_features, std::size_t n_outputs) {
  const auto& jnodes = j.at("nodes");
  require(jnodes.is_array() && !jnodes.empty(), "tree without nodes");
  std::vector<TreeNode> nodes(jnodes.size());
  for (std::size_t i = 0; i < jnodes.size(); ++i) {
    const auto& jn = jnodes[i];
    auto& node = nodes[i];
    if (jn.contains("n_rows")) node.n_rows = jn.at("n_rows").get<std::size_t>();
    if (jn.at("feature").is_null()) {
      node.leaf_value = jn.at("leaf_value").get<std::vector<double>>();
      require(node.leaf_value.size() == n_outputs, "leaf value has wrong length");
      continue;
    }
    SplitRule rule;
    rule.feature = jn.at("feature").get<std::size_t>();
    rule.threshold = jn.at("threshold").get<double>();
    rule.per_response_gain = jn.at("per_response_gain").get<std::vector<double>>();
    require(rule.feature < n_features, "split feature out of range");
    require(rule.per_response_gain.size() == n_outputs, "gain vector has wrong length");
    for (double g : rule.per_response_gain) rule.total_gain += g;
    node.left = jn.at("left").get<std::size_t>();
    node.right = jn.at("right").get<std::size_t>();
    // Preorder layout: children always follow their parent.
    require(node.left > i && node.left < jnodes.size() && node.right > i &&
                node.right < jnodes.size() && node.left != node.right,
            "child index out of range");
    node.split = std::move(rule);
  }
  return Tree(std::move(nodes), n_outputs);
}

}  // namespace detail

inline std::string model_to_json(const BoostedModel& model) {
  using detail::ordered_json;
  ordered_json j;
  j["format_version"] = kModelFormatVersion;
  j["schema"] = detail::schema_to_json(model.schema);
  j["standardization"] = ordered_json{{"response_means", model.standardization.response_means},
                                      {"response_sds", model.standardization.response_sds}};
  j["init"] = model.init;
  j["shrinkage"] = model.shrinkage;
  j["best_iteration"] = model.best_iteration;
  j["feature_names"] = model.feature_names;
  j["feature_origin"] = model.feature_origin;
  j["response_names"] = model.response_names;
  ordered_json trees = ordered_json::array();
  for (const auto& t : model.trees) trees.push_back(detail::tree_to_json(t));
  j["trees"] = std::move(trees);
  return j.dump(1) + "\n";
}

inline BoostedModel model_from_json(std::string_view text) {
  using detail::ordered_json;
  using detail::require;
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptModelFile, e.what());
  }
  require(j.is_object() && j.contains("format_version"), "missing format_version");
  if (!j["format_version"].is_number_integer() || j["format_version"].get<int>() != kModelFormatVersion)
    throw Error(ErrorCode::kVersionMismatch,
                "unsupported format_version " + j["format_version"].dump());
  try {
    BoostedModel m;
    m.schema = detail::schema_from_json(j.at("schema"));
    m.standardization.response_means =
        j.at("standardization").at("response_means").get<std::vector<double>>();
    m.standardization.response_sds =
        j.at("standardization").at("response_sds").get<std::vector<double>>();
    m.init = j.at("init").get<std::vector<double>>();
    m.shrinkage = j.at("shrinkage").get<double>();
    m.response_names = j.at("response_names").get<std::vector<std::string>>();
    layout_features(m.schema, m.feature_names, m.feature_origin);
    if (j.contains("feature_names"))
      require(j["feature_names"].get<std::vector<std::string>>() == m.feature_names,
              "feature_names disagree with schema");
    const std::size_t q = m.response_names.size();
    require(q > 0 && m.init.size() == q && m.standardization.response_means.size() == q &&
                m.standardization.response_sds.size() == q,
            "response dimensions disagree");
    for (double sd : m.standardization.response_sds)
      require(std::isfinite(sd) && sd > 0.0, "nonpositive response sd");
    for (const auto& jt : j.at("trees"))
      m.trees.push_back(detail::tree_from_json(jt, m.feature_names.size(), q));
    m.best_iteration = j.contains("best_iteration") ? j["best_iteration"].get<std::size_t>()
                                                    : m.trees.size();
    require(m.best_iteration <= m.trees.size(), "best_iteration exceeds tree count");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorruptModelFile, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorruptModelFile) throw;
    throw Error(ErrorCode::kCorruptModelFile, e.what());
  }
}

inline void save_model(const BoostedModel& model, const std::filesystem::path& path) {
  csv::write_atomic(path, model_to_json(model));
}

inline BoostedModel load_model(const std::filesystem::path& path) {
  return model_from_json(csv::read_file(path));
}

// Trace CSV: one row per ensemble size m = 0..M (row 0 is the mean-only
// baseline) with train/holdout MSE and the upper triangle of the residual
// covariance matrix.
inline std::string format_trace_csv(const TrainingTrace& trace,
                                    const std::vector<std::string>& response_names,
                                    std::string_view comment = {}) {
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  csv::Record header{"iteration", "train_mse", "holdout_mse"};
  const std::size_t q = response_names.size();
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t k = i; k < q; ++k)
      header.push_back("cov_" + response_names[i] + "_" + response_names[k]);
  out += csv::join(header) + "\n";
  const bool holdout = !trace.holdout_mse.empty();
  for (std::size_t m = 0; m <= trace.n_iterations(); ++m) {
    csv::Record rec{std::to_string(m)};
    rec.push_back(csv::format_double(m == 0 ? trace.baseline_train_mse : trace.train_mse[m - 1]));
    rec.push_back(!holdout ? std::string()
                           : csv::format_double(m == 0 ? trace.baseline_holdout_mse
                                                       : trace.holdout_mse[m - 1]));
    const auto& cov = trace.residual_cov.at(m);
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t k = i; k < q; ++k) rec.push_back(csv::format_double(cov(i, k)));
    out += csv::join(rec) + "\n";
  }
  return out;
}

inline TrainingTrace parse_trace_csv(std::string_view text) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kMissingTrace, what); };
  auto records = csv::parse(text);
  if (records.size() < 2 || records[0].size() < 3 || records[0][0] != "iteration")
    fail("trace file has no data");
  const std::size_t n_cov = records[0].size() - 3;
  std::size_t q = 0;
  while (q * (q + 1) / 2 < n_cov) ++q;
  if (q * (q + 1) / 2 != n_cov) fail("trace covariance columns are not a triangle");

  TrainingTrace trace;
  auto num = [&](const std::string& cell) {
    auto v = detail::parse_number(cell);
    if (!v) fail("bad number '" + cell + "' in trace");
    return *v;
  };
  const bool holdout = !records[1][2].empty();
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != records[0].size() || rec[0] != std::to_string(r - 1))
      fail("malformed trace row " + std::to_string(r));
    const double train = num(rec[1]);
    if (r == 1) {
      trace.baseline_train_mse = train;
      if (holdout) trace.baseline_holdout_mse = num(rec[2]);
    } else {
      trace.train_mse.push_back(train);
      if (holdout) trace.holdout_mse.push_back(num(rec[2]));
    }
    Matrix cov(q, q);
    std::size_t c = 3;
    for (std::size_t i = 0; i < q; ++i)
      for (std::size_t k = i; k < q; ++k) cov(i, k) = cov(k, i) = num(rec[c++]);
    trace.residual_cov.push_back(std::move(cov));
  }
  trace.best_iteration = trace.train_mse.size();
  if (holdout) {
    double best = trace.baseline_holdout_mse;
    trace.best_iteration = 0;
    for (std::size_t m = 0; m < trace.holdout_mse.size(); ++m)
      if (trace.holdout_mse[m] < best) {
        best = trace.holdout_mse[m];
        trace.best_iteration = m + 1;
      }
  }
  return trace;
}

inline TrainingTrace load_trace(const std::filesystem::path& path) {
  std::string text;
  try {
    text = csv::read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kMissingTrace, e.what());
  }
  return parse_trace_csv(text);
}

}  // namespace mvboost
