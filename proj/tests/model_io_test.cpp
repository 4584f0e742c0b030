#include <gtest/gtest.h>

#include "mvboost/data_io.hpp"
#include "mvboost/model_io.hpp"
#include "test_support.hpp"

using namespace mvboost;

namespace {

ErrorCode load_error(const std::string& text) {
  try {
    model_from_json(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "model loaded";
  return ErrorCode::kIo;
}

FitResult small_fit() {
  const auto d = generate_synthetic({.n = 150, .seed = 21, .noise_corr = 0.4});
  HyperParams hp;
  hp.n_trees = 80;
  return fit(d, hp);
}

}  // namespace

TEST(ModelIo, RoundTripGivesBitIdenticalPredictions) {
  test_util::TempDir dir;
  const auto res = small_fit();
  save_model(res.model, dir / "m.json");
  const BoostedModel back = load_model(dir / "m.json");
  EXPECT_EQ(back, res.model);
  const auto d = generate_synthetic({.n = 150, .seed = 21, .noise_corr = 0.4});
  EXPECT_EQ(predict(back, d.features), predict(res.model, d.features));
  // Re-serializing is stable.
  EXPECT_EQ(model_to_json(back), model_to_json(res.model));
}

TEST(ModelIo, DocumentedLayout) {
  const auto res = small_fit();
  const auto j = nlohmann::json::parse(model_to_json(res.model));
  EXPECT_EQ(j["format_version"], 1);
  EXPECT_TRUE(j.contains("schema"));
  EXPECT_TRUE(j["standardization"].contains("response_means"));
  EXPECT_EQ(j["init"].size(), 2u);
  const auto& root = j["trees"][0]["nodes"][0];
  for (const char* key :
       {"feature", "threshold", "left", "right", "leaf_value", "per_response_gain"})
    EXPECT_TRUE(root.contains(key)) << key;
  bool saw_leaf = false;
  for (const auto& node : j["trees"][0]["nodes"])
    if (node["feature"].is_null()) {
      saw_leaf = true;
      EXPECT_TRUE(node["threshold"].is_null());
      EXPECT_TRUE(node["per_response_gain"].is_null());
      EXPECT_EQ(node["leaf_value"].size(), 2u);
    }
  EXPECT_TRUE(saw_leaf);
}

TEST(ModelIo, CategoricalLevelsSurvive) {
  test_util::TempDir dir;
  test_util::write_text(dir / "d.csv",
                      "topo,x,y1,y2\n"
                      "ria,1,1,2\nplain,2,2,1\nria,3,3,5\nplain,4,1,2\nria,5,4,4\n"
                      "plain,6,2,3\nria,7,5,6\nplain,8,2,2\nria,9,6,7\nplain,10,3,1\n");
  const Schema schema = parse_schema("topo,categorical\nx,numeric\ny1,response\ny2,response\n");
  const auto d = load_csv(dir / "d.csv", schema);
  HyperParams hp;
  hp.n_trees = 10;
  hp.min_node_size = 1;
  hp.holdout_fraction = 0.0;
  const auto res = fit(d, hp);
  const auto back = model_from_json(model_to_json(res.model));
  EXPECT_EQ(back.schema.columns[0].levels, (std::vector<std::string>{"plain", "ria"}));
  EXPECT_EQ(back.feature_names, res.model.feature_names);
  EXPECT_EQ(back.feature_origin, res.model.feature_origin);
}

TEST(ModelIo, TruncatedFileIsCorrupt) {
  const std::string text = model_to_json(small_fit().model);
  EXPECT_EQ(load_error(text.substr(0, text.size() / 2)), ErrorCode::kCorruptModelFile);
  EXPECT_EQ(load_error(""), ErrorCode::kCorruptModelFile);
  EXPECT_EQ(load_error("{\"format_version\": 1}"), ErrorCode::kCorruptModelFile);
}

TEST(ModelIo, UnknownFormatVersion) {
  auto j = nlohmann::json::parse(model_to_json(small_fit().model));
  j["format_version"] = 2;
  EXPECT_EQ(load_error(j.dump()), ErrorCode::kVersionMismatch);
  j["format_version"] = "1";
  EXPECT_EQ(load_error(j.dump()), ErrorCode::kVersionMismatch);
}

TEST(ModelIo, StructuralDamageIsCorrupt) {
  auto j = nlohmann::json::parse(model_to_json(small_fit().model));
  auto bad_child = j;
  for (auto& node : bad_child["trees"][0]["nodes"])
    if (!node["feature"].is_null()) {
      node["left"] = 0;
      break;
    }
  EXPECT_EQ(load_error(bad_child.dump()), ErrorCode::kCorruptModelFile);
  auto bad_feature = j;
  for (auto& node : bad_feature["trees"][0]["nodes"])
    if (!node["feature"].is_null()) {
      node["feature"] = 99;
      break;
    }
  EXPECT_EQ(load_error(bad_feature.dump()), ErrorCode::kCorruptModelFile);
  auto bad_best = j;
  bad_best["best_iteration"] = 10000;
  EXPECT_EQ(load_error(bad_best.dump()), ErrorCode::kCorruptModelFile);
}

TEST(TraceIo, RoundTripIsExact) {
  const auto res = small_fit();
  const auto back = parse_trace_csv(format_trace_csv(res.trace, res.model.response_names, "c"));
  EXPECT_EQ(back.train_mse, res.trace.train_mse);
  EXPECT_EQ(back.holdout_mse, res.trace.holdout_mse);
  EXPECT_EQ(back.baseline_train_mse, res.trace.baseline_train_mse);
  EXPECT_EQ(back.baseline_holdout_mse, res.trace.baseline_holdout_mse);
  EXPECT_EQ(back.residual_cov, res.trace.residual_cov);
  EXPECT_EQ(back.best_iteration, res.trace.best_iteration);
}

TEST(TraceIo, MalformedTrace) {
  EXPECT_THROW(parse_trace_csv("iteration,train_mse,holdout_mse,a,b\n0,1,,1,2\n"), Error);
  EXPECT_THROW(parse_trace_csv(""), Error);
  EXPECT_THROW(load_trace("/nonexistent/trace.csv"), Error);
}
