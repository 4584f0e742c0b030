#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mvboost/data_io.hpp"
#include "mvboost/error.hpp"
#include "mvboost/matrix.hpp"
#include "mvboost/tree.hpp"

namespace mvboost {

struct HyperParams {
  std::size_t n_trees = 1000;
  double shrinkage = 0.05;
  std::size_t max_depth = 3;
  std::size_t min_node_size = 5;
  double subsample = 0.75;
  // 0 disables best-iteration selection; all n_trees are used.
  double holdout_fraction = 0.2;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(shrinkage > 0.0 && shrinkage <= 1.0))
      throw Error(ErrorCode::kInvalidConfig, "shrinkage must lie in (0, 1]");
    if (!(subsample > 0.0 && subsample <= 1.0))
      throw Error(ErrorCode::kInvalidConfig, "subsample must lie in (0, 1]");
    if (!(holdout_fraction >= 0.0 && holdout_fraction <= 0.5))
      throw Error(ErrorCode::kInvalidConfig, "holdout_fraction must lie in [0, 0.5]");
    if (min_node_size == 0) throw Error(ErrorCode::kInvalidConfig, "min_node_size must be >= 1");
  }

  friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

struct BoostedModel {
  Schema schema;
  std::vector<std::string> feature_names;
  std::vector<std::size_t> feature_origin;
  std::vector<std::string> response_names;
  StandardizationParams standardization;
  std::vector<double> init;  // standardized scale
  double shrinkage = 0.0;
  std::vector<Tree> trees;
  std::size_t best_iteration = 0;

  std::size_t n_features() const { return feature_names.size(); }
  std::size_t n_responses() const { return response_names.size(); }
  bool fitted() const { return !init.empty(); }

  // Ensemble prefix used for prediction and influence.
  std::span<const Tree> active_trees() const {
    return std::span<const Tree>(trees).first(std::min(best_iteration, trees.size()));
  }

  friend bool operator==(const BoostedModel&, const BoostedModel&) = default;
};

// Per-iteration diagnostics of a fit. Index m of residual_cov holds the sample
// covariance of the residuals after m trees, over the training partition
// (residual_cov[0] is Cov(Y_std)).
struct TrainingTrace {
  std::vector<double> train_mse;    // one per iteration
  std::vector<double> holdout_mse;  // empty when the holdout is disabled
  double baseline_train_mse = 0.0;
  double baseline_holdout_mse = std::numeric_limits<double>::quiet_NaN();
  std::vector<Matrix> residual_cov;
  std::size_t best_iteration = 0;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> holdout_rows;

  std::size_t n_iterations() const { return train_mse.size(); }
  bool has_holdout() const { return !holdout_mse.empty() || !holdout_rows.empty(); }
};

struct FitResult {
  BoostedModel model;
  TrainingTrace trace;
};

namespace detail {

// Mean over rows and responses of squared entries of a - b.
inline double multivariate_mse(const Matrix& a, const Matrix& b,
                               std::span<const std::size_t> rows) {
  if (rows.empty() || a.cols() == 0) return 0.0;
  double ss = 0.0;
  for (auto r : rows)
    for (std::size_t q = 0; q < a.cols(); ++q) {
      const double e = a(r, q) - b(r, q);
      ss += e * e;
    }
  return ss / static_cast<double>(rows.size() * a.cols());
}

inline void add_tree(Matrix& f, const Tree& tree, const Matrix& x, double shrinkage) {
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto& v = tree.predict(x.row(r));
    auto out = f.row(r);
    for (std::size_t q = 0; q < v.size(); ++q) out[q] += shrinkage * v[q];
  }
}

}  // namespace detail

inline FitResult fit(const Dataset& data, const HyperParams& hp) {
  hp.validate();
  const std::size_t n = data.n_rows();
  if (n == 0 || data.n_responses() == 0 || data.n_features() == 0)
    throw Error(ErrorCode::kEmptyInput, "dataset has no rows, features or responses");
  if (n < 10) throw Error(ErrorCode::kEmptyInput, "at least 10 rows are required to fit");
  if (data.features.rows() != data.responses.rows())
    throw Error(ErrorCode::kShapeMismatch, "feature and response row counts differ");

  auto [std_data, params] = standardize_responses(data);
  const Matrix& x = std_data.features;
  const Matrix& y = std_data.responses;
  const std::size_t q_count = y.cols();

  std::mt19937_64 rng(hp.seed);
  TrainingTrace trace;
  {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::size_t n_holdout = 0;
    if (hp.holdout_fraction > 0.0) {
      std::shuffle(perm.begin(), perm.end(), rng);
      n_holdout = static_cast<std::size_t>(std::llround(hp.holdout_fraction * static_cast<double>(n)));
      if (n_holdout < 2 || n - n_holdout < 2)
        throw Error(ErrorCode::kDegenerateHoldout,
                    "holdout of " + std::to_string(n_holdout) + " rows out of " +
                        std::to_string(n));
    }
    trace.holdout_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_holdout));
    trace.train_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_holdout), perm.end());
    std::sort(trace.holdout_rows.begin(), trace.holdout_rows.end());
    std::sort(trace.train_rows.begin(), trace.train_rows.end());
  }
  const auto& train_rows = trace.train_rows;
  const auto& holdout_rows = trace.holdout_rows;
  const bool use_holdout = !holdout_rows.empty();
  const std::size_t n_sub = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::ceil(hp.subsample * static_cast<double>(train_rows.size()))),
      1, train_rows.size());

  BoostedModel model;
  model.schema = std_data.schema;
  model.feature_names = std_data.feature_names;
  model.feature_origin = std_data.feature_origin;
  model.response_names = std_data.response_names;
  model.standardization = params;
  model.init.assign(q_count, 0.0);
  model.shrinkage = hp.shrinkage;
  model.trees.reserve(hp.n_trees);

  Matrix f(n, q_count, 0.0);
  Matrix residual = y;
  trace.baseline_train_mse = detail::multivariate_mse(y, f, train_rows);
  if (use_holdout) trace.baseline_holdout_mse = detail::multivariate_mse(y, f, holdout_rows);
  trace.residual_cov.push_back(sample_covariance(residual, train_rows));

  const TreeParams tree_params{hp.max_depth, hp.min_node_size};
  std::vector<std::size_t> pool = train_rows;
  std::vector<std::size_t> sub;
  for (std::size_t m = 0; m < hp.n_trees; ++m) {
    if (n_sub == train_rows.size()) {
      sub = train_rows;
    } else {
      std::shuffle(pool.begin(), pool.end(), rng);
      sub.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n_sub));
      std::sort(sub.begin(), sub.end());
    }
    Tree tree = fit_tree(x, residual, sub, tree_params);
    detail::add_tree(f, tree, x, hp.shrinkage);
    model.trees.push_back(std::move(tree));

    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t q = 0; q < q_count; ++q) residual(r, q) = y(r, q) - f(r, q);
    trace.train_mse.push_back(detail::multivariate_mse(y, f, train_rows));
    if (use_holdout) trace.holdout_mse.push_back(detail::multivariate_mse(y, f, holdout_rows));
    trace.residual_cov.push_back(sample_covariance(residual, train_rows));
  }

  std::size_t best = hp.n_trees;
  if (use_holdout) {
    best = 0;
    double best_mse = trace.baseline_holdout_mse;
    for (std::size_t m = 0; m < trace.holdout_mse.size(); ++m) {
      if (trace.holdout_mse[m] < best_mse) {
        best_mse = trace.holdout_mse[m];
        best = m + 1;
      }
    }
  }
  model.best_iteration = best;
  trace.best_iteration = best;
  return {std::move(model), std::move(trace)};
}

// Predictions on the standardized scale using the first `n_trees` trees.
inline Matrix predict_standardized(const BoostedModel& model, const Matrix& x,
                                   std::size_t n_trees) {
  if (!model.fitted()) throw Error(ErrorCode::kUnfittedModel, "model has not been fitted");
  if (x.cols() != model.n_features())
    throw Error(ErrorCode::kShapeMismatch,
                "expected " + std::to_string(model.n_features()) + " feature columns, got " +
                    std::to_string(x.cols()));
  Matrix f(x.rows(), model.n_responses());
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t q = 0; q < model.n_responses(); ++q) f(r, q) = model.init[q];
  n_trees = std::min(n_trees, model.trees.size());
  for (std::size_t m = 0; m < n_trees; ++m)
    detail::add_tree(f, model.trees[m], x, model.shrinkage);
  return f;
}

// Predictions on the original response scale.
inline Matrix predict(const BoostedModel& model, const Matrix& x) {
  return invert_standardization(predict_standardized(model, x, model.best_iteration),
                                model.standardization);
}

struct StagedCurves {
  std::vector<double> train;
  std::vector<double> holdout;
  double baseline_train = 0.0;
  double baseline_holdout = 0.0;
};

inline StagedCurves staged_mse(const TrainingTrace& trace) {
  return {trace.train_mse, trace.holdout_mse, trace.baseline_train_mse,
          trace.baseline_holdout_mse};
}

}  // namespace mvboost
