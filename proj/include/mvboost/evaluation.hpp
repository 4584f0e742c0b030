#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "mvboost/boosting.hpp"
#include "mvboost/csv.hpp"
#include "mvboost/data_io.hpp"
#include "mvboost/error.hpp"

namespace mvboost {

inline constexpr double kTestFraction = 0.2;

struct ResponseScore {
  std::string name;
  double mse = 0.0;  // standardized scale
  double r2 = 0.0;   // 1 - SSE/SST, SST about the test-set mean

  friend bool operator==(const ResponseScore&, const ResponseScore&) = default;
};

struct EvalReport {
  std::vector<ResponseScore> per_response;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;
  // Test rows on the original scale, for observed-vs-predicted plots.
  Matrix observed;
  Matrix predicted;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

struct Evaluation {
  EvalReport report;
  FitResult fit;
};

struct TrainTestSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline TrainTestSplit train_test_split(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(kTestFraction * static_cast<double>(n)));
  TrainTestSplit s;
  s.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

inline std::vector<ResponseScore> score_predictions(const Matrix& observed,
                                                    const Matrix& predicted,
                                                    const BoostedModel& model) {
  std::vector<ResponseScore> out;
  const double n = static_cast<double>(observed.rows());
  for (std::size_t q = 0; q < observed.cols(); ++q) {
    const double sd = model.standardization.response_sds[q];
    double mean = 0.0;
    for (std::size_t r = 0; r < observed.rows(); ++r) mean += observed(r, q);
    mean /= n;
    double sse = 0.0, sst = 0.0, sse_std = 0.0;
    for (std::size_t r = 0; r < observed.rows(); ++r) {
      const double e = observed(r, q) - predicted(r, q);
      sse += e * e;
      sse_std += (e / sd) * (e / sd);
      sst += (observed(r, q) - mean) * (observed(r, q) - mean);
    }
    const double r2 = sst > 0.0 ? 1.0 - sse / sst : std::numeric_limits<double>::quiet_NaN();
    out.push_back({model.response_names[q], sse_std / n, r2});
  }
  return out;
}

inline Evaluation evaluate_detailed(const Dataset& d, const HyperParams& hp,
                                    std::uint64_t split_seed) {
  if (d.n_rows() < 20)
    throw Error(ErrorCode::kTooFewRows, "evaluation needs at least 20 rows, got " +
                                            std::to_string(d.n_rows()));
  const auto split = train_test_split(d.n_rows(), split_seed);
  Evaluation ev;
  ev.fit = fit(select_rows(d, split.train), hp);
  const Dataset test = select_rows(d, split.test);
  ev.report.observed = test.responses;
  ev.report.predicted = predict(ev.fit.model, test.features);
  ev.report.per_response = score_predictions(ev.report.observed, ev.report.predicted, ev.fit.model);
  ev.report.n_train = split.train.size();
  ev.report.n_test = split.test.size();
  ev.report.seed = split_seed;
  return ev;
}

inline EvalReport evaluate(const Dataset& d, const HyperParams& hp, std::uint64_t split_seed) {
  return evaluate_detailed(d, hp, split_seed).report;
}

struct ComparisonRow {
  std::string name;
  double mse_multi = 0.0;
  double mse_uni = 0.0;
  double r2_multi = 0.0;
  double r2_uni = 0.0;

  friend bool operator==(const ComparisonRow&, const ComparisonRow&) = default;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::uint64_t seed = 0;

  friend bool operator==(const ComparisonReport&, const ComparisonReport&) = default;
};

// Joint fit versus one single-response fit per response, all sharing the
// split, hyperparameters and seeds.
inline ComparisonReport compare_models(const Dataset& d, const HyperParams& hp,
                                       std::uint64_t split_seed) {
  const EvalReport joint = evaluate(d, hp, split_seed);
  ComparisonReport out{{}, joint.n_train, joint.n_test, split_seed};
  for (std::size_t q = 0; q < d.n_responses(); ++q) {
    const EvalReport uni = evaluate(select_response(d, q), hp, split_seed);
    const auto& m = joint.per_response[q];
    const auto& u = uni.per_response.front();
    out.rows.push_back({m.name, m.mse, u.mse, m.r2, u.r2});
  }
  return out;
}

// ---- scenarios ----

struct Setting {
  std::string feature;  // schema column or encoded column name
  std::variant<double, std::string> value;
};

struct Scenario {
  std::string label;
  std::vector<Setting> settings;
};

struct ScenarioDelta {
  std::string response_name;
  double baseline_mean = 0.0;
  double scenario_mean = 0.0;
  // NaN when the baseline mean is exactly zero.
  double percent_change = 0.0;

  friend bool operator==(const ScenarioDelta&, const ScenarioDelta&) = default;
};

struct ScenarioResult {
  std::string label;
  std::vector<ScenarioDelta> deltas;
};

namespace detail {

inline void apply_setting(const BoostedModel& model, Matrix& x, const Setting& s) {
  auto number = [&]() -> double {
    double v;
    if (const double* d = std::get_if<double>(&s.value)) {
      v = *d;
    } else {
      auto parsed = parse_number(std::get<std::string>(s.value));
      if (!parsed)
        throw Error(ErrorCode::kInvalidSpec,
                    "value for '" + s.feature + "' must be numeric");
      v = *parsed;
    }
    if (!std::isfinite(v))
      throw Error(ErrorCode::kInvalidSpec, "value for '" + s.feature + "' is not finite");
    return v;
  };
  auto set_column = [&](std::size_t j, double v) {
    for (std::size_t r = 0; r < x.rows(); ++r) x(r, j) = v;
  };

  if (auto col = model.schema.find(s.feature);
      col && Schema::is_feature(model.schema.columns[*col].kind)) {
    const auto& spec = model.schema.columns[*col];
    std::vector<std::size_t> encoded;
    for (std::size_t j = 0; j < model.feature_origin.size(); ++j)
      if (model.feature_origin[j] == *col) encoded.push_back(j);
    if (spec.kind == ColumnKind::kNumericFeature) {
      set_column(encoded.front(), number());
      return;
    }
    std::string level;
    if (const auto* text = std::get_if<std::string>(&s.value)) level = *text;
    else level = csv::format_double(std::get<double>(s.value));
    auto it = std::find(spec.levels.begin(), spec.levels.end(), level);
    if (it == spec.levels.end())
      throw Error(ErrorCode::kUnknownLevel,
                  "column '" + s.feature + "' has no level '" + level + "'");
    const auto hot = static_cast<std::size_t>(it - spec.levels.begin());
    for (std::size_t k = 0; k < encoded.size(); ++k) set_column(encoded[k], k == hot ? 1.0 : 0.0);
    return;
  }
  for (std::size_t j = 0; j < model.feature_names.size(); ++j)
    if (model.feature_names[j] == s.feature) {
      set_column(j, number());
      return;
    }
  throw Error(ErrorCode::kUnknownFeature, "no feature named '" + s.feature + "'");
}

inline std::vector<double> column_means(const Matrix& m) {
  std::vector<double> out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t q = 0; q < m.cols(); ++q) out[q] += m(r, q);
  for (auto& v : out) v /= static_cast<double>(m.rows());
  return out;
}

}  // namespace detail

// Copy of `x` with the scenario's settings applied.
inline Matrix apply_scenario(const BoostedModel& model, const Matrix& x, const Scenario& sc) {
  Matrix out = x;
  for (const auto& s : sc.settings) detail::apply_setting(model, out, s);
  return out;
}

inline std::vector<ScenarioResult> scenario_compare(const BoostedModel& model, const Matrix& x,
                                                    const std::vector<Scenario>& scenarios) {
  std::vector<ScenarioResult> out;
  if (scenarios.empty()) return out;
  if (x.rows() == 0) throw Error(ErrorCode::kEmptyInput, "no rows to evaluate scenarios on");
  const auto baseline = detail::column_means(predict(model, x));
  for (const auto& sc : scenarios) {
    const auto means = detail::column_means(predict(model, apply_scenario(model, x, sc)));
    ScenarioResult res{sc.label, {}};
    for (std::size_t q = 0; q < means.size(); ++q) {
      const double pct = baseline[q] != 0.0
                             ? 100.0 * (means[q] - baseline[q]) / std::abs(baseline[q])
                             : std::numeric_limits<double>::quiet_NaN();
      res.deltas.push_back({model.response_names[q], baseline[q], means[q], pct});
    }
    out.push_back(std::move(res));
  }
  return out;
}

// ---- exports ----

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string render_table(const std::vector<csv::Record>& rows) {
  std::vector<std::size_t> width;
  for (const auto& r : rows) {
    width.resize(std::max(width.size(), r.size()), 0);
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::string out;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t c = 0; c < rows[i].size(); ++c) {
      if (c) out += "  ";
      out += rows[i][c];
      if (c + 1 < rows[i].size()) out.append(width[c] - rows[i][c].size(), ' ');
    }
    out += "\n";
    if (i == 0) {
      std::size_t total = 0;
      for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
      out.append(total, '-');
      out += "\n";
    }
  }
  return out;
}

inline std::string comment_line(std::string_view comment) {
  return comment.empty() ? std::string() : "# " + std::string(comment) + "\n";
}

}  // namespace detail

inline std::string format_eval_csv(const EvalReport& r, std::string_view comment = {}) {
  std::string out = detail::comment_line(comment) + "response,mse,r2,n_train,n_test,split_seed\n";
  for (const auto& s : r.per_response)
    out += csv::join({s.name, csv::format_double(s.mse), csv::format_double(s.r2),
                      std::to_string(r.n_train), std::to_string(r.n_test),
                      std::to_string(r.seed)}) +
           "\n";
  return out;
}

inline std::string format_eval_table(const EvalReport& r) {
  std::vector<csv::Record> rows{{"response", "mse(std)", "r2"}};
  for (const auto& s : r.per_response)
    rows.push_back({s.name, detail::fixed(s.mse), detail::fixed(s.r2)});
  return detail::render_table(rows) + "n_train=" + std::to_string(r.n_train) +
         " n_test=" + std::to_string(r.n_test) + " split_seed=" + std::to_string(r.seed) + "\n";
}

inline std::string format_observed_predicted_csv(const EvalReport& r,
                                                 std::string_view comment = {}) {
  std::string out = detail::comment_line(comment) + "row,response,observed,predicted\n";
  for (std::size_t i = 0; i < r.observed.rows(); ++i)
    for (std::size_t q = 0; q < r.per_response.size(); ++q)
      out += csv::join({std::to_string(i), r.per_response[q].name,
                        csv::format_double(r.observed(i, q)),
                        csv::format_double(r.predicted(i, q))}) +
             "\n";
  return out;
}

inline std::string format_comparison_csv(const ComparisonReport& r,
                                         std::string_view comment = {}) {
  std::string out =
      detail::comment_line(comment) + "response,mse_multi,mse_uni,r2_multi,r2_uni\n";
  for (const auto& row : r.rows)
    out += csv::join({row.name, csv::format_double(row.mse_multi),
                      csv::format_double(row.mse_uni), csv::format_double(row.r2_multi),
                      csv::format_double(row.r2_uni)}) +
           "\n";
  return out;
}

inline std::string format_comparison_table(const ComparisonReport& r) {
  std::vector<csv::Record> rows{{"response", "mse_multi", "mse_uni", "r2_multi", "r2_uni"}};
  for (const auto& row : r.rows)
    rows.push_back({row.name, detail::fixed(row.mse_multi), detail::fixed(row.mse_uni),
                    detail::fixed(row.r2_multi), detail::fixed(row.r2_uni)});
  return detail::render_table(rows) + "n_train=" + std::to_string(r.n_train) +
         " n_test=" + std::to_string(r.n_test) + " split_seed=" + std::to_string(r.seed) + "\n";
}

inline std::string format_scenario_csv(const std::vector<ScenarioResult>& results,
                                       std::string_view comment = {}) {
  std::string out = detail::comment_line(comment) +
                    "scenario,response,baseline_mean,scenario_mean,percent_change\n";
  for (const auto& res : results)
    for (const auto& d : res.deltas)
      out += csv::join({res.label, d.response_name, csv::format_double(d.baseline_mean),
                        csv::format_double(d.scenario_mean),
                        csv::format_double(d.percent_change)}) +
             "\n";
  return out;
}

inline std::string format_scenario_table(const std::vector<ScenarioResult>& results) {
  std::vector<csv::Record> rows{{"scenario", "response", "baseline", "scenario_mean", "change%"}};
  for (const auto& res : results)
    for (const auto& d : res.deltas)
      rows.push_back({res.label, d.response_name, detail::fixed(d.baseline_mean),
                      detail::fixed(d.scenario_mean),
                      std::isnan(d.percent_change) ? "n/a" : detail::fixed(d.percent_change, 2)});
  return detail::render_table(rows);
}

}  // namespace mvboost
