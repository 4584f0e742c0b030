#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "mvboost/csv.hpp"
#include "mvboost/error.hpp"
#include "mvboost/matrix.hpp"

namespace mvboost {

enum class ColumnKind { kNumericFeature, kCategoricalFeature, kResponse, kIgnore };

inline std::string_view column_kind_name(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::kNumericFeature: return "numeric";
    case ColumnKind::kCategoricalFeature: return "categorical";
    case ColumnKind::kResponse: return "response";
    case ColumnKind::kIgnore: return "ignore";
  }
  return "ignore";
}

inline ColumnKind parse_column_kind(std::string_view text) {
  if (text == "numeric" || text == "numeric_feature") return ColumnKind::kNumericFeature;
  if (text == "categorical" || text == "categorical_feature")
    return ColumnKind::kCategoricalFeature;
  if (text == "response") return ColumnKind::kResponse;
  if (text == "ignore") return ColumnKind::kIgnore;
  throw Error(ErrorCode::kInvalidSchema, "unknown column kind '" + std::string(text) + "'");
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::kNumericFeature;
  // Sorted observed levels; filled during ingestion for categorical columns.
  std::vector<std::string> levels;

  friend bool operator==(const ColumnSpec&, const ColumnSpec&) = default;
};

struct Schema {
  std::vector<ColumnSpec> columns;

  void validate() const {
    std::set<std::string> seen;
    std::size_t features = 0, responses = 0;
    for (const auto& c : columns) {
      if (c.name.empty()) throw Error(ErrorCode::kInvalidSchema, "empty column name");
      if (!seen.insert(c.name).second)
        throw Error(ErrorCode::kInvalidSchema, "duplicate column '" + c.name + "'");
      if (c.kind == ColumnKind::kResponse) ++responses;
      if (c.kind == ColumnKind::kNumericFeature || c.kind == ColumnKind::kCategoricalFeature)
        ++features;
    }
    if (features == 0) throw Error(ErrorCode::kInvalidSchema, "schema has no feature column");
    if (responses == 0) throw Error(ErrorCode::kInvalidSchema, "schema has no response column");
  }

  // Indices (into columns) of feature columns, in schema order.
  std::vector<std::size_t> feature_columns() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (is_feature(columns[i].kind)) out.push_back(i);
    return out;
  }

  std::vector<std::size_t> response_columns() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].kind == ColumnKind::kResponse) out.push_back(i);
    return out;
  }

  std::optional<std::size_t> find(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == name) return i;
    return std::nullopt;
  }

  static bool is_feature(ColumnKind kind) {
    return kind == ColumnKind::kNumericFeature || kind == ColumnKind::kCategoricalFeature;
  }

  friend bool operator==(const Schema&, const Schema&) = default;
};

// Schema files are two-column CSV: `name,kind`, with an optional header line
// `name,kind` and '#' comments.
inline Schema parse_schema(std::string_view text) {
  Schema schema;
  for (const auto& rec : csv::parse(text)) {
    if (rec.size() != 2)
      throw Error(ErrorCode::kInvalidSchema, "schema lines must be 'name,kind'");
    if (rec[0] == "name" && rec[1] == "kind") continue;
    schema.columns.push_back({rec[0], parse_column_kind(rec[1]), {}});
  }
  schema.validate();
  return schema;
}

inline Schema read_schema(const std::filesystem::path& path) {
  return parse_schema(csv::read_file(path));
}

inline std::string format_schema(const Schema& schema) {
  std::string out = "name,kind\n";
  for (const auto& c : schema.columns)
    out += csv::join({c.name, std::string(column_kind_name(c.kind))}) + "\n";
  return out;
}

struct StandardizationParams {
  std::vector<double> response_means;
  std::vector<double> response_sds;

  friend bool operator==(const StandardizationParams&, const StandardizationParams&) = default;
};

// Encoded, fully numeric view of a table. `schema` carries the learned
// categorical levels so the same encoding can be replayed at prediction time.
struct Dataset {
  Schema schema;
  Matrix features;   // N x P (encoded)
  Matrix responses;  // N x Q
  std::vector<std::string> feature_names;
  std::vector<std::size_t> feature_origin;  // P entries, index into schema.columns
  std::vector<std::string> response_names;

  std::size_t n_rows() const { return features.rows(); }
  std::size_t n_features() const { return features.cols(); }
  std::size_t n_responses() const { return responses.cols(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> parse_number(std::string_view cell) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

inline double sample_sd(std::span<const double> v, double mean) {
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

// Rebuilds feature_names / feature_origin from a schema whose categorical
// columns already carry their levels.
inline void layout_features(const Schema& schema, std::vector<std::string>& names,
                            std::vector<std::size_t>& origin) {
  names.clear();
  origin.clear();
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    const auto& col = schema.columns[c];
    if (col.kind == ColumnKind::kNumericFeature) {
      names.push_back(col.name);
      origin.push_back(c);
    } else if (col.kind == ColumnKind::kCategoricalFeature) {
      for (const auto& level : col.levels) {
        names.push_back(col.name + "=" + level);
        origin.push_back(c);
      }
    }
  }
}

inline void check_responses_not_constant(const Dataset& d) {
  for (std::size_t q = 0; q < d.n_responses(); ++q) {
    const auto col = d.responses.column(q);
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    // Compared exactly: a rounded mean gives a tiny nonzero sd for constant columns.
    if (col.empty() || *lo == *hi)
      throw Error(ErrorCode::kConstantResponse,
                  "response '" + d.response_names[q] + "' has zero variance");
  }
}

struct EncodeOptions {
  // Replace missing numeric features by the column mean and missing
  // categoricals by the mode.
  bool impute = false;
  // Reuse the levels already present in the schema instead of learning them.
  // Unseen levels are then an error.
  bool fixed_levels = false;
  // When false, response columns absent from the header yield Q = 0.
  bool require_responses = true;
};

inline Dataset encode_records(const std::vector<csv::Record>& records, Schema schema,
                              const EncodeOptions& opt = {}) {
  schema.validate();
  if (records.empty()) throw Error(ErrorCode::kEmptyDataset, "no header row");
  const auto& header = records.front();
  const std::size_t n = records.size() - 1;

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < header.size(); ++i)
    position.emplace(std::string(detail::trim(header[i])), i);

  bool have_responses = true;
  std::vector<std::size_t> source(schema.columns.size(), 0);
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    const auto& col = schema.columns[c];
    if (col.kind == ColumnKind::kIgnore) continue;
    auto it = position.find(col.name);
    if (it == position.end()) {
      if (col.kind == ColumnKind::kResponse && !opt.require_responses) {
        have_responses = false;
        continue;
      }
      throw Error(ErrorCode::kMissingColumn, "column '" + col.name + "' not found in header");
    }
    source[c] = it->second;
  }
  if (n == 0) throw Error(ErrorCode::kEmptyDataset, "no data rows");
  if (opt.require_responses && n < 2)
    throw Error(ErrorCode::kEmptyDataset, "at least 2 data rows required");

  for (std::size_t r = 1; r < records.size(); ++r)
    if (records[r].size() != header.size())
      throw Error(ErrorCode::kNonNumericCell,
                  "row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                      " fields, header has " + std::to_string(header.size()));

  auto cell = [&](std::size_t row, std::size_t c) -> std::string_view {
    return detail::trim(records[row + 1][source[c]]);
  };

  // Numeric columns (features and responses), with optional mean imputation.
  std::vector<std::vector<double>> numeric(schema.columns.size());
  std::vector<std::vector<std::string>> categorical(schema.columns.size());
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    auto& col = schema.columns[c];
    if (col.kind == ColumnKind::kIgnore) continue;
    if (col.kind == ColumnKind::kResponse && !have_responses) continue;
    if (col.kind == ColumnKind::kCategoricalFeature) {
      auto& values = categorical[c];
      values.resize(n);
      std::map<std::string, std::size_t> counts;
      std::vector<std::size_t> missing;
      for (std::size_t r = 0; r < n; ++r) {
        values[r] = std::string(cell(r, c));
        if (values[r].empty())
          missing.push_back(r);
        else
          ++counts[values[r]];
      }
      if (!missing.empty()) {
        if (!opt.impute || counts.empty())
          throw Error(ErrorCode::kNonNumericCell,
                      "missing value in column '" + col.name + "' at row " +
                          std::to_string(missing.front() + 1));
        // Mode, ties to the lexicographically smallest level (map order).
        auto mode = counts.begin();
        for (auto it = counts.begin(); it != counts.end(); ++it)
          if (it->second > mode->second) mode = it;
        for (auto r : missing) values[r] = mode->first;
        mode->second += missing.size();
      }
      if (opt.fixed_levels) {
        for (std::size_t r = 0; r < n; ++r)
          if (!std::binary_search(col.levels.begin(), col.levels.end(), values[r]))
            throw Error(ErrorCode::kUnknownLevel, "column '" + col.name + "' has unseen level '" +
                                                      values[r] + "'");
      } else {
        col.levels.clear();
        for (const auto& [level, count] : counts) col.levels.push_back(level);
      }
      continue;
    }
    auto& values = numeric[c];
    values.resize(n);
    std::vector<std::size_t> missing;
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t r = 0; r < n; ++r) {
      auto text = cell(r, c);
      if (text.empty()) {
        missing.push_back(r);
        continue;
      }
      auto v = detail::parse_number(text);
      if (!v)
        throw Error(ErrorCode::kNonNumericCell, "column '" + col.name + "' row " +
                                                    std::to_string(r + 1) + ": '" +
                                                    std::string(text) + "' is not a number");
      values[r] = *v;
      sum += *v;
      ++present;
    }
    if (!missing.empty()) {
      if (!opt.impute || col.kind == ColumnKind::kResponse || present == 0)
        throw Error(ErrorCode::kNonNumericCell, "missing value in column '" + col.name +
                                                    "' at row " +
                                                    std::to_string(missing.front() + 1));
      const double mean = sum / static_cast<double>(present);
      for (auto r : missing) values[r] = mean;
    }
  }

  Dataset d;
  d.schema = std::move(schema);
  layout_features(d.schema, d.feature_names, d.feature_origin);
  d.features = Matrix(n, d.feature_names.size());
  std::size_t j = 0;
  for (std::size_t c = 0; c < d.schema.columns.size(); ++c) {
    const auto& col = d.schema.columns[c];
    if (col.kind == ColumnKind::kNumericFeature) {
      for (std::size_t r = 0; r < n; ++r) d.features(r, j) = numeric[c][r];
      ++j;
    } else if (col.kind == ColumnKind::kCategoricalFeature) {
      for (std::size_t r = 0; r < n; ++r) {
        auto it = std::lower_bound(col.levels.begin(), col.levels.end(), categorical[c][r]);
        d.features(r, j + static_cast<std::size_t>(it - col.levels.begin())) = 1.0;
      }
      j += col.levels.size();
    }
  }
  auto response_cols = d.schema.response_columns();
  if (have_responses) {
    d.responses = Matrix(n, response_cols.size());
    for (std::size_t q = 0; q < response_cols.size(); ++q) {
      d.response_names.push_back(d.schema.columns[response_cols[q]].name);
      for (std::size_t r = 0; r < n; ++r) d.responses(r, q) = numeric[response_cols[q]][r];
    }
    if (opt.require_responses) check_responses_not_constant(d);
  } else {
    d.responses = Matrix(n, 0);
    for (auto c : response_cols) d.response_names.push_back(d.schema.columns[c].name);
  }
  return d;
}

inline Dataset load_csv(const std::filesystem::path& path, const Schema& schema,
                        bool impute = false) {
  return encode_records(csv::read(path), schema, {.impute = impute});
}

// Ingests rows for an already-fitted model: levels come from `schema` and the
// response columns are optional.
inline Dataset load_csv_for_model(const std::filesystem::path& path, const Schema& schema,
                                  bool impute = false) {
  return encode_records(csv::read(path), schema,
                        {.impute = impute, .fixed_levels = true, .require_responses = false});
}

inline std::pair<Dataset, StandardizationParams> standardize_responses(Dataset d) {
  check_responses_not_constant(d);
  StandardizationParams params;
  const std::size_t n = d.n_rows();
  for (std::size_t q = 0; q < d.n_responses(); ++q) {
    auto col = d.responses.column(q);
    const double mean = detail::mean_of(col);
    const double sd = detail::sample_sd(col, mean);
    params.response_means.push_back(mean);
    params.response_sds.push_back(sd);
    for (std::size_t r = 0; r < n; ++r) d.responses(r, q) = (col[r] - mean) / sd;
  }
  return {std::move(d), std::move(params)};
}

inline Matrix apply_standardization(const Matrix& y, const StandardizationParams& p) {
  Matrix out = y;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t q = 0; q < y.cols(); ++q)
      out(r, q) = (y(r, q) - p.response_means[q]) / p.response_sds[q];
  return out;
}

inline Matrix invert_standardization(const Matrix& y, const StandardizationParams& p) {
  Matrix out = y;
  for (std::size_t r = 0; r < y.rows(); ++r)
    for (std::size_t q = 0; q < y.cols(); ++q)
      out(r, q) = y(r, q) * p.response_sds[q] + p.response_means[q];
  return out;
}

inline Dataset select_rows(const Dataset& d, std::span<const std::size_t> rows) {
  Dataset out;
  out.schema = d.schema;
  out.features = d.features.select_rows(rows);
  out.responses = d.responses.select_rows(rows);
  out.feature_names = d.feature_names;
  out.feature_origin = d.feature_origin;
  out.response_names = d.response_names;
  return out;
}

// Single-response view; other response columns become `ignore` in the schema.
inline Dataset select_response(const Dataset& d, std::size_t q) {
  Dataset out;
  out.schema = d.schema;
  auto response_cols = out.schema.response_columns();
  for (std::size_t k = 0; k < response_cols.size(); ++k)
    if (k != q) out.schema.columns[response_cols[k]].kind = ColumnKind::kIgnore;
  out.features = d.features;
  out.responses = Matrix(d.n_rows(), 1);
  for (std::size_t r = 0; r < d.n_rows(); ++r) out.responses(r, 0) = d.responses(r, q);
  out.feature_names = d.feature_names;
  out.feature_origin = d.feature_origin;
  out.response_names = {d.response_names[q]};
  return out;
}

// Builds a dataset from numeric matrices; every feature is a numeric column.
inline Dataset make_numeric_dataset(Matrix features, Matrix responses,
                                    std::vector<std::string> feature_names = {},
                                    std::vector<std::string> response_names = {}) {
  if (feature_names.empty())
    for (std::size_t j = 0; j < features.cols(); ++j)
      feature_names.push_back("x" + std::to_string(j + 1));
  if (response_names.empty())
    for (std::size_t q = 0; q < responses.cols(); ++q)
      response_names.push_back("y" + std::to_string(q + 1));
  if (feature_names.size() != features.cols() || response_names.size() != responses.cols() ||
      features.rows() != responses.rows())
    throw Error(ErrorCode::kShapeMismatch, "names or row counts do not match matrices");
  Dataset d;
  for (const auto& name : feature_names)
    d.schema.columns.push_back({name, ColumnKind::kNumericFeature, {}});
  for (const auto& name : response_names)
    d.schema.columns.push_back({name, ColumnKind::kResponse, {}});
  d.schema.validate();
  d.features = std::move(features);
  d.responses = std::move(responses);
  d.feature_names = std::move(feature_names);
  for (std::size_t j = 0; j < d.feature_names.size(); ++j) d.feature_origin.push_back(j);
  d.response_names = std::move(response_names);
  return d;
}

// Decodes back to source columns (categoricals as their level text).
inline std::string format_dataset_csv(const Dataset& d, std::string_view comment = {}) {
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  csv::Record header;
  std::vector<std::size_t> first_encoded(d.schema.columns.size(), 0);
  for (std::size_t j = d.feature_origin.size(); j-- > 0;) first_encoded[d.feature_origin[j]] = j;
  const bool with_responses = d.n_responses() > 0;
  for (const auto& col : d.schema.columns) {
    if (col.kind == ColumnKind::kIgnore) continue;
    if (col.kind == ColumnKind::kResponse && !with_responses) continue;
    header.push_back(col.name);
  }
  out += csv::join(header) + "\n";
  for (std::size_t r = 0; r < d.n_rows(); ++r) {
    csv::Record rec;
    std::size_t q = 0;
    for (std::size_t c = 0; c < d.schema.columns.size(); ++c) {
      const auto& col = d.schema.columns[c];
      switch (col.kind) {
        case ColumnKind::kIgnore: break;
        case ColumnKind::kResponse:
          if (with_responses) rec.push_back(csv::format_double(d.responses(r, q++)));
          break;
        case ColumnKind::kNumericFeature:
          rec.push_back(csv::format_double(d.features(r, first_encoded[c])));
          break;
        case ColumnKind::kCategoricalFeature: {
          std::string level;
          for (std::size_t k = 0; k < col.levels.size(); ++k)
            if (d.features(r, first_encoded[c] + k) == 1.0) level = col.levels[k];
          rec.push_back(level);
          break;
        }
      }
    }
    out += csv::join(rec) + "\n";
  }
  return out;
}

struct SyntheticSpec {
  std::size_t n = 500;
  std::uint64_t seed = 0;
  double noise_corr = 0.0;
  // Knobs beyond the base benchmark; defaults give
  // y1 = 2 x1 + sin(2 pi x2) + e1, y2 = 2 x1 + x3^2 + e2, sd(e) = 0.5.
  double noise_sd = 0.5;
  double y1_shared = 2.0;
  double y2_shared = 2.0;
  double y2_own = 1.0;
};

inline Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n < 50) throw Error(ErrorCode::kInvalidSpec, "n must be at least 50");
  if (!(spec.noise_corr > -1.0 && spec.noise_corr < 1.0))
    throw Error(ErrorCode::kInvalidSpec, "noise_corr must lie in (-1, 1)");
  if (!(spec.noise_sd >= 0.0) || !std::isfinite(spec.noise_sd))
    throw Error(ErrorCode::kInvalidSpec, "noise_sd must be finite and nonnegative");

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double rho = spec.noise_corr;
  const double rho_c = std::sqrt(1.0 - rho * rho);

  Matrix x(spec.n, 5), y(spec.n, 2);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (std::size_t j = 0; j < 5; ++j) x(i, j) = unif(rng);
    const double z1 = normal(rng);
    const double z2 = normal(rng);
    const double e1 = spec.noise_sd * z1;
    const double e2 = spec.noise_sd * (rho * z1 + rho_c * z2);
    y(i, 0) = spec.y1_shared * x(i, 0) + std::sin(2.0 * std::numbers::pi * x(i, 1)) + e1;
    y(i, 1) = spec.y2_shared * x(i, 0) + spec.y2_own * x(i, 2) * x(i, 2) + e2;
  }
  return make_numeric_dataset(std::move(x), std::move(y));
}

}  // namespace mvboost
