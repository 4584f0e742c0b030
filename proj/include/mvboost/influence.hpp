#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mvboost/boosting.hpp"
#include "mvboost/csv.hpp"
#include "mvboost/error.hpp"
#include "mvboost/matrix.hpp"

namespace mvboost {

// Percent share of split gain per (source predictor, response).
struct InfluenceMatrix {
  Matrix values;  // P_orig x Q
  std::vector<std::string> feature_names;
  std::vector<std::string> response_names;
};

struct ImportanceEntry {
  std::string feature;
  double score = 0.0;

  friend bool operator==(const ImportanceEntry&, const ImportanceEntry&) = default;
};

// Residual-covariance reduction per (source predictor, response pair i <= j).
struct PairInfluenceTensor {
  Matrix values;  // P_orig x Q(Q+1)/2
  std::vector<std::string> feature_names;
  std::vector<std::pair<std::string, std::string>> pair_labels;
  std::vector<std::pair<std::size_t, std::size_t>> pair_index;

  std::vector<std::string> pair_names() const {
    std::vector<std::string> out;
    for (const auto& [a, b] : pair_labels) out.push_back(a + ":" + b);
    return out;
  }
};

struct DistanceMatrix {
  std::vector<std::string> labels;
  Matrix values;
};

struct Merge {
  std::size_t a = 0;  // cluster ids: leaves are 0..K-1, merge i creates K+i
  std::size_t b = 0;
  double height = 0.0;

  friend bool operator==(const Merge&, const Merge&) = default;
};

struct Dendrogram {
  std::vector<std::string> labels;
  std::vector<Merge> merges;
};

enum class Linkage { kComplete, kSingle, kAverage };

// Source (schema) feature columns in schema order and, for each encoded
// column, the row it aggregates into.
struct OriginMap {
  std::vector<std::string> names;
  std::vector<std::size_t> row_of_encoded;
};

inline OriginMap origin_map(const Schema& schema, const std::vector<std::size_t>& feature_origin) {
  OriginMap map;
  std::vector<std::size_t> row_of_column(schema.columns.size(), 0);
  for (auto c : schema.feature_columns()) {
    row_of_column[c] = map.names.size();
    map.names.push_back(schema.columns[c].name);
  }
  for (auto c : feature_origin) map.row_of_encoded.push_back(row_of_column.at(c));
  return map;
}

// Summed per-response split gain per encoded feature over the active trees,
// floored at zero per (feature, response).
inline Matrix raw_influence(const BoostedModel& model) {
  if (!model.fitted()) throw Error(ErrorCode::kUnfittedModel, "model has not been fitted");
  Matrix raw(model.n_features(), model.n_responses());
  for (const auto& tree : model.active_trees())
    for (const auto& node : tree.nodes())
      if (!node.is_leaf())
        for (std::size_t q = 0; q < model.n_responses(); ++q)
          raw(node.split->feature, q) += node.split->per_response_gain[q];
  for (std::size_t k = 0; k < raw.rows(); ++k)
    for (std::size_t q = 0; q < raw.cols(); ++q) raw(k, q) = std::max(0.0, raw(k, q));
  return raw;
}

inline Matrix aggregate_rows(const Matrix& encoded, const OriginMap& map) {
  Matrix out(map.names.size(), encoded.cols());
  for (std::size_t k = 0; k < encoded.rows(); ++k)
    for (std::size_t q = 0; q < encoded.cols(); ++q)
      out(map.row_of_encoded[k], q) += encoded(k, q);
  return out;
}

// Scales each nonzero column to sum to 100.
inline Matrix normalize_columns(Matrix m) {
  for (std::size_t q = 0; q < m.cols(); ++q) {
    double total = 0.0;
    for (std::size_t k = 0; k < m.rows(); ++k) total += m(k, q);
    if (total > 0.0)
      for (std::size_t k = 0; k < m.rows(); ++k) m(k, q) = 100.0 * m(k, q) / total;
  }
  return m;
}

inline InfluenceMatrix relative_influence(const BoostedModel& model) {
  const auto map = origin_map(model.schema, model.feature_origin);
  return {normalize_columns(aggregate_rows(raw_influence(model), map)), map.names,
          model.response_names};
}

inline std::vector<ImportanceEntry> global_importance(const InfluenceMatrix& infl) {
  std::vector<ImportanceEntry> out;
  double total = 0.0;
  for (std::size_t k = 0; k < infl.values.rows(); ++k) {
    double s = 0.0;
    for (std::size_t q = 0; q < infl.values.cols(); ++q) s += infl.values(k, q);
    out.push_back({infl.feature_names[k], s});
    total += s;
  }
  if (total > 0.0)
    for (auto& e : out) e.score = 100.0 * e.score / total;
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.score > b.score || (a.score == b.score && a.feature < b.feature);
  });
  return out;
}

inline PairInfluenceTensor covariance_explained(const BoostedModel& model,
                                                const TrainingTrace& trace) {
  if (!model.fitted()) throw Error(ErrorCode::kUnfittedModel, "model has not been fitted");
  const std::size_t q = model.n_responses();
  const std::size_t iterations = model.active_trees().size();
  if (trace.residual_cov.size() < iterations + 1)
    throw Error(ErrorCode::kMissingTrace, "trace holds " +
                                              std::to_string(trace.residual_cov.size()) +
                                              " covariance snapshots, need " +
                                              std::to_string(iterations + 1));
  for (const auto& cov : trace.residual_cov)
    if (cov.rows() != q || cov.cols() != q)
      throw Error(ErrorCode::kMissingTrace, "trace covariance has wrong dimension");

  const auto map = origin_map(model.schema, model.feature_origin);
  PairInfluenceTensor out;
  out.feature_names = map.names;
  for (std::size_t i = 0; i < q; ++i)
    for (std::size_t j = i; j < q; ++j) {
      out.pair_index.emplace_back(i, j);
      out.pair_labels.emplace_back(model.response_names[i], model.response_names[j]);
    }
  out.values = Matrix(map.names.size(), out.pair_index.size());

  std::vector<double> share(map.names.size());
  for (std::size_t m = 1; m <= iterations; ++m) {
    std::fill(share.begin(), share.end(), 0.0);
    double total = 0.0;
    for (const auto& node : model.trees[m - 1].nodes()) {
      if (node.is_leaf()) continue;
      share[map.row_of_encoded[node.split->feature]] += node.split->total_gain;
      total += node.split->total_gain;
    }
    // A split-free tree shifts every row equally and leaves covariance unchanged.
    if (!(total > 0.0)) continue;
    const auto& before = trace.residual_cov[m - 1];
    const auto& after = trace.residual_cov[m];
    for (std::size_t p = 0; p < out.pair_index.size(); ++p) {
      const auto [i, j] = out.pair_index[p];
      const double delta = before(i, j) - after(i, j);
      for (std::size_t k = 0; k < share.size(); ++k)
        if (share[k] != 0.0) out.values(k, p) += delta * share[k] / total;
    }
  }
  return out;
}

inline DistanceMatrix manhattan_distances(const Matrix& rows, std::vector<std::string> labels) {
  if (rows.rows() < 2)
    throw Error(ErrorCode::kDimensionMismatch, "need at least two rows to compare");
  if (labels.size() != rows.rows())
    throw Error(ErrorCode::kDimensionMismatch, "label count does not match row count");
  DistanceMatrix d{std::move(labels), Matrix(rows.rows(), rows.rows())};
  for (std::size_t a = 0; a < rows.rows(); ++a)
    for (std::size_t b = a + 1; b < rows.rows(); ++b) {
      double s = 0.0;
      for (std::size_t c = 0; c < rows.cols(); ++c) s += std::abs(rows(a, c) - rows(b, c));
      d.values(a, b) = d.values(b, a) = s;
    }
  return d;
}

inline DistanceMatrix predictor_distances(const PairInfluenceTensor& t) {
  return manhattan_distances(t.values, t.feature_names);
}

inline DistanceMatrix response_pair_distances(const PairInfluenceTensor& t) {
  return manhattan_distances(t.values.transposed(), t.pair_names());
}

inline Dendrogram hierarchical_cluster(const DistanceMatrix& d,
                                       Linkage linkage = Linkage::kComplete) {
  const std::size_t k = d.values.rows();
  if (k < 2) throw Error(ErrorCode::kTooFewItems, "need at least two items to cluster");
  if (d.values.cols() != k || d.labels.size() != k)
    throw Error(ErrorCode::kDimensionMismatch, "distance matrix is not square");
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = 0; b < k; ++b)
      if (d.values(a, b) != d.values(b, a) || d.values(a, b) < 0.0 ||
          (a == b && d.values(a, b) != 0.0) || !std::isfinite(d.values(a, b)))
        throw Error(ErrorCode::kDimensionMismatch,
                    "distances must be finite, symmetric, nonnegative, zero on the diagonal");

  struct Cluster {
    std::size_t id;
    std::vector<std::size_t> members;
  };
  std::vector<Cluster> active;
  for (std::size_t i = 0; i < k; ++i) active.push_back({i, {i}});

  auto link = [&](const Cluster& x, const Cluster& y) {
    double best = linkage == Linkage::kSingle ? std::numeric_limits<double>::infinity() : 0.0;
    double sum = 0.0;
    for (auto a : x.members)
      for (auto b : y.members) {
        const double v = d.values(a, b);
        if (linkage == Linkage::kComplete) best = std::max(best, v);
        if (linkage == Linkage::kSingle) best = std::min(best, v);
        sum += v;
      }
    if (linkage == Linkage::kAverage)
      return sum / static_cast<double>(x.members.size() * y.members.size());
    return best;
  };

  Dendrogram out{d.labels, {}};
  std::size_t next_id = k;
  while (active.size() > 1) {
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    std::pair<std::size_t, std::size_t> best_key{0, 0};
    for (std::size_t i = 0; i < active.size(); ++i)
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        const double h = link(active[i], active[j]);
        const std::pair<std::size_t, std::size_t> key{std::min(active[i].id, active[j].id),
                                                      std::max(active[i].id, active[j].id)};
        if (h < best || (h == best && key < best_key)) {
          best = h;
          best_key = key;
          bi = i;
          bj = j;
        }
      }
    out.merges.push_back({best_key.first, best_key.second, best});
    Cluster merged{next_id++, active[bi].members};
    merged.members.insert(merged.members.end(), active[bj].members.begin(),
                          active[bj].members.end());
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bi));
    active.push_back(std::move(merged));
  }
  return out;
}

// ---- exports ----

inline std::string format_matrix_csv(const Matrix& m, const std::string& corner,
                                     const std::vector<std::string>& row_labels,
                                     const std::vector<std::string>& col_labels,
                                     std::string_view comment = {}) {
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  csv::Record header{corner};
  header.insert(header.end(), col_labels.begin(), col_labels.end());
  out += csv::join(header) + "\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    csv::Record rec{row_labels[r]};
    for (std::size_t c = 0; c < m.cols(); ++c) rec.push_back(csv::format_double(m(r, c)));
    out += csv::join(rec) + "\n";
  }
  return out;
}

inline std::string format_influence_csv(const InfluenceMatrix& m, std::string_view comment = {}) {
  return format_matrix_csv(m.values, "feature", m.feature_names, m.response_names, comment);
}

inline std::string format_pair_influence_csv(const PairInfluenceTensor& t,
                                             std::string_view comment = {}) {
  return format_matrix_csv(t.values, "feature", t.feature_names, t.pair_names(), comment);
}

inline std::string format_distance_csv(const DistanceMatrix& d, std::string_view comment = {}) {
  return format_matrix_csv(d.values, "label", d.labels, d.labels, comment);
}

inline std::string format_ranking_csv(const std::vector<ImportanceEntry>& ranking,
                                      std::string_view comment = {}) {
  std::string out;
  if (!comment.empty()) out += "# " + std::string(comment) + "\n";
  out += "rank,feature,score\n";
  for (std::size_t i = 0; i < ranking.size(); ++i)
    out += csv::join({std::to_string(i + 1), ranking[i].feature,
                      csv::format_double(ranking[i].score)}) +
           "\n";
  return out;
}

inline std::string dendrogram_to_json(const Dendrogram& dg) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json merges = nlohmann::ordered_json::array();
  for (const auto& m : dg.merges)
    merges.push_back(nlohmann::ordered_json::array({m.a, m.b, m.height}));
  j["merges"] = std::move(merges);
  j["labels"] = dg.labels;
  return j.dump(1) + "\n";
}

namespace detail {

inline std::string newick_label(const std::string& label) {
  if (!label.empty() && label.find_first_of(" ()[]':;,\t\n") == std::string::npos) return label;
  std::string out = "'";
  for (char c : label) {
    if (c == '\'') out.push_back('\'');
    out.push_back(c);
  }
  return out + "'";
}

}  // namespace detail

// Branch lengths are the height difference between a node and its parent.
inline std::string dendrogram_to_newick(const Dendrogram& dg) {
  const std::size_t k = dg.labels.size();
  if (dg.merges.size() + 1 != k) throw Error(ErrorCode::kDimensionMismatch, "incomplete dendrogram");
  auto height = [&](std::size_t id) { return id < k ? 0.0 : dg.merges[id - k].height; };
  std::function<std::string(std::size_t)> render = [&](std::size_t id) -> std::string {
    if (id < k) return detail::newick_label(dg.labels[id]);
    const auto& m = dg.merges[id - k];
    return "(" + render(m.a) + ":" + csv::format_double(m.height - height(m.a)) + "," +
           render(m.b) + ":" + csv::format_double(m.height - height(m.b)) + ")";
  };
  return render(2 * k - 2) + ";\n";
}

}  // namespace mvboost
