#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "mvboost/error.hpp"
#include "mvboost/matrix.hpp"

namespace mvboost {

// Splits whose summed gain does not exceed this are rejected.
inline constexpr double kMinSplitGain = 1e-12;
// Candidate gains within this relative distance of the best are ties and are
// resolved by (feature, threshold) order, so float noise from row order or
// summation order cannot flip the choice.
inline constexpr double kGainTieTolerance = 1e-12;

struct SplitRule {
  std::size_t feature = 0;
  double threshold = 0.0;
  double total_gain = 0.0;
  std::vector<double> per_response_gain;

  friend bool operator==(const SplitRule&, const SplitRule&) = default;
};

struct TreeParams {
  std::size_t max_depth = 3;
  std::size_t min_node_size = 5;
};

struct TreeNode {
  std::optional<SplitRule> split;  // set for internal nodes
  std::size_t left = 0;
  std::size_t right = 0;
  std::vector<double> leaf_value;  // set for leaves
  std::size_t n_rows = 0;

  bool is_leaf() const { return !split.has_value(); }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Binary multivariate regression tree stored as a flat node array in
// depth-first preorder; nodes[0] is the root.
class Tree {
 public:
  Tree() = default;
  Tree(std::vector<TreeNode> nodes, std::size_t n_outputs)
      : nodes_(std::move(nodes)), n_outputs_(n_outputs) {}

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t n_outputs() const { return n_outputs_; }

  std::size_t depth() const {
    if (nodes_.empty()) return 0;
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [idx, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      const auto& node = nodes_[idx];
      if (!node.is_leaf()) {
        stack.emplace_back(node.left, d + 1);
        stack.emplace_back(node.right, d + 1);
      }
    }
    return best;
  }

  std::size_t leaf_index(std::span<const double> x) const {
    std::size_t idx = 0;
    while (!nodes_[idx].is_leaf()) {
      const auto& s = *nodes_[idx].split;
      idx = x[s.feature] <= s.threshold ? nodes_[idx].left : nodes_[idx].right;
    }
    return idx;
  }

  const std::vector<double>& predict(std::span<const double> x) const {
    return nodes_[leaf_index(x)].leaf_value;
  }

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  std::vector<TreeNode> nodes_;
  std::size_t n_outputs_ = 0;
};

inline const std::vector<double>& predict_tree(const Tree& t, std::span<const double> x) {
  return t.predict(x);
}

namespace detail {

// Rows of a node, one ordering per feature, each sorted by (value, row id).
using FeatureOrders = std::vector<std::vector<std::size_t>>;

inline FeatureOrders sort_rows_by_feature(const Matrix& x, std::span<const std::size_t> rows) {
  FeatureOrders orders(x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    auto& order = orders[f];
    order.assign(rows.begin(), rows.end());
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = x(a, f), vb = x(b, f);
      return va < vb || (va == vb && a < b);
    });
  }
  return orders;
}

inline std::vector<double> column_sums(const Matrix& y, std::span<const std::size_t> rows) {
  std::vector<double> sums(y.cols(), 0.0);
  for (auto r : rows)
    for (std::size_t q = 0; q < y.cols(); ++q) sums[q] += y(r, q);
  return sums;
}

struct Candidate {
  std::size_t position;  // last index (in the feature order) routed left
  double gain;
};

inline std::optional<SplitRule> best_split_from_orders(const Matrix& x, const Matrix& y,
                                                       const FeatureOrders& orders,
                                                       std::size_t min_node_size) {
  const std::size_t n = orders.empty() ? 0 : orders.front().size();
  const std::size_t q_count = y.cols();
  const std::size_t min_size = std::max<std::size_t>(min_node_size, 1);
  if (n < 2 * min_size || orders.empty()) return std::nullopt;

  const std::vector<double> total = column_sums(y, orders.front());
  std::vector<std::vector<Candidate>> candidates(orders.size());
  double best_gain = 0.0;
  std::vector<double> left(q_count);

  for (std::size_t f = 0; f < orders.size(); ++f) {
    const auto& order = orders[f];
    std::fill(left.begin(), left.end(), 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const std::size_t r = order[i];
      for (std::size_t q = 0; q < q_count; ++q) left[q] += y(r, q);
      const std::size_t n_left = i + 1, n_right = n - n_left;
      if (n_left < min_size) continue;
      if (n_right < min_size) break;
      if (!(x(r, f) < x(order[i + 1], f))) continue;
      const double nl = static_cast<double>(n_left), nr = static_cast<double>(n_right);
      const double w = nl * nr / static_cast<double>(n);
      double gain = 0.0;
      for (std::size_t q = 0; q < q_count; ++q) {
        const double diff = left[q] / nl - (total[q] - left[q]) / nr;
        gain += w * diff * diff;
      }
      candidates[f].push_back({i, gain});
      best_gain = std::max(best_gain, gain);
    }
  }
  if (!(best_gain > kMinSplitGain)) return std::nullopt;

  const double cutoff = best_gain - kGainTieTolerance * std::max(1.0, best_gain);
  for (std::size_t f = 0; f < orders.size(); ++f) {
    for (const auto& c : candidates[f]) {
      if (c.gain < cutoff) continue;
      const auto& order = orders[f];
      SplitRule rule;
      rule.feature = f;
      rule.threshold = (x(order[c.position], f) + x(order[c.position + 1], f)) / 2.0;
      // Per-response gains recomputed in the same form as the summed gain.
      std::vector<double> lsum(q_count, 0.0);
      for (std::size_t i = 0; i <= c.position; ++i)
        for (std::size_t q = 0; q < q_count; ++q) lsum[q] += y(order[i], q);
      const double nl = static_cast<double>(c.position + 1);
      const double nr = static_cast<double>(n) - nl;
      const double w = nl * nr / static_cast<double>(n);
      rule.per_response_gain.resize(q_count);
      rule.total_gain = 0.0;
      for (std::size_t q = 0; q < q_count; ++q) {
        const double diff = lsum[q] / nl - (total[q] - lsum[q]) / nr;
        rule.per_response_gain[q] = w * diff * diff;
        rule.total_gain += rule.per_response_gain[q];
      }
      return rule;
    }
  }
  return std::nullopt;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const Matrix& y, const TreeParams& params)
      : x_(x), y_(y), params_(params), goes_left_(x.rows(), 0) {}

  Tree build(std::span<const std::size_t> rows) {
    nodes_.clear();
    grow(sort_rows_by_feature(x_, rows), rows, 0);
    return Tree(std::move(nodes_), y_.cols());
  }

 private:
  std::size_t grow(FeatureOrders orders, std::span<const std::size_t> rows, std::size_t depth) {
    const std::size_t idx = nodes_.size();
    nodes_.emplace_back();
    nodes_[idx].n_rows = rows.size();

    std::optional<SplitRule> split;
    if (depth < params_.max_depth && x_.cols() > 0)
      split = best_split_from_orders(x_, y_, orders, params_.min_node_size);

    if (!split) {
      auto sums = column_sums(y_, rows);
      for (auto& s : sums) s /= static_cast<double>(rows.size());
      nodes_[idx].leaf_value = std::move(sums);
      return idx;
    }

    std::vector<std::size_t> left_rows, right_rows;
    for (auto r : orders[split->feature]) {
      const bool left = x_(r, split->feature) <= split->threshold;
      goes_left_[r] = left ? 1 : 0;
      (left ? left_rows : right_rows).push_back(r);
    }
    FeatureOrders left_orders(orders.size()), right_orders(orders.size());
    for (std::size_t f = 0; f < orders.size(); ++f) {
      left_orders[f].reserve(left_rows.size());
      right_orders[f].reserve(right_rows.size());
      for (auto r : orders[f]) (goes_left_[r] ? left_orders[f] : right_orders[f]).push_back(r);
    }
    orders.clear();
    orders.shrink_to_fit();

    nodes_[idx].split = std::move(split);
    const std::size_t l = grow(std::move(left_orders), left_rows, depth + 1);
    const std::size_t r = grow(std::move(right_orders), right_rows, depth + 1);
    nodes_[idx].left = l;
    nodes_[idx].right = r;
    return idx;
  }

  const Matrix& x_;
  const Matrix& y_;
  TreeParams params_;
  std::vector<char> goes_left_;
  std::vector<TreeNode> nodes_;
};

}  // namespace detail

// Best (feature, threshold) over `rows` by summed SSE reduction across all
// target columns; thresholds are midpoints of consecutive distinct values.
inline std::optional<SplitRule> find_best_split(const Matrix& x, const Matrix& y,
                                                std::span<const std::size_t> rows,
                                                std::size_t min_node_size) {
  if (x.rows() != y.rows())
    throw Error(ErrorCode::kShapeMismatch, "feature and target row counts differ");
  return detail::best_split_from_orders(x, y, detail::sort_rows_by_feature(x, rows),
                                        min_node_size);
}

inline Tree fit_tree(const Matrix& x, const Matrix& y, std::span<const std::size_t> rows,
                     const TreeParams& params) {
  if (rows.empty() || y.cols() == 0) throw Error(ErrorCode::kEmptyInput, "no rows to fit");
  if (x.rows() != y.rows())
    throw Error(ErrorCode::kShapeMismatch, "feature and target row counts differ");
  return detail::TreeBuilder(x, y, params).build(rows);
}

inline Tree fit_tree(const Matrix& x, const Matrix& y, const TreeParams& params) {
  std::vector<std::size_t> rows(x.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fit_tree(x, y, rows, params);
}

}  // namespace mvboost
