#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxai/common.hpp"
#include "cxai/matrix.hpp"

namespace cxai {

/// Internal nodes route x[feature] < threshold to `left`. Leaves have
/// feature == -1 and carry the prediction in `value`.
struct TreeNode {
  int feature = -1;
  double threshold = 0;
  int left = -1;
  int right = -1;
  double value = 0;
  double gain = 0;   // criterion improvement of the split (0 for leaves)
  double cover = 0;  // weighted row count reaching the node

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  std::size_t leaf_index(std::span<const double> x) const {
    std::size_t k = 0;
    while (!nodes[k].is_leaf()) {
      const auto& n = nodes[k];
      k = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right);
    }
    return k;
  }

  double predict(std::span<const double> x) const { return nodes[leaf_index(x)].value; }

  std::size_t n_leaves() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const auto& n) { return n.is_leaf(); }));
  }

  int depth() const { return depth_from(0); }

  bool operator==(const DecisionTree&) const = default;

 private:
  int depth_from(std::size_t k) const {
    const auto& n = nodes[k];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(static_cast<std::size_t>(n.left)), depth_from(static_cast<std::size_t>(n.right)));
  }
};

inline void to_json(nlohmann::json& j, const DecisionTree& t) {
  j = nlohmann::json::array();
  for (const auto& n : t.nodes) j.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.gain, n.cover});
}

inline void from_json(const nlohmann::json& j, DecisionTree& t) {
  t.nodes.clear();
  for (const auto& a : j) {
    TreeNode n;
    n.feature = a.at(0).get<int>();
    n.threshold = a.at(1).get<double>();
    n.left = a.at(2).get<int>();
    n.right = a.at(3).get<int>();
    n.value = a.at(4).get<double>();
    n.gain = a.at(5).get<double>();
    n.cover = a.at(6).get<double>();
    t.nodes.push_back(n);
  }
}

enum class SplitCriterion {
  Gini,          // classification: a = w*y, leaf = class-1 proportion
  SquaredError,  // regression:     a = w*r, leaf = mean response
  Newton,        // second order:   a = g, b = h, leaf = -G/(H+lambda)
};

struct TreeParams {
  int max_depth = 0;            // 0 = unlimited
  double min_leaf = 1;          // minimum weighted rows per child
  std::size_t mtry = 0;         // features tried per split, 0 = all
  std::vector<std::size_t> features;  // allowed columns, empty = all
  double lambda = 1.0;          // Newton only
  double gamma = 0.0;           // Newton only
  double min_child_weight = 0;  // Newton only: minimum hessian per child
};

/// Per-node sufficient statistics.
struct NodeStats {
  double w = 0, a = 0, b = 0;

  NodeStats& operator+=(const NodeStats& o) {
    w += o.w;
    a += o.a;
    b += o.b;
    return *this;
  }
  friend NodeStats operator-(NodeStats x, const NodeStats& y) {
    x.w -= y.w;
    x.a -= y.a;
    x.b -= y.b;
    return x;
  }
};

inline double gini_impurity(double w, double a) {
  if (w <= 0) return 0;
  const double p = a / w;
  return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

inline double xgb_leaf_weight(double g, double h, double lambda) { return -g / (h + lambda); }

inline double xgb_split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
  const auto score = [lambda](double g, double h) { return g * g / (h + lambda); };
  return 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma;
}

inline double split_gain(SplitCriterion c, const NodeStats& left, const NodeStats& right, const TreeParams& p) {
  switch (c) {
    case SplitCriterion::Gini: {
      const double w = left.w + right.w;
      return w * gini_impurity(w, left.a + right.a) - left.w * gini_impurity(left.w, left.a) -
             right.w * gini_impurity(right.w, right.a);
    }
    case SplitCriterion::SquaredError: {
      const double w = left.w + right.w, a = left.a + right.a;
      return left.a * left.a / left.w + right.a * right.a / right.w - a * a / w;
    }
    case SplitCriterion::Newton:
      return xgb_split_gain(left.a, left.b, right.a, right.b, p.lambda, p.gamma);
  }
  return 0;
}

inline double leaf_value(SplitCriterion c, const NodeStats& s, const TreeParams& p) {
  switch (c) {
    case SplitCriterion::Gini:
    case SplitCriterion::SquaredError:
      return s.w > 0 ? s.a / s.w : 0.0;
    case SplitCriterion::Newton:
      return xgb_leaf_weight(s.a, s.b, p.lambda);
  }
  return 0;
}

/// Splits with improvement at or below this are treated as zero gain.
inline constexpr double kMinSplitGain = 1e-12;

/// Row ids of a matrix sorted by each column; built once and shared by every
/// tree grown on the same matrix.
struct PresortedColumns {
  std::vector<std::vector<std::uint32_t>> order;

  explicit PresortedColumns(const Matrix& X) : order(X.cols()) {
    for (std::size_t f = 0; f < X.cols(); ++f) {
      auto& o = order[f];
      o.resize(X.rows);
      std::iota(o.begin(), o.end(), 0u);
      std::stable_sort(o.begin(), o.end(), [&](std::uint32_t i, std::uint32_t j) { return X(i, f) < X(j, f); });
    }
  }
};

/// Greedy exact CART growth over presorted columns.
///
/// Row statistics w/a/b are indexed by matrix row; rows with w == 0 are not
/// part of the sample. Candidate features per node are drawn from `rng` when
/// params.mtry is below the column count. Ties between equally good splits
/// keep the first found: lowest feature index, then lowest threshold.
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const PresortedColumns& sorted, SplitCriterion criterion, TreeParams params)
      : X_(X), sorted_(sorted), criterion_(criterion), params_(params) {}

  DecisionTree build(std::span<const double> w, std::span<const double> a, std::span<const double> b,
                     Rng* rng = nullptr) {
    w_ = w;
    a_ = a;
    b_ = b;
    rng_ = rng;
    goes_left_.assign(X_.rows, 0);
    tree_ = DecisionTree{};
    std::vector<std::vector<std::uint32_t>> lists(X_.cols());
    for (std::size_t f = 0; f < X_.cols(); ++f) {
      auto& l = lists[f];
      l.reserve(X_.rows);
      for (auto i : sorted_.order[f]) {
        if (w_[i] > 0) l.push_back(i);
      }
    }
    NodeStats total;
    if (X_.cols() == 0) {
      for (std::size_t i = 0; i < X_.rows; ++i) {
        if (w_[i] > 0) total += row_stats(i);
      }
    } else {
      for (auto i : lists[0]) total += row_stats(i);
    }
    grow(std::move(lists), total, 0);
    return std::move(tree_);
  }

 private:
  struct Candidate {
    int feature = -1;
    double threshold = 0;
    double gain = kMinSplitGain;
    NodeStats left;
  };

  NodeStats row_stats(std::size_t i) const { return {w_[i], a_[i], b_.empty() ? 0.0 : b_[i]}; }

  bool child_ok(const NodeStats& s) const {
    if (s.w < params_.min_leaf) return false;
    if (criterion_ == SplitCriterion::Newton && s.b < params_.min_child_weight) return false;
    return true;
  }

  std::vector<std::size_t> candidate_features() {
    std::vector<std::size_t> feats = params_.features;
    if (feats.empty()) {
      feats.resize(X_.cols());
      std::iota(feats.begin(), feats.end(), std::size_t{0});
    }
    if (params_.mtry == 0 || params_.mtry >= feats.size() || rng_ == nullptr) return feats;
    for (std::size_t k = 0; k < params_.mtry; ++k) {
      std::swap(feats[k], feats[k + rng_->below(feats.size() - k)]);
    }
    feats.resize(params_.mtry);
    std::sort(feats.begin(), feats.end());
    return feats;
  }

  Candidate best_split(const std::vector<std::vector<std::uint32_t>>& lists, const NodeStats& total) {
    Candidate best;
    for (auto f : candidate_features()) {
      const auto& l = lists[f];
      NodeStats left;
      for (std::size_t k = 0; k + 1 < l.size(); ++k) {
        left += row_stats(l[k]);
        const double v = X_(l[k], f);
        const double next = X_(l[k + 1], f);
        if (!(v < next)) continue;
        const NodeStats right = total - left;
        if (!child_ok(left) || !child_ok(right)) continue;
        const double gain = split_gain(criterion_, left, right, params_);
        if (gain > best.gain) {
          double thr = v + (next - v) / 2;
          if (!(v < thr)) thr = next;
          best = Candidate{static_cast<int>(f), thr, gain, left};
        }
      }
    }
    return best;
  }

  int grow(std::vector<std::vector<std::uint32_t>> lists, const NodeStats& total, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{});
    tree_.nodes[id].value = leaf_value(criterion_, total, params_);
    tree_.nodes[id].cover = total.w;

    const bool depth_left = params_.max_depth <= 0 || depth < params_.max_depth;
    if (!depth_left || X_.cols() == 0 || lists[0].size() < 2) return id;
    const Candidate best = best_split(lists, total);
    if (best.feature < 0) return id;

    const auto bf = static_cast<std::size_t>(best.feature);
    for (auto i : lists[bf]) goes_left_[i] = X_(i, bf) < best.threshold;
    std::vector<std::vector<std::uint32_t>> left_lists(lists.size()), right_lists(lists.size());
    for (std::size_t f = 0; f < lists.size(); ++f) {
      for (auto i : lists[f]) (goes_left_[i] ? left_lists[f] : right_lists[f]).push_back(i);
      std::vector<std::uint32_t>().swap(lists[f]);
    }
    const NodeStats right_total = total - best.left;

    tree_.nodes[id].feature = best.feature;
    tree_.nodes[id].threshold = best.threshold;
    tree_.nodes[id].gain = best.gain;
    const int l = grow(std::move(left_lists), best.left, depth + 1);
    tree_.nodes[id].left = l;
    const int r = grow(std::move(right_lists), right_total, depth + 1);
    tree_.nodes[id].right = r;
    return id;
  }

  const Matrix& X_;
  const PresortedColumns& sorted_;
  SplitCriterion criterion_;
  TreeParams params_;
  std::span<const double> w_, a_, b_;
  Rng* rng_ = nullptr;
  std::vector<char> goes_left_;
  DecisionTree tree_;
};

enum class TreeObjective { GiniImpurity, SquaredError };

/// Single CART tree on all rows: class-1 proportions for 0/1 targets with the
/// Gini objective, mean responses with squared error.
inline DecisionTree train_tree(const Matrix& X, std::span<const double> y, int max_depth, double min_leaf,
                               TreeObjective objective = TreeObjective::GiniImpurity) {
  if (X.rows == 0) throw Error(ErrorCode::InvalidArgument, "train_tree on empty data");
  if (y.size() != X.rows) throw Error(ErrorCode::InvalidArgument, "X/y length mismatch");
  PresortedColumns sorted(X);
  TreeParams p;
  p.max_depth = max_depth;
  p.min_leaf = min_leaf;
  const auto crit = objective == TreeObjective::GiniImpurity ? SplitCriterion::Gini : SplitCriterion::SquaredError;
  const std::vector<double> w(X.rows, 1.0);
  return TreeBuilder(X, sorted, crit, p).build(w, y, {});
}

}  // namespace cxai
