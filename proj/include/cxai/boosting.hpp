#pragma once

#include <cmath>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "cxai/predictor.hpp"
#include "cxai/tree.hpp"

namespace cxai {

enum class BoostVariant { Gbm, Xgb };

/// Boosting hyperparameters. Fields marked xgb are ignored by GBM.
struct BoostParams {
  int n_trees = 100;
  double learning_rate = 0.1;
  int max_depth = 3;
  double min_leaf = 1;
  double subsample = 1.0;
  double colsample = 1.0;         // xgb: share of features per tree
  double lambda = 1.0;            // xgb
  double gamma = 0.0;             // xgb
  double min_child_weight = 1.0;  // xgb
  std::uint64_t seed = 1;
};

inline void to_json(nlohmann::json& j, const BoostParams& p) {
  j = nlohmann::json{{"n_trees", p.n_trees},   {"learning_rate", p.learning_rate}, {"max_depth", p.max_depth},
                     {"min_leaf", p.min_leaf}, {"subsample", p.subsample},         {"colsample", p.colsample},
                     {"lambda", p.lambda},     {"gamma", p.gamma},                 {"min_child_weight", p.min_child_weight},
                     {"seed", p.seed}};
}

inline void from_json(const nlohmann::json& j, BoostParams& p) {
  p.n_trees = j.at("n_trees").get<int>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.max_depth = j.at("max_depth").get<int>();
  p.min_leaf = j.at("min_leaf").get<double>();
  p.subsample = j.at("subsample").get<double>();
  p.colsample = j.at("colsample").get<double>();
  p.lambda = j.at("lambda").get<double>();
  p.gamma = j.at("gamma").get<double>();
  p.min_child_weight = j.at("min_child_weight").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
}

/// Additive tree ensemble on the log-odds scale:
///   p(x) = sigmoid(initial_score + learning_rate * sum_t tree_t(x)).
class BoostedModel final : public Predictor {
 public:
  BoostedModel(BoostVariant variant, std::vector<std::string> names, double initial_score,
               std::vector<DecisionTree> trees, BoostParams params)
      : variant_(variant),
        names_(std::move(names)),
        initial_score_(initial_score),
        trees_(std::move(trees)),
        params_(params) {}

  ModelKind kind() const override { return variant_ == BoostVariant::Gbm ? ModelKind::Gbm : ModelKind::Xgb; }
  const std::vector<std::string>& feature_names() const override { return names_; }

  double raw_score(std::span<const double> x) const {
    double sum = 0;
    for (const auto& t : trees_) sum += t.predict(x);
    return initial_score_ + params_.learning_rate * sum;
  }

  double predict_row(std::span<const double> x) const override { return sigmoid(raw_score(x)); }

  double initial_score() const { return initial_score_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  const BoostParams& params() const { return params_; }
  BoostVariant variant() const { return variant_; }

  /// Total split gain per feature across all trees.
  std::vector<double> gain_importance() const {
    std::vector<double> imp(names_.size(), 0.0);
    for (const auto& t : trees_) {
      for (const auto& n : t.nodes) {
        if (!n.is_leaf()) imp[static_cast<std::size_t>(n.feature)] += n.gain;
      }
    }
    return imp;
  }

  nlohmann::json to_json() const override {
    auto j = header();
    j["initial_score"] = initial_score_;
    j["params"] = params_;
    j["trees"] = trees_;
    return j;
  }

  static BoostedModel from_json(const nlohmann::json& j) {
    const auto kind = j.at("model_kind").get<std::string>();
    return BoostedModel(kind == "gbm" ? BoostVariant::Gbm : BoostVariant::Xgb,
                        j.at("feature_names").get<std::vector<std::string>>(), j.at("initial_score").get<double>(),
                        j.at("trees").get<std::vector<DecisionTree>>(), j.at("params").get<BoostParams>());
  }

 private:
  BoostVariant variant_;
  std::vector<std::string> names_;
  double initial_score_;
  std::vector<DecisionTree> trees_;
  BoostParams params_;
};

/// Limit on a single leaf's log-odds step.
inline constexpr double kMaxLeafStep = 4.0;

inline double log_loss(std::span<const int> y, std::span<const double> raw) {
  double s = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double z = raw[i];
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    s += softplus - y[i] * z;
  }
  return s / static_cast<double>(y.size());
}

namespace detail {

inline double base_log_odds(std::span<const int> y) {
  std::size_t n_bad = 0;
  for (int t : y) n_bad += (t == 1);
  if (n_bad == 0 || n_bad == y.size()) throw Error(ErrorCode::OneClassOnly, "boosting needs both classes");
  return logit(static_cast<double>(n_bad) / static_cast<double>(y.size()));
}

/// 1 for rows drawn into this round's sample (without replacement), else 0.
inline std::vector<double> draw_rows(std::size_t n, double fraction, Rng& rng) {
  std::vector<double> w(n, 1.0);
  if (fraction >= 1.0) return w;
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t k = 0; k < keep; ++k) std::swap(idx[k], idx[k + rng.below(n - k)]);
  std::fill(w.begin(), w.end(), 0.0);
  for (std::size_t k = 0; k < keep; ++k) w[idx[k]] = 1.0;
  return w;
}

inline void check_params(const BoostParams& p) {
  if (p.n_trees < 0) throw Error(ErrorCode::InvalidArgument, "n_trees must be non-negative");
  if (!(p.learning_rate > 0 && p.learning_rate <= 1)) throw Error(ErrorCode::InvalidArgument, "learning_rate in (0,1]");
  if (!(p.subsample > 0 && p.subsample <= 1)) throw Error(ErrorCode::InvalidArgument, "subsample in (0,1]");
  if (!(p.colsample > 0 && p.colsample <= 1)) throw Error(ErrorCode::InvalidArgument, "colsample in (0,1]");
  if (p.lambda < 0 || p.gamma < 0) throw Error(ErrorCode::InvalidArgument, "lambda/gamma must be non-negative");
}

}  // namespace detail

/// Friedman's gradient boosting for the logistic loss. Each round fits a
/// squared-error tree to the residuals y - p on a row subsample, then resets
/// every leaf to the one-step Newton value sum(r) / sum(p(1-p)) over the
/// sampled rows in the leaf, clipped to +-kMaxLeafStep.
///
/// `loss_history`, when given, receives the mean training log-loss before the
/// first round and after every round.
inline BoostedModel train_gbm(const Matrix& X, std::span<const int> y, const BoostParams& params,
                              std::vector<double>* loss_history = nullptr) {
  if (y.size() != X.rows) throw Error(ErrorCode::InvalidArgument, "X/y length mismatch");
  detail::check_params(params);
  const double init = detail::base_log_odds(y);
  const PresortedColumns sorted(X);
  TreeParams tp;
  tp.max_depth = params.max_depth;
  tp.min_leaf = params.min_leaf;

  std::vector<double> raw(X.rows, init), residual(X.rows), prob(X.rows);
  std::vector<DecisionTree> trees;
  if (loss_history) loss_history->assign(1, log_loss(y, raw));
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(params.seed, static_cast<std::uint64_t>(t));
    const auto w = detail::draw_rows(X.rows, params.subsample, rng);
    for (std::size_t i = 0; i < X.rows; ++i) {
      prob[i] = sigmoid(raw[i]);
      residual[i] = w[i] * (y[i] - prob[i]);
    }
    auto tree = TreeBuilder(X, sorted, SplitCriterion::SquaredError, tp).build(w, residual, {});

    std::vector<double> num(tree.nodes.size(), 0.0), den(tree.nodes.size(), 0.0);
    std::vector<std::size_t> leaf_of(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) {
      leaf_of[i] = tree.leaf_index(X.row(i));
      if (w[i] > 0) {
        num[leaf_of[i]] += y[i] - prob[i];
        den[leaf_of[i]] += prob[i] * (1.0 - prob[i]);
      }
    }
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
      auto& node = tree.nodes[k];
      if (!node.is_leaf()) continue;
      double step;
      if (den[k] > 1e-12) {
        step = num[k] / den[k];
      } else {
        step = num[k] > 0 ? kMaxLeafStep : (num[k] < 0 ? -kMaxLeafStep : 0.0);
      }
      node.value = std::clamp(step, -kMaxLeafStep, kMaxLeafStep);
    }
    for (std::size_t i = 0; i < X.rows; ++i) raw[i] += params.learning_rate * tree.nodes[leaf_of[i]].value;
    trees.push_back(std::move(tree));
    if (loss_history) loss_history->push_back(log_loss(y, raw));
  }
  return BoostedModel(BoostVariant::Gbm, X.names, init, std::move(trees), params);
}

/// Second-order boosting with regularized leaves (XGBoost objective).
/// Gradients g = p - y and hessians h = p(1-p); splits maximize
///   0.5 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)] - gamma
/// and are only taken when that gain is positive; leaves hold -G/(H+l).
inline BoostedModel train_xgb(const Matrix& X, std::span<const int> y, const BoostParams& params,
                              std::vector<double>* loss_history = nullptr) {
  if (y.size() != X.rows) throw Error(ErrorCode::InvalidArgument, "X/y length mismatch");
  detail::check_params(params);
  const double init = detail::base_log_odds(y);
  const PresortedColumns sorted(X);

  std::vector<double> raw(X.rows, init), grad(X.rows), hess(X.rows);
  std::vector<DecisionTree> trees;
  if (loss_history) loss_history->assign(1, log_loss(y, raw));
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(params.seed, static_cast<std::uint64_t>(t));
    const auto w = detail::draw_rows(X.rows, params.subsample, rng);

    TreeParams tp;
    tp.max_depth = params.max_depth;
    tp.min_leaf = params.min_leaf;
    tp.lambda = params.lambda;
    tp.gamma = params.gamma;
    tp.min_child_weight = params.min_child_weight;
    if (params.colsample < 1.0 && X.cols() > 1) {
      const auto keep = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(params.colsample * static_cast<double>(X.cols()))));
      std::vector<std::size_t> cols(X.cols());
      std::iota(cols.begin(), cols.end(), std::size_t{0});
      for (std::size_t k = 0; k < keep; ++k) std::swap(cols[k], cols[k + rng.below(cols.size() - k)]);
      cols.resize(keep);
      std::sort(cols.begin(), cols.end());
      tp.features = std::move(cols);
    }

    for (std::size_t i = 0; i < X.rows; ++i) {
      const double p = sigmoid(raw[i]);
      grad[i] = w[i] * (p - y[i]);
      hess[i] = w[i] * p * (1.0 - p);
    }
    auto tree = TreeBuilder(X, sorted, SplitCriterion::Newton, tp).build(w, grad, hess);
    for (std::size_t i = 0; i < X.rows; ++i) raw[i] += params.learning_rate * tree.predict(X.row(i));
    trees.push_back(std::move(tree));
    if (loss_history) loss_history->push_back(log_loss(y, raw));
  }
  return BoostedModel(BoostVariant::Xgb, X.names, init, std::move(trees), params);
}

}  // namespace cxai
