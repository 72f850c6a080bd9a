#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "cxai/predictor.hpp"
#include "cxai/tree.hpp"

namespace cxai {

struct ForestParams {
  int n_trees = 100;
  std::size_t mtry = 0;  // 0 = ceil(sqrt(p))
  int max_depth = 0;     // 0 = unlimited
  double min_leaf = 1;
  bool bootstrap = true;
  bool hard_vote = false;  // score = share of trees voting bad instead of mean leaf proportion
  std::uint64_t seed = 1;
  int threads = 1;
};

inline void to_json(nlohmann::json& j, const ForestParams& p) {
  j = nlohmann::json{{"n_trees", p.n_trees},     {"mtry", p.mtry},           {"max_depth", p.max_depth},
                     {"min_leaf", p.min_leaf},   {"bootstrap", p.bootstrap}, {"hard_vote", p.hard_vote},
                     {"seed", p.seed}};
}

inline void from_json(const nlohmann::json& j, ForestParams& p) {
  p.n_trees = j.at("n_trees").get<int>();
  p.mtry = j.at("mtry").get<std::size_t>();
  p.max_depth = j.at("max_depth").get<int>();
  p.min_leaf = j.at("min_leaf").get<double>();
  p.bootstrap = j.at("bootstrap").get<bool>();
  p.hard_vote = j.at("hard_vote").get<bool>();
  p.seed = j.at("seed").get<std::uint64_t>();
}

class ForestModel final : public Predictor {
 public:
  ForestModel(std::vector<std::string> names, std::vector<DecisionTree> trees, ForestParams params)
      : names_(std::move(names)), trees_(std::move(trees)), params_(params) {}

  ModelKind kind() const override { return ModelKind::RandomForest; }
  const std::vector<std::string>& feature_names() const override { return names_; }

  double predict_row(std::span<const double> x) const override {
    double sum = 0;
    for (const auto& t : trees_) {
      const double v = t.predict(x);
      sum += params_.hard_vote ? (v > 0.5 ? 1.0 : 0.0) : v;
    }
    return sum / static_cast<double>(trees_.size());
  }

  const std::vector<DecisionTree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }

  nlohmann::json to_json() const override {
    auto j = header();
    j["params"] = params_;
    j["trees"] = trees_;
    return j;
  }

  static ForestModel from_json(const nlohmann::json& j) {
    return ForestModel(j.at("feature_names").get<std::vector<std::string>>(),
                       j.at("trees").get<std::vector<DecisionTree>>(), j.at("params").get<ForestParams>());
  }

 private:
  std::vector<std::string> names_;
  std::vector<DecisionTree> trees_;
  ForestParams params_;
};

/// Bagged CART classifiers. Tree t draws its bootstrap sample and its
/// per-split feature subsets from the random stream (seed, t), so the forest
/// is identical for any thread count.
inline ForestModel train_random_forest(const Matrix& X, std::span<const int> y, ForestParams params) {
  if (y.size() != X.rows) throw Error(ErrorCode::InvalidArgument, "X/y length mismatch");
  std::size_t n_bad = 0;
  for (int t : y) n_bad += (t == 1);
  if (n_bad == 0 || n_bad == y.size()) throw Error(ErrorCode::OneClassOnly, "random forest needs both classes");
  if (params.n_trees < 1) throw Error(ErrorCode::InvalidArgument, "n_trees must be positive");
  if (params.mtry == 0) params.mtry = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(X.cols()))));
  params.mtry = std::min(params.mtry, X.cols());

  const PresortedColumns sorted(X);
  TreeParams tp;
  tp.max_depth = params.max_depth;
  tp.min_leaf = params.min_leaf;
  tp.mtry = params.mtry;

  std::vector<DecisionTree> trees(static_cast<std::size_t>(params.n_trees));
  parallel_for(trees.size(), params.threads, [&](std::size_t t) {
    Rng rng(params.seed, t);
    std::vector<double> w(X.rows, params.bootstrap ? 0.0 : 1.0);
    if (params.bootstrap) {
      for (std::size_t k = 0; k < X.rows; ++k) w[rng.below(X.rows)] += 1.0;
    }
    std::vector<double> a(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) a[i] = w[i] * y[i];
    trees[t] = TreeBuilder(X, sorted, SplitCriterion::Gini, tp).build(w, a, {}, &rng);
  });
  return ForestModel(X.names, std::move(trees), params);
}

}  // namespace cxai
