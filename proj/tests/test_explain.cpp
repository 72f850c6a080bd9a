#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "cxai/boosting.hpp"
#include "cxai/explain.hpp"
#include "cxai/forest.hpp"
#include "cxai/logistic.hpp"
#include "cxai/synth.hpp"

using namespace cxai;

namespace {

/// f(x) = sum_k w_k x_k, unclipped. Test-only; reports itself as logistic.
class LinearScore final : public Predictor {
 public:
  LinearScore(std::vector<std::string> names, std::vector<double> w) : names_(std::move(names)), w_(std::move(w)) {}
  ModelKind kind() const override { return ModelKind::Logistic; }
  const std::vector<std::string>& feature_names() const override { return names_; }
  double predict_row(std::span<const double> x) const override {
    double s = 0;
    for (std::size_t k = 0; k < w_.size(); ++k) s += w_[k] * x[k];
    return s;
  }
  nlohmann::json to_json() const override { return header(); }

 private:
  std::vector<std::string> names_;
  std::vector<double> w_;
};

struct Fixture {
  Matrix X;
  std::vector<int> y;
  std::vector<std::pair<std::string, PredictorPtr>> models;
};

/// Small synthetic set (3 informative, 2 noise) and one model per family,
/// each trained on the informative columns only.
const Fixture& fixture() {
  static const Fixture f = [] {
    SynthParams p;
    p.n_rows = 1500;
    p.n_informative = 3;
    p.n_noise = 2;
    p.n_categorical = 0;
    p.seed = 21;
    p.signal = 2.0;
    const auto d = impute_mean(make_synthetic(p));
    Fixture fx{d.to_matrix(), d.target, {}};
    const auto Xi = fx.X.select_columns({"inf_01", "inf_02", "inf_03"});
    ForestParams fp;
    fp.n_trees = 15;
    fp.seed = 3;
    BoostParams bp;
    bp.n_trees = 25;
    bp.max_depth = 3;
    bp.seed = 4;
    fx.models.emplace_back("logistic", std::make_shared<LogisticModel>(train_logistic(Xi, fx.y)));
    fx.models.emplace_back("woe_logistic", std::make_shared<WoeLogisticModel>(train_woe_logistic(Xi, fx.y)));
    fx.models.emplace_back("rf", std::make_shared<ForestModel>(train_random_forest(Xi, fx.y, fp)));
    fx.models.emplace_back("gbm", std::make_shared<BoostedModel>(train_gbm(Xi, fx.y, bp)));
    fx.models.emplace_back("xgb", std::make_shared<BoostedModel>(train_xgb(Xi, fx.y, bp)));
    return fx;
  }();
  return f;
}

Matrix head_rows(const Matrix& X, std::size_t n) {
  Matrix out(X.names, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < X.cols(); ++j) out(i, j) = X(i, j);
  }
  return out;
}

/// Mean over rows of f(row with feature := z), written out directly.
double pdp_oracle(const Predictor& m, const Matrix& X, const std::string& feature, double z) {
  const auto& names = m.feature_names();
  std::vector<double> row(names.size());
  double sum = 0;
  for (std::size_t i = 0; i < X.rows; ++i) {
    for (std::size_t k = 0; k < names.size(); ++k) row[k] = names[k] == feature ? z : X(i, X.index_of(names[k]));
    sum += m.predict_row(row);
  }
  return sum / static_cast<double>(X.rows);
}

}  // namespace

// ---------------------------------------------------------------------------
// Permutation importance

TEST(Pfi, FeatureAbsentFromModelDropsExactlyZero) {
  const auto& f = fixture();
  for (const auto& [name, m] : f.models) {
    const auto r = permutation_importance(*m, f.X, f.y, 4, 9, {"inf_01", "noise_01", "noise_02"});
    ASSERT_EQ(r.records.size(), 3u);
    for (std::size_t k = 1; k < 3; ++k) {
      ASSERT_EQ(r.records[k].drops.size(), 4u);
      for (double d : r.records[k].drops) EXPECT_EQ(d, 0.0) << name << " " << r.records[k].feature;
      EXPECT_EQ(r.records[k].mean_drop, 0.0);
    }
    EXPECT_GT(r.records[0].mean_drop, 0.0) << name;
    EXPECT_EQ(r.baseline_metric, auc(m->predict(f.X), f.y));
  }
}

TEST(Pfi, SeededAndThreadIndependent) {
  const auto& f = fixture();
  const auto& m = *f.models[3].second;
  const auto a = permutation_importance(m, f.X, f.y, 3, 5, {}, 1);
  const auto b = permutation_importance(m, f.X, f.y, 3, 5, {}, 4);
  const auto c = permutation_importance(m, f.X, f.y, 3, 6, {}, 1);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t k = 0; k < a.records.size(); ++k) EXPECT_EQ(a.records[k].drops, b.records[k].drops);
  EXPECT_NE(a.records[0].drops, c.records[0].drops);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Pfi, MeanDropIsMeanOfDrops) {
  const auto& f = fixture();
  const auto r = permutation_importance(*f.models[0].second, f.X, f.y, 5, 1);
  for (const auto& rec : r.records) {
    const double mean = std::accumulate(rec.drops.begin(), rec.drops.end(), 0.0) / 5.0;
    EXPECT_DOUBLE_EQ(rec.mean_drop, mean);
  }
  EXPECT_THROW(permutation_importance(*f.models[0].second, f.X, f.y, 0, 1), Error);
}

// ---------------------------------------------------------------------------
// Grids, PDP and CP

TEST(Grid, QuantilesAreNearestRankAndDeduplicated) {
  Matrix X({"x"}, 11);
  for (std::size_t i = 0; i < 11; ++i) X(i, 0) = static_cast<double>(10 - i);
  EXPECT_EQ(make_grid(X, "x", {3, {}}), (std::vector<double>{0, 5, 10}));
  EXPECT_EQ(make_grid(X, "x", {11, {}}).size(), 11u);
  Matrix C({"c"}, 5);
  for (std::size_t i = 0; i < 5; ++i) C(i, 0) = i < 4 ? 1.0 : 2.0;
  EXPECT_EQ(make_grid(C, "c", {21, {}}), (std::vector<double>{1, 2}));
  EXPECT_EQ(make_grid(X, "x", {21, {3, 1, 3}}), (std::vector<double>{1, 3}));
}

TEST(Pdp, MatchesDirectAverage) {
  const auto& f = fixture();
  const auto bg = head_rows(f.X, 200);
  for (const auto& [name, m] : f.models) {
    const auto p = partial_dependence(*m, bg, "inf_02", {7, {}});
    ASSERT_EQ(p.grid.size(), p.mean_prediction.size());
    for (std::size_t g = 0; g < p.grid.size(); ++g) {
      EXPECT_NEAR(p.mean_prediction[g], pdp_oracle(*m, bg, "inf_02", p.grid[g]), 1e-12) << name;
    }
  }
}

TEST(Pdp, AverageOfCeterisParibusProfiles) {
  const auto& f = fixture();
  const auto bg = head_rows(f.X, 120);
  for (const auto& [name, m] : f.models) {
    for (const char* feature : {"inf_01", "inf_02", "inf_03"}) {
      GridSpec spec;
      spec.points = make_grid(bg, feature, {9, {}});
      const auto pdp = partial_dependence(*m, bg, feature, spec);
      std::vector<double> sum(pdp.grid.size(), 0.0);
      for (std::size_t i = 0; i < bg.rows; ++i) {
        const auto cp = ceteris_paribus(*m, bg, i, feature, spec);
        // The CP grid also holds the row's own value; pick the shared points.
        for (std::size_t g = 0; g < pdp.grid.size(); ++g) {
          const auto it = std::find(cp.grid.begin(), cp.grid.end(), pdp.grid[g]);
          ASSERT_NE(it, cp.grid.end());
          sum[g] += cp.prediction[static_cast<std::size_t>(it - cp.grid.begin())];
        }
      }
      for (std::size_t g = 0; g < pdp.grid.size(); ++g) {
        EXPECT_NEAR(pdp.mean_prediction[g], sum[g] / static_cast<double>(bg.rows), 1e-12) << name << " " << feature;
      }
    }
  }
}

TEST(Pdp, ThreadCountDoesNotChangeProfile) {
  const auto& f = fixture();
  const auto bg = head_rows(f.X, 150);
  const auto& m = *f.models[2].second;
  const auto a = partial_dependence(m, bg, "inf_01", {21, {}}, 1);
  const auto b = partial_dependence(m, bg, "inf_01", {21, {}}, 4);
  EXPECT_EQ(a.mean_prediction, b.mean_prediction);
}

TEST(Pdp, TwoFeatureGridMatchesDirectAverage) {
  const auto& f = fixture();
  const auto bg = head_rows(f.X, 60);
  const auto& m = *f.models[3].second;
  const auto p = partial_dependence_2d(m, bg, "inf_01", "inf_03", {4, {}});
  ASSERT_EQ(p.values.size(), p.grid_a.size());
  const auto& names = m.feature_names();
  for (std::size_t a = 0; a < p.grid_a.size(); ++a) {
    for (std::size_t b = 0; b < p.grid_b.size(); ++b) {
      double sum = 0;
      std::vector<double> row(names.size());
      for (std::size_t i = 0; i < bg.rows; ++i) {
        for (std::size_t k = 0; k < names.size(); ++k) {
          row[k] = names[k] == "inf_01" ? p.grid_a[a] : names[k] == "inf_03" ? p.grid_b[b] : bg(i, bg.index_of(names[k]));
        }
        sum += m.predict_row(row);
      }
      EXPECT_NEAR(p.values[a][b], sum / static_cast<double>(bg.rows), 1e-12);
    }
  }
  EXPECT_THROW(partial_dependence_2d(m, bg, "inf_01", "inf_01"), Error);
}

TEST(Pdp, UnknownFeatureIsFeatureMismatch) {
  const auto& f = fixture();
  try {
    partial_dependence(*f.models[0].second, f.X, "noise_01");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FeatureMismatch);
  }
}

TEST(Cp, ProfileContainsAnchorAtActualValue) {
  const auto& f = fixture();
  for (const auto& [name, m] : f.models) {
    const auto cp = ceteris_paribus(*m, f.X, 17, "inf_03", {5, {}});
    EXPECT_EQ(cp.actual_value, f.X(17, f.X.index_of("inf_03")));
    const auto it = std::find(cp.grid.begin(), cp.grid.end(), cp.actual_value);
    ASSERT_NE(it, cp.grid.end());
    EXPECT_EQ(cp.prediction[static_cast<std::size_t>(it - cp.grid.begin())], cp.anchor);
    EXPECT_EQ(cp.anchor, m->predict(head_rows(f.X, 18))[17]) << name;
  }
}

TEST(Cp, InstanceOutOfRange) {
  const auto& f = fixture();
  try {
    ceteris_paribus(*f.models[0].second, f.X, f.X.rows, "inf_01");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidArgument);
  }
}

// ---------------------------------------------------------------------------
// Break Down

TEST(BreakDown, AdditiveModelGivesCenteredValues) {
  // f = x1 + x2; background means mu = (2, -1); instance x* = (5, 3).
  const LinearScore m({"x1", "x2"}, {1, 1});
  Matrix bg({"x1", "x2"}, 4);
  const double rows[4][2] = {{1, -2}, {3, 0}, {2, -1}, {2, -1}};
  for (std::size_t i = 0; i < 4; ++i) bg(i, 0) = rows[i][0], bg(i, 1) = rows[i][1];
  Matrix data({"x1", "x2"}, 1);
  data(0, 0) = 5;
  data(0, 1) = 3;
  for (const auto& order : {std::vector<std::string>{"x1", "x2"}, std::vector<std::string>{"x2", "x1"}}) {
    const auto r = break_down(m, bg, data, 0, order);
    EXPECT_DOUBLE_EQ(r.intercept, 1.0);
    ASSERT_EQ(r.contributions.size(), 2u);
    for (const auto& s : r.contributions) EXPECT_DOUBLE_EQ(s.delta, s.feature == "x1" ? 3.0 : 4.0);
    EXPECT_EQ(r.contributions[0].feature, order[0]);
    EXPECT_DOUBLE_EQ(r.final_prediction, 8.0);
  }
  // Greedy takes the larger step first.
  const auto g = break_down(m, bg, data, 0);
  EXPECT_EQ(g.ordering, "greedy");
  EXPECT_EQ(g.contributions[0].feature, "x2");
}

TEST(BreakDown, InstanceEqualToBackgroundHasZeroDeltas) {
  const auto& f = fixture();
  Matrix bg(f.X.names, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < f.X.cols(); ++j) bg(i, j) = f.X(3, j);
  }
  for (const auto& [name, m] : f.models) {
    // v(S) is a mean of five equal terms, so only rounding separates it
    // from the row's own prediction.
    const auto r = break_down(*m, bg, f.X, 3);
    for (const auto& s : r.contributions) EXPECT_NEAR(s.delta, 0.0, 1e-15) << name;
    EXPECT_NEAR(r.intercept, r.final_prediction, 1e-15);
  }
}

TEST(BreakDown, ContributionsCloseOnPredictionForEveryFamily) {
  const auto& f = fixture();
  const auto bg = head_rows(f.X, 100);
  Rng rng(77);
  for (const auto& [name, m] : f.models) {
    for (int rep = 0; rep < 20; ++rep) {
      const auto i = static_cast<std::size_t>(rng.below(f.X.rows));
      const std::vector<std::string> fixed{"inf_03", "inf_01", "inf_02"};
      for (const auto& order : {std::vector<std::string>{}, fixed}) {
        const auto r = break_down(*m, bg, f.X, i, order);
        double total = r.intercept;
        for (const auto& s : r.contributions) total += s.delta;
        EXPECT_NEAR(total, r.final_prediction, 1e-9) << name;
        EXPECT_EQ(r.final_prediction, m->predict_row(std::vector<double>{
                                          f.X(i, f.X.index_of(m->feature_names()[0])),
                                          f.X(i, f.X.index_of(m->feature_names()[1])),
                                          f.X(i, f.X.index_of(m->feature_names()[2]))}));
      }
    }
  }
}

TEST(BreakDown, InterceptIsBackgroundMeanPrediction) {
  const auto& f = fixture();
  const auto bg = head_rows(f.X, 80);
  for (const auto& [name, m] : f.models) {
    const auto preds = m->predict(bg);
    const double mean = std::accumulate(preds.begin(), preds.end(), 0.0) / static_cast<double>(preds.size());
    EXPECT_NEAR(break_down(*m, bg, f.X, 5).intercept, mean, 1e-12) << name;
  }
}

TEST(BreakDown, FixedOrderMustCoverEveryFeatureOnce) {
  const auto& f = fixture();
  const auto& m = *f.models[0].second;
  EXPECT_THROW(break_down(m, f.X, f.X, 0, {"inf_01", "inf_02"}), Error);
  EXPECT_THROW(break_down(m, f.X, f.X, 0, {"inf_01", "inf_01", "inf_02"}), Error);
  EXPECT_THROW(break_down(m, f.X, f.X, 0, {"inf_01", "inf_02", "noise_01"}), Error);
  EXPECT_THROW(break_down(m, f.X, f.X, f.X.rows), Error);
}

TEST(BreakDown, GreedyIsThreadIndependent) {
  const auto& f = fixture();
  const auto bg = head_rows(f.X, 100);
  const auto& m = *f.models[4].second;
  EXPECT_EQ(to_json(break_down(m, bg, f.X, 9, {}, 1)).dump(), to_json(break_down(m, bg, f.X, 9, {}, 4)).dump());
}

// ---------------------------------------------------------------------------

TEST(Explainers, LeaveInputsUntouched) {
  const auto& f = fixture();
  Matrix X = head_rows(f.X, 150);
  const auto before = X.values;
  const auto y = f.y;
  for (const auto& [name, m] : f.models) {
    permutation_importance(*m, X, std::span<const int>(y.data(), X.rows), 2, 1);
    partial_dependence(*m, X, "inf_01", {5, {}});
    partial_dependence_2d(*m, X, "inf_01", "inf_02", {3, {}});
    ceteris_paribus(*m, X, 4, "inf_02");
    break_down(*m, X, X, 4);
    EXPECT_EQ(X.values, before) << name;
  }
}

TEST(Explainers, JsonCarriesSchemaVersionAndMethod) {
  const auto& f = fixture();
  const auto bg = head_rows(f.X, 40);
  const auto& m = *f.models[3].second;
  const nlohmann::json all[] = {
      to_json(permutation_importance(m, bg, std::span<const int>(f.y.data(), 40), 1, 1)),
      to_json(partial_dependence(m, bg, "inf_01", {3, {}})),
      to_json(partial_dependence_2d(m, bg, "inf_01", "inf_02", {3, {}})),
      to_json(ceteris_paribus(m, bg, 0, "inf_01", {3, {}})),
      to_json(break_down(m, bg, bg, 0)),
  };
  for (const auto& j : all) {
    EXPECT_EQ(j.at("schema_version"), kExplainSchemaVersion);
    EXPECT_TRUE(j.at("method").is_string());
  }
}
