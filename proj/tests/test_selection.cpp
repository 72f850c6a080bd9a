#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "cxai/selection.hpp"
#include "cxai/synth.hpp"
#include "oracles.hpp"

using namespace cxai;

namespace {

struct WarningCapture {
  std::vector<std::string> messages;
  std::function<void(std::string_view)> saved;
  WarningCapture() : saved(warning_sink()) {
    warning_sink() = [this](std::string_view m) { messages.emplace_back(m); };
  }
  ~WarningCapture() { warning_sink() = saved; }
};

// y is the sign of x0 + x1 plus noise; x2 is constant, x3 pure noise.
struct Toy {
  Matrix X;
  std::vector<int> y;
};

Toy make_toy(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Toy t{Matrix({"a_signal", "b_signal", "c_const", "d_noise"}, n), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.normal(), b = rng.normal();
    t.X(i, 0) = a;
    t.X(i, 1) = std::round(4 * b);
    t.X(i, 2) = 7.0;
    t.X(i, 3) = rng.normal();
    t.y[i] = a + 0.7 * b + 0.5 * rng.normal() > 0.8 ? 1 : 0;
  }
  return t;
}

bool subset(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::set<std::string> sb(b.begin(), b.end());
  return std::all_of(a.begin(), a.end(), [&](const auto& s) { return sb.contains(s); });
}

}  // namespace

TEST(UniqueCount, CountsDistinctValues) {
  const std::vector<double> v{3, 1, 3, 2, 1, 1};
  EXPECT_EQ(count_unique(v), 3u);
  EXPECT_EQ(count_unique(std::vector<double>{}), 0u);
}

TEST(UniqueCount, ThresholdIsInclusive) {
  Matrix X({"exactly", "above"}, 301);
  for (std::size_t i = 0; i < 301; ++i) {
    X(i, 0) = static_cast<double>(i % 300);  // 300 distinct
    X(i, 1) = static_cast<double>(i);        // 301 distinct
  }
  const auto s = split_by_unique_count(X, X.names, 300);
  EXPECT_EQ(s.low_card, std::vector<std::string>{"exactly"});
  EXPECT_EQ(s.high_card, std::vector<std::string>{"above"});
  EXPECT_EQ(s.n_unique.at("exactly"), 300u);
  EXPECT_THROW(split_by_unique_count(X, X.names, 0), Error);
}

TEST(FeatureKs, MatchesThresholdOracleInBothOrientations) {
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    const auto inst = oracle::random_instance(rng, 60 + rng.below(100));
    std::vector<double> neg(inst.scores.size());
    for (std::size_t i = 0; i < neg.size(); ++i) neg[i] = -inst.scores[i];
    // The oracle's ECDF gap is orientation-free; both must agree.
    const double expect = std::max(oracle::ks_thresholds(inst.scores, inst.labels),
                                   oracle::ks_thresholds(neg, inst.labels));
    EXPECT_NEAR(feature_ks(inst.scores, inst.labels), expect, 1e-12);
    EXPECT_NEAR(feature_ks(neg, inst.labels), expect, 1e-12);
  }
}

TEST(KsFilter, ExtremeThresholds) {
  auto t = make_toy(400, 3);
  // Append a copy of the target; only it reaches K-S 1.
  Matrix X(std::vector<std::string>{"a_signal", "b_signal", "c_const", "d_noise", "target_copy"}, t.X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) {
    for (std::size_t j = 0; j < 4; ++j) X(i, j) = t.X(i, j);
    X(i, 4) = t.y[i];
  }
  const auto strict = ks_filter(X, t.y, X.names, 1.0);
  EXPECT_EQ(strict.kept, std::vector<std::string>{"target_copy"});
  EXPECT_DOUBLE_EQ(strict.ks.at("target_copy"), 1.0);
  EXPECT_EQ(strict.ks.at("c_const"), 0.0);

  const auto open = ks_filter(X, t.y, X.names, 0.0);
  EXPECT_EQ(open.kept, X.names);
  EXPECT_THROW(ks_filter(X, t.y, X.names, 1.5), Error);
}

TEST(Preselection, ConstantNeverSelectedAndSignalRanksFirst) {
  const auto t = make_toy(2000, 5);
  BoostParams bp;
  bp.n_trees = 30;
  const auto p = preselect_by_boosting(t.X, t.y, {t.X.names}, 10, bp);
  EXPECT_EQ(p.importance.at("c_const"), 0.0);
  EXPECT_FALSE(std::count(p.selected.begin(), p.selected.end(), "c_const"));
  ASSERT_GE(p.ranked.size(), 2u);
  EXPECT_EQ(std::set<std::string>(p.ranked.begin(), p.ranked.begin() + 2),
            (std::set<std::string>{"a_signal", "b_signal"}));
  for (std::size_t k = 1; k < p.ranked.size(); ++k) {
    EXPECT_GE(p.importance.at(p.ranked[k - 1]), p.importance.at(p.ranked[k]));
  }
}

TEST(Preselection, TopKCutsTheRanking) {
  const auto t = make_toy(1000, 6);
  BoostParams bp;
  bp.n_trees = 20;
  const auto p = preselect_by_boosting(t.X, t.y, {{"a_signal", "c_const"}, {"b_signal", "d_noise"}}, 1, bp);
  ASSERT_EQ(p.selected.size(), 1u);
  EXPECT_EQ(p.selected[0], p.ranked[0]);
  EXPECT_THROW(preselect_by_boosting(t.X, t.y, {t.X.names}, 0, bp), Error);
}

TEST(Preselection, EmptyPartitionIsSkipped) {
  const auto t = make_toy(500, 7);
  BoostParams bp;
  bp.n_trees = 10;
  const auto p = preselect_by_boosting(t.X, t.y, {t.X.names, {}}, 10, bp);
  EXPECT_EQ(p.importance.size(), 4u);
}

TEST(Preselection, ThreadCountDoesNotChangeResult) {
  const auto t = make_toy(1500, 8);
  BoostParams bp;
  bp.n_trees = 20;
  bp.subsample = 0.7;
  const std::vector<std::vector<std::string>> parts{{"a_signal", "d_noise"}, {"b_signal", "c_const"}};
  const auto one = preselect_by_boosting(t.X, t.y, parts, 3, bp, 1);
  const auto four = preselect_by_boosting(t.X, t.y, parts, 3, bp, 4);
  EXPECT_EQ(one.importance, four.importance);
  EXPECT_EQ(one.selected, four.selected);
}

TEST(SelectFeatures, StagesAreNested) {
  const auto t = make_toy(2000, 9);
  SelectionParams sp;
  sp.boosting.n_trees = 30;
  sp.top_k = 3;
  const auto r = select_features(t.X, t.y, sp);
  EXPECT_TRUE(subset(r.preselection.selected, r.input));
  EXPECT_TRUE(subset(r.survivors(), r.preselection.selected));
  EXPECT_LE(r.preselection.selected.size(), 3u);
  EXPECT_TRUE(std::count(r.survivors().begin(), r.survivors().end(), "a_signal"));
  EXPECT_FALSE(std::count(r.survivors().begin(), r.survivors().end(), "c_const"));

  const auto j = to_json(r);
  EXPECT_EQ(j.at("schema_version"), 1);
  EXPECT_EQ(j.at("stages").at("ks_filtered").at("n"), r.survivors().size());
  EXPECT_TRUE(j.at("features").at("c_const").at("ks").is_null());
  EXPECT_EQ(j.at("features").at("c_const").at("partition"), "low_card");
}

TEST(SelectFeatures, NoSurvivorsWarns) {
  const auto t = make_toy(500, 10);
  SelectionParams sp;
  sp.boosting.n_trees = 10;
  sp.min_ks = 1.0;
  WarningCapture w;
  const auto r = select_features(t.X, t.y, sp);
  EXPECT_TRUE(r.survivors().empty());
  ASSERT_EQ(w.messages.size(), 1u);
}

TEST(SelectFeatures, SyntheticInformativeFeaturesSurvive) {
  SynthParams p;
  p.n_rows = 8000;
  p.n_informative = 5;
  p.n_noise = 10;
  p.n_categorical = 0;
  p.n_constant = 2;
  p.seed = 4;
  const auto d = impute_mean(make_synthetic(p));
  const auto X = d.to_matrix();
  SelectionParams sp;
  sp.boosting.n_trees = 40;
  const auto r = select_features(X, d.target, sp);
  EXPECT_TRUE(subset(synth_informative_names(p), r.survivors()));
  for (const auto& f : r.survivors()) EXPECT_EQ(f.rfind("const", 0), std::string::npos) << f;
}

// ---------------------------------------------------------------------------

namespace {

MetricReport report_with_test_gini(const std::string& name, std::optional<double> g) {
  MetricReport r;
  r.model_name = name;
  SplitMetrics s;
  s.split = "test";
  s.gini = g;
  if (!g) s.error = "OneClassOnly";
  r.splits.push_back(s);
  return r;
}

}  // namespace

TEST(RejectModels, BoundaryIsAccepted) {
  const auto d = reject_models({report_with_test_gini("at", 0.6), report_with_test_gini("below", 0.5999999),
                                report_with_test_gini("above", 0.7)},
                               0.6);
  EXPECT_FALSE(d[0].rejected);
  EXPECT_TRUE(d[1].rejected);
  EXPECT_FALSE(d[2].rejected);
  EXPECT_NE(d[1].reason.find("below"), std::string::npos);
}

TEST(RejectModels, MissingGiniAndExpertFlag) {
  const auto d = reject_models({report_with_test_gini("failed", std::nullopt), report_with_test_gini("good", 0.8),
                                report_with_test_gini("weak", 0.1)},
                               0.6, {"good", "weak"});
  EXPECT_TRUE(d[0].rejected);
  EXPECT_TRUE(d[1].rejected);
  EXPECT_EQ(d[1].reason, "expert judgement");
  EXPECT_TRUE(d[2].rejected);
  EXPECT_NE(d[2].reason.find("; expert judgement"), std::string::npos);
  const auto j = to_json(d);
  EXPECT_TRUE(j[0].at("test_gini").is_null());
  EXPECT_THROW(reject_models({}, 1.2), Error);
}
