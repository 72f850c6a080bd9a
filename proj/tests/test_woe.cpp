#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "cxai/woe.hpp"
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

Feature numeric(const std::vector<double>& v, const std::string& name = "x") {
  return Feature::make_numeric(name, std::vector<std::optional<double>>(v.begin(), v.end()));
}

std::vector<int> random_labels(Rng& rng, std::size_t n, double rate) {
  std::vector<int> y(n);
  for (auto& t : y) t = rng.uniform() < rate ? 1 : 0;
  return y;
}

}  // namespace

TEST(WoeFormula, FortyTenBin) {
  // 40% of goods and 10% of bads in bin 0.
  const std::vector<double> good{40, 60}, bad{10, 90};
  BinningSpec spec;
  spec.n_bins = 2;
  spec.cut_points = {0.5};
  const auto t = woe_from_counts(spec, good, bad, 0.0);
  EXPECT_NEAR(t.bins[0].woe, 1.3863, 5e-5);
  EXPECT_NEAR(t.bins[0].woe, std::log(4.0), 1e-15);
  EXPECT_NEAR(t.bins[0].iv_term, 0.4159, 5e-5);
  EXPECT_NEAR(t.bins[0].iv_term, 0.3 * std::log(4.0), 1e-15);
}

TEST(WoeFormula, EqualDistributionsGiveZero) {
  BinningSpec spec;
  spec.n_bins = 2;
  const auto t = woe_from_counts(spec, std::vector<double>{30, 70}, std::vector<double>{3, 7}, 0.0);
  EXPECT_EQ(t.bins[0].woe, 0.0);
  EXPECT_EQ(t.bins[0].iv_term, 0.0);
  EXPECT_EQ(t.iv, 0.0);
}

TEST(WoeFormula, PerfectSeparationStaysFinite) {
  // 100 goods all in bin 0, 100 bads all in bin 1, smoothing 0.5:
  //   dist_good = (100.5/101, 0.5/101), dist_bad = (0.5/101, 100.5/101).
  BinningSpec spec;
  spec.n_bins = 2;
  const auto t = woe_from_counts(spec, std::vector<double>{100, 0}, std::vector<double>{0, 100}, 0.5);
  const double expected = std::log((100.5 / 101.0) / (0.5 / 101.0));
  EXPECT_TRUE(std::isfinite(t.bins[0].woe));
  EXPECT_NEAR(t.bins[0].woe, expected, 1e-12);
  EXPECT_NEAR(t.bins[1].woe, -expected, 1e-12);
  EXPECT_GT(t.iv, 0);
}

TEST(FitBins, QuartileCutsOnUniformValues) {
  Rng rng(3);
  const std::size_t n = 1000;
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i) / n;
  const auto y = random_labels(rng, n, 0.3);
  BinningOptions opt;
  opt.max_bins = 4;
  opt.min_bin_frac = 0.05;
  const auto spec = fit_bins(x, y, opt);
  ASSERT_EQ(spec.n_bins, 4);
  EXPECT_EQ(spec.cut_points, (std::vector<double>{0.25, 0.5, 0.75}));
  EXPECT_FALSE(spec.missing_bin.has_value());
}

TEST(FitBins, ConstantFeatureIsDegenerate) {
  WarningCapture w;
  const std::vector<double> x(50, 7.0);
  std::vector<int> y(50, 0);
  y[3] = 1;
  const auto spec = fit_bins(x, y);
  EXPECT_EQ(spec.n_bins, 1);
  EXPECT_TRUE(spec.degenerate);
  EXPECT_EQ(w.messages.size(), 1u);
}

TEST(FitBins, MissingValuesGetTheLastBin) {
  Rng rng(4);
  const std::size_t n = 2000;
  std::vector<std::optional<double>> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (i % 10 != 0) v[i] = rng.normal();
  }
  const auto y = random_labels(rng, n, 0.3);
  const auto f = Feature::make_numeric("x", v);
  const auto spec = fit_bins(f, y);
  ASSERT_TRUE(spec.missing_bin.has_value());
  EXPECT_EQ(*spec.missing_bin, spec.n_bins);
  EXPECT_EQ(spec.total_bins(), spec.n_bins + 1);
  const auto table = compute_woe(spec, f, y);
  EXPECT_EQ(table.bins.size(), static_cast<std::size_t>(spec.n_bins + 1));
  EXPECT_EQ(table.bins.back().n_good + table.bins.back().n_bad, 200.0);
  EXPECT_EQ(table.woe_of(std::optional<double>{}), table.bins.back().woe);
}

TEST(FitBins, EveryBinHasBothClassesAndMinimumSize) {
  Rng rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 300 + rng.below(700);
    std::vector<double> x(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = std::round(rng.normal() * 4);  // heavy ties
      y[i] = rng.uniform() < sigmoid(x[i] - 3) ? 1 : 0;
    }
    y[0] = 0;
    y[1] = 1;
    BinningOptions opt;
    opt.min_bin_frac = 0.05;
    const auto spec = fit_bins(x, y, opt);
    const auto t = compute_woe(spec, numeric(x), y, 0.0);
    EXPECT_TRUE(std::is_sorted(spec.cut_points.begin(), spec.cut_points.end()));
    for (std::size_t k = 1; k < spec.cut_points.size(); ++k) EXPECT_LT(spec.cut_points[k - 1], spec.cut_points[k]);
    if (spec.n_bins > 1) {
      for (const auto& b : t.bins) {
        EXPECT_GT(b.n_good, 0);
        EXPECT_GT(b.n_bad, 0);
        EXPECT_GE(b.n_good + b.n_bad, 0.05 * static_cast<double>(n));
      }
    }
  }
}

TEST(FitBins, MonotoneOptionGivesMonotoneBadRates) {
  Rng rng(6);
  const std::size_t n = 3000;
  std::vector<double> x(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    y[i] = rng.uniform() < sigmoid(0.3 * x[i] + 0.8 * std::sin(3 * x[i]) - 1) ? 1 : 0;
  }
  BinningOptions opt;
  opt.monotone = true;
  const auto t = compute_woe(fit_bins(x, y, opt), numeric(x), y);
  bool up = true, down = true;
  for (std::size_t b = 1; b < t.bins.size(); ++b) {
    const double r0 = t.bins[b - 1].n_bad / (t.bins[b - 1].n_bad + t.bins[b - 1].n_good);
    const double r1 = t.bins[b].n_bad / (t.bins[b].n_bad + t.bins[b].n_good);
    up = up && r0 <= r1;
    down = down && r0 >= r1;
  }
  EXPECT_TRUE(up || down);
}

TEST(FitBins, CategoricalLevelsAreCovered) {
  Rng rng(8);
  std::vector<std::optional<std::string>> v;
  std::vector<int> y;
  const std::vector<std::string> levels{"A", "B", "C", "D"};
  const std::vector<double> rate{0.1, 0.2, 0.4, 0.6};
  for (int i = 0; i < 2000; ++i) {
    const auto k = rng.below(4);
    v.push_back(levels[k]);
    y.push_back(rng.uniform() < rate[k] ? 1 : 0);
  }
  const auto f = Feature::make_categorical("c", v);
  const auto spec = fit_bins(f, y);
  for (const auto& l : levels) EXPECT_TRUE(spec.level_bins.contains(l));
  const auto t = compute_woe(spec, f, y);
  // Higher bad rate means lower WOE.
  EXPECT_GT(t.woe_of(std::optional<std::string>("A")), t.woe_of(std::optional<std::string>("D")));
  EXPECT_EQ(t.woe_of(std::optional<std::string>("unseen")), t.bins[static_cast<std::size_t>(spec.fallback_bin)].woe);
}

TEST(WoeTable, DistributionsSumToOneAndIvNonNegative) {
  Rng rng(9);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 200 + rng.below(800);
    std::vector<double> x(n);
    std::vector<int> y(n);
    const double strength = rng.uniform(-2, 2);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = rng.uniform() < sigmoid(strength * x[i] - 1) ? 1 : 0;
    }
    y[0] = 0;
    y[1] = 1;
    const auto t = compute_woe(fit_bins(x, y), numeric(x), y, rng.uniform() < 0.5 ? 0.0 : 0.5);
    double sg = 0, sb = 0, count = 0, iv = 0;
    for (const auto& b : t.bins) {
      sg += b.dist_good;
      sb += b.dist_bad;
      count += b.n_good + b.n_bad;
      // Recomputed term by term from the counts.
      iv += (b.dist_good - b.dist_bad) * std::log(b.dist_good / b.dist_bad);
      EXPECT_GE(b.iv_term, 0.0);
    }
    EXPECT_NEAR(sg, 1.0, 1e-12);
    EXPECT_NEAR(sb, 1.0, 1e-12);
    EXPECT_EQ(count, static_cast<double>(n));
    EXPECT_GE(t.iv, 0.0);
    EXPECT_NEAR(t.iv, iv, 1e-12);
  }
}

TEST(WoeTable, MonotoneRelabelingInvariance) {
  Rng rng(10);
  const std::size_t n = 1500;
  std::vector<double> x(n), ex(n), aff(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    ex[i] = std::exp(x[i]);
    aff[i] = 2 * x[i] + 5;
    y[i] = rng.uniform() < sigmoid(x[i] - 1) ? 1 : 0;
  }
  const auto base = compute_woe(fit_bins(x, y), numeric(x), y);
  for (const auto* z : {&ex, &aff}) {
    const auto other = compute_woe(fit_bins(*z, y), numeric(*z), y);
    EXPECT_EQ(other.bins, base.bins);
    EXPECT_EQ(other.iv, base.iv);
    ASSERT_EQ(other.spec.cut_points.size(), base.spec.cut_points.size());
  }
}

TEST(WoeTable, DeterministicAndJsonRoundTrip) {
  Rng rng(11);
  std::vector<std::optional<double>> v(400);
  std::vector<int> y(400);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i % 7) v[i] = rng.normal();
    y[i] = rng.uniform() < 0.3;
  }
  const auto f = Feature::make_numeric("x", v);
  const auto a = compute_woe(fit_bins(f, y), f, y);
  const auto b = compute_woe(fit_bins(f, y), f, y);
  EXPECT_EQ(a, b);
  const nlohmann::json j = a;
  EXPECT_EQ(j.at("bins").size(), a.bins.size());
  EXPECT_EQ(j.get<WoeTable>(), a);
}

TEST(WoeTransform, AppliesTrainTablesToHeldOutRows) {
  Rng rng(12);
  Dataset train;
  std::vector<std::optional<double>> v(600);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i % 10) v[i] = rng.normal();
    train.target.push_back(rng.uniform() < 0.3);
  }
  train.columns.push_back(Feature::make_numeric("x", v));
  train.columns.push_back(Feature::make_numeric("keep", v));
  const auto tables = fit_woe_tables(train, {"x"});

  Dataset test = train.take_rows(std::vector<std::size_t>{0, 1, 2, 3});
  test.columns[0].numeric[1] = 100.0;  // far outside the training range
  const auto out = woe_transform(test, tables);
  std::set<double> levels;
  for (const auto& b : tables[0].bins) levels.insert(b.woe);
  for (std::size_t i = 0; i < out.n_rows(); ++i) EXPECT_TRUE(levels.contains(*out.columns[0].numeric[i]));
  EXPECT_EQ(*out.columns[0].numeric[0], tables[0].bins.back().woe);  // row 0 is missing
  EXPECT_EQ(out.columns[1].numeric, test.columns[1].numeric);
  EXPECT_THROW(woe_transform(test, tables, false), Error);
}
