#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxai/matrix.hpp"
#include "cxai/metrics.hpp"
#include "cxai/predictor.hpp"

namespace cxai {

inline constexpr int kExplainSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Permutation feature importance

struct PfiRecord {
  std::string feature;
  double mean_drop = 0;
  std::vector<double> drops;  // one per repeat, may be negative
};

struct PfiResult {
  double baseline_metric = 0;  // AUC on the unpermuted data
  int n_repeats = 0;
  std::uint64_t seed = 0;
  std::vector<PfiRecord> records;  // in the order the features were given
};

/// AUC drop when one column of X is shuffled. Repeat r of feature k uses the
/// stream (derive_seed(seed, k), r). `features` defaults to the model's own
/// features; columns the model does not read are allowed and score exactly 0.
inline PfiResult permutation_importance(const Predictor& model, const Matrix& X, std::span<const int> y,
                                        int n_repeats, std::uint64_t seed, std::vector<std::string> features = {},
                                        int threads = 1) {
  if (n_repeats < 1) throw Error(ErrorCode::InvalidArgument, "n_repeats must be at least 1");
  if (y.size() != X.rows) throw Error(ErrorCode::InvalidArgument, "X/y length mismatch");
  if (features.empty()) features = model.feature_names();
  PfiResult r;
  r.n_repeats = n_repeats;
  r.seed = seed;
  r.baseline_metric = auc(model.predict(X), y);
  r.records.resize(features.size());
  parallel_for(features.size(), threads, [&](std::size_t k) {
    const auto j = X.index_of(features[k]);
    Matrix work = X;
    const auto original = X.column(j);
    auto& rec = r.records[k];
    rec.feature = features[k];
    double sum = 0;
    for (int rep = 0; rep < n_repeats; ++rep) {
      Rng rng(derive_seed(seed, k), static_cast<std::uint64_t>(rep));
      auto col = original;
      rng.shuffle(col);
      for (std::size_t i = 0; i < X.rows; ++i) work(i, j) = col[i];
      const double drop = r.baseline_metric - auc(model.predict(work), y);
      rec.drops.push_back(drop);
      sum += drop;
    }
    rec.mean_drop = sum / n_repeats;
  });
  return r;
}

// ---------------------------------------------------------------------------
// Grids

/// Evaluation points: explicit `points`, or `quantiles` evenly spaced
/// empirical quantiles (nearest rank) of the feature, de-duplicated.
struct GridSpec {
  int quantiles = 21;
  std::vector<double> points;
};

inline std::vector<double> make_grid(const Matrix& X, const std::string& feature, const GridSpec& spec) {
  std::vector<double> g;
  if (!spec.points.empty()) {
    g = spec.points;
  } else {
    if (spec.quantiles < 1) throw Error(ErrorCode::InvalidArgument, "grid needs at least one point");
    if (X.rows == 0) throw Error(ErrorCode::InvalidArgument, "grid from empty data");
    auto col = X.column(X.index_of(feature));
    std::sort(col.begin(), col.end());
    const int q = spec.quantiles;
    for (int k = 0; k < q; ++k) {
      const double pos = q == 1 ? 0.5 : static_cast<double>(k) / (q - 1);
      g.push_back(col[static_cast<std::size_t>(std::llround(pos * static_cast<double>(col.size() - 1)))]);
    }
  }
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

namespace detail {

/// Rows of X rearranged into the model's feature order.
inline Matrix model_view(const Predictor& model, const Matrix& X) { return X.select_columns(model.feature_names()); }

inline std::size_t model_index(const Predictor& model, const std::string& feature) {
  const auto& names = model.feature_names();
  auto it = std::find(names.begin(), names.end(), feature);
  if (it == names.end()) throw Error(ErrorCode::FeatureMismatch, "model has no feature '" + feature + "'");
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Partial dependence and ceteris paribus

struct PdpProfile {
  std::string feature;
  std::vector<double> grid;
  std::vector<double> mean_prediction;
  std::size_t n_background = 0;
};

/// PDP(z) = (1/n) sum_i f(x_i with feature := z), summed in row order.
inline PdpProfile partial_dependence(const Predictor& model, const Matrix& X, const std::string& feature,
                                     const GridSpec& grid = {}, int threads = 1) {
  if (X.rows == 0) throw Error(ErrorCode::InvalidArgument, "partial dependence needs background rows");
  PdpProfile p;
  p.feature = feature;
  p.grid = make_grid(X, feature, grid);
  p.n_background = X.rows;
  p.mean_prediction.resize(p.grid.size());
  const Matrix base = detail::model_view(model, X);
  const auto j = detail::model_index(model, feature);
  parallel_for(p.grid.size(), threads, [&](std::size_t g) {
    std::vector<double> row(base.cols());
    double sum = 0;
    for (std::size_t i = 0; i < base.rows; ++i) {
      const auto src = base.row(i);
      std::copy(src.begin(), src.end(), row.begin());
      row[j] = p.grid[g];
      sum += model.predict_row(row);
    }
    p.mean_prediction[g] = sum / static_cast<double>(base.rows);
  });
  return p;
}

/// Two-feature partial dependence; values[a][b] is the mean prediction with
/// feature_a := grid_a[a] and feature_b := grid_b[b].
struct Pdp2Profile {
  std::string feature_a, feature_b;
  std::vector<double> grid_a, grid_b;
  std::vector<std::vector<double>> values;
  std::size_t n_background = 0;
};

inline Pdp2Profile partial_dependence_2d(const Predictor& model, const Matrix& X, const std::string& feature_a,
                                         const std::string& feature_b, const GridSpec& grid = {}, int threads = 1) {
  if (X.rows == 0) throw Error(ErrorCode::InvalidArgument, "partial dependence needs background rows");
  if (feature_a == feature_b) throw Error(ErrorCode::InvalidArgument, "two-feature PDP needs distinct features");
  Pdp2Profile p;
  p.feature_a = feature_a;
  p.feature_b = feature_b;
  p.grid_a = make_grid(X, feature_a, grid);
  p.grid_b = make_grid(X, feature_b, grid);
  p.n_background = X.rows;
  p.values.assign(p.grid_a.size(), std::vector<double>(p.grid_b.size()));
  const Matrix base = detail::model_view(model, X);
  const auto ja = detail::model_index(model, feature_a);
  const auto jb = detail::model_index(model, feature_b);
  parallel_for(p.grid_a.size(), threads, [&](std::size_t a) {
    std::vector<double> row(base.cols());
    for (std::size_t b = 0; b < p.grid_b.size(); ++b) {
      double sum = 0;
      for (std::size_t i = 0; i < base.rows; ++i) {
        const auto src = base.row(i);
        std::copy(src.begin(), src.end(), row.begin());
        row[ja] = p.grid_a[a];
        row[jb] = p.grid_b[b];
        sum += model.predict_row(row);
      }
      p.values[a][b] = sum / static_cast<double>(base.rows);
    }
  });
  return p;
}

struct CpProfile {
  std::size_t instance = 0;
  std::string feature;
  double actual_value = 0;
  std::vector<double> grid;
  std::vector<double> prediction;
  double anchor = 0;  // prediction on the untouched instance
};

/// What-if profile of row `instance` of X. The grid comes from `grid` (its
/// quantiles are taken over X) and always contains the instance's own value.
inline CpProfile ceteris_paribus(const Predictor& model, const Matrix& X, std::size_t instance,
                                 const std::string& feature, const GridSpec& grid = {}) {
  if (instance >= X.rows) {
    throw Error(ErrorCode::InvalidArgument,
                "instance " + std::to_string(instance) + " out of range (" + std::to_string(X.rows) + " rows)");
  }
  const auto j = detail::model_index(model, feature);
  const auto idx = column_map(X, model.feature_names());
  std::vector<double> row(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) row[k] = X(instance, idx[k]);

  CpProfile p;
  p.instance = instance;
  p.feature = feature;
  p.actual_value = row[j];
  p.anchor = model.predict_row(row);
  GridSpec spec = grid;
  auto g = make_grid(X, feature, spec);
  g.push_back(p.actual_value);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  p.grid = std::move(g);
  for (double z : p.grid) {
    row[j] = z;
    p.prediction.push_back(model.predict_row(row));
  }
  return p;
}

// ---------------------------------------------------------------------------
// Break Down

struct BreakDownStep {
  std::string feature;
  double value = 0;  // the instance's value of the feature
  double delta = 0;
};

struct BreakDownResult {
  std::size_t instance = 0;
  std::string ordering;  // "greedy" or "fixed"
  double intercept = 0;
  std::vector<BreakDownStep> contributions;
  double final_prediction = 0;
};

/// Sequential attribution of one prediction. With v(S) the mean prediction
/// over `background` after overwriting the features in S by the instance's
/// values, intercept = v({}) and step k adds v(S_k) - v(S_{k-1}). v(all) is
/// the model's prediction on the instance itself, so the steps close exactly
/// on final_prediction.
///
/// An empty `order` selects the greedy ordering: at each step the unfixed
/// feature with the largest |v(S + j) - v(S)|, ties to the smaller name.
inline BreakDownResult break_down(const Predictor& model, const Matrix& background, const Matrix& data,
                                  std::size_t instance, const std::vector<std::string>& order = {}, int threads = 1) {
  if (background.rows == 0) throw Error(ErrorCode::InvalidArgument, "break down needs background rows");
  if (instance >= data.rows) {
    throw Error(ErrorCode::InvalidArgument,
                "instance " + std::to_string(instance) + " out of range (" + std::to_string(data.rows) + " rows)");
  }
  const auto& names = model.feature_names();
  const std::size_t p = names.size();
  const Matrix base = detail::model_view(model, background);
  const auto idx = column_map(data, names);
  std::vector<double> x(p);
  for (std::size_t k = 0; k < p; ++k) x[k] = data(instance, idx[k]);

  std::vector<char> fixed(p, 0);
  std::size_t n_fixed = 0;
  auto value_of = [&](const std::vector<char>& mask, std::size_t count) {
    if (count == p) return model.predict_row(x);
    std::vector<double> row(p);
    double sum = 0;
    for (std::size_t i = 0; i < base.rows; ++i) {
      const auto src = base.row(i);
      for (std::size_t k = 0; k < p; ++k) row[k] = mask[k] ? x[k] : src[k];
      sum += model.predict_row(row);
    }
    return sum / static_cast<double>(base.rows);
  };

  BreakDownResult r;
  r.instance = instance;
  r.ordering = order.empty() ? "greedy" : "fixed";
  r.intercept = value_of(fixed, 0);
  double current = r.intercept;

  std::vector<std::size_t> sequence;
  if (!order.empty()) {
    for (const auto& f : order) sequence.push_back(detail::model_index(model, f));
    std::vector<std::size_t> check = sequence;
    std::sort(check.begin(), check.end());
    if (std::unique(check.begin(), check.end()) != check.end() || check.size() != p) {
      throw Error(ErrorCode::InvalidArgument, "fixed break-down order must list every model feature once");
    }
  }

  for (std::size_t step = 0; step < p; ++step) {
    std::size_t pick;
    double next;
    if (!order.empty()) {
      pick = sequence[step];
      fixed[pick] = 1;
      next = value_of(fixed, n_fixed + 1);
    } else {
      std::vector<std::size_t> open;
      for (std::size_t k = 0; k < p; ++k) {
        if (!fixed[k]) open.push_back(k);
      }
      std::vector<double> v(open.size());
      parallel_for(open.size(), threads, [&](std::size_t c) {
        auto mask = fixed;
        mask[open[c]] = 1;
        v[c] = value_of(mask, n_fixed + 1);
      });
      std::size_t best = 0;
      for (std::size_t c = 1; c < open.size(); ++c) {
        const double a = std::abs(v[c] - current), b = std::abs(v[best] - current);
        if (a > b || (a == b && names[open[c]] < names[open[best]])) best = c;
      }
      pick = open[best];
      fixed[pick] = 1;
      next = v[best];
    }
    ++n_fixed;
    r.contributions.push_back({names[pick], x[pick], next - current});
    current = next;
  }
  r.final_prediction = model.predict_row(x);
  return r;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const PfiResult& r) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& x : r.records) recs.push_back({{"feature", x.feature}, {"mean_drop", x.mean_drop}, {"drops", x.drops}});
  return nlohmann::json{{"schema_version", kExplainSchemaVersion},
                        {"method", "pfi"},
                        {"metric", "auc"},
                        {"baseline_metric", r.baseline_metric},
                        {"n_repeats", r.n_repeats},
                        {"seed", r.seed},
                        {"records", recs}};
}

inline nlohmann::json to_json(const PdpProfile& p) {
  return nlohmann::json{{"schema_version", kExplainSchemaVersion},
                        {"method", "pdp"},
                        {"feature", p.feature},
                        {"grid", p.grid},
                        {"mean_prediction", p.mean_prediction},
                        {"n_background", p.n_background}};
}

inline nlohmann::json to_json(const Pdp2Profile& p) {
  return nlohmann::json{{"schema_version", kExplainSchemaVersion},
                        {"method", "pdp2"},
                        {"features", {p.feature_a, p.feature_b}},
                        {"grid_a", p.grid_a},
                        {"grid_b", p.grid_b},
                        {"values", p.values},
                        {"n_background", p.n_background}};
}

inline nlohmann::json to_json(const CpProfile& p) {
  return nlohmann::json{{"schema_version", kExplainSchemaVersion},
                        {"method", "cp"},
                        {"instance", p.instance},
                        {"feature", p.feature},
                        {"actual_value", p.actual_value},
                        {"grid", p.grid},
                        {"prediction", p.prediction},
                        {"anchor", p.anchor}};
}

inline nlohmann::json to_json(const BreakDownResult& r) {
  nlohmann::json steps = nlohmann::json::array();
  for (const auto& s : r.contributions) steps.push_back({{"feature", s.feature}, {"value", s.value}, {"delta", s.delta}});
  return nlohmann::json{{"schema_version", kExplainSchemaVersion},
                        {"method", "break_down"},
                        {"instance", r.instance},
                        {"ordering", r.ordering},
                        {"intercept", r.intercept},
                        {"contributions", steps},
                        {"final_prediction", r.final_prediction}};
}

}  // namespace cxai
