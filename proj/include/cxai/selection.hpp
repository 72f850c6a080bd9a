#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxai/boosting.hpp"
#include "cxai/csv.hpp"
#include "cxai/matrix.hpp"
#include "cxai/metrics.hpp"

namespace cxai {

struct SelectionParams {
  std::size_t unique_threshold = 300;
  std::size_t top_k = 81;
  double min_ks = 0.1;
  BoostParams boosting;
  int threads = 1;
};

inline void to_json(nlohmann::json& j, const SelectionParams& p) {
  j = nlohmann::json{{"unique_threshold", p.unique_threshold},
                     {"top_k", p.top_k},
                     {"min_ks", p.min_ks},
                     {"boosting", p.boosting}};
}

inline void from_json(const nlohmann::json& j, SelectionParams& p) {
  p.unique_threshold = j.value("unique_threshold", p.unique_threshold);
  p.top_k = j.value("top_k", p.top_k);
  p.min_ks = j.value("min_ks", p.min_ks);
  if (j.contains("boosting")) {
    nlohmann::json b = p.boosting;
    b.update(j.at("boosting"));
    p.boosting = b.get<BoostParams>();
  }
}

inline std::size_t count_unique(std::span<const double> v) {
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  return static_cast<std::size_t>(std::unique(s.begin(), s.end()) - s.begin());
}

struct CardinalitySplit {
  std::vector<std::string> low_card, high_card;
  std::map<std::string, std::size_t> n_unique;
};

/// n_unique <= threshold goes to low_card, the rest to high_card.
inline CardinalitySplit split_by_unique_count(const Matrix& X, const std::vector<std::string>& features,
                                              std::size_t threshold) {
  if (threshold < 1) throw Error(ErrorCode::InvalidArgument, "unique-count threshold must be at least 1");
  CardinalitySplit s;
  for (const auto& f : features) {
    const auto col = X.column(X.index_of(f));
    const auto u = count_unique(col);
    s.n_unique[f] = u;
    (u <= threshold ? s.low_card : s.high_card).push_back(f);
  }
  return s;
}

struct Preselection {
  std::map<std::string, double> importance;
  std::vector<std::string> ranked;    // nonzero importance, descending, ties by name
  std::vector<std::string> selected;  // first top_k of ranked
};

/// One XGB model per non-empty partition; a feature's importance is its
/// total split gain. The union is ranked and cut at top_k. Features that
/// were never split on are never selected.
inline Preselection preselect_by_boosting(const Matrix& X, std::span<const int> y,
                                          const std::vector<std::vector<std::string>>& partitions, std::size_t top_k,
                                          const BoostParams& params, int threads = 1) {
  if (top_k < 1) throw Error(ErrorCode::InvalidArgument, "top_k must be at least 1");
  std::vector<std::vector<double>> gains(partitions.size());
  parallel_for(partitions.size(), threads, [&](std::size_t k) {
    if (partitions[k].empty()) return;
    auto p = params;
    p.seed = derive_seed(params.seed, k);
    gains[k] = train_xgb(X.select_columns(partitions[k]), y, p).gain_importance();
  });
  Preselection out;
  for (std::size_t k = 0; k < partitions.size(); ++k) {
    for (std::size_t j = 0; j < partitions[k].size(); ++j) out.importance[partitions[k][j]] = gains[k][j];
  }
  for (const auto& [name, g] : out.importance) {
    if (g > 0) out.ranked.push_back(name);
  }
  std::stable_sort(out.ranked.begin(), out.ranked.end(),
                   [&](const std::string& a, const std::string& b) { return out.importance[a] > out.importance[b]; });
  out.selected.assign(out.ranked.begin(), out.ranked.begin() + static_cast<std::ptrdiff_t>(std::min(top_k, out.ranked.size())));
  return out;
}

/// K-S of a raw feature used as a score, taking the better of both
/// orientations.
inline double feature_ks(std::span<const double> x, std::span<const int> y) {
  std::vector<double> neg(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) neg[i] = -x[i];
  return std::max(ks_statistic(x, y), ks_statistic(neg, y));
}

struct KsFilter {
  std::map<std::string, double> ks;
  std::vector<std::string> kept;  // input order
};

inline KsFilter ks_filter(const Matrix& X, std::span<const int> y, const std::vector<std::string>& features,
                          double min_ks) {
  if (min_ks < 0 || min_ks > 1) throw Error(ErrorCode::InvalidArgument, "min_ks must lie in [0,1]");
  KsFilter out;
  for (const auto& f : features) {
    const double k = feature_ks(X.column(X.index_of(f)), y);
    out.ks[f] = k;
    if (k >= min_ks) out.kept.push_back(f);
  }
  return out;
}

struct SelectionReport {
  CardinalitySplit partition;
  Preselection preselection;
  KsFilter ks;
  std::vector<std::string> input;
  SelectionParams params;

  const std::vector<std::string>& survivors() const { return ks.kept; }
};

/// Cardinality partition, boosting preselection, then the K-S filter on the
/// preselected features.
inline SelectionReport select_features(const Matrix& X, std::span<const int> y, const SelectionParams& params) {
  SelectionReport r;
  r.params = params;
  r.input = X.names;
  r.partition = split_by_unique_count(X, X.names, params.unique_threshold);
  r.preselection = preselect_by_boosting(X, y, {r.partition.low_card, r.partition.high_card}, params.top_k,
                                         params.boosting, params.threads);
  r.ks = ks_filter(X, y, r.preselection.selected, params.min_ks);
  if (r.ks.kept.empty()) warn("feature selection left no survivors");
  return r;
}

inline nlohmann::json to_json(const SelectionReport& r) {
  nlohmann::json features = nlohmann::json::object();
  const std::set<std::string> low(r.partition.low_card.begin(), r.partition.low_card.end());
  for (const auto& f : r.input) {
    nlohmann::json e{{"n_unique", r.partition.n_unique.at(f)},
                     {"partition", low.contains(f) ? "low_card" : "high_card"},
                     {"importance", r.preselection.importance.at(f)}};
    auto k = r.ks.ks.find(f);
    e["ks"] = k == r.ks.ks.end() ? nlohmann::json(nullptr) : nlohmann::json(k->second);
    features[f] = std::move(e);
  }
  return nlohmann::json{
      {"schema_version", 1},
      {"params", r.params},
      {"features", features},
      {"stages",
       {{"input", {{"n", r.input.size()}, {"features", r.input}}},
        {"preselected", {{"n", r.preselection.selected.size()}, {"features", r.preselection.selected}}},
        {"ks_filtered", {{"n", r.ks.kept.size()}, {"features", r.ks.kept}}}}}};
}

// ---------------------------------------------------------------------------

struct ModelDecision {
  std::string model_name;
  std::optional<double> test_gini;
  bool rejected = false;
  std::string reason;
};

/// Rejects models whose test Gini is below min_gini (exactly min_gini is
/// accepted) or whose test Gini is unavailable; `expert_rejected` names
/// models rejected by hand.
inline std::vector<ModelDecision> reject_models(const std::vector<MetricReport>& reports, double min_gini,
                                                const std::set<std::string>& expert_rejected = {}) {
  if (min_gini < 0 || min_gini > 1) throw Error(ErrorCode::InvalidArgument, "min_gini must lie in [0,1]");
  std::vector<ModelDecision> out;
  for (const auto& r : reports) {
    ModelDecision d{r.model_name, r.gini_of("test"), false, ""};
    if (!d.test_gini) {
      d.rejected = true;
      d.reason = "test Gini unavailable";
    } else if (*d.test_gini < min_gini) {
      d.rejected = true;
      d.reason = "test Gini below " + csv::format_double(min_gini);
    }
    if (expert_rejected.contains(r.model_name)) {
      d.rejected = true;
      d.reason = d.reason.empty() ? "expert judgement" : d.reason + "; expert judgement";
    }
    out.push_back(std::move(d));
  }
  return out;
}

inline nlohmann::json to_json(const std::vector<ModelDecision>& ds) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& d : ds) {
    a.push_back({{"model_name", d.model_name},
                 {"test_gini", d.test_gini ? nlohmann::json(*d.test_gini) : nlohmann::json(nullptr)},
                 {"rejected", d.rejected},
                 {"reason", d.reason}});
  }
  return a;
}

}  // namespace cxai
