#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxai/common.hpp"

namespace cxai {

// Score orientation throughout: higher score = more likely bad (label 1).

namespace detail {

inline void require_both_classes(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw Error(ErrorCode::InvalidArgument, "scores/labels length mismatch");
  std::size_t bad = 0;
  for (int y : labels) bad += (y == 1);
  if (bad == 0 || bad == labels.size()) throw Error(ErrorCode::OneClassOnly, "metric needs both classes");
}

inline std::vector<std::size_t> order_by_score(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return idx;
}

}  // namespace detail

/// Mann-Whitney AUC: share of (bad, good) pairs ranked correctly, ties count
/// one half. Counts are accumulated in integers so the result is exact up to
/// the final division.
inline double auc(std::span<const double> scores, std::span<const int> labels) {
  detail::require_both_classes(scores, labels);
  const auto idx = detail::order_by_score(scores);
  std::uint64_t goods_below = 0;
  std::uint64_t twice_concordant = 0;
  std::uint64_t n_bad = 0, n_good = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    std::uint64_t bad = 0, good = 0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == 1 ? bad : good)++;
      ++j;
    }
    twice_concordant += 2 * bad * goods_below + bad * good;
    goods_below += good;
    n_bad += bad;
    n_good += good;
    i = j;
  }
  return static_cast<double>(twice_concordant) / (2.0 * static_cast<double>(n_bad) * static_cast<double>(n_good));
}

inline double gini(std::span<const double> scores, std::span<const int> labels) {
  return 2.0 * auc(scores, labels) - 1.0;
}

/// Largest gap between the score ECDFs of goods and bads, by a single sweep
/// over tie groups of the sorted scores.
inline double ks_statistic(std::span<const double> scores, std::span<const int> labels) {
  detail::require_both_classes(scores, labels);
  const auto idx = detail::order_by_score(scores);
  std::uint64_t n_bad = 0;
  for (int y : labels) n_bad += (y == 1);
  const std::uint64_t n_good = labels.size() - n_bad;
  std::uint64_t cum_bad = 0, cum_good = 0;
  double best = 0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == 1 ? cum_bad : cum_good)++;
      ++j;
    }
    const double gap = std::abs(static_cast<double>(cum_good) / static_cast<double>(n_good) -
                                static_cast<double>(cum_bad) / static_cast<double>(n_bad));
    best = std::max(best, gap);
    i = j;
  }
  return best;
}

// ---------------------------------------------------------------------------

struct SplitMetrics {
  std::string split;
  std::optional<double> auc;
  std::optional<double> gini;
  std::optional<double> ks;
  std::string error;  // set when the split could not be scored

  bool ok() const { return auc.has_value(); }
};

/// One row of the model comparison table.
struct MetricReport {
  std::string model_name;
  std::vector<SplitMetrics> splits;
  double learn_seconds = 0;
  double predict_seconds = 0;

  const SplitMetrics* find(const std::string& split) const {
    for (const auto& s : splits) {
      if (s.split == split) return &s;
    }
    return nullptr;
  }

  std::optional<double> gini_of(const std::string& split) const {
    const auto* s = find(split);
    return s ? s->gini : std::nullopt;
  }
};

inline SplitMetrics score_split(const std::string& name, std::span<const double> scores, std::span<const int> labels,
                                bool with_ks) {
  SplitMetrics m;
  m.split = name;
  try {
    m.auc = auc(scores, labels);
    m.gini = 2.0 * *m.auc - 1.0;
    if (with_ks) m.ks = ks_statistic(scores, labels);
  } catch (const Error& e) {
    m.auc.reset();
    m.gini.reset();
    m.ks.reset();
    m.error = e.what();
  }
  return m;
}

/// Serializes metrics only. Timings go through timing_json() so the metric
/// artifact stays byte-identical across reruns.
inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json splits = nlohmann::json::array();
  for (const auto& s : r.splits) {
    nlohmann::json j{{"split", s.split}};
    j["auc"] = s.auc ? nlohmann::json(*s.auc) : nlohmann::json(nullptr);
    j["gini"] = s.gini ? nlohmann::json(*s.gini) : nlohmann::json(nullptr);
    j["ks"] = s.ks ? nlohmann::json(*s.ks) : nlohmann::json(nullptr);
    if (!s.error.empty()) j["error"] = s.error;
    splits.push_back(std::move(j));
  }
  return nlohmann::json{{"schema_version", 1}, {"model_name", r.model_name}, {"splits", splits}};
}

inline nlohmann::json timing_json(const MetricReport& r) {
  return nlohmann::json{{"schema_version", 1},
                        {"model_name", r.model_name},
                        {"learn_seconds", r.learn_seconds},
                        {"predict_seconds", r.predict_seconds}};
}

inline MetricReport report_from_json(const nlohmann::json& j, const nlohmann::json* timing = nullptr) {
  MetricReport r;
  r.model_name = j.at("model_name").get<std::string>();
  for (const auto& s : j.at("splits")) {
    SplitMetrics m;
    m.split = s.at("split").get<std::string>();
    if (!s.at("auc").is_null()) m.auc = s.at("auc").get<double>();
    if (!s.at("gini").is_null()) m.gini = s.at("gini").get<double>();
    if (!s.at("ks").is_null()) m.ks = s.at("ks").get<double>();
    m.error = s.value("error", "");
    r.splits.push_back(std::move(m));
  }
  if (timing) {
    r.learn_seconds = timing->value("learn_seconds", 0.0);
    r.predict_seconds = timing->value("predict_seconds", 0.0);
  }
  return r;
}

}  // namespace cxai
