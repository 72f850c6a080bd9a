#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxai/metrics.hpp"
#include "cxai/predictor.hpp"

namespace cxai {

struct ParamRange {
  double lo = 0;
  double hi = 0;
  bool integer = false;
  bool log_scale = false;

  bool contains(double v) const { return v >= lo && v <= hi && (!integer || v == std::floor(v)); }
};

using HyperParamSpace = std::map<std::string, ParamRange>;
using TrainConfig = std::map<std::string, double>;

inline void to_json(nlohmann::json& j, const ParamRange& r) {
  j = nlohmann::json{{"lo", r.lo}, {"hi", r.hi}, {"integer", r.integer}, {"log_scale", r.log_scale}};
}

inline void from_json(const nlohmann::json& j, ParamRange& r) {
  if (j.is_number()) {
    r.lo = r.hi = j.get<double>();
    r.integer = j.is_number_integer();
    return;
  }
  r.lo = j.at("lo").get<double>();
  r.hi = j.at("hi").get<double>();
  r.integer = j.value("integer", false);
  r.log_scale = j.value("log_scale", false);
  if (r.lo > r.hi) throw Error(ErrorCode::BadConfig, "parameter range with lo > hi");
  if (r.log_scale && r.lo <= 0) throw Error(ErrorCode::BadConfig, "log-scale range must be positive");
}

/// Uniform draw from every range (log-uniform where flagged, uniform over
/// the integers lo..hi for integer ranges). Keys are visited in sorted order.
inline TrainConfig sample_config(const HyperParamSpace& space, Rng& rng) {
  TrainConfig c;
  for (const auto& [name, r] : space) {
    double v;
    if (r.lo == r.hi) {
      v = r.lo;
    } else if (r.integer) {
      const auto lo = static_cast<long long>(std::ceil(r.lo));
      const auto hi = static_cast<long long>(std::floor(r.hi));
      v = static_cast<double>(lo + static_cast<long long>(rng.below(static_cast<std::uint64_t>(hi - lo + 1))));
    } else if (r.log_scale) {
      v = std::exp(rng.uniform(std::log(r.lo), std::log(r.hi)));
      v = std::clamp(v, r.lo, r.hi);
    } else {
      v = rng.uniform(r.lo, r.hi);
    }
    c[name] = v;
  }
  return c;
}

struct Trial {
  TrainConfig config;
  double score = 0;
};

struct SearchResult {
  std::size_t best_index = 0;
  TrainConfig best_config;
  PredictorPtr best_model;
  std::vector<Trial> trials;  // in draw order
};

inline nlohmann::json to_json(const SearchResult& r) {
  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : r.trials) trials.push_back({{"config", t.config}, {"score", t.score}});
  return nlohmann::json{{"best_index", r.best_index}, {"best_config", r.best_config}, {"trials", trials}};
}

/// Builds a model from a concrete config; `seed` is the trial's own stream.
using Trainer = std::function<PredictorPtr(const TrainConfig&, const Matrix&, std::span<const int>, std::uint64_t seed)>;
using ValidationMetric = std::function<double(std::span<const double>, std::span<const int>)>;

/// Draws `budget` configs up front from (seed), trains each on the training
/// part and scores it on the validation part. The highest score wins; ties go
/// to the earliest draw. Trials may run in parallel without changing the
/// outcome.
inline SearchResult random_search(const HyperParamSpace& space, const Trainer& trainer, const Matrix& X_train,
                                  std::span<const int> y_train, const Matrix& X_valid, std::span<const int> y_valid,
                                  int budget, std::uint64_t seed, int threads = 1,
                                  const ValidationMetric& metric = gini) {
  if (budget < 1) throw Error(ErrorCode::InvalidArgument, "random search budget must be at least 1");
  Rng draw(seed, 0);
  SearchResult r;
  r.trials.resize(static_cast<std::size_t>(budget));
  for (auto& t : r.trials) t.config = sample_config(space, draw);
  // Only the current leader is kept alive; the (score, index) ordering makes
  // the winner independent of completion order.
  std::mutex mu;
  parallel_for(r.trials.size(), threads, [&](std::size_t i) {
    auto model = trainer(r.trials[i].config, X_train, y_train, derive_seed(seed, 1 + i));
    const auto scores = model->predict(X_valid);
    const double score = metric(scores, y_valid);
    std::lock_guard lock(mu);
    r.trials[i].score = score;
    if (!r.best_model || score > r.trials[r.best_index].score ||
        (score == r.trials[r.best_index].score && i < r.best_index)) {
      r.best_index = i;
      r.best_model = std::move(model);
    }
  });
  r.best_config = r.trials[r.best_index].config;
  return r;
}

}  // namespace cxai
