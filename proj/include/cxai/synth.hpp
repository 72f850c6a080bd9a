#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxai/common.hpp"
#include "cxai/dataset.hpp"

namespace cxai {

/// Synthetic credit data with known ground truth.
///
/// Each informative feature k is an observed monotone transform of a latent
/// z_k ~ N(0,1) and enters the log-odds through a nonlinear monotone effect
/// g_k(z_k). Five effect shapes are cycled: saturating, threshold, convex,
/// kinked and capped. The label is
///
///   P(bad) = sigmoid(intercept + s(t) * sum_k g_k(z_k)),  s(t) = 1 - drift * t
///
/// with t in [0, 1] the position of the row's date inside [start, end], so
/// the signal weakens over time. Noise features are independent of the label
/// and mix continuous, discrete and binary columns; `n_categorical` of them
/// are categorical. Constant columns hold 1.
struct SynthParams {
  std::size_t n_rows = 20000;
  std::size_t n_informative = 5;
  std::size_t n_noise = 15;  // includes the categorical noise columns
  std::size_t n_categorical = 1;
  std::size_t n_constant = 0;
  double drift = 0.4;
  double missing_rate = 0.02;
  double signal = 1.0;
  double intercept = -1.75;
  Date start = Date::from_ymd(2017, 10, 1);
  Date end = Date::from_ymd(2018, 11, 30);
  std::uint64_t seed = 1;
};

inline void to_json(nlohmann::json& j, const SynthParams& p) {
  j = nlohmann::json{{"n_rows", p.n_rows},       {"n_informative", p.n_informative}, {"n_noise", p.n_noise},
                     {"n_categorical", p.n_categorical}, {"n_constant", p.n_constant}, {"drift", p.drift},
                     {"missing_rate", p.missing_rate}, {"signal", p.signal},       {"intercept", p.intercept},
                     {"start", p.start.str()},   {"end", p.end.str()},               {"seed", p.seed}};
}

namespace detail {

inline std::string numbered(const char* stem, std::size_t k) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%02zu", stem, k + 1);
  return buf;
}

/// Observed value and log-odds effect of informative feature `shape`.
inline std::pair<double, double> informative_value(std::size_t shape, double z) {
  switch (shape % 5) {
    case 0:  // heavy-tailed amount, saturating effect
      return {std::round(1000.0 * std::exp(1.1 * z)), -1.2 * std::tanh(1.6 * z)};
    case 1:  // coarse grade, threshold effect
      return {std::round(2.0 * z), z > 0.8 ? 1.1 : 0.25 * z};
    case 2:  // plain score, convex effect
      return {z, 0.45 * std::exp(1.1 * z) - 0.8};
    case 3:  // count-like, kinked effect
      return {std::round(20.0 + 6.0 * z), z < -0.4 ? -1.1 * (z + 0.4) - 0.2 : -0.2 - 0.1 * (z + 0.4)};
    default:  // utilisation in percent, capped effect
      return {100.0 * sigmoid(1.5 * z), 0.9 * std::min(z + 0.3, 1.0)};
  }
}

}  // namespace detail

inline std::vector<std::string> synth_informative_names(const SynthParams& p) {
  std::vector<std::string> out;
  for (std::size_t k = 0; k < p.n_informative; ++k) out.push_back(detail::numbered("inf", k));
  return out;
}

inline Dataset make_synthetic(const SynthParams& p) {
  if (p.n_rows == 0) throw Error(ErrorCode::InvalidArgument, "synthetic data needs rows");
  if (p.n_categorical > p.n_noise) throw Error(ErrorCode::InvalidArgument, "n_categorical exceeds n_noise");
  if (!(p.start < p.end)) throw Error(ErrorCode::InvalidArgument, "start must precede end");
  Rng rng(p.seed);
  const std::size_t n = p.n_rows;
  const int span_days = p.end.days - p.start.days;

  Dataset d;
  d.target_name = "target";
  d.date_name = "obs_date";
  d.target.resize(n);
  d.obs_date.resize(n);

  std::vector<std::vector<std::optional<double>>> inf(p.n_informative, std::vector<std::optional<double>>(n));
  const std::size_t n_num_noise = p.n_noise - p.n_categorical;
  std::vector<std::vector<std::optional<double>>> noise(n_num_noise, std::vector<std::optional<double>>(n));
  std::vector<std::vector<std::optional<std::string>>> cat(p.n_categorical,
                                                           std::vector<std::optional<std::string>>(n));
  static const char* kLevels[] = {"A", "B", "C", "D", "E"};
  static const double kLevelCdf[] = {0.35, 0.60, 0.80, 0.93, 1.0};

  auto maybe_missing = [&](double v) -> std::optional<double> {
    if (rng.uniform() < p.missing_rate) return std::nullopt;
    return v;
  };

  for (std::size_t i = 0; i < n; ++i) {
    const auto day = static_cast<int>(rng.below(static_cast<std::uint64_t>(span_days) + 1));
    d.obs_date[i] = Date{p.start.days + day};
    const double t = static_cast<double>(day) / span_days;
    double effect = 0;
    for (std::size_t k = 0; k < p.n_informative; ++k) {
      const auto [x, g] = detail::informative_value(k, rng.normal());
      effect += g;
      inf[k][i] = maybe_missing(x);
    }
    for (std::size_t k = 0; k < n_num_noise; ++k) {
      double v;
      switch (k % 4) {
        case 0: v = rng.normal(); break;
        case 1: v = std::round(rng.uniform(0, 5000)); break;
        case 2: v = static_cast<double>(rng.below(6)); break;
        default: v = rng.uniform() < 0.3 ? 1.0 : 0.0; break;
      }
      noise[k][i] = maybe_missing(v);
    }
    for (std::size_t k = 0; k < p.n_categorical; ++k) {
      const double u = rng.uniform();
      std::size_t level = 0;
      while (u >= kLevelCdf[level]) ++level;
      if (rng.uniform() >= p.missing_rate) cat[k][i] = kLevels[level];
    }
    const double scale = 1.0 - p.drift * t;
    d.target[i] = rng.uniform() < sigmoid(p.intercept + p.signal * scale * effect) ? 1 : 0;
  }

  for (std::size_t k = 0; k < p.n_informative; ++k) {
    d.columns.push_back(Feature::make_numeric(detail::numbered("inf", k), std::move(inf[k])));
  }
  for (std::size_t k = 0; k < n_num_noise; ++k) {
    d.columns.push_back(Feature::make_numeric(detail::numbered("noise", k), std::move(noise[k])));
  }
  for (std::size_t k = 0; k < p.n_categorical; ++k) {
    d.columns.push_back(Feature::make_categorical(detail::numbered("cat", k), std::move(cat[k])));
  }
  for (std::size_t k = 0; k < p.n_constant; ++k) {
    d.columns.push_back(
        Feature::make_numeric(detail::numbered("const", k), std::vector<std::optional<double>>(n, 1.0)));
  }
  return d;
}

}  // namespace cxai
