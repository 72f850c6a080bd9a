#pragma once

#include <array>
#include <chrono>
#include <span>
#include <string>
#include <vector>

#include "cxai/metrics.hpp"
#include "cxai/predictor.hpp"

namespace cxai {

inline constexpr std::array<const char*, 4> kSplitNames{"train", "test", "out_of_sample", "out_of_time"};

/// One scored part of the data.
struct EvalPart {
  std::string name;
  const Matrix* X = nullptr;
  std::span<const int> y;
  bool with_ks = false;
};

/// Scores `model` on every part. A part that cannot be scored (one class
/// only) carries its error; the others are still reported. Only prediction
/// time is measured here; the caller supplies the learning time.
inline MetricReport evaluate(const Predictor& model, const std::string& model_name, const std::vector<EvalPart>& parts,
                             double learn_seconds = 0) {
  MetricReport r;
  r.model_name = model_name;
  r.learn_seconds = learn_seconds;
  for (const auto& p : parts) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto scores = model.predict(*p.X);
    r.predict_seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.splits.push_back(score_split(p.name, scores, p.y, p.with_ks));
  }
  return r;
}

}  // namespace cxai
