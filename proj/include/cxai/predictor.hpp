#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cxai/common.hpp"
#include "cxai/matrix.hpp"

namespace cxai {

enum class ModelKind { Logistic, WoeLogistic, RandomForest, Gbm, Xgb };

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Logistic: return "logistic";
    case ModelKind::WoeLogistic: return "woe_logistic";
    case ModelKind::RandomForest: return "rf";
    case ModelKind::Gbm: return "gbm";
    case ModelKind::Xgb: return "xgb";
  }
  return "unknown";
}

inline ModelKind parse_model_kind(const std::string& s) {
  for (auto k : {ModelKind::Logistic, ModelKind::WoeLogistic, ModelKind::RandomForest, ModelKind::Gbm, ModelKind::Xgb}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown model family '" + s + "'");
}

inline constexpr int kModelSchemaVersion = 1;

/// Uniform scoring interface over every trained model. Explainers and
/// metrics only ever see this type.
class Predictor {
 public:
  virtual ~Predictor() = default;

  virtual ModelKind kind() const = 0;
  virtual const std::vector<std::string>& feature_names() const = 0;

  /// Probability of bad for one row laid out in feature_names() order.
  virtual double predict_row(std::span<const double> x) const = 0;

  virtual nlohmann::json to_json() const = 0;

  /// Scores every row of X, locating the model's features by column name;
  /// extra columns are ignored.
  std::vector<double> predict(const Matrix& X) const {
    const auto idx = column_map(X, feature_names());
    std::vector<double> buf(idx.size());
    std::vector<double> out(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) {
      const auto r = X.row(i);
      for (std::size_t k = 0; k < idx.size(); ++k) buf[k] = r[idx[k]];
      out[i] = predict_row(buf);
    }
    return out;
  }

 protected:
  nlohmann::json header() const {
    return nlohmann::json{
        {"schema_version", kModelSchemaVersion}, {"model_kind", to_string(kind())}, {"feature_names", feature_names()}};
  }
};

using PredictorPtr = std::shared_ptr<const Predictor>;

}  // namespace cxai
