#pragma once

#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "cxai/boosting.hpp"
#include "cxai/forest.hpp"
#include "cxai/logistic.hpp"
#include "cxai/predictor.hpp"

namespace cxai {

inline PredictorPtr load_model(const nlohmann::json& j) {
  const int version = j.value("schema_version", 0);
  if (version != kModelSchemaVersion) {
    throw Error(ErrorCode::InvalidArgument, "unsupported model schema_version " + std::to_string(version));
  }
  switch (parse_model_kind(j.at("model_kind").get<std::string>())) {
    case ModelKind::Logistic: return std::make_shared<LogisticModel>(LogisticModel::from_json(j));
    case ModelKind::WoeLogistic: return std::make_shared<WoeLogisticModel>(WoeLogisticModel::from_json(j));
    case ModelKind::RandomForest: return std::make_shared<ForestModel>(ForestModel::from_json(j));
    case ModelKind::Gbm:
    case ModelKind::Xgb: return std::make_shared<BoostedModel>(BoostedModel::from_json(j));
  }
  throw Error(ErrorCode::InvalidArgument, "unknown model kind");
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  try {
    return nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::BadConfig, path + ": " + e.what());
  }
}

/// Sorted keys (nlohmann objects are ordered maps) and shortest round-trip
/// doubles make the output a pure function of the value.
inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << j.dump(2) << '\n';
}

inline PredictorPtr load_model_file(const std::string& path) { return load_model(read_json(path)); }

}  // namespace cxai
