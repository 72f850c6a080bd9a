#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cxai/predictor.hpp"
#include "cxai/woe.hpp"

namespace cxai {

struct LogisticOptions {
  double tol = 1e-8;     // max absolute coefficient change
  int max_iter = 100;
  double ridge = 1e-8;   // penalty ridge * ||w||^2, intercept excluded
};

class LogisticModel final : public Predictor {
 public:
  LogisticModel() = default;
  LogisticModel(std::vector<std::string> feature_names, std::vector<double> coefficients, double intercept)
      : names(std::move(feature_names)), coefficients(std::move(coefficients)), intercept(intercept) {}

  ModelKind kind() const override { return ModelKind::Logistic; }
  const std::vector<std::string>& feature_names() const override { return names; }

  double linear_predictor(std::span<const double> x) const {
    double z = intercept;
    for (std::size_t j = 0; j < coefficients.size(); ++j) z += coefficients[j] * x[j];
    return z;
  }

  double predict_row(std::span<const double> x) const override { return sigmoid(linear_predictor(x)); }

  nlohmann::json to_json() const override {
    auto j = header();
    j["coefficients"] = coefficients;
    j["intercept"] = intercept;
    j["converged"] = converged;
    j["separated"] = separated;
    j["n_iter"] = n_iter;
    return j;
  }

  static LogisticModel from_json(const nlohmann::json& j) {
    LogisticModel m(j.at("feature_names").get<std::vector<std::string>>(),
                    j.at("coefficients").get<std::vector<double>>(), j.at("intercept").get<double>());
    m.converged = j.at("converged").get<bool>();
    m.separated = j.value("separated", false);
    m.n_iter = j.at("n_iter").get<int>();
    return m;
  }

  std::vector<std::string> names;
  std::vector<double> coefficients;
  double intercept = 0;
  bool converged = false;
  bool separated = false;  // fitted probabilities reproduce the labels
  int n_iter = 0;
};

/// Newton-Raphson (IRLS) maximization of the ridge-stabilized log-likelihood,
/// with step halving whenever a full step lowers the objective.
///
/// Perfectly separated data is never reported as converged: the optimum only
/// exists because of the ridge term, so iteration runs to max_iter and the
/// `separated` flag is set.
inline LogisticModel train_logistic(const Matrix& X, std::span<const int> y, const LogisticOptions& opt = {}) {
  const auto n = X.rows;
  const auto p = X.cols();
  if (y.size() != n) throw Error(ErrorCode::InvalidArgument, "X/y length mismatch");
  std::size_t n_bad = 0;
  for (int t : y) n_bad += (t == 1);
  if (n_bad == 0 || n_bad == n) throw Error(ErrorCode::OneClassOnly, "logistic regression needs both classes");

  using Eigen::MatrixXd;
  using Eigen::VectorXd;
  MatrixXd A(n, p + 1);
  VectorXd target(n);
  for (std::size_t i = 0; i < n; ++i) {
    A(i, 0) = 1.0;
    for (std::size_t j = 0; j < p; ++j) A(i, j + 1) = X(i, j);
    target(i) = y[i];
  }

  auto objective = [&](const VectorXd& beta) {
    const VectorXd eta = A * beta;
    double ll = 0;
    for (std::size_t i = 0; i < n; ++i) {
      // log(1 + e^eta) evaluated stably.
      const double e = eta(i);
      const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
      ll += target(i) * e - softplus;
    }
    return ll - opt.ridge * beta.tail(p).squaredNorm();
  };

  VectorXd beta = VectorXd::Zero(p + 1);
  beta(0) = logit(static_cast<double>(n_bad) / static_cast<double>(n));
  double current = objective(beta);

  LogisticModel m;
  for (int it = 1; it <= opt.max_iter; ++it) {
    m.n_iter = it;
    const VectorXd prob = (A * beta).unaryExpr([](double z) { return sigmoid(z); });
    const VectorXd wts = prob.unaryExpr([](double q) { return q * (1.0 - q); });
    VectorXd grad = A.transpose() * (target - prob);
    grad.tail(p) -= 2.0 * opt.ridge * beta.tail(p);
    MatrixXd H = A.transpose() * wts.asDiagonal() * A;
    H.diagonal().tail(p).array() += 2.0 * opt.ridge;

    Eigen::LLT<MatrixXd> llt(H);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::SingularHessian, "Hessian not positive definite (perfect separation or collinearity)");
    }
    VectorXd step = llt.solve(grad);
    if (!step.allFinite()) throw Error(ErrorCode::SingularHessian, "Newton step is not finite");

    VectorXd next = beta + step;
    double value = objective(next);
    for (int halving = 0; halving < 30 && value < current; ++halving) {
      step *= 0.5;
      next = beta + step;
      value = objective(next);
    }
    beta = next;
    current = value;

    const VectorXd fitted = (A * beta).unaryExpr([](double z) { return sigmoid(z); });
    m.separated = (fitted - target).cwiseAbs().maxCoeff() < 1e-6;
    if (step.cwiseAbs().maxCoeff() < opt.tol && !m.separated) {
      m.converged = true;
      break;
    }
  }
  m.names = X.names;
  m.intercept = beta(0);
  m.coefficients.assign(beta.data() + 1, beta.data() + 1 + p);
  return m;
}

/// Logistic regression on WOE-transformed inputs. Scores raw feature values:
/// each input is mapped through its table before the linear predictor.
class WoeLogisticModel final : public Predictor {
 public:
  WoeLogisticModel(std::vector<WoeTable> tables, LogisticModel inner)
      : tables_(std::move(tables)), inner_(std::move(inner)) {
    for (const auto& t : tables_) names_.push_back(t.feature());
  }

  ModelKind kind() const override { return ModelKind::WoeLogistic; }
  const std::vector<std::string>& feature_names() const override { return names_; }

  double predict_row(std::span<const double> x) const override {
    thread_local std::vector<double> woe;
    woe.resize(tables_.size());
    for (std::size_t j = 0; j < tables_.size(); ++j) woe[j] = tables_[j].woe_of(x[j]);
    return inner_.predict_row(woe);
  }

  const std::vector<WoeTable>& tables() const { return tables_; }
  const LogisticModel& logistic() const { return inner_; }

  nlohmann::json to_json() const override {
    auto j = header();
    j["woe_tables"] = tables_;
    j["logistic"] = inner_.to_json();
    return j;
  }

  static WoeLogisticModel from_json(const nlohmann::json& j) {
    return WoeLogisticModel(j.at("woe_tables").get<std::vector<WoeTable>>(),
                            LogisticModel::from_json(j.at("logistic")));
  }

 private:
  std::vector<WoeTable> tables_;
  LogisticModel inner_;
  std::vector<std::string> names_;
};

struct WoeOptions {
  BinningOptions binning;
  double smoothing = 0.5;
};

/// Bins and WOE-encodes every column of X on the training rows, then fits the
/// logistic model on the encoded matrix.
inline WoeLogisticModel train_woe_logistic(const Matrix& X, std::span<const int> y, const WoeOptions& woe = {},
                                           const LogisticOptions& opt = {}) {
  std::vector<WoeTable> tables;
  Matrix encoded(X.names, X.rows);
  for (std::size_t j = 0; j < X.cols(); ++j) {
    const auto col = X.column(j);
    const auto spec = fit_bins(col, y, woe.binning, X.names[j]);
    std::vector<std::optional<double>> v(col.begin(), col.end());
    auto table = compute_woe(spec, Feature::make_numeric(X.names[j], std::move(v)), y, woe.smoothing);
    for (std::size_t i = 0; i < X.rows; ++i) encoded(i, j) = table.woe_of(col[i]);
    tables.push_back(std::move(table));
  }
  return WoeLogisticModel(std::move(tables), train_logistic(encoded, y, opt));
}

}  // namespace cxai
