#pragma once

// Brute-force reference implementations used only by tests. Each one follows
// the textbook definition directly and shares no code with the library path
// it checks.

#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "cxai/common.hpp"

namespace oracle {

/// O(n^2) Mann-Whitney: every (bad, good) pair, ties count 1/2.
inline double auc_pairs(const std::vector<double>& s, const std::vector<int>& y) {
  double concordant = 0;
  double pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1;
      if (s[i] > s[j]) {
        concordant += 1;
      } else if (s[i] == s[j]) {
        concordant += 0.5;
      }
    }
  }
  return concordant / pairs;
}

/// K-S by evaluating both ECDFs from scratch at every observed score.
inline double ks_thresholds(const std::vector<double>& s, const std::vector<int>& y) {
  double n_bad = 0, n_good = 0;
  for (int t : y) (t ? n_bad : n_good) += 1;
  double best = 0;
  for (double thr : s) {
    double bad = 0, good = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] <= thr) (y[i] ? bad : good) += 1;
    }
    best = std::max(best, std::abs(good / n_good - bad / n_bad));
  }
  return best;
}

struct Instance {
  std::vector<double> scores;
  std::vector<int> labels;
};

/// Random scores with heavy ties (values drawn from a small grid half the
/// time) and both classes guaranteed.
inline Instance random_instance(cxai::Rng& rng, std::size_t n) {
  Instance inst;
  const double bias = rng.uniform(-1, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = rng.uniform() < 0.3 ? 1 : 0;
    double s = rng.normal() + bias * y;
    if (rng.uniform() < 0.5) s = std::round(s * 2.0) / 2.0;
    inst.scores.push_back(s);
    inst.labels.push_back(y);
  }
  inst.labels[0] = 0;
  inst.labels[1] = 1;
  return inst;
}

struct BestSplit {
  int feature = -1;
  double threshold = 0;
  double gain = 0;
};

/// Exhaustive single-split search: every feature, every midpoint between
/// adjacent distinct values, gain evaluated from scratch by `gain_of` on the
/// two index sets.
template <typename GainFn>
BestSplit exhaustive_split(const std::vector<std::vector<double>>& rows, GainFn gain_of) {
  BestSplit best;
  best.gain = -std::numeric_limits<double>::infinity();
  const std::size_t p = rows.empty() ? 0 : rows[0].size();
  for (std::size_t f = 0; f < p; ++f) {
    std::set<double> values;
    for (const auto& r : rows) values.insert(r[f]);
    for (auto it = values.begin(); std::next(it) != values.end(); ++it) {
      const double thr = (*it + *std::next(it)) / 2;
      std::vector<std::size_t> left, right;
      for (std::size_t i = 0; i < rows.size(); ++i) (rows[i][f] < thr ? left : right).push_back(i);
      const double g = gain_of(left, right);
      if (g > best.gain) best = {static_cast<int>(f), thr, g};
    }
  }
  return best;
}

/// Gini impurity decrease computed from raw label counts.
inline double gini_gain(const std::vector<int>& y, const std::vector<std::size_t>& left,
                        const std::vector<std::size_t>& right) {
  auto weighted_impurity = [&](const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    double bad = 0;
    for (auto i : idx) bad += y[i];
    const double n = static_cast<double>(idx.size());
    const double p = bad / n;
    return n * (1.0 - p * p - (1 - p) * (1 - p));
  };
  std::vector<std::size_t> all(left);
  all.insert(all.end(), right.begin(), right.end());
  return weighted_impurity(all) - weighted_impurity(left) - weighted_impurity(right);
}

/// Regularized second-order gain written out term by term.
inline double xgb_gain(const std::vector<double>& g, const std::vector<double>& h,
                       const std::vector<std::size_t>& left, const std::vector<std::size_t>& right,
                       double lambda, double gamma) {
  double gl = 0, hl = 0, gr = 0, hr = 0;
  for (auto i : left) {
    gl += g[i];
    hl += h[i];
  }
  for (auto i : right) {
    gr += g[i];
    hr += h[i];
  }
  const double parent = (gl + gr) * (gl + gr) / (hl + hr + lambda);
  return 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) - parent) - gamma;
}

}  // namespace oracle
