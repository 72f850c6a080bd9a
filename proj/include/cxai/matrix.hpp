#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cxai/common.hpp"

namespace cxai {

/// Dense row-major design matrix with named columns. Models train and score
/// on this; it never holds missing values.
struct Matrix {
  std::vector<std::string> names;
  std::size_t rows = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(std::vector<std::string> column_names, std::size_t n_rows)
      : names(std::move(column_names)), rows(n_rows), values(rows * names.size(), 0.0) {}

  std::size_t cols() const { return names.size(); }

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols(), cols()}; }
  std::span<double> row(std::size_t i) { return {values.data() + i * cols(), cols()}; }

  double operator()(std::size_t i, std::size_t j) const { return values[i * cols() + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values[i * cols() + j]; }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i) out[i] = (*this)(i, j);
    return out;
  }

  std::ptrdiff_t find(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (names[j] == name) return static_cast<std::ptrdiff_t>(j);
    }
    return -1;
  }

  std::size_t index_of(const std::string& name) const {
    const auto j = find(name);
    if (j < 0) throw Error(ErrorCode::FeatureMismatch, "column '" + name + "' not present");
    return static_cast<std::size_t>(j);
  }

  Matrix select_rows(std::span<const std::size_t> idx) const {
    Matrix out(names, idx.size());
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto src = row(idx[r]);
      std::copy(src.begin(), src.end(), out.row(r).begin());
    }
    return out;
  }

  Matrix select_columns(const std::vector<std::string>& wanted) const {
    std::vector<std::size_t> idx;
    idx.reserve(wanted.size());
    for (const auto& n : wanted) idx.push_back(index_of(n));
    Matrix out(wanted, rows);
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t k = 0; k < idx.size(); ++k) out(i, k) = (*this)(i, idx[k]);
    }
    return out;
  }

  bool operator==(const Matrix&) const = default;
};

/// Column indices of `wanted` inside `m`, failing on the first absent name.
inline std::vector<std::size_t> column_map(const Matrix& m, const std::vector<std::string>& wanted) {
  std::vector<std::size_t> idx;
  idx.reserve(wanted.size());
  for (const auto& n : wanted) idx.push_back(m.index_of(n));
  return idx;
}

}  // namespace cxai
