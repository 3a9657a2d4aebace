// Apache License, Version 2.0, refer to LICENSE.txt
#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace nvil {

// Dense row-major matrix of doubles. Only the handful of kernels the layered
// models need live here; this is deliberately not a general linear algebra
// layer.
class Matrix {
 public:
  Matrix() : rows_(0), cols_(0) {}
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

 private:
  std::size_t rows_, cols_;
  std::vector<double> data_;
};

// out = A x + b, with out.size() == A.rows().
inline void affine(const Matrix& a, const std::vector<double>& x,
                   const std::vector<double>& b, std::vector<double>& out) {
  if (a.cols() != x.size() || a.rows() != b.size()) {
    throw std::invalid_argument("matrix: affine shape mismatch");
  }
  out.assign(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* r = a.row(i);
    double acc = b[i];
    for (std::size_t j = 0; j < a.cols(); ++j) acc += r[j] * x[j];
    out[i] = acc;
  }
}

}  // namespace nvil
