#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace spreaddiv {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. Small, value-semantic; all the linear
/// algebra in this project runs on matrices of dimension <= a few hundred.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, Vec entries)
      : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (data_.size() != rows_ * cols_)
      throw std::invalid_argument("DenseMatrix: entry count != rows*cols");
  }

  static DenseMatrix identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  const Vec& entries() const { return data_; }

  DenseMatrix transpose() const;
  DenseMatrix operator*(const DenseMatrix& rhs) const;
  DenseMatrix operator+(const DenseMatrix& rhs) const;
  DenseMatrix operator-(const DenseMatrix& rhs) const;
  DenseMatrix scaled(double s) const;

  Vec matvec(std::span<const double> x) const;    // A x
  Vec matvec_t(std::span<const double> x) const;  // A^T x

  /// A A^T and A^T A as symmetric products.
  DenseMatrix aat() const;
  DenseMatrix ata() const;

  bool all_finite() const;
  double frobenius_norm() const;
  double max_abs() const;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  Vec data_;
};

// Small vector helpers shared across modules.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double max_abs_diff(std::span<const double> a, std::span<const double> b);
Vec sub(std::span<const double> a, std::span<const double> b);
Vec add(std::span<const double> a, std::span<const double> b);
Vec scaled(std::span<const double> a, double s);

}  // namespace spreaddiv
