#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dqjl {

// Dense row-major matrix of doubles. The numeric core treats any NaN/Inf as a
// hard failure; check_finite() is called at operation boundaries.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), d_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return d_.size(); }
  bool empty() const { return d_.empty(); }

  double* data() { return d_.data(); }
  const double* data() const { return d_.data(); }
  std::span<double> flat() { return d_; }
  std::span<const double> flat() const { return d_; }

  double& operator()(std::size_t r, std::size_t c) { return d_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return d_[r * cols_ + c]; }
  double& operator[](std::size_t i) { return d_[i]; }
  double operator[](std::size_t i) const { return d_[i]; }

  void fill(double value) { d_.assign(d_.size(), value); }
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;
  // Throws contract_error naming `what` if any entry is NaN/Inf.
  void check_finite(const char* what) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> d_;
};

// c = a·b (+c if accumulate). a: m×k, b: k×n, c: m×n.
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
// c = a·bᵀ (+c if accumulate). a: m×k, b: n×k, c: m×n.
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
// c = aᵀ·b (+c if accumulate). a: k×m, b: k×n, c: m×n.
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);

}  // namespace dqjl
