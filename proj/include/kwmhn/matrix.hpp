#pragma once

#include <cstddef>
#include <vector>

namespace kwmhn {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), d_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return d_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return d_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return d_[i * cols_ + j]; }
  double* row(std::size_t i) { return d_.data() + i * cols_; }
  const double* row(std::size_t i) const { return d_.data() + i * cols_; }
  std::vector<double>& data() { return d_; }
  const std::vector<double>& data() const { return d_; }

  std::vector<double> col(std::size_t j) const;
  void set_col(std::size_t j, const std::vector<double>& v);
  void fill(double v);

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> d_;
};

/// A x.
std::vector<double> matvec(const Matrix& a, const std::vector<double>& x);
/// A^T x.
std::vector<double> matvec_t(const Matrix& a, const std::vector<double>& x);
/// A^T B.
Matrix gram(const Matrix& a, const Matrix& b);
/// A += alpha u v^T.
void add_outer(Matrix& a, double alpha, const std::vector<double>& u, const std::vector<double>& v);
/// A += alpha B.
void add_scaled(Matrix& a, double alpha, const Matrix& b);
double dot(const std::vector<double>& a, const std::vector<double>& b);
double frobenius(const Matrix& a);

}  // namespace kwmhn
