#include "kwmhn/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kwmhn/simd/kernels.hpp"

namespace kwmhn {

std::vector<double> Matrix::col(std::size_t j) const {
  std::vector<double> v(rows_);
  for (std::size_t i = 0; i < rows_; ++i) v[i] = d_[i * cols_ + j];
  return v;
}

void Matrix::set_col(std::size_t j, const std::vector<double>& v) {
  if (v.size() != rows_) throw std::invalid_argument("set_col: length mismatch");
  for (std::size_t i = 0; i < rows_; ++i) d_[i * cols_ + j] = v[i];
}

void Matrix::fill(double v) { std::fill(d_.begin(), d_.end(), v); }

std::vector<double> matvec(const Matrix& a, const std::vector<double>& x) {
  if (x.size() != a.cols()) throw std::invalid_argument("matvec: shape mismatch");
  const auto& k = simd::active();
  std::vector<double> y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = k.dot(a.row(i), x.data(), a.cols());
  return y;
}

std::vector<double> matvec_t(const Matrix& a, const std::vector<double>& x) {
  if (x.size() != a.rows()) throw std::invalid_argument("matvec_t: shape mismatch");
  const auto& k = simd::active();
  std::vector<double> y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) k.axpy(y.data(), x[i], a.row(i), a.cols());
  return y;
}

Matrix gram(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("gram: shape mismatch");
  Matrix g(a.cols(), b.cols());
  const auto& k = simd::active();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t i = 0; i < a.cols(); ++i) k.axpy(g.row(i), a(r, i), b.row(r), b.cols());
  }
  return g;
}

void add_outer(Matrix& a, double alpha, const std::vector<double>& u, const std::vector<double>& v) {
  if (u.size() != a.rows() || v.size() != a.cols()) {
    throw std::invalid_argument("add_outer: shape mismatch");
  }
  const auto& k = simd::active();
  for (std::size_t i = 0; i < a.rows(); ++i) k.axpy(a.row(i), alpha * u[i], v.data(), a.cols());
}

void add_scaled(Matrix& a, double alpha, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument("add_scaled: shape mismatch");
  }
  simd::active().axpy(a.data().data(), alpha, b.data().data(), a.data().size());
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  return simd::active().dot(a.data(), b.data(), a.size());
}

double frobenius(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

}  // namespace kwmhn
