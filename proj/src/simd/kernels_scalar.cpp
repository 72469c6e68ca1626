#include "kwmhn/simd/kernels.hpp"

#include <bit>

namespace kwmhn::simd {
namespace {

void accumulate_rows_scalar(float* out, const float* base, std::size_t stride,
                            const std::uint32_t* rows, const float* coeffs,
                            std::size_t nrows, std::size_t width) {
  for (std::size_t r = 0; r < nrows; ++r) {
    const float* row = base + static_cast<std::size_t>(rows[r]) * stride;
    if (coeffs == nullptr) {
      for (std::size_t i = 0; i < width; ++i) out[i] += row[i];
    } else {
      const float c = coeffs[r];
      for (std::size_t i = 0; i < width; ++i) out[i] += c * row[i];
    }
  }
}

void masked_lerp_scalar(float* w, const float* target, const float* mask,
                        float rate, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float step = (rate * (target[i] - w[i])) * mask[i];
    w[i] += step;
  }
}

std::uint64_t and_popcount_scalar(const std::uint64_t* a, const std::uint64_t* b,
                                  std::size_t words) {
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < words; ++i) total += std::popcount(a[i] & b[i]);
  return total;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t blocked = n & ~std::size_t{3};
  for (std::size_t i = 0; i < blocked; i += 4) {
    lane[0] += a[i] * b[i];
    lane[1] += a[i + 1] * b[i + 1];
    lane[2] += a[i + 2] * b[i + 2];
    lane[3] += a[i + 3] * b[i + 3];
  }
  double sum = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (std::size_t i = blocked; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_scalar(double* y, double alpha, const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

constexpr KernelTable kScalar{
    Isa::Scalar,      accumulate_rows_scalar, masked_lerp_scalar,
    and_popcount_scalar, dot_scalar,          axpy_scalar,
};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

}  // namespace kwmhn::simd
