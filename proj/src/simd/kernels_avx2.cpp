#include "kwmhn/simd/kernels.hpp"

#include <immintrin.h>

#include <bit>

namespace kwmhn::simd {
namespace {

void accumulate_rows_avx2(float* out, const float* base, std::size_t stride,
                          const std::uint32_t* rows, const float* coeffs,
                          std::size_t nrows, std::size_t width) {
  std::size_t i = 0;
  // 32-float blocks stay in registers while every row is folded in; each
  // element still receives its rows in the caller's order.
  for (; i + 32 <= width; i += 32) {
    __m256 a0 = _mm256_loadu_ps(out + i);
    __m256 a1 = _mm256_loadu_ps(out + i + 8);
    __m256 a2 = _mm256_loadu_ps(out + i + 16);
    __m256 a3 = _mm256_loadu_ps(out + i + 24);
    for (std::size_t r = 0; r < nrows; ++r) {
      const float* row = base + static_cast<std::size_t>(rows[r]) * stride + i;
      __m256 x0 = _mm256_loadu_ps(row);
      __m256 x1 = _mm256_loadu_ps(row + 8);
      __m256 x2 = _mm256_loadu_ps(row + 16);
      __m256 x3 = _mm256_loadu_ps(row + 24);
      if (coeffs != nullptr) {
        const __m256 c = _mm256_set1_ps(coeffs[r]);
        x0 = _mm256_mul_ps(c, x0);
        x1 = _mm256_mul_ps(c, x1);
        x2 = _mm256_mul_ps(c, x2);
        x3 = _mm256_mul_ps(c, x3);
      }
      a0 = _mm256_add_ps(a0, x0);
      a1 = _mm256_add_ps(a1, x1);
      a2 = _mm256_add_ps(a2, x2);
      a3 = _mm256_add_ps(a3, x3);
    }
    _mm256_storeu_ps(out + i, a0);
    _mm256_storeu_ps(out + i + 8, a1);
    _mm256_storeu_ps(out + i + 16, a2);
    _mm256_storeu_ps(out + i + 24, a3);
  }
  for (; i + 8 <= width; i += 8) {
    __m256 acc = _mm256_loadu_ps(out + i);
    for (std::size_t r = 0; r < nrows; ++r) {
      const float* row = base + static_cast<std::size_t>(rows[r]) * stride + i;
      __m256 x = _mm256_loadu_ps(row);
      if (coeffs != nullptr) x = _mm256_mul_ps(_mm256_set1_ps(coeffs[r]), x);
      acc = _mm256_add_ps(acc, x);
    }
    _mm256_storeu_ps(out + i, acc);
  }
  for (; i < width; ++i) {
    float acc = out[i];
    for (std::size_t r = 0; r < nrows; ++r) {
      const float x = base[static_cast<std::size_t>(rows[r]) * stride + i];
      acc += coeffs != nullptr ? coeffs[r] * x : x;
    }
    out[i] = acc;
  }
}

void masked_lerp_avx2(float* w, const float* target, const float* mask,
                      float rate, std::size_t n) {
  const __m256 vr = _mm256_set1_ps(rate);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 wi = _mm256_loadu_ps(w + i);
    __m256 d = _mm256_sub_ps(_mm256_loadu_ps(target + i), wi);
    d = _mm256_mul_ps(vr, d);
    d = _mm256_mul_ps(d, _mm256_loadu_ps(mask + i));
    _mm256_storeu_ps(w + i, _mm256_add_ps(wi, d));
  }
  for (; i < n; ++i) {
    const float step = (rate * (target[i] - w[i])) * mask[i];
    w[i] += step;
  }
}

// Nibble-lookup popcount (Mula, Kurz, Lemire).
std::uint64_t and_popcount_avx2(const std::uint64_t* a, const std::uint64_t* b,
                                std::size_t words) {
  const __m256i lookup = _mm256_setr_epi8(
      0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4,
      0, 1, 1, 2, 1, 2, 2, 3, 1, 2, 2, 3, 2, 3, 3, 4);
  const __m256i low_mask = _mm256_set1_epi8(0x0f);
  __m256i acc = _mm256_setzero_si256();
  std::size_t i = 0;
  for (; i + 4 <= words; i += 4) {
    const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
    const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
    const __m256i v = _mm256_and_si256(va, vb);
    const __m256i lo = _mm256_and_si256(v, low_mask);
    const __m256i hi = _mm256_and_si256(_mm256_srli_epi16(v, 4), low_mask);
    const __m256i cnt = _mm256_add_epi8(_mm256_shuffle_epi8(lookup, lo),
                                        _mm256_shuffle_epi8(lookup, hi));
    acc = _mm256_add_epi64(acc, _mm256_sad_epu8(cnt, _mm256_setzero_si256()));
  }
  alignas(32) std::uint64_t lanes[4];
  _mm256_store_si256(reinterpret_cast<__m256i*>(lanes), acc);
  std::uint64_t total = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; i < words; ++i) total += std::popcount(a[i] & b[i]);
  return total;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t blocked = n & ~std::size_t{3};
  for (std::size_t i = 0; i < blocked; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  double sum = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (std::size_t i = blocked; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_avx2(double* y, double alpha, const double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d p = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), p));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

constexpr KernelTable kAvx2{
    Isa::Avx2,       accumulate_rows_avx2, masked_lerp_avx2,
    and_popcount_avx2, dot_avx2,           axpy_avx2,
};

}  // namespace

namespace detail {
const KernelTable* avx2_table() { return &kAvx2; }
}  // namespace detail

}  // namespace kwmhn::simd
