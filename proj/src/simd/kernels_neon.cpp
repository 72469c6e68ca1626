#include "kwmhn/simd/kernels.hpp"

#include <arm_neon.h>

namespace kwmhn::simd {
namespace {

void accumulate_rows_neon(float* out, const float* base, std::size_t stride,
                          const std::uint32_t* rows, const float* coeffs,
                          std::size_t nrows, std::size_t width) {
  std::size_t i = 0;
  for (; i + 16 <= width; i += 16) {
    float32x4_t a0 = vld1q_f32(out + i);
    float32x4_t a1 = vld1q_f32(out + i + 4);
    float32x4_t a2 = vld1q_f32(out + i + 8);
    float32x4_t a3 = vld1q_f32(out + i + 12);
    for (std::size_t r = 0; r < nrows; ++r) {
      const float* row = base + static_cast<std::size_t>(rows[r]) * stride + i;
      float32x4_t x0 = vld1q_f32(row);
      float32x4_t x1 = vld1q_f32(row + 4);
      float32x4_t x2 = vld1q_f32(row + 8);
      float32x4_t x3 = vld1q_f32(row + 12);
      if (coeffs != nullptr) {
        const float32x4_t c = vdupq_n_f32(coeffs[r]);
        x0 = vmulq_f32(c, x0);
        x1 = vmulq_f32(c, x1);
        x2 = vmulq_f32(c, x2);
        x3 = vmulq_f32(c, x3);
      }
      a0 = vaddq_f32(a0, x0);
      a1 = vaddq_f32(a1, x1);
      a2 = vaddq_f32(a2, x2);
      a3 = vaddq_f32(a3, x3);
    }
    vst1q_f32(out + i, a0);
    vst1q_f32(out + i + 4, a1);
    vst1q_f32(out + i + 8, a2);
    vst1q_f32(out + i + 12, a3);
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

void masked_lerp_neon(float* w, const float* target, const float* mask,
                      float rate, std::size_t n) {
  const float32x4_t vr = vdupq_n_f32(rate);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float32x4_t wi = vld1q_f32(w + i);
    float32x4_t d = vsubq_f32(vld1q_f32(target + i), wi);
    d = vmulq_f32(vr, d);
    d = vmulq_f32(d, vld1q_f32(mask + i));
    vst1q_f32(w + i, vaddq_f32(wi, d));
  }
  for (; i < n; ++i) {
    const float step = (rate * (target[i] - w[i])) * mask[i];
    w[i] += step;
  }
}

std::uint64_t and_popcount_neon(const std::uint64_t* a, const std::uint64_t* b,
                                std::size_t words) {
  uint64x2_t acc = vdupq_n_u64(0);
  std::size_t i = 0;
  for (; i + 2 <= words; i += 2) {
    const uint8x16_t v = vreinterpretq_u8_u64(vandq_u64(vld1q_u64(a + i), vld1q_u64(b + i)));
    acc = vaddq_u64(acc, vpaddlq_u32(vpaddlq_u16(vpaddlq_u8(vcntq_u8(v)))));
  }
  std::uint64_t total = vgetq_lane_u64(acc, 0) + vgetq_lane_u64(acc, 1);
  for (; i < words; ++i) total += static_cast<std::uint64_t>(__builtin_popcountll(a[i] & b[i]));
  return total;
}

double dot_neon(const double* a, const double* b, std::size_t n) {
  // Two 2-lane registers reproduce the four-lane reference order.
  float64x2_t lo = vdupq_n_f64(0.0);
  float64x2_t hi = vdupq_n_f64(0.0);
  const std::size_t blocked = n & ~std::size_t{3};
  for (std::size_t i = 0; i < blocked; i += 4) {
    lo = vaddq_f64(lo, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    hi = vaddq_f64(hi, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  double sum = (vgetq_lane_f64(lo, 0) + vgetq_lane_f64(lo, 1)) +
               (vgetq_lane_f64(hi, 0) + vgetq_lane_f64(hi, 1));
  for (std::size_t i = blocked; i < n; ++i) sum += a[i] * b[i];
  return sum;
}

void axpy_neon(double* y, double alpha, const double* x, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

constexpr KernelTable kNeon{
    Isa::Neon,       accumulate_rows_neon, masked_lerp_neon,
    and_popcount_neon, dot_neon,           axpy_neon,
};

}  // namespace

namespace detail {
const KernelTable* neon_table() { return &kNeon; }
}  // namespace detail

}  // namespace kwmhn::simd
