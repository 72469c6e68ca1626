#pragma once

// Inner-loop kernels for the memory networks and the attention models.
//
// Every kernel exists as a portable scalar reference and, where the target
// supports it, a SIMD variant (AVX2 on x86-64, NEON on AArch64). The variants
// are required to be bit-identical to the reference: element-wise kernels
// perform the same IEEE operations per lane, and reductions use a fixed
// lane-blocked summation order that the scalar reference reproduces exactly.
// This keeps experiment outputs independent of the host ISA.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace kwmhn::simd {

enum class Isa { Scalar, Avx2, Neon };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;

  // out[0..width) += sum_r coeffs[r] * base[rows[r] * stride + 0..width).
  // When coeffs is null every coefficient is taken to be exactly 1 and the
  // product is skipped. Rows are added in the order given.
  void (*accumulate_rows)(float* out, const float* base, std::size_t stride,
                          const std::uint32_t* rows, const float* coeffs,
                          std::size_t nrows, std::size_t width);

  // w[i] += ((rate * (target[i] - w[i])) * mask[i]) for i in [0, n).
  void (*masked_lerp)(float* w, const float* target, const float* mask,
                      float rate, std::size_t n);

  // popcount(a & b) over `words` 64-bit words.
  std::uint64_t (*and_popcount)(const std::uint64_t* a, const std::uint64_t* b,
                                std::size_t words);

  // Dot product with four interleaved partial sums: lane l accumulates
  // indices i with i % 4 == l over the largest multiple of four, the lanes
  // are combined as (l0 + l1) + (l2 + l3), then the tail is added in order.
  double (*dot)(const double* a, const double* b, std::size_t n);

  // y[i] += alpha * x[i].
  void (*axpy)(double* y, double alpha, const double* x, std::size_t n);
};

/// The kernel table chosen for this process. Selection happens once, on first
/// use: the best ISA the CPU supports, unless the environment variable
/// KWMHN_SIMD is set to "scalar", "avx2" or "neon".
const KernelTable& active();

const KernelTable& scalar_table();

/// Tables usable on this machine, scalar first.
std::vector<const KernelTable*> available_tables();

/// Overrides the active table (tests and the --isa CLI flag). Returns false if
/// the requested ISA is not compiled in or not supported by the CPU.
bool select(Isa isa);

namespace detail {
const KernelTable* avx2_table();
const KernelTable* neon_table();
}  // namespace detail

}  // namespace kwmhn::simd
