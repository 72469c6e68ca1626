#include <atomic>
#include <cstdlib>
#include <string>

#include "kwmhn/simd/kernels.hpp"

namespace kwmhn::simd {

#if !defined(KWMHN_HAVE_AVX2)
const KernelTable* detail::avx2_table() { return nullptr; }
#endif
#if !defined(KWMHN_HAVE_NEON)
const KernelTable* detail::neon_table() { return nullptr; }
#endif

namespace {

const KernelTable* supported(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return &scalar_table();
    case Isa::Avx2:
#if defined(KWMHN_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
      if (__builtin_cpu_supports("avx2")) return detail::avx2_table();
#endif
      return nullptr;
    case Isa::Neon:
      // Advanced SIMD is mandatory on AArch64.
      return detail::neon_table();
  }
  return nullptr;
}

const KernelTable* initial() {
  if (const char* env = std::getenv("KWMHN_SIMD")) {
    const std::string v(env);
    Isa want = Isa::Scalar;
    if (v == "avx2") want = Isa::Avx2;
    else if (v == "neon") want = Isa::Neon;
    if (const KernelTable* t = supported(want)) return t;
    return &scalar_table();
  }
  if (const KernelTable* t = supported(Isa::Avx2)) return t;
  if (const KernelTable* t = supported(Isa::Neon)) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> s{initial()};
  return s;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    case Isa::Neon: return "neon";
  }
  return "unknown";
}

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

std::vector<const KernelTable*> available_tables() {
  std::vector<const KernelTable*> out{&scalar_table()};
  for (Isa isa : {Isa::Avx2, Isa::Neon}) {
    if (const KernelTable* t = supported(isa)) out.push_back(t);
  }
  return out;
}

bool select(Isa isa) {
  const KernelTable* t = supported(isa);
  if (t == nullptr) return false;
  slot().store(t, std::memory_order_release);
  return true;
}

}  // namespace kwmhn::simd
