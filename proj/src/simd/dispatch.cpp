#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"
#include "lkb/error.hpp"

namespace lkb::simd {

namespace {

constexpr KernelTable kScalar{Isa::scalar, detail::dot_scalar,
                              detail::squared_distance_scalar,
                              detail::axpy_scalar,
                              detail::rank_one_update_scalar};

#if defined(LKB_HAVE_AVX2_TU)
constexpr KernelTable kAvx2{Isa::avx2, detail::dot_avx2,
                            detail::squared_distance_avx2, detail::axpy_avx2,
                            detail::rank_one_update_avx2};

bool cpu_has_avx2() {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const KernelTable* resolve() {
  if (const char* env = std::getenv("LKB_SIMD")) {
    if (std::string(env) == "scalar") return &kScalar;
  }
  if (const KernelTable* t = avx2_table()) return t;
  return &kScalar;
}

std::atomic<const KernelTable*> g_active{nullptr};

}  // namespace

const KernelTable& scalar_table() { return kScalar; }

const KernelTable* avx2_table() {
#if defined(LKB_HAVE_AVX2_TU)
  static const bool ok = cpu_has_avx2();
  return ok ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (t == nullptr) {
    t = resolve();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

void force_isa(Isa isa) {
  if (isa == Isa::scalar) {
    g_active.store(&kScalar, std::memory_order_release);
    return;
  }
  const KernelTable* t = avx2_table();
  if (t == nullptr) throw ParameterError("AVX2 kernels are not available");
  g_active.store(t, std::memory_order_release);
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace lkb::simd
