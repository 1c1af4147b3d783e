#pragma once

// Data-parallel inner loops used by the posterior grid recursion, the
// Sherman-Morrison updates of the linear baselines, and Gram assembly.
//
// Every kernel has a scalar reference implementation. On x86-64 an AVX2+FMA
// variant is compiled into a separate translation unit and chosen at runtime
// when the CPU supports it. Setting LKB_SIMD=scalar in the environment forces
// the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace lkb::simd {

enum class Isa { scalar, avx2 };

struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // Column-major a(rows x cols, leading dim ld): a(i,j) -= scale * u[i] * v[j]
  void (*rank_one_update)(double* a, std::size_t rows, std::size_t cols,
                          std::size_t ld, const double* u, const double* v,
                          double scale);
};

const KernelTable& scalar_table();

/// nullptr when the AVX2 unit was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

/// The table used by the library. Resolved once; see `force_isa`.
const KernelTable& active();

/// Test hook: pin the active table. Throws ParameterError if unavailable.
void force_isa(Isa isa);

std::string_view isa_name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a,
                               std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace lkb::simd
