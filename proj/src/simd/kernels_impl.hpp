#pragma once

#include "lkb/simd.hpp"

namespace lkb::simd::detail {

double dot_scalar(const double* a, const double* b, std::size_t n);
double squared_distance_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
void rank_one_update_scalar(double* a, std::size_t rows, std::size_t cols,
                            std::size_t ld, const double* u, const double* v,
                            double scale);

#if defined(LKB_HAVE_AVX2_TU)
double dot_avx2(const double* a, const double* b, std::size_t n);
double squared_distance_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
void rank_one_update_avx2(double* a, std::size_t rows, std::size_t cols,
                          std::size_t ld, const double* u, const double* v,
                          double scale);
#endif

}  // namespace lkb::simd::detail
