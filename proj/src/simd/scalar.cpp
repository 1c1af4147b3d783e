#include "kernels_impl.hpp"

namespace lkb::simd::detail {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance_scalar(const double* a, const double* b,
                               std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void rank_one_update_scalar(double* a, std::size_t rows, std::size_t cols,
                            std::size_t ld, const double* u, const double* v,
                            double scale) {
  for (std::size_t j = 0; j < cols; ++j) {
    const double alpha = -scale * v[j];
    if (alpha == 0.0) continue;
    axpy_scalar(alpha, u, a + j * ld, rows);
  }
}

}  // namespace lkb::simd::detail
