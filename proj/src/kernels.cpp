#include "symcor/kernels.hpp"

#include <cstdint>

namespace symcor::kernels {

namespace {

inline double cell(const double* a, const double* b, size_t i, size_t j, size_t k, size_t m,
                   size_t n, bool trans_a, bool trans_b) {
  double acc = 0.0;
  for (size_t l = 0; l < k; ++l) {
    const double av = trans_a ? a[l * m + i] : a[i * k + l];
    const double bv = trans_b ? b[j * k + l] : b[l * n + j];
    acc += av * bv;
  }
  return acc;
}

}  // namespace

void gemm_serial(const double* a, const double* b, double* c, size_t m, size_t k, size_t n,
                 bool trans_a, bool trans_b) {
  for (size_t i = 0; i < m; ++i)
    for (size_t j = 0; j < n; ++j) c[i * n + j] = cell(a, b, i, j, k, m, n, trans_a, trans_b);
}

void gemm_parallel(const double* a, const double* b, double* c, size_t m, size_t k, size_t n,
                   bool trans_a, bool trans_b) {
  const int64_t mm = static_cast<int64_t>(m);
  const int64_t nn = static_cast<int64_t>(n);
#pragma omp parallel for collapse(2) schedule(static)
  for (int64_t i = 0; i < mm; ++i)
    for (int64_t j = 0; j < nn; ++j)
      c[i * n + j] = cell(a, b, static_cast<size_t>(i), static_cast<size_t>(j), k, m, n, trans_a,
                          trans_b);
}

void gemm(const double* a, const double* b, double* c, size_t m, size_t k, size_t n, bool trans_a,
          bool trans_b) {
  if (m * n * k < 4096) {
    gemm_serial(a, b, c, m, k, n, trans_a, trans_b);
  } else {
    gemm_parallel(a, b, c, m, k, n, trans_a, trans_b);
  }
}

}  // namespace symcor::kernels
