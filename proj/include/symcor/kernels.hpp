#pragma once

#include <cstddef>

namespace symcor::kernels {

// C (m×n) = op(A)·op(B) with optional logical transposition; all matrices
// row-major in their physical layout (A is k×m physical when trans_a, etc.).
// C is overwritten.
//
// The parallel kernel distributes whole C elements across threads and each
// element is accumulated serially in the same k-order as the serial kernel,
// so results are bit-identical for any thread count.
void gemm_serial(const double* a, const double* b, double* c, size_t m, size_t k, size_t n,
                 bool trans_a = false, bool trans_b = false);
void gemm_parallel(const double* a, const double* b, double* c, size_t m, size_t k, size_t n,
                   bool trans_a = false, bool trans_b = false);

// Dispatch used by the network: parallel unless the product is tiny.
void gemm(const double* a, const double* b, double* c, size_t m, size_t k, size_t n,
          bool trans_a = false, bool trans_b = false);

}  // namespace symcor::kernels
