#pragma once

// Internal single-threaded GEMM kernels behind the conv/fc operators.
// Every output element is accumulated in a fixed k order, so results do not
// depend on how callers partition work across threads.

namespace dmfnet::detail {

// C[m][n] (+)= sum_k A[m][k] * B[k][n].  A: MxK (row stride lda), B: KxN (ldb),
// C: MxN (ldc).
void gemm_nn(const float* A, int lda, const float* B, int ldb, float* C, int ldc,
             int M, int K, int N, bool accumulate);

// C[m][k] (+)= sum_n A[m][n] * B[k][n].  A: MxN (lda), B: KxN (ldb), C: MxK (ldc).
// Both operands are walked along their contiguous n axis.
void gemm_abt(const float* A, int lda, const float* B, int ldb, float* C, int ldc,
              int M, int N, int K, bool accumulate);

}  // namespace dmfnet::detail
