#include "kernels.hpp"

#include <cstring>

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace dmfnet::detail {

#if defined(__AVX512F__)

// Hot tile: 8 rows of C by 48 columns, 24 zmm accumulators.
static inline void nn_tile_8x48(const float* A, int lda, const float* B, int ldb,
                                float* C, int ldc, int K, bool accumulate) {
    __m512 acc[8][3];
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 3; ++j) acc[i][j] = _mm512_setzero_ps();
    for (int k = 0; k < K; ++k) {
        const float* b = B + static_cast<size_t>(k) * ldb;
        __m512 b0 = _mm512_loadu_ps(b);
        __m512 b1 = _mm512_loadu_ps(b + 16);
        __m512 b2 = _mm512_loadu_ps(b + 32);
        for (int mr = 0; mr < 8; ++mr) {
            __m512 av = _mm512_set1_ps(A[static_cast<size_t>(mr) * lda + k]);
            acc[mr][0] = _mm512_fmadd_ps(av, b0, acc[mr][0]);
            acc[mr][1] = _mm512_fmadd_ps(av, b1, acc[mr][1]);
            acc[mr][2] = _mm512_fmadd_ps(av, b2, acc[mr][2]);
        }
    }
    for (int mr = 0; mr < 8; ++mr) {
        float* c = C + static_cast<size_t>(mr) * ldc;
        for (int j = 0; j < 3; ++j) {
            __m512 r = acc[mr][j];
            if (accumulate) r = _mm512_add_ps(r, _mm512_loadu_ps(c + 16 * j));
            _mm512_storeu_ps(c + 16 * j, r);
        }
    }
}

// Edge tile: up to 8 rows by up to 48 columns, trailing lanes masked.
static inline void nn_tile_edge(const float* A, int lda, const float* B, int ldb,
                                float* C, int ldc, int mrem, int K, int nrem,
                                bool accumulate) {
    int nvec = (nrem + 15) / 16;
    __mmask16 tail = static_cast<__mmask16>((1u << (nrem - (nvec - 1) * 16)) - 1u);
    __m512 acc[8][3];
    for (int i = 0; i < mrem; ++i)
        for (int j = 0; j < nvec; ++j) acc[i][j] = _mm512_setzero_ps();
    for (int k = 0; k < K; ++k) {
        const float* b = B + static_cast<size_t>(k) * ldb;
        __m512 bv[3];
        for (int j = 0; j < nvec; ++j) {
            __mmask16 m = (j == nvec - 1) ? tail : static_cast<__mmask16>(0xffff);
            bv[j] = _mm512_maskz_loadu_ps(m, b + 16 * j);
        }
        for (int mr = 0; mr < mrem; ++mr) {
            __m512 av = _mm512_set1_ps(A[static_cast<size_t>(mr) * lda + k]);
            for (int j = 0; j < nvec; ++j) acc[mr][j] = _mm512_fmadd_ps(av, bv[j], acc[mr][j]);
        }
    }
    for (int mr = 0; mr < mrem; ++mr) {
        float* c = C + static_cast<size_t>(mr) * ldc;
        for (int j = 0; j < nvec; ++j) {
            __mmask16 m = (j == nvec - 1) ? tail : static_cast<__mmask16>(0xffff);
            __m512 r = acc[mr][j];
            if (accumulate) r = _mm512_add_ps(r, _mm512_maskz_loadu_ps(m, c + 16 * j));
            _mm512_mask_storeu_ps(c + 16 * j, m, r);
        }
    }
}

void gemm_nn(const float* A, int lda, const float* B, int ldb, float* C, int ldc,
             int M, int K, int N, bool accumulate) {
    int m0 = 0;
    for (; m0 + 8 <= M; m0 += 8) {
        int n0 = 0;
        for (; n0 + 48 <= N; n0 += 48)
            nn_tile_8x48(A + static_cast<size_t>(m0) * lda, lda, B + n0, ldb,
                         C + static_cast<size_t>(m0) * ldc + n0, ldc, K, accumulate);
        if (n0 < N)
            nn_tile_edge(A + static_cast<size_t>(m0) * lda, lda, B + n0, ldb,
                         C + static_cast<size_t>(m0) * ldc + n0, ldc, 8, K, N - n0, accumulate);
    }
    if (m0 < M) {
        for (int n0 = 0; n0 < N; n0 += 48) {
            int nrem = N - n0 < 48 ? N - n0 : 48;
            nn_tile_edge(A + static_cast<size_t>(m0) * lda, lda, B + n0, ldb,
                         C + static_cast<size_t>(m0) * ldc + n0, ldc, M - m0, K, nrem, accumulate);
        }
    }
}

// Dot tile for C[m][k] = sum_n A[m][n]*B[k][n]: 4x2 vector accumulators over n.
static inline void abt_tile(const float* A, int lda, const float* B, int ldb, float* C,
                            int ldc, int mrem, int N, int krem, bool accumulate) {
    __m512 acc[4][2];
    for (int i = 0; i < mrem; ++i)
        for (int j = 0; j < krem; ++j) acc[i][j] = _mm512_setzero_ps();
    int n = 0;
    for (; n + 16 <= N; n += 16) {
        __m512 av[4], bv[2];
        for (int i = 0; i < mrem; ++i) av[i] = _mm512_loadu_ps(A + static_cast<size_t>(i) * lda + n);
        for (int j = 0; j < krem; ++j) bv[j] = _mm512_loadu_ps(B + static_cast<size_t>(j) * ldb + n);
        for (int i = 0; i < mrem; ++i)
            for (int j = 0; j < krem; ++j) acc[i][j] = _mm512_fmadd_ps(av[i], bv[j], acc[i][j]);
    }
    if (n < N) {
        __mmask16 m = static_cast<__mmask16>((1u << (N - n)) - 1u);
        __m512 av[4], bv[2];
        for (int i = 0; i < mrem; ++i)
            av[i] = _mm512_maskz_loadu_ps(m, A + static_cast<size_t>(i) * lda + n);
        for (int j = 0; j < krem; ++j)
            bv[j] = _mm512_maskz_loadu_ps(m, B + static_cast<size_t>(j) * ldb + n);
        for (int i = 0; i < mrem; ++i)
            for (int j = 0; j < krem; ++j) acc[i][j] = _mm512_fmadd_ps(av[i], bv[j], acc[i][j]);
    }
    for (int i = 0; i < mrem; ++i)
        for (int j = 0; j < krem; ++j) {
            float r = _mm512_reduce_add_ps(acc[i][j]);
            float* c = C + static_cast<size_t>(i) * ldc + j;
            *c = accumulate ? *c + r : r;
        }
}

void gemm_abt(const float* A, int lda, const float* B, int ldb, float* C, int ldc,
              int M, int N, int K, bool accumulate) {
    for (int m0 = 0; m0 < M; m0 += 4) {
        int mrem = M - m0 < 4 ? M - m0 : 4;
        for (int k0 = 0; k0 < K; k0 += 2) {
            int krem = K - k0 < 2 ? K - k0 : 2;
            abt_tile(A + static_cast<size_t>(m0) * lda, lda, B + static_cast<size_t>(k0) * ldb,
                     ldb, C + static_cast<size_t>(m0) * ldc + k0, ldc, mrem, N, krem, accumulate);
        }
    }
}

#else  // portable fallback, written so the compiler can vectorize the n loops

template <int MR, int NR>
static void nn_tile_generic(const float* A, int lda, const float* B, int ldb, float* C,
                            int ldc, int K, bool accumulate) {
    float acc[MR][NR] = {};
    for (int k = 0; k < K; ++k) {
        const float* b = B + static_cast<size_t>(k) * ldb;
        for (int mr = 0; mr < MR; ++mr) {
            float a = A[static_cast<size_t>(mr) * lda + k];
            for (int nr = 0; nr < NR; ++nr) acc[mr][nr] += a * b[nr];
        }
    }
    for (int mr = 0; mr < MR; ++mr) {
        float* c = C + static_cast<size_t>(mr) * ldc;
        for (int nr = 0; nr < NR; ++nr) c[nr] = accumulate ? c[nr] + acc[mr][nr] : acc[mr][nr];
    }
}

void gemm_nn(const float* A, int lda, const float* B, int ldb, float* C, int ldc,
             int M, int K, int N, bool accumulate) {
    constexpr int MR = 6, NR = 48;
    int m0 = 0;
    for (; m0 + MR <= M; m0 += MR) {
        int n0 = 0;
        for (; n0 + NR <= N; n0 += NR)
            nn_tile_generic<MR, NR>(A + static_cast<size_t>(m0) * lda, lda, B + n0, ldb,
                                    C + static_cast<size_t>(m0) * ldc + n0, ldc, K, accumulate);
        for (; n0 < N; ++n0) {
            for (int mr = 0; mr < MR; ++mr) {
                float s = 0.0f;
                for (int k = 0; k < K; ++k)
                    s += A[static_cast<size_t>(m0 + mr) * lda + k] * B[static_cast<size_t>(k) * ldb + n0];
                float* c = C + static_cast<size_t>(m0 + mr) * ldc + n0;
                *c = accumulate ? *c + s : s;
            }
        }
    }
    for (; m0 < M; ++m0) {
        for (int n0 = 0; n0 < N; ++n0) {
            float s = 0.0f;
            for (int k = 0; k < K; ++k)
                s += A[static_cast<size_t>(m0) * lda + k] * B[static_cast<size_t>(k) * ldb + n0];
            float* c = C + static_cast<size_t>(m0) * ldc + n0;
            *c = accumulate ? *c + s : s;
        }
    }
}

void gemm_abt(const float* A, int lda, const float* B, int ldb, float* C, int ldc,
              int M, int N, int K, bool accumulate) {
    for (int m = 0; m < M; ++m) {
        for (int k = 0; k < K; ++k) {
            const float* a = A + static_cast<size_t>(m) * lda;
            const float* b = B + static_cast<size_t>(k) * ldb;
            float lanes[8] = {};
            int n = 0;
            for (; n + 8 <= N; n += 8)
                for (int j = 0; j < 8; ++j) lanes[j] += a[n + j] * b[n + j];
            float s = 0.0f;
            for (int j = 0; j < 8; ++j) s += lanes[j];
            for (; n < N; ++n) s += a[n] * b[n];
            float* c = C + static_cast<size_t>(m) * ldc + k;
            *c = accumulate ? *c + s : s;
        }
    }
}

#endif

}  // namespace dmfnet::detail
