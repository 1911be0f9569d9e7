#pragma once

#include <cstdint>

namespace foldkit::nn {

// Small row-major GEMM kernels sized for this project's convolutions
// (M = channels <= ~128, K <= ~1200, N = spatial up to ~16k). Accumulation
// over k runs in a fixed order per output element, so results do not depend
// on how callers parallelize across output blocks. No fast-math is assumed;
// the inner loops are written so the vectorizer never has to reassociate a
// single dependency chain.

namespace detail {

// Register-tiled kernel for C[MR x NR] (+)= A[MR x K] * B[K x NR].
template <typename T, int MR, int NR>
inline void kernel_nn(int64_t K, const T* A, int64_t lda, const T* B, int64_t ldb,
                      T* C, int64_t ldc, bool accumulate) {
    T acc[MR][NR];
    for (int r = 0; r < MR; ++r)
        for (int j = 0; j < NR; ++j)
            acc[r][j] = accumulate ? C[r * ldc + j] : T(0);
    for (int64_t k = 0; k < K; ++k) {
        const T* brow = B + k * ldb;
        for (int r = 0; r < MR; ++r) {
            const T a = A[r * lda + k];
            for (int j = 0; j < NR; ++j) acc[r][j] += a * brow[j];
        }
    }
    for (int r = 0; r < MR; ++r)
        for (int j = 0; j < NR; ++j)
            C[r * ldc + j] = acc[r][j];
}

// Edge kernel: arbitrary tile size, same k ordering.
template <typename T>
inline void kernel_nn_edge(int64_t mr, int64_t nr, int64_t K, const T* A, int64_t lda,
                           const T* B, int64_t ldb, T* C, int64_t ldc, bool accumulate) {
    for (int64_t r = 0; r < mr; ++r) {
        for (int64_t j = 0; j < nr; ++j) {
            T sum = accumulate ? C[r * ldc + j] : T(0);
            for (int64_t k = 0; k < K; ++k) sum += A[r * lda + k] * B[k * ldb + j];
            C[r * ldc + j] = sum;
        }
    }
}

// Strided-lane dot product: lanes accumulate independent chains (which the
// vectorizer may map to SIMD lanes without reassociation), then fold in a
// fixed order.
template <typename T, int LANES>
inline T lane_dot(int64_t K, const T* a, const T* b) {
    T lanes[LANES] = {};
    int64_t k = 0;
    for (; k + LANES <= K; k += LANES)
        for (int j = 0; j < LANES; ++j) lanes[j] += a[k + j] * b[k + j];
    for (int j = 0; k + j < K; ++j) lanes[j] += a[k + j] * b[k + j];
    T sum = T(0);
    for (int j = 0; j < LANES; ++j) sum += lanes[j];
    return sum;
}

}  // namespace detail

// C[M x N] (+)= A[M x K] * B[K x N], all row-major.
template <typename T>
void gemm_nn(int64_t M, int64_t N, int64_t K, const T* A, int64_t lda, const T* B,
             int64_t ldb, T* C, int64_t ldc, bool accumulate = false) {
    constexpr int MR = 4;
    constexpr int NR = sizeof(T) == 4 ? 64 : 32;
    const int64_t n_full = (N / NR) * NR;
    const int64_t m_full = (M / MR) * MR;
    for (int64_t n0 = 0; n0 < n_full; n0 += NR) {
        for (int64_t m0 = 0; m0 < m_full; m0 += MR)
            detail::kernel_nn<T, MR, NR>(K, A + m0 * lda, lda, B + n0, ldb,
                                         C + m0 * ldc + n0, ldc, accumulate);
        if (m_full < M)
            detail::kernel_nn_edge(M - m_full, NR, K, A + m_full * lda, lda, B + n0,
                                   ldb, C + m_full * ldc + n0, ldc, accumulate);
    }
    if (n_full < N)
        detail::kernel_nn_edge(M, N - n_full, K, A, lda, B + n_full, ldb, C + n_full,
                               ldc, accumulate);
}

// C[M x N] (+)= A[M x K] * B^T where B is [N x K] row-major. Rows of both
// operands are contiguous, so this is a tiled batch of dot products.
template <typename T>
void gemm_nt(int64_t M, int64_t N, int64_t K, const T* A, int64_t lda, const T* B,
             int64_t ldb, T* C, int64_t ldc, bool accumulate = false) {
    constexpr int LANES = sizeof(T) == 4 ? 16 : 8;
    const int64_t m2 = (M / 2) * 2;
    const int64_t n2 = (N / 2) * 2;
    for (int64_t m = 0; m < m2; m += 2) {
        const T* a0 = A + m * lda;
        const T* a1 = a0 + lda;
        for (int64_t n = 0; n < n2; n += 2) {
            const T* b0 = B + n * ldb;
            const T* b1 = b0 + ldb;
            const T s00 = detail::lane_dot<T, LANES>(K, a0, b0);
            const T s01 = detail::lane_dot<T, LANES>(K, a0, b1);
            const T s10 = detail::lane_dot<T, LANES>(K, a1, b0);
            const T s11 = detail::lane_dot<T, LANES>(K, a1, b1);
            T* c0 = C + m * ldc + n;
            T* c1 = c0 + ldc;
            c0[0] = accumulate ? c0[0] + s00 : s00;
            c0[1] = accumulate ? c0[1] + s01 : s01;
            c1[0] = accumulate ? c1[0] + s10 : s10;
            c1[1] = accumulate ? c1[1] + s11 : s11;
        }
        for (int64_t n = n2; n < N; ++n) {
            const T* b0 = B + n * ldb;
            const T s0 = detail::lane_dot<T, LANES>(K, a0, b0);
            const T s1 = detail::lane_dot<T, LANES>(K, a1, b0);
            C[m * ldc + n] = accumulate ? C[m * ldc + n] + s0 : s0;
            C[(m + 1) * ldc + n] = accumulate ? C[(m + 1) * ldc + n] + s1 : s1;
        }
    }
    for (int64_t m = m2; m < M; ++m) {
        for (int64_t n = 0; n < N; ++n) {
            const T s = detail::lane_dot<T, LANES>(K, A + m * lda, B + n * ldb);
            C[m * ldc + n] = accumulate ? C[m * ldc + n] + s : s;
        }
    }
}

}  // namespace foldkit::nn
