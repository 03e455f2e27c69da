#pragma once

// Vector-width-generic kernel bodies. Included only by the per-ISA
// translation units, each of which supplies a vector traits type V and is
// compiled with the matching target flags. Everything here has internal
// linkage so the instantiations from different TUs never collide.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace selfen::simd {
namespace {

template <class V, std::size_t MR, std::size_t NV>
struct Gemm {
    static constexpr std::size_t kW = V::kWidth;
    static constexpr std::size_t kNR = kW * NV;
    static constexpr std::size_t kKC = 256;

    template <std::size_t R>
    static void micro(std::size_t kc, const float* const* a, std::size_t pc, const float* bp, float* c,
                      std::size_t ldc) {
        const float* arow[R];
        for (std::size_t r = 0; r < R; ++r) arow[r] = a[r] + pc;
        typename V::Reg acc[R][NV];
#pragma GCC unroll 16
        for (std::size_t r = 0; r < R; ++r)
#pragma GCC unroll 4
            for (std::size_t v = 0; v < NV; ++v) acc[r][v] = V::load(c + r * ldc + v * kW);

        for (std::size_t p = 0; p < kc; ++p) {
            typename V::Reg b[NV];
#pragma GCC unroll 4
            for (std::size_t v = 0; v < NV; ++v) b[v] = V::load(bp + p * kNR + v * kW);
#pragma GCC unroll 16
            for (std::size_t r = 0; r < R; ++r) {
                const typename V::Reg av = V::set1(arow[r][p]);
#pragma GCC unroll 4
                for (std::size_t v = 0; v < NV; ++v) acc[r][v] = V::fmadd(av, b[v], acc[r][v]);
            }
        }

#pragma GCC unroll 16
        for (std::size_t r = 0; r < R; ++r)
#pragma GCC unroll 4
            for (std::size_t v = 0; v < NV; ++v) V::store(c + r * ldc + v * kW, acc[r][v]);
    }

    template <std::size_t R>
    static void micro_rows(std::size_t rows, std::size_t kc, const float* const* a, std::size_t pc,
                           const float* bp, float* c, std::size_t ldc) {
        if constexpr (R == 0) {
            (void)rows, (void)kc, (void)a, (void)pc, (void)bp, (void)c, (void)ldc;
        } else {
            if (rows == R)
                micro<R>(kc, a, pc, bp, c, ldc);
            else
                micro_rows<R - 1>(rows, kc, a, pc, bp, c, ldc);
        }
    }

    static void run_rows(std::size_t m, std::size_t n, std::size_t k, const float* const* a,
                         const float* const* b, float* c, std::size_t ldc) {
        thread_local std::vector<float> pack;
        pack.resize(kKC * kNR);

        std::size_t jc = 0;
        for (; jc + kNR <= n; jc += kNR) {
            for (std::size_t pc = 0; pc < k; pc += kKC) {
                const std::size_t kc = std::min(kKC, k - pc);
                for (std::size_t p = 0; p < kc; ++p) {
                    const float* src = b[pc + p] + jc;
                    std::copy(src, src + kNR, pack.data() + p * kNR);
                }
                for (std::size_t ic = 0; ic < m; ic += MR) {
                    const std::size_t mr = std::min(MR, m - ic);
                    micro_rows<MR>(mr, kc, a + ic, pc, pack.data(), c + ic * ldc + jc, ldc);
                }
            }
        }
        if (jc == n) return;
        // Column tail: same per-element reduction order as the reference.
        for (std::size_t i = 0; i < m; ++i) {
            float* crow = c + i * ldc;
            for (std::size_t p = 0; p < k; ++p) {
                const float av = a[i][p];
                const float* brow = b[p];
                for (std::size_t j = jc; j < n; ++j) crow[j] = std::fma(av, brow[j], crow[j]);
            }
        }
    }

    static void run(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                    const float* b, std::size_t ldb, float* c, std::size_t ldc) {
        thread_local std::vector<const float*> arows, brows;
        arows.resize(m);
        brows.resize(k);
        for (std::size_t i = 0; i < m; ++i) arows[i] = a + i * lda;
        for (std::size_t p = 0; p < k; ++p) brows[p] = b + p * ldb;
        run_rows(m, n, k, arows.data(), brows.data(), c, ldc);
    }
};

template <class V>
void add_impl(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + V::kWidth <= n; i += V::kWidth) V::store(out + i, V::add(V::load(a + i), V::load(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

template <class V>
void mul_impl(const float* a, const float* b, float* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + V::kWidth <= n; i += V::kWidth) V::store(out + i, V::mul(V::load(a + i), V::load(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

template <class V>
void axpy_impl(float alpha, const float* x, float* y, std::size_t n) {
    const auto va = V::set1(alpha);
    std::size_t i = 0;
    for (; i + V::kWidth <= n; i += V::kWidth) V::store(y + i, V::fmadd(va, V::load(x + i), V::load(y + i)));
    for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

template <class V>
void relu_impl(const float* x, float* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + V::kWidth <= n; i += V::kWidth) V::store(y + i, V::relu(V::load(x + i)));
    for (; i < n; ++i) y[i] = x[i] > 0.0f ? x[i] : 0.0f;
}

template <class V>
void relu_backward_impl(const float* x, const float* gy, float* gx, std::size_t n) {
    std::size_t i = 0;
    for (; i + V::kWidth <= n; i += V::kWidth)
        V::store(gx + i, V::add_where_positive(V::load(x + i), V::load(gy + i), V::load(gx + i)));
    for (; i < n; ++i)
        if (x[i] > 0.0f) gx[i] += gy[i];
}

}  // namespace
}  // namespace selfen::simd
