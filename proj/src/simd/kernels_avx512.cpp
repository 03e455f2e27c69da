#include <immintrin.h>

#include "kernel_impl.hpp"
#include "selfen/simd/kernels.hpp"

namespace selfen::simd {
namespace {

struct Avx512 {
    using Reg = __m512;
    static constexpr std::size_t kWidth = 16;
    static Reg load(const float* p) { return _mm512_loadu_ps(p); }
    static void store(float* p, Reg v) { _mm512_storeu_ps(p, v); }
    static Reg set1(float x) { return _mm512_set1_ps(x); }
    static Reg fmadd(Reg a, Reg b, Reg c) { return _mm512_fmadd_ps(a, b, c); }
    static Reg add(Reg a, Reg b) { return _mm512_add_ps(a, b); }
    static Reg mul(Reg a, Reg b) { return _mm512_mul_ps(a, b); }
    static Reg relu(Reg x) { return _mm512_max_ps(x, _mm512_setzero_ps()); }
    static Reg add_where_positive(Reg x, Reg gy, Reg gx) {
        const __mmask16 mask = _mm512_cmp_ps_mask(x, _mm512_setzero_ps(), _CMP_GT_OQ);
        return _mm512_mask_add_ps(gx, mask, gx, gy);
    }
};

// 8x32 register tile: 16 accumulators out of 32 zmm registers.
using GemmAvx512 = Gemm<Avx512, 8, 2>;

void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
              const float* b, std::size_t ldb, float* c, std::size_t ldc) {
    GemmAvx512::run(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_rows_acc(std::size_t m, std::size_t n, std::size_t k, const float* const* a, const float* const* b,
                   float* c, std::size_t ldc) {
    GemmAvx512::run_rows(m, n, k, a, b, c, ldc);
}

}  // namespace

namespace detail {
const KernelTable& avx512_table() {
    static const KernelTable table{Level::kAvx512,       "avx512",          &gemm_acc, &gemm_rows_acc,
                                   &add_impl<Avx512>,    &mul_impl<Avx512>, &axpy_impl<Avx512>,
                                   &relu_impl<Avx512>,   &relu_backward_impl<Avx512>};
    return table;
}
}  // namespace detail

}  // namespace selfen::simd
