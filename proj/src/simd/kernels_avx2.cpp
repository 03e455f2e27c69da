#include <immintrin.h>

#include "kernel_impl.hpp"
#include "selfen/simd/kernels.hpp"

namespace selfen::simd {
namespace {

struct Avx2 {
    using Reg = __m256;
    static constexpr std::size_t kWidth = 8;
    static Reg load(const float* p) { return _mm256_loadu_ps(p); }
    static void store(float* p, Reg v) { _mm256_storeu_ps(p, v); }
    static Reg set1(float x) { return _mm256_set1_ps(x); }
    static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_ps(a, b, c); }
    static Reg add(Reg a, Reg b) { return _mm256_add_ps(a, b); }
    static Reg mul(Reg a, Reg b) { return _mm256_mul_ps(a, b); }
    // max_ps returns the second operand for NaN and signed-zero ties,
    // matching the scalar `x > 0 ? x : 0`.
    static Reg relu(Reg x) { return _mm256_max_ps(x, _mm256_setzero_ps()); }
    static Reg add_where_positive(Reg x, Reg gy, Reg gx) {
        const Reg mask = _mm256_cmp_ps(x, _mm256_setzero_ps(), _CMP_GT_OQ);
        return _mm256_add_ps(gx, _mm256_and_ps(mask, gy));
    }
};

// 6x16 register tile: 12 accumulators + 2 B vectors + 1 broadcast.
using GemmAvx2 = Gemm<Avx2, 6, 2>;

void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
              const float* b, std::size_t ldb, float* c, std::size_t ldc) {
    GemmAvx2::run(m, n, k, a, lda, b, ldb, c, ldc);
}

void gemm_rows_acc(std::size_t m, std::size_t n, std::size_t k, const float* const* a, const float* const* b,
                   float* c, std::size_t ldc) {
    GemmAvx2::run_rows(m, n, k, a, b, c, ldc);
}

}  // namespace

namespace detail {
const KernelTable& avx2_table() {
    static const KernelTable table{Level::kAvx2,         "avx2",          &gemm_acc, &gemm_rows_acc,
                                   &add_impl<Avx2>,      &mul_impl<Avx2>, &axpy_impl<Avx2>,
                                   &relu_impl<Avx2>,     &relu_backward_impl<Avx2>};
    return table;
}
}  // namespace detail

}  // namespace selfen::simd
