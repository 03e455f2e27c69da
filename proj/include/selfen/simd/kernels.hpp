#pragma once

// Float32 inner-loop kernels with runtime ISA dispatch.
//
// Every variant performs the same sequence of IEEE operations per output
// element (fused multiply-add in ascending reduction order), so the scalar,
// AVX2 and AVX-512 tables are bit-identical. Tests rely on this.

#include <cstddef>
#include <string_view>

namespace selfen::simd {

enum class Level { kScalar, kAvx2, kAvx512 };

struct KernelTable {
    Level level;
    std::string_view name;

    // C[M x N] += A[M x K] * B[K x N], row-major with leading dimensions.
    void (*gemm_acc)(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
                     const float* b, std::size_t ldb, float* c, std::size_t ldc);
    // C[i][j] += sum_p a_rows[i][p] * b_rows[p][j]; rows given by pointer tables.
    void (*gemm_rows_acc)(std::size_t m, std::size_t n, std::size_t k, const float* const* a_rows,
                          const float* const* b_rows, float* c, std::size_t ldc);
    // out = a + b
    void (*add)(const float* a, const float* b, float* out, std::size_t n);
    // out = a * b
    void (*mul)(const float* a, const float* b, float* out, std::size_t n);
    // y = fma(alpha, x, y)
    void (*axpy)(float alpha, const float* x, float* y, std::size_t n);
    // y = max(x, 0)
    void (*relu)(const float* x, float* y, std::size_t n);
    // gx += (x > 0) ? gy : 0
    void (*relu_backward)(const float* x, const float* gy, float* gx, std::size_t n);
};

bool level_supported(Level level);
std::string_view level_name(Level level);

// Table for a specific level; throws std::invalid_argument if unsupported.
const KernelTable& kernels_for(Level level);

// Active table. Picks the widest supported level on first use unless
// SELFEN_SIMD=scalar|avx2|avx512 is set in the environment.
const KernelTable& kernels();
void set_level(Level level);
Level active_level();

namespace detail {
const KernelTable& scalar_table();
#if defined(SELFEN_HAVE_X86_KERNELS)
const KernelTable& avx2_table();
const KernelTable& avx512_table();
#endif
}  // namespace detail

}  // namespace selfen::simd
