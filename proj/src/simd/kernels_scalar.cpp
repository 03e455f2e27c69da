#include "selfen/simd/kernels.hpp"
#include "selfen/simd/reference.hpp"

namespace selfen::simd::detail {

namespace {
void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const float* a, std::size_t lda,
              const float* b, std::size_t ldb, float* c, std::size_t ldc) {
    ref::gemm_acc<float>(m, n, k, a, lda, b, ldb, c, ldc);
}
void gemm_rows_acc(std::size_t m, std::size_t n, std::size_t k, const float* const* a, const float* const* b,
                   float* c, std::size_t ldc) {
    ref::gemm_rows_acc<float>(m, n, k, a, b, c, ldc);
}
void add(const float* a, const float* b, float* out, std::size_t n) { ref::add<float>(a, b, out, n); }
void mul(const float* a, const float* b, float* out, std::size_t n) { ref::mul<float>(a, b, out, n); }
void axpy(float alpha, const float* x, float* y, std::size_t n) { ref::axpy<float>(alpha, x, y, n); }
void relu(const float* x, float* y, std::size_t n) { ref::relu<float>(x, y, n); }
void relu_backward(const float* x, const float* gy, float* gx, std::size_t n) {
    ref::relu_backward<float>(x, gy, gx, n);
}
}  // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{Level::kScalar, "scalar", &gemm_acc, &gemm_rows_acc,
                                   &add, &mul, &axpy, &relu, &relu_backward};
    return table;
}

}  // namespace selfen::simd::detail
