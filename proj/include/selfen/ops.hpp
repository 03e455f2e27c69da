#pragma once

// Differentiable tensor operations. All are templates over float/double and
// explicitly instantiated for both.

#include <cstddef>

#include "selfen/tensor.hpp"

namespace selfen {

// Floor applied to the base of pow() so that d/de = y*ln(base) stays finite.
inline constexpr double kPowBaseFloor = 1e-4;

// Elementwise a (op) b. `b` may broadcast over `a` along any axis where b
// has extent 1 (ranks must agree). Throws ShapeError otherwise.
template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor);

// max(base, kPowBaseFloor) ^ exponent. The exponent tensor broadcasts over
// base like mul(). Throws DomainError if any exponent is <= 0.
template <typename T>
BasicTensor<T> pow(const BasicTensor<T>& base, const BasicTensor<T>& exponent);
template <typename T>
BasicTensor<T> pow(const BasicTensor<T>& base, T exponent);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);

// Stride 1, zero padding (k-1)/2, odd square kernels.
// x: B x Cin x H x W, weight: Cout x Cin x k x k, bias: Cout.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias);

// B x C x H x W -> B x C x 1 x 1
template <typename T>
BasicTensor<T> global_avg_pool(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> concat_channels(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> slice_channels(const BasicTensor<T>& x, std::size_t begin, std::size_t count);

// mean((a - b)^2) over all elements.
template <typename T>
BasicTensor<T> mse(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);

// Same values, no history.
template <typename T>
BasicTensor<T> stop_gradient(const BasicTensor<T>& x);

// ln(x + offset); throws DomainError if any x + offset <= 0.
template <typename T>
BasicTensor<T> log_offset(const BasicTensor<T>& x, T offset);

// Rec.601 luma over 3 channels (B x 3 x H x W -> B x 1 x H x W); a single
// channel input is passed through unchanged.
template <typename T>
BasicTensor<T> luminance(const BasicTensor<T>& x);

// Forward differences along the last (x) and second-to-last (y) axes with a
// zero trailing boundary. Throw ShapeError when that axis has extent < 2.
template <typename T>
BasicTensor<T> diff_x(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> diff_y(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> clamp(const BasicTensor<T>& x, T lo, T hi);

template <typename T>
BasicTensor<T> ones_like(const BasicTensor<T>& x) {
    return BasicTensor<T>::full(x.shape(), T(1));
}

}  // namespace selfen
