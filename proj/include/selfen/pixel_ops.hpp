#pragma once

// Closed-form pixel math shared by the losses and the inference path.

#include "selfen/tensor.hpp"

namespace selfen {

inline constexpr double kDefaultAlpha = 0.75;
inline constexpr double kLogLumOffset = 1.0 / 255.0;
inline constexpr double kDefaultDelta = 1.2;
inline constexpr double kDefaultWlsEps = 1e-4;

template <typename T>
struct GradientPair {
    BasicTensor<T> gx;  // x(i, j+1) - x(i, j), last column zero
    BasicTensor<T> gy;  // x(i+1, j) - x(i, j), last row zero
};

template <typename T>
struct WlsWeights {
    BasicTensor<T> wx;
    BasicTensor<T> wy;
};

// img^alpha. Throws DomainError unless 0 < alpha <= 1.
template <typename T>
BasicTensor<T> controlled_transform(const BasicTensor<T>& img, T alpha = T(kDefaultAlpha));

// img^eta with the single-channel map broadcast over colour channels.
template <typename T>
BasicTensor<T> apply_map(const BasicTensor<T>& img, const BasicTensor<T>& eta, bool detach_eta);

// ln(luminance(img) + 1/255)
template <typename T>
BasicTensor<T> log_luminance(const BasicTensor<T>& img);

template <typename T>
GradientPair<T> spatial_gradients(const BasicTensor<T>& x);

// w = (|d l|^delta + eps_w)^-1 per direction, carrying no history.
template <typename T>
WlsWeights<T> wls_weights(const BasicTensor<T>& log_lum, T delta = T(kDefaultDelta), T eps_w = T(kDefaultWlsEps));

}  // namespace selfen
