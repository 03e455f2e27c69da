#include "selfen/pixel_ops.hpp"

#include <cmath>
#include <string>

#include "selfen/error.hpp"
#include "selfen/ops.hpp"

namespace selfen {

template <typename T>
BasicTensor<T> controlled_transform(const BasicTensor<T>& img, T alpha) {
    if (!(alpha > T(0) && alpha <= T(1)))
        throw DomainError("controlled_transform: alpha must lie in (0, 1), got " + std::to_string(alpha));
    return pow(img, alpha);
}

template <typename T>
BasicTensor<T> apply_map(const BasicTensor<T>& img, const BasicTensor<T>& eta, bool detach_eta) {
    if (eta.rank() != img.rank() || eta.rank() != 4 || eta.dim(1) != 1 || eta.dim(0) != img.dim(0) ||
        eta.dim(2) != img.dim(2) || eta.dim(3) != img.dim(3))
        throw ShapeError("apply_map: map " + shape_str(eta.shape()) + " does not match image " +
                         shape_str(img.shape()));
    return pow(img, detach_eta ? stop_gradient(eta) : eta);
}

template <typename T>
BasicTensor<T> log_luminance(const BasicTensor<T>& img) {
    return log_offset(luminance(img), T(kLogLumOffset));
}

template <typename T>
GradientPair<T> spatial_gradients(const BasicTensor<T>& x) {
    if (x.rank() < 2 || x.dim(x.rank() - 1) < 2 || x.dim(x.rank() - 2) < 2)
        throw ShapeError("spatial_gradients: need H, W >= 2, got " + shape_str(x.shape()));
    return {diff_x(x), diff_y(x)};
}

template <typename T>
WlsWeights<T> wls_weights(const BasicTensor<T>& log_lum, T delta, T eps_w) {
    if (!(delta > T(0))) throw DomainError("wls_weights: delta must be positive");
    if (!(eps_w > T(0))) throw DomainError("wls_weights: eps_w must be positive");
    const auto g = spatial_gradients(stop_gradient(log_lum));
    auto weigh = [&](const BasicTensor<T>& d) {
        const auto src = d.data();
        std::vector<T> w(src.size());
        for (std::size_t i = 0; i < w.size(); ++i)
            w[i] = T(1) / (static_cast<T>(std::pow(std::abs(src[i]), delta)) + eps_w);
        return BasicTensor<T>::from_vector(d.shape(), std::move(w));
    };
    return {weigh(g.gx), weigh(g.gy)};
}

#define SELFEN_INSTANTIATE(T)                                                                   \
    template BasicTensor<T> controlled_transform(const BasicTensor<T>&, T);                     \
    template BasicTensor<T> apply_map(const BasicTensor<T>&, const BasicTensor<T>&, bool);      \
    template BasicTensor<T> log_luminance(const BasicTensor<T>&);                               \
    template GradientPair<T> spatial_gradients(const BasicTensor<T>&);                          \
    template WlsWeights<T> wls_weights(const BasicTensor<T>&, T, T);

SELFEN_INSTANTIATE(float)
SELFEN_INSTANTIATE(double)

#undef SELFEN_INSTANTIATE

}  // namespace selfen
