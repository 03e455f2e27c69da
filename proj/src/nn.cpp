#include "selfen/nn.hpp"

#include <cmath>

#include "selfen/error.hpp"
#include "selfen/ops.hpp"
#include "selfen/rng.hpp"

namespace selfen {

template <typename T>
BasicTensor<T> activate(const BasicTensor<T>& x, Activation act) {
    switch (act) {
        case Activation::kRelu:
            return relu(x);
        case Activation::kSigmoid:
            return sigmoid(x);
        case Activation::kNone:
            break;
    }
    return x;
}

template <typename T>
ConvLayerT<T>::ConvLayerT(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Activation act)
    : in_(in_channels), out_(out_channels), k_(kernel), act_(act) {
    if (kernel != 1 && kernel != 3) throw ShapeError("ConvLayer: kernel must be 1 or 3");
    if (in_channels == 0 || out_channels == 0) throw ShapeError("ConvLayer: channel counts must be positive");
    weight = BasicTensor<T>::zeros({out_, in_, k_, k_}, true);
    bias = BasicTensor<T>::zeros({out_}, true);
}

template <typename T>
BasicTensor<T> ConvLayerT<T>::forward(const BasicTensor<T>& x) const {
    if (x.rank() != 4 || x.dim(1) != in_)
        throw ShapeError("ConvLayer: expected " + std::to_string(in_) + " input channels, got shape " +
                         shape_str(x.shape()));
    return activate(conv2d(x, weight, bias), act_);
}

template <typename T>
void ConvLayerT<T>::init_params(std::uint64_t seed) {
    Rng rng(seed);
    const double limit = std::sqrt(6.0 / static_cast<double>(in_ * k_ * k_));
    for (auto& w : weight.mutable_data()) w = static_cast<T>(rng.uniform(-limit, limit));
    for (auto& b : bias.mutable_data()) b = T(0);
}

template <typename T>
void ConvLayerT<T>::zero_params() {
    for (auto& w : weight.mutable_data()) w = T(0);
    for (auto& b : bias.mutable_data()) b = T(0);
}

template <typename T>
void ConvLayerT<T>::collect(const std::string& prefix, NamedParams<T>& out) const {
    out.emplace_back(prefix + ".weight", weight);
    out.emplace_back(prefix + ".bias", bias);
}

template <typename T>
ChannelAttentionT<T>::ChannelAttentionT(std::size_t channels, std::size_t reduction)
    : channels_(channels), reduction_(reduction) {
    if (reduction == 0 || channels % reduction != 0)
        throw ShapeError("ChannelAttention: channels must be divisible by the reduction");
    squeeze = ConvLayerT<T>(channels, channels / reduction, 1, Activation::kRelu);
    excite = ConvLayerT<T>(channels / reduction, channels, 1, Activation::kSigmoid);
}

template <typename T>
BasicTensor<T> ChannelAttentionT<T>::scales(const BasicTensor<T>& x) const {
    if (x.rank() != 4 || x.dim(1) != channels_)
        throw ShapeError("ChannelAttention: expected " + std::to_string(channels_) + " channels, got shape " +
                         shape_str(x.shape()));
    return excite.forward(squeeze.forward(global_avg_pool(x)));
}

template <typename T>
BasicTensor<T> ChannelAttentionT<T>::forward(const BasicTensor<T>& x) const {
    return mul(x, scales(x));
}

template <typename T>
void ChannelAttentionT<T>::init_params(std::uint64_t seed) {
    squeeze.init_params(derive_seed(seed, 0));
    excite.init_params(derive_seed(seed, 1));
}

template <typename T>
void ChannelAttentionT<T>::collect(const std::string& prefix, NamedParams<T>& out) const {
    squeeze.collect(prefix + ".squeeze", out);
    excite.collect(prefix + ".excite", out);
}

template <typename T>
RcabT<T>::RcabT(std::size_t channels, std::size_t reduction)
    : conv1(channels, channels, 3, Activation::kRelu),
      conv2(channels, channels, 3, Activation::kNone),
      attention(channels, reduction) {}

template <typename T>
BasicTensor<T> RcabT<T>::forward(const BasicTensor<T>& x) const {
    return add(x, attention.forward(conv2.forward(conv1.forward(x))));
}

template <typename T>
void RcabT<T>::init_params(std::uint64_t seed) {
    conv1.init_params(derive_seed(seed, 0));
    conv2.init_params(derive_seed(seed, 1));
    attention.init_params(derive_seed(seed, 2));
}

template <typename T>
void RcabT<T>::collect(const std::string& prefix, NamedParams<T>& out) const {
    conv1.collect(prefix + ".conv1", out);
    conv2.collect(prefix + ".conv2", out);
    attention.collect(prefix + ".ca", out);
}

template BasicTensor<float> activate(const BasicTensor<float>&, Activation);
template BasicTensor<double> activate(const BasicTensor<double>&, Activation);
template class ConvLayerT<float>;
template class ConvLayerT<double>;
template class ChannelAttentionT<float>;
template class ChannelAttentionT<double>;
template class RcabT<float>;
template class RcabT<double>;

}  // namespace selfen
