#pragma once

// Convolutional building blocks: conv + activation, channel attention (CA)
// and the residual channel attention block (RCAB).

#include <cstddef>
#include <cstdint>
#include <string>

#include "selfen/optim.hpp"
#include "selfen/tensor.hpp"

namespace selfen {

enum class Activation { kNone, kRelu, kSigmoid };

template <typename T>
BasicTensor<T> activate(const BasicTensor<T>& x, Activation act);

template <typename T>
class ConvLayerT {
 public:
    ConvLayerT() = default;
    // k must be 1 or 3. Parameters start at zero; call init_params().
    ConvLayerT(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, Activation act);

    BasicTensor<T> forward(const BasicTensor<T>& x) const;

    // Uniform in +-sqrt(6 / fan_in) with fan_in = Cin * k * k; zero bias.
    void init_params(std::uint64_t seed);
    void zero_params();

    void collect(const std::string& prefix, NamedParams<T>& out) const;

    std::size_t in_channels() const { return in_; }
    std::size_t out_channels() const { return out_; }
    std::size_t kernel() const { return k_; }
    Activation activation() const { return act_; }

    BasicTensor<T> weight;
    BasicTensor<T> bias;

 private:
    std::size_t in_ = 0, out_ = 0, k_ = 0;
    Activation act_ = Activation::kNone;
};

// x * sigmoid(excite(relu(squeeze(gap(x))))), scale broadcast over H x W.
template <typename T>
class ChannelAttentionT {
 public:
    ChannelAttentionT() = default;
    ChannelAttentionT(std::size_t channels, std::size_t reduction);

    BasicTensor<T> forward(const BasicTensor<T>& x) const;
    // Per-channel factors, B x C x 1 x 1.
    BasicTensor<T> scales(const BasicTensor<T>& x) const;

    void init_params(std::uint64_t seed);
    void collect(const std::string& prefix, NamedParams<T>& out) const;

    std::size_t channels() const { return channels_; }
    std::size_t reduction() const { return reduction_; }

    ConvLayerT<T> squeeze;
    ConvLayerT<T> excite;

 private:
    std::size_t channels_ = 0, reduction_ = 1;
};

// x + CA(conv2(relu(conv1(x))))
template <typename T>
class RcabT {
 public:
    RcabT() = default;
    RcabT(std::size_t channels, std::size_t reduction);

    BasicTensor<T> forward(const BasicTensor<T>& x) const;

    void init_params(std::uint64_t seed);
    void collect(const std::string& prefix, NamedParams<T>& out) const;

    std::size_t channels() const { return conv1.in_channels(); }

    ConvLayerT<T> conv1;
    ConvLayerT<T> conv2;
    ChannelAttentionT<T> attention;
};

using ConvLayer = ConvLayerT<float>;
using ChannelAttention = ChannelAttentionT<float>;
using Rcab = RcabT<float>;

}  // namespace selfen
