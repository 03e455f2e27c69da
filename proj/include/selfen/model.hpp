#pragma once

// Enhancement network F_E (per-pixel exponent map with output feedback) and
// noise-handling network F_D (denoiser guided by that map).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "selfen/nn.hpp"
#include "selfen/optim.hpp"
#include "selfen/tensor.hpp"

namespace selfen {

// How the previous map estimate re-enters F_E.
enum class FeedbackMode {
    kFeatures,  // conv features of the map concatenated with input features
    kInput,     // raw map concatenated with the image at the input
    kNone,      // single pass, no feedback
};

// How the enhancement map enters F_D.
enum class EtaMode {
    kFeatures,
    kInput,
    kNone,
};

struct EnhanceNetConfig {
    std::size_t width = 32;
    std::size_t num_blocks = 4;
    std::size_t reduction = 8;
    std::size_t fuse_kernel = 3;
    // Passes after the initial one; the initial pass feeds back a constant map.
    std::size_t feedback_count = 1;
    FeedbackMode feedback_mode = FeedbackMode::kFeatures;
    double initial_map = 1.0 / 2.2;
};

struct DenoiseNetConfig {
    std::size_t width = 32;
    std::size_t num_blocks = 4;
    std::size_t reduction = 8;
    std::size_t fuse_kernel = 3;
    EtaMode eta_mode = EtaMode::kFeatures;
};

// Single-channel exponent field, values in (0, 1].
template <typename T>
struct EnhancementMapT {
    BasicTensor<T> values;  // B x 1 x H x W
};

template <typename T>
class EnhanceNetT {
 public:
    explicit EnhanceNetT(EnhanceNetConfig config = {}, std::uint64_t seed = 0);

    // img: B x 3 x H x W in [0,1]. Returns the final pass's map.
    EnhancementMapT<T> forward(const BasicTensor<T>& img) const;
    // Every pass's output, initial pass first.
    std::vector<BasicTensor<T>> forward_passes(const BasicTensor<T>& img) const;
    BasicTensor<T> operator()(const BasicTensor<T>& img) const { return forward(img).values; }

    void init_params(std::uint64_t seed);
    NamedParams<T> named_parameters() const;
    std::vector<BasicTensor<T>> parameters() const;
    // Deep copy with independent parameter storage.
    EnhanceNetT clone() const;

    const EnhanceNetConfig& config() const { return config_; }
    void set_feedback_count(std::size_t count) { config_.feedback_count = count; }

    // Set once the weights come from training or a checkpoint; stage-2
    // training refuses a network without it.
    bool trained = false;

    ConvLayerT<T> input;
    ConvLayerT<T> feedback;
    ConvLayerT<T> fuse;
    std::vector<RcabT<T>> blocks;
    ConvLayerT<T> output;

 private:
    EnhanceNetConfig config_;
};

template <typename T>
class DenoiseNetT {
 public:
    explicit DenoiseNetT(DenoiseNetConfig config = {}, std::uint64_t seed = 0);

    // img: B x 3 x H x W, eta: B x 1 x H x W. Returns B x 3 x H x W in (0,1).
    BasicTensor<T> forward(const BasicTensor<T>& img, const BasicTensor<T>& eta) const;
    BasicTensor<T> operator()(const BasicTensor<T>& img, const BasicTensor<T>& eta) const {
        return forward(img, eta);
    }

    void init_params(std::uint64_t seed);
    NamedParams<T> named_parameters() const;
    std::vector<BasicTensor<T>> parameters() const;
    DenoiseNetT clone() const;

    const DenoiseNetConfig& config() const { return config_; }

    ConvLayerT<T> input;
    ConvLayerT<T> eta_conv;
    ConvLayerT<T> fuse;
    std::vector<RcabT<T>> blocks;
    ConvLayerT<T> output;

 private:
    DenoiseNetConfig config_;
};

template <typename T>
struct PipelineResultT {
    BasicTensor<T> enhanced;
    EnhancementMapT<T> eta;
    BasicTensor<T> denoised;
};

// eta = F_E(img); denoised = F_D(img, eta) or img; enhanced = clamp(denoised^eta).
template <typename T>
PipelineResultT<T> enhance_pipeline(const EnhanceNetT<T>& fe, const DenoiseNetT<T>* fd, const BasicTensor<T>& img);

// FNV-1a over names, shapes and raw value bytes.
template <typename T>
std::uint64_t parameter_checksum(const NamedParams<T>& params);

using EnhanceNet = EnhanceNetT<float>;
using DenoiseNet = DenoiseNetT<float>;
using EnhancementMap = EnhancementMapT<float>;
using PipelineResult = PipelineResultT<float>;

}  // namespace selfen
