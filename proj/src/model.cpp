#include "selfen/model.hpp"

#include <algorithm>
#include <cstring>

#include "selfen/error.hpp"
#include "selfen/ops.hpp"
#include "selfen/rng.hpp"

namespace selfen {

namespace {

template <typename T>
void require_image(const char* who, const BasicTensor<T>& img) {
    if (img.rank() != 4 || img.dim(1) != 3)
        throw ShapeError(std::string(who) + ": expected B x 3 x H x W input, got " + shape_str(img.shape()));
}

template <typename T>
void copy_params(const NamedParams<T>& from, const NamedParams<T>& to) {
    for (std::size_t i = 0; i < from.size(); ++i) {
        auto dst = BasicTensor<T>(to[i].second).mutable_data();
        const auto src = from[i].second.data();
        std::copy(src.begin(), src.end(), dst.begin());
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// EnhanceNet

template <typename T>
EnhanceNetT<T>::EnhanceNetT(EnhanceNetConfig config, std::uint64_t seed) : config_(config) {
    const std::size_t w = config_.width;
    if (config_.num_blocks == 0) throw ConfigError("EnhanceNet: at least one residual block is required");
    switch (config_.feedback_mode) {
        case FeedbackMode::kFeatures:
            input = ConvLayerT<T>(3, w, 3, Activation::kRelu);
            feedback = ConvLayerT<T>(1, w, 3, Activation::kRelu);
            fuse = ConvLayerT<T>(2 * w, w, config_.fuse_kernel, Activation::kRelu);
            break;
        case FeedbackMode::kInput:
            input = ConvLayerT<T>(4, w, 3, Activation::kRelu);
            break;
        case FeedbackMode::kNone:
            input = ConvLayerT<T>(3, w, 3, Activation::kRelu);
            break;
    }
    for (std::size_t i = 0; i < config_.num_blocks; ++i) blocks.emplace_back(w, config_.reduction);
    output = ConvLayerT<T>(w, 1, 3, Activation::kSigmoid);
    init_params(seed);
}

template <typename T>
std::vector<BasicTensor<T>> EnhanceNetT<T>::forward_passes(const BasicTensor<T>& img) const {
    require_image("EnhanceNet", img);
    const Shape map_shape{img.dim(0), 1, img.dim(2), img.dim(3)};
    BasicTensor<T> map = BasicTensor<T>::full(map_shape, static_cast<T>(config_.initial_map));
    BasicTensor<T> image_features;
    if (config_.feedback_mode != FeedbackMode::kInput) image_features = input.forward(img);

    const std::size_t passes = config_.feedback_mode == FeedbackMode::kNone ? 1 : 1 + config_.feedback_count;
    std::vector<BasicTensor<T>> outputs;
    outputs.reserve(passes);
    for (std::size_t pass = 0; pass < passes; ++pass) {
        BasicTensor<T> x;
        switch (config_.feedback_mode) {
            case FeedbackMode::kFeatures:
                x = fuse.forward(concat_channels(image_features, feedback.forward(map)));
                break;
            case FeedbackMode::kInput:
                x = input.forward(concat_channels(img, map));
                break;
            case FeedbackMode::kNone:
                x = image_features;
                break;
        }
        for (const auto& block : blocks) x = block.forward(x);
        map = output.forward(x);
        outputs.push_back(map);
    }
    return outputs;
}

template <typename T>
EnhancementMapT<T> EnhanceNetT<T>::forward(const BasicTensor<T>& img) const {
    return {forward_passes(img).back()};
}

template <typename T>
void EnhanceNetT<T>::init_params(std::uint64_t seed) {
    input.init_params(derive_seed(seed, 1));
    if (feedback.weight.defined()) feedback.init_params(derive_seed(seed, 2));
    if (fuse.weight.defined()) fuse.init_params(derive_seed(seed, 3));
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].init_params(derive_seed(seed, 100 + i));
    output.init_params(derive_seed(seed, 4));
}

template <typename T>
NamedParams<T> EnhanceNetT<T>::named_parameters() const {
    NamedParams<T> out;
    input.collect("fe.input", out);
    if (feedback.weight.defined()) feedback.collect("fe.feedback", out);
    if (fuse.weight.defined()) fuse.collect("fe.fuse", out);
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect("fe.rcab" + std::to_string(i), out);
    output.collect("fe.output", out);
    return out;
}

template <typename T>
std::vector<BasicTensor<T>> EnhanceNetT<T>::parameters() const {
    std::vector<BasicTensor<T>> out;
    for (auto& [name, p] : named_parameters()) out.push_back(p);
    return out;
}

template <typename T>
EnhanceNetT<T> EnhanceNetT<T>::clone() const {
    EnhanceNetT copy(config_, 0);
    copy_params(named_parameters(), copy.named_parameters());
    copy.trained = trained;
    return copy;
}

// ---------------------------------------------------------------------------
// DenoiseNet

template <typename T>
DenoiseNetT<T>::DenoiseNetT(DenoiseNetConfig config, std::uint64_t seed) : config_(config) {
    const std::size_t w = config_.width;
    if (config_.num_blocks == 0) throw ConfigError("DenoiseNet: at least one residual block is required");
    switch (config_.eta_mode) {
        case EtaMode::kFeatures:
            input = ConvLayerT<T>(3, w, 3, Activation::kRelu);
            eta_conv = ConvLayerT<T>(1, w, 3, Activation::kRelu);
            fuse = ConvLayerT<T>(2 * w, w, config_.fuse_kernel, Activation::kRelu);
            break;
        case EtaMode::kInput:
            input = ConvLayerT<T>(4, w, 3, Activation::kRelu);
            break;
        case EtaMode::kNone:
            input = ConvLayerT<T>(3, w, 3, Activation::kRelu);
            break;
    }
    for (std::size_t i = 0; i < config_.num_blocks; ++i) blocks.emplace_back(w, config_.reduction);
    output = ConvLayerT<T>(w, 3, 3, Activation::kSigmoid);
    init_params(seed);
}

template <typename T>
BasicTensor<T> DenoiseNetT<T>::forward(const BasicTensor<T>& img, const BasicTensor<T>& eta) const {
    require_image("DenoiseNet", img);
    if (eta.rank() != 4 || eta.dim(0) != img.dim(0) || eta.dim(1) != 1 || eta.dim(2) != img.dim(2) ||
        eta.dim(3) != img.dim(3))
        throw ShapeError("DenoiseNet: enhancement map " + shape_str(eta.shape()) + " does not match image " +
                         shape_str(img.shape()));
    BasicTensor<T> x;
    switch (config_.eta_mode) {
        case EtaMode::kFeatures:
            x = fuse.forward(concat_channels(input.forward(img), eta_conv.forward(eta)));
            break;
        case EtaMode::kInput:
            x = input.forward(concat_channels(img, eta));
            break;
        case EtaMode::kNone:
            x = input.forward(img);
            break;
    }
    for (const auto& block : blocks) x = block.forward(x);
    return output.forward(x);
}

template <typename T>
void DenoiseNetT<T>::init_params(std::uint64_t seed) {
    input.init_params(derive_seed(seed, 1));
    if (eta_conv.weight.defined()) eta_conv.init_params(derive_seed(seed, 2));
    if (fuse.weight.defined()) fuse.init_params(derive_seed(seed, 3));
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].init_params(derive_seed(seed, 100 + i));
    output.init_params(derive_seed(seed, 4));
}

template <typename T>
NamedParams<T> DenoiseNetT<T>::named_parameters() const {
    NamedParams<T> out;
    input.collect("fd.input", out);
    if (eta_conv.weight.defined()) eta_conv.collect("fd.eta", out);
    if (fuse.weight.defined()) fuse.collect("fd.fuse", out);
    for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect("fd.rcab" + std::to_string(i), out);
    output.collect("fd.output", out);
    return out;
}

template <typename T>
std::vector<BasicTensor<T>> DenoiseNetT<T>::parameters() const {
    std::vector<BasicTensor<T>> out;
    for (auto& [name, p] : named_parameters()) out.push_back(p);
    return out;
}

template <typename T>
DenoiseNetT<T> DenoiseNetT<T>::clone() const {
    DenoiseNetT copy(config_, 0);
    copy_params(named_parameters(), copy.named_parameters());
    return copy;
}

// ---------------------------------------------------------------------------

template <typename T>
PipelineResultT<T> enhance_pipeline(const EnhanceNetT<T>& fe, const DenoiseNetT<T>* fd, const BasicTensor<T>& img) {
    PipelineResultT<T> r;
    r.eta = fe.forward(img);
    r.denoised = fd != nullptr ? fd->forward(img, r.eta.values) : img;
    r.enhanced = clamp(pow(r.denoised, r.eta.values), T(0), T(1));
    return r;
}

template <typename T>
std::uint64_t parameter_checksum(const NamedParams<T>& params) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto feed = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& [name, tensor] : params) {
        feed(name.data(), name.size());
        for (auto d : tensor.shape()) feed(&d, sizeof d);
        const auto data = tensor.data();
        feed(data.data(), data.size_bytes());
    }
    return h;
}

template class EnhanceNetT<float>;
template class EnhanceNetT<double>;
template class DenoiseNetT<float>;
template class DenoiseNetT<double>;
template PipelineResultT<float> enhance_pipeline(const EnhanceNetT<float>&, const DenoiseNetT<float>*,
                                                 const BasicTensor<float>&);
template PipelineResultT<double> enhance_pipeline(const EnhanceNetT<double>&, const DenoiseNetT<double>*,
                                                  const BasicTensor<double>&);
template std::uint64_t parameter_checksum(const NamedParams<float>&);
template std::uint64_t parameter_checksum(const NamedParams<double>&);

}  // namespace selfen
