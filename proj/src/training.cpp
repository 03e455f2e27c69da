#include "selfen/training.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "selfen/error.hpp"

namespace selfen {

namespace {

constexpr std::uint64_t kStreamEnhanceInit = 1;
constexpr std::uint64_t kStreamDenoiseInit = 2;
constexpr std::uint64_t kStreamLowlight = 11;
constexpr std::uint64_t kStreamWelllit = 12;

std::uint64_t sampler_seed(std::uint64_t run_seed, TrainStage stage, std::uint64_t stream) {
    return derive_seed(derive_seed(run_seed, stream), stage == TrainStage::kEnhance ? 0 : 1);
}

void check_pools(const ImagePools& data, const TrainConfig& cfg) {
    if (data.lowlight.empty()) throw DataError("no low-light training images");
    if (data.welllit.empty()) throw DataError("no well-lit training images");
    for (const auto* pool : {&data.lowlight, &data.welllit})
        for (const auto& img : *pool)
            if (img.width < cfg.patch_size || img.height < cfg.patch_size)
                throw DataError("training image '" + img.path.string() + "' (" + std::to_string(img.width) + "x" +
                                std::to_string(img.height) + ") is smaller than the " +
                                std::to_string(cfg.patch_size) + " px patch");
}

template <typename StepFn>
std::vector<EpochRecord> run_loop(TrainStage stage, const std::vector<Tensor>& params, const TrainConfig& cfg,
                                  const ImagePools& data, const TrainHooks& hooks, StepFn&& objective) {
    cfg.validate();
    check_pools(data, cfg);
    Adam opt(params, cfg.adam);
    PatchSampler low(data.lowlight, sampler_seed(cfg.rng_seed, stage, kStreamLowlight));
    PatchSampler well(data.welllit, sampler_seed(cfg.rng_seed, stage, kStreamWelllit));
    std::vector<EpochRecord> trace;
    trace.reserve(cfg.epochs);
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        EpochRecord rec;
        rec.epoch = e + 1;
        rec.stage = stage;
        rec.lr = lr_at(e, cfg);
        for (std::size_t u = 0; u < cfg.updates_per_epoch; ++u) {
            const auto lowb = low.sample_batch(cfg.batch_size, cfg.patch_size);
            const auto wellb = well.sample_batch(cfg.batch_size, cfg.patch_size);
            const auto terms = objective(lowb, wellb);
            backward(terms.total);
            opt.step(rec.lr);
            rec.loss += terms.total.item();
            rec.ss += terms.ss;
            rec.sc += terms.sc;
            rec.wsc += terms.wsc;
            rec.f += terms.f;
            rec.g += terms.g;
            rec.dsc += terms.dsc;
        }
        if (cfg.updates_per_epoch > 0) {
            const double inv = 1.0 / static_cast<double>(cfg.updates_per_epoch);
            for (double* v : {&rec.loss, &rec.ss, &rec.sc, &rec.wsc, &rec.f, &rec.g, &rec.dsc}) *v *= inv;
        }
        trace.push_back(rec);
        if (hooks.on_epoch) hooks.on_epoch(rec);
        if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && rec.epoch % cfg.checkpoint_every == 0)
            hooks.on_checkpoint(rec.epoch);
    }
    return trace;
}

}  // namespace

const char* stage_name(TrainStage stage) { return stage == TrainStage::kEnhance ? "enhance" : "denoise"; }

TrainConfig TrainConfig::paper() { return TrainConfig{}; }

TrainConfig TrainConfig::desk() {
    TrainConfig cfg;
    cfg.epochs = 20;
    cfg.updates_per_epoch = 100;
    cfg.patch_size = 64;
    cfg.batch_size = 4;
    return cfg;
}

void TrainConfig::validate() const {
    if (epochs == 0) throw ConfigError("epochs must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (patch_size < 2) throw ConfigError("patch size must be at least 2");
    if (!(lr_initial > 0)) throw ConfigError("learning rate must be positive");
    if (lr_half_every == 0) throw ConfigError("lr halving interval must be positive");
    weights.validate();
}

std::uint64_t TrainConfig::hash() const {
    std::ostringstream s;
    s.precision(17);
    const auto& w = weights;
    s << epochs << ' ' << updates_per_epoch << ' ' << batch_size << ' ' << patch_size << ' ' << lr_initial << ' '
      << lr_half_every << ' ' << checkpoint_every << ' ' << rng_seed << ' ' << w.c1 << ' ' << w.c2 << ' ' << w.c3
      << ' ' << w.c4 << ' ' << w.alpha << ' ' << w.delta << ' ' << w.eps_w << ' ' << w.use_ss << w.use_sc
      << w.use_wsc << w.use_g << w.use_f << w.use_dsc << w.detach_eta << ' ' << adam.beta1 << ' ' << adam.beta2
      << ' ' << adam.eps;
    const auto str = s.str();
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : str) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

double lr_at(std::size_t epoch, const TrainConfig& cfg) {
    if (cfg.lr_half_every == 0) throw ConfigError("lr halving interval must be positive");
    return std::ldexp(cfg.lr_initial, -static_cast<int>(epoch / cfg.lr_half_every));
}

void flip_horizontal(ImageBuffer& img) {
    for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c)
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width / 2; ++x) std::swap(img.at(c, y, x), img.at(c, y, img.width - 1 - x));
}

void flip_vertical(ImageBuffer& img) {
    for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c)
        for (std::size_t y = 0; y < img.height / 2; ++y)
            for (std::size_t x = 0; x < img.width; ++x) std::swap(img.at(c, y, x), img.at(c, img.height - 1 - y, x));
}

// Clockwise: out(y, x) = in(H - 1 - x, y).
void rotate90(ImageBuffer& img) {
    ImageBuffer out(img.height, img.width);
    out.path = img.path;
    out.bit_depth = img.bit_depth;
    for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c)
        for (std::size_t y = 0; y < out.height; ++y)
            for (std::size_t x = 0; x < out.width; ++x) out.at(c, y, x) = img.at(c, img.height - 1 - x, y);
    img = std::move(out);
}

void augment(ImageBuffer& patch, Rng& rng) {
    const bool h = rng.coin();
    const bool v = rng.coin();
    const bool r = rng.coin();
    if (h) flip_horizontal(patch);
    if (v) flip_vertical(patch);
    if (r) rotate90(patch);
}

PatchSampler::PatchSampler(const std::vector<ImageBuffer>& pool, std::uint64_t seed) : pool_(&pool), rng_(seed) {}

ImageBuffer PatchSampler::sample_patch(std::size_t patch_size, bool augmented) {
    if (pool_->empty()) throw DataError("cannot sample from an empty image pool");
    last_index_ = static_cast<std::size_t>(rng_.below(pool_->size()));
    const auto& src = (*pool_)[last_index_];
    if (src.width < patch_size || src.height < patch_size)
        throw DataError("image '" + src.path.string() + "' is smaller than the " + std::to_string(patch_size) +
                        " px patch");
    const auto y0 = static_cast<std::size_t>(rng_.below(src.height - patch_size + 1));
    const auto x0 = static_cast<std::size_t>(rng_.below(src.width - patch_size + 1));
    ImageBuffer patch(patch_size, patch_size);
    for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c)
        for (std::size_t y = 0; y < patch_size; ++y)
            for (std::size_t x = 0; x < patch_size; ++x) patch.at(c, y, x) = src.at(c, y0 + y, x0 + x);
    if (augmented) augment(patch, rng_);
    return patch;
}

Tensor PatchSampler::sample_batch(std::size_t batch_size, std::size_t patch_size) {
    std::vector<ImageBuffer> patches;
    patches.reserve(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) patches.push_back(sample_patch(patch_size));
    std::vector<const ImageBuffer*> ptrs;
    for (const auto& p : patches) ptrs.push_back(&p);
    return images_to_tensor(ptrs);
}

std::string format_progress(const EpochRecord& rec) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "epoch=%zu stage=%s loss=%.8g lr=%.6g", rec.epoch, stage_name(rec.stage), rec.loss,
                  rec.lr);
    return buf;
}

std::vector<EpochRecord> train_stage_enhance(EnhanceNet& fe, const ImagePools& data, const TrainConfig& cfg,
                                             const TrainHooks& hooks) {
    const MapFn<float> fe_fn = [&fe](const Tensor& x) { return fe(x); };
    auto trace = run_loop(TrainStage::kEnhance, fe.parameters(), cfg, data, hooks,
                          [&](const Tensor& low, const Tensor& well) {
                              return enhance_objective(fe_fn, low, well, cfg.weights);
                          });
    fe.trained = true;
    return trace;
}

std::vector<EpochRecord> train_stage_denoise(DenoiseNet& fd, const EnhanceNet& fe, const ImagePools& data,
                                             const TrainConfig& cfg, const TrainHooks& hooks) {
    if (!fe.trained)
        throw ConfigError("denoise training needs a trained enhancement network (run the enhance stage first)");
    const auto before = parameter_checksum(fe.named_parameters());
    const MapFn<float> fe_fn = [&fe](const Tensor& x) { return fe(x); };
    const DenoiseFn<float> fd_fn = [&fd](const Tensor& x, const Tensor& eta) { return fd(x, eta); };
    auto trace = run_loop(TrainStage::kDenoise, fd.parameters(), cfg, data, hooks,
                          [&](const Tensor& low, const Tensor& well) {
                              return denoise_objective(fd_fn, fe_fn, low, well, cfg.weights);
                          });
    if (parameter_checksum(fe.named_parameters()) != before)
        throw GraphError("enhancement network changed during denoise training");
    return trace;
}

std::uint64_t enhance_init_seed(std::uint64_t run_seed) { return derive_seed(run_seed, kStreamEnhanceInit); }
std::uint64_t denoise_init_seed(std::uint64_t run_seed) { return derive_seed(run_seed, kStreamDenoiseInit); }

}  // namespace selfen
