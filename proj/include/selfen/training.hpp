#pragma once

// Two-stage training: F_E first, then F_D against a frozen F_E.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "selfen/dataset.hpp"
#include "selfen/losses.hpp"
#include "selfen/model.hpp"
#include "selfen/optim.hpp"
#include "selfen/rng.hpp"

namespace selfen {

enum class TrainStage { kEnhance, kDenoise };

const char* stage_name(TrainStage stage);

struct TrainConfig {
    std::size_t epochs = 250;
    std::size_t updates_per_epoch = 1000;
    std::size_t batch_size = 4;
    std::size_t patch_size = 128;
    double lr_initial = 1e-4;
    std::size_t lr_half_every = 50;
    std::size_t checkpoint_every = 10;
    std::uint64_t rng_seed = 0;
    LossWeights weights;
    AdamOptions adam;
    TrainStage stage = TrainStage::kEnhance;

    static TrainConfig paper();
    // 20 epochs x 100 updates, 64 x 64 patches, batch 4.
    static TrainConfig desk();

    // Throws ConfigError.
    void validate() const;
    // Stable hash of every field except the stage.
    std::uint64_t hash() const;
};

// lr_initial * 2^-floor(epoch / lr_half_every), epoch counted from 0.
double lr_at(std::size_t epoch, const TrainConfig& cfg);

// Random h/v flip and 90 degree rotation, each with probability 1/2.
void augment(ImageBuffer& patch, Rng& rng);
void flip_horizontal(ImageBuffer& img);
void flip_vertical(ImageBuffer& img);
void rotate90(ImageBuffer& img);

class PatchSampler {
 public:
    PatchSampler(const std::vector<ImageBuffer>& pool, std::uint64_t seed);

    // Index of the next source image (uniform) and the crop drawn from it.
    ImageBuffer sample_patch(std::size_t patch_size, bool augmented = true);
    // batch x 3 x patch x patch. Throws DataError on an empty pool or an
    // image smaller than the patch.
    Tensor sample_batch(std::size_t batch_size, std::size_t patch_size);

    std::size_t last_index() const { return last_index_; }

 private:
    const std::vector<ImageBuffer>* pool_;
    Rng rng_;
    std::size_t last_index_ = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based count of completed epochs
    TrainStage stage = TrainStage::kEnhance;
    double loss = 0;        // mean objective over the epoch's updates
    double lr = 0;
    double ss = 0, sc = 0, wsc = 0, f = 0, g = 0, dsc = 0;
};

// "epoch=<n> stage=<s> loss=<f> lr=<f>"
std::string format_progress(const EpochRecord& rec);

struct TrainHooks {
    std::function<void(const EpochRecord&)> on_epoch;
    // Called after epochs that are multiples of checkpoint_every.
    std::function<void(std::size_t epoch)> on_checkpoint;
};

std::vector<EpochRecord> train_stage_enhance(EnhanceNet& fe, const ImagePools& data, const TrainConfig& cfg,
                                             const TrainHooks& hooks = {});

// Throws ConfigError unless `fe.trained` is set. F_E is never modified.
std::vector<EpochRecord> train_stage_denoise(DenoiseNet& fd, const EnhanceNet& fe, const ImagePools& data,
                                             const TrainConfig& cfg, const TrainHooks& hooks = {});

// Seeds used to initialise the networks of a run.
std::uint64_t enhance_init_seed(std::uint64_t run_seed);
std::uint64_t denoise_init_seed(std::uint64_t run_seed);

}  // namespace selfen
