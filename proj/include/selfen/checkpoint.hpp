#pragma once

// Binary checkpoint files.
//
// Layout (all integers little-endian, floats IEEE-754 binary32 LE):
//   "SEN1"                      magic
//   u32 format_version          = 1
//   u8  stage                   0 enhance, 1 denoise, 2 both
//   u8  feedback_mode           0 features, 1 input, 2 none
//   u8  eta_mode                0 features, 1 input, 2 none
//   u8  reserved                = 0
//   u32 feedback_count
//   u64 epoch
//   u64 rng_seed
//   u64 config_hash
//   u32 record_count
//   record_count x { u32 name_len, name bytes, u32 rank, u32 dims[rank],
//                    f32 values[prod(dims)] }
//   u64 checksum                FNV-1a 64 of every preceding byte

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "selfen/model.hpp"

namespace selfen {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointStage : std::uint8_t { kEnhance = 0, kDenoise = 1, kBoth = 2 };

struct ParameterRecord {
    std::string name;
    Shape shape;
    std::vector<float> values;
};

struct Checkpoint {
    CheckpointStage stage = CheckpointStage::kEnhance;
    FeedbackMode feedback_mode = FeedbackMode::kFeatures;
    EtaMode eta_mode = EtaMode::kFeatures;
    std::uint32_t feedback_count = 1;
    std::uint64_t epoch = 0;
    std::uint64_t rng_seed = 0;
    std::uint64_t config_hash = 0;
    std::vector<ParameterRecord> params;

    const ParameterRecord* find(const std::string& name) const;
    bool has_enhance() const;
    bool has_denoise() const;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
// Throws CorruptFileError (bad magic, truncation, checksum) or VersionError.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

// Writes to a sibling temp file, then renames over `path`.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct CheckpointMeta {
    std::uint64_t epoch = 0;
    std::uint64_t rng_seed = 0;
    std::uint64_t config_hash = 0;
};

// Snapshot of whichever networks are given (stage follows from which are non-null).
Checkpoint make_checkpoint(const EnhanceNet* fe, const DenoiseNet* fd, const CheckpointMeta& meta);

// Rebuild networks from a checkpoint; architecture is inferred from the
// stored shapes. Throws FormatError when the required records are missing.
EnhanceNet enhance_net_from(const Checkpoint& ckpt);
std::optional<DenoiseNet> denoise_net_from(const Checkpoint& ckpt);

// Copies matching records into `params`; every parameter must be present
// with the same shape.
void load_parameters(const Checkpoint& ckpt, const NamedParams<float>& params);

}  // namespace selfen
