#pragma once

// Unpaired training data: two independent lists of images.

#include <filesystem>
#include <vector>

#include "selfen/image.hpp"

namespace selfen {

struct UnpairedDataset {
    std::vector<std::filesystem::path> lowlight;
    std::vector<std::filesystem::path> welllit;
};

// Loaded pixels for both sides.
struct ImagePools {
    std::vector<ImageBuffer> lowlight;
    std::vector<ImageBuffer> welllit;
};

bool is_supported_image(const std::filesystem::path& path);

// Regular files with a supported extension (.png, .ppm, any case), sorted
// lexicographically by file name. Throws IoError for a missing directory and
// DataError when nothing usable is found.
std::vector<std::filesystem::path> scan_image_dir(const std::filesystem::path& dir);

UnpairedDataset scan_unpaired_dirs(const std::filesystem::path& lowlight_dir,
                                   const std::filesystem::path& welllit_dir);

std::vector<ImageBuffer> load_images(const std::vector<std::filesystem::path>& paths);
ImagePools load_pools(const UnpairedDataset& dataset);

}  // namespace selfen
