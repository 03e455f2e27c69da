#include "selfen/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "selfen/error.hpp"

namespace selfen {

namespace fs = std::filesystem;

bool is_supported_image(const fs::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".ppm";
}

std::vector<fs::path> scan_image_dir(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("not a directory: '" + dir.string() + "'");
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && is_supported_image(entry.path())) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    out.erase(std::unique(out.begin(), out.end(),
                          [](const fs::path& a, const fs::path& b) { return a.filename() == b.filename(); }),
              out.end());
    if (out.empty()) throw DataError("no PNG/PPM images found in '" + dir.string() + "'");
    return out;
}

UnpairedDataset scan_unpaired_dirs(const fs::path& lowlight_dir, const fs::path& welllit_dir) {
    return {scan_image_dir(lowlight_dir), scan_image_dir(welllit_dir)};
}

std::vector<ImageBuffer> load_images(const std::vector<fs::path>& paths) {
    std::vector<ImageBuffer> out;
    out.reserve(paths.size());
    for (const auto& p : paths) out.push_back(load_image(p));
    return out;
}

ImagePools load_pools(const UnpairedDataset& dataset) {
    return {load_images(dataset.lowlight), load_images(dataset.welllit)};
}

}  // namespace selfen
