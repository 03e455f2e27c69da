#pragma once

// Image decode/encode (PNG 8/16-bit, binary PPM) and tensor conversion.

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "selfen/tensor.hpp"

namespace selfen {

// Planar RGB, channel-major (c * H * W + y * W + x), values in [0, 1].
struct ImageBuffer {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<float> data;
    std::filesystem::path path;
    int bit_depth = 8;

    static constexpr std::size_t kChannels = 3;

    ImageBuffer() = default;
    ImageBuffer(std::size_t w, std::size_t h, float fill = 0.0f);

    std::size_t plane() const { return width * height; }
    float& at(std::size_t c, std::size_t y, std::size_t x) { return data[c * plane() + y * width + x]; }
    float at(std::size_t c, std::size_t y, std::size_t x) const { return data[c * plane() + y * width + x]; }
};

// Format is chosen by file signature, not extension. Throws IoError,
// FormatError (unsupported) or CorruptFileError.
ImageBuffer load_image(const std::filesystem::path& path);
ImageBuffer decode_image(const std::vector<unsigned char>& bytes, const std::string& name = "<memory>");

// Clamp to [0, 1], quantize with round-half-up, write RGB PNG.
void save_image(const std::filesystem::path& path, const ImageBuffer& img, int bit_depth = 8);
// Single-channel PNG from row-major values in [0, 1].
void save_gray_image(const std::filesystem::path& path, const std::vector<float>& values, std::size_t width,
                     std::size_t height, int bit_depth = 8);

std::vector<unsigned char> encode_png(const ImageBuffer& img, int bit_depth = 8);

std::uint16_t quantize(float v, int bit_depth);

// Stack equally sized images into B x 3 x H x W.
Tensor images_to_tensor(const std::vector<const ImageBuffer*>& images);
Tensor image_to_tensor(const ImageBuffer& img);
// Batch item `index` of a B x 3 x H x W tensor.
ImageBuffer tensor_to_image(const Tensor& t, std::size_t index = 0);

}  // namespace selfen
