#include "selfen/image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "selfen/error.hpp"

namespace selfen {

ImageBuffer::ImageBuffer(std::size_t w, std::size_t h, float fill)
    : width(w), height(h), data(kChannels * w * h, fill) {}

namespace {

constexpr unsigned char kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// libpng reports errors through longjmp; these helpers keep every C++ object
// with a destructor outside the setjmp frames.
struct PngSource {
    const unsigned char* data;
    std::size_t size;
    std::size_t pos;
};

struct PngDecoded {
    png_uint_32 width = 0;
    png_uint_32 height = 0;
    int depth = 8;
    std::vector<unsigned char> pixels;  // interleaved RGB, big-endian samples when depth 16
    char error[256] = {0};
};

void png_error_fn(png_structp png, png_const_charp msg) {
    auto* out = static_cast<PngDecoded*>(png_get_error_ptr(png));
    if (out) std::snprintf(out->error, sizeof(out->error), "%s", msg);
    png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

void png_read_fn(png_structp png, png_bytep dst, png_size_t n) {
    auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
    if (src->size - src->pos < n) png_error(png, "unexpected end of file");
    std::memcpy(dst, src->data + src->pos, n);
    src->pos += n;
}

bool png_decode_raw(PngSource* src, PngDecoded* out) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, out, png_error_fn, png_warning_fn);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_set_read_fn(png, src, png_read_fn);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);
    out->width = png_get_image_width(png, info);
    out->height = png_get_image_height(png, info);
    out->depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    out->pixels.resize(rowbytes * out->height);
    std::vector<png_bytep> rows(out->height);
    for (png_uint_32 y = 0; y < out->height; ++y) rows[y] = out->pixels.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

ImageBuffer decode_png(const std::vector<unsigned char>& bytes, const std::string& name) {
    PngSource src{bytes.data(), bytes.size(), 0};
    PngDecoded raw;
    if (!png_decode_raw(&src, &raw))
        throw CorruptFileError("corrupt PNG '" + name + "': " + (raw.error[0] ? raw.error : "decoder failure"));
    if (raw.width == 0 || raw.height == 0) throw CorruptFileError("PNG '" + name + "' has zero size");
    ImageBuffer img(raw.width, raw.height);
    img.bit_depth = raw.depth;
    const std::size_t n = img.plane();
    if (raw.depth == 16) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < 3; ++c) {
                const auto* p = raw.pixels.data() + (i * 3 + c) * 2;
                img.data[c * n + i] = static_cast<float>(((p[0] << 8) | p[1]) / 65535.0);
            }
    } else {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < 3; ++c)
                img.data[c * n + i] = static_cast<float>(raw.pixels[i * 3 + c] / 255.0);
    }
    return img;
}

// Binary PPM: "P6" <ws> width <ws> height <ws> maxval <single ws> samples.
ImageBuffer decode_ppm(const std::vector<unsigned char>& bytes, const std::string& name) {
    std::size_t pos = 2;
    auto next_number = [&]() -> unsigned long {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw CorruptFileError("malformed PPM header in '" + name + "'");
        unsigned long v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos++] - '0');
            if (v > (1ul << 24)) throw CorruptFileError("PPM header value too large in '" + name + "'");
        }
        return v;
    };
    const auto w = next_number();
    const auto h = next_number();
    const auto maxval = next_number();
    if (w == 0 || h == 0 || maxval == 0 || maxval > 65535)
        throw CorruptFileError("invalid PPM header in '" + name + "'");
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw CorruptFileError("malformed PPM header in '" + name + "'");
    ++pos;
    const std::size_t bps = maxval > 255 ? 2 : 1;
    const std::size_t n = static_cast<std::size_t>(w) * h;
    if (bytes.size() - pos < n * 3 * bps) throw CorruptFileError("truncated PPM '" + name + "'");
    ImageBuffer img(w, h);
    img.bit_depth = bps == 2 ? 16 : 8;
    const double inv = 1.0 / static_cast<double>(maxval);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < 3; ++c) {
            const auto* p = bytes.data() + pos + (i * 3 + c) * bps;
            const unsigned v = bps == 2 ? (p[0] << 8) | p[1] : p[0];
            if (v > maxval) throw CorruptFileError("PPM sample exceeds maxval in '" + name + "'");
            img.data[c * n + i] = static_cast<float>(v * inv);
        }
    return img;
}

void png_write_fn(png_structp png, png_bytep src, png_size_t n) {
    auto* out = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
    out->insert(out->end(), src, src + n);
}

void png_flush_fn(png_structp) {}

bool png_encode_raw(const unsigned char* pixels, png_uint_32 w, png_uint_32 h, int channels, int depth,
                    std::vector<unsigned char>* out, PngDecoded* err) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, err, png_error_fn, png_warning_fn);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_set_write_fn(png, out, png_write_fn, png_flush_fn);
    png_set_IHDR(png, info, w, h, depth, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(w) * channels * (depth / 8);
    for (png_uint_32 y = 0; y < h; ++y) png_write_row(png, const_cast<png_bytep>(pixels + y * stride));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

std::vector<unsigned char> encode_interleaved(const std::vector<float>& planar, std::size_t w, std::size_t h,
                                              int channels, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw FormatError("PNG bit depth must be 8 or 16");
    if (w == 0 || h == 0) throw ShapeError("cannot encode an empty image");
    const std::size_t n = w * h;
    const std::size_t bps = bit_depth / 8;
    std::vector<unsigned char> pixels(n * channels * bps);
    for (std::size_t i = 0; i < n; ++i)
        for (int c = 0; c < channels; ++c) {
            const auto q = quantize(planar[c * n + i], bit_depth);
            auto* p = pixels.data() + (i * channels + c) * bps;
            if (bps == 2) {
                p[0] = static_cast<unsigned char>(q >> 8);
                p[1] = static_cast<unsigned char>(q & 0xff);
            } else {
                p[0] = static_cast<unsigned char>(q);
            }
        }
    std::vector<unsigned char> out;
    PngDecoded err;
    if (!png_encode_raw(pixels.data(), static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), channels,
                        bit_depth, &out, &err))
        throw IoError(std::string("PNG encoding failed: ") + (err.error[0] ? err.error : "encoder failure"));
    return out;
}

}  // namespace

std::uint16_t quantize(float v, int bit_depth) {
    const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
    const double c = std::isnan(v) ? 0.0 : std::clamp(static_cast<double>(v), 0.0, 1.0);
    return static_cast<std::uint16_t>(std::floor(c * maxv + 0.5));
}

ImageBuffer decode_image(const std::vector<unsigned char>& bytes, const std::string& name) {
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) return decode_png(bytes, name);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes, name);
    throw FormatError("unsupported image format: '" + name + "' (expected PNG or binary PPM)");
}

ImageBuffer load_image(const std::filesystem::path& path) {
    auto img = decode_image(read_file(path), path.string());
    img.path = path;
    return img;
}

std::vector<unsigned char> encode_png(const ImageBuffer& img, int bit_depth) {
    if (img.data.size() != ImageBuffer::kChannels * img.plane()) throw ShapeError("image buffer size mismatch");
    return encode_interleaved(img.data, img.width, img.height, 3, bit_depth);
}

void save_image(const std::filesystem::path& path, const ImageBuffer& img, int bit_depth) {
    write_file(path, encode_png(img, bit_depth));
}

void save_gray_image(const std::filesystem::path& path, const std::vector<float>& values, std::size_t width,
                     std::size_t height, int bit_depth) {
    if (values.size() != width * height) throw ShapeError("gray image buffer size mismatch");
    write_file(path, encode_interleaved(values, width, height, 1, bit_depth));
}

Tensor images_to_tensor(const std::vector<const ImageBuffer*>& images) {
    if (images.empty()) throw ShapeError("images_to_tensor: no images");
    const auto w = images.front()->width;
    const auto h = images.front()->height;
    std::vector<float> values;
    values.reserve(images.size() * 3 * w * h);
    for (const auto* img : images) {
        if (img->width != w || img->height != h)
            throw ShapeError("images_to_tensor: images differ in size");
        values.insert(values.end(), img->data.begin(), img->data.end());
    }
    return Tensor::from_vector({images.size(), 3, h, w}, std::move(values));
}

Tensor image_to_tensor(const ImageBuffer& img) { return images_to_tensor({&img}); }

ImageBuffer tensor_to_image(const Tensor& t, std::size_t index) {
    if (t.rank() != 4 || t.dim(1) != 3 || index >= t.dim(0))
        throw ShapeError("tensor_to_image: expected B x 3 x H x W, got " + shape_str(t.shape()));
    ImageBuffer img(t.dim(3), t.dim(2));
    const auto src = t.data();
    const std::size_t n = img.data.size();
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(index * n),
              src.begin() + static_cast<std::ptrdiff_t>((index + 1) * n), img.data.begin());
    return img;
}

}  // namespace selfen
