#pragma once

// Full-reference (PSNR, SSIM, CIEDE2000) and no-reference-style (LOE)
// quality measures.

#include <array>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "selfen/image.hpp"

namespace selfen {

inline constexpr double kPsnrCap = 100.0;
inline constexpr std::size_t kLoeSide = 50;

// 10 log10(1 / mse), capped at 100 dB. Throws ShapeError on size mismatch.
double psnr(const ImageBuffer& a, const ImageBuffer& b);

// Mean SSIM of the Rec.601 luma over the valid region of an 11x11 Gaussian
// window (sigma 1.5), K1 = 0.01, K2 = 0.03, L = 1. Needs both sides >= 11.
double ssim(const ImageBuffer& a, const ImageBuffer& b);

using Lab = std::array<double, 3>;

// sRGB (D65) -> CIELAB.
Lab srgb_to_lab(double r, double g, double b);
double delta_e2000(const Lab& x, const Lab& y);
// Mean per-pixel CIEDE2000.
double ciede2000(const ImageBuffer& a, const ImageBuffer& b);

// Per-pixel max(R, G, B), row-major.
std::vector<float> lightness(const ImageBuffer& img);
// Nearest-neighbour resize so that the shorter side is `side` (no-op when
// already that small).
ImageBuffer downsample_for_loe(const ImageBuffer& img, std::size_t side = kLoeSide);
// Count of order flips between two equal-length lightness vectors, / m.
double loe_from_lightness(const std::vector<float>& ref, const std::vector<float>& test);
double loe(const ImageBuffer& original, const ImageBuffer& enhanced);

struct MetricRow {
    std::string image;
    std::optional<double> psnr;
    std::optional<double> ssim;
    std::optional<double> ciede2000;
    std::optional<double> loe;
};

struct MetricReport {
    std::vector<MetricRow> rows;

    MetricRow mean() const;
    // Header "image,psnr,ssim,ciede2000,loe", one row per image, then MEAN.
    void write_csv(std::ostream& out) const;
    // Conventions used (window, constants, LOE normalisation) as JSON.
    std::string metadata_json() const;
};

}  // namespace selfen
