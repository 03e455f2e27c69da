#pragma once

// Synthetic unpaired data: smooth well-lit fields and low-light images
// darkened from a disjoint set of such fields.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "selfen/image.hpp"
#include "selfen/rng.hpp"

namespace selfen::testing {

struct SyntheticOptions {
    std::size_t size = 64;
    double mean_lo = 0.4;
    double mean_hi = 0.7;
    double gamma_lo = 2.0;
    double gamma_hi = 4.0;
    double noise_sigma = 0.02;
};

// Smooth random RGB field with mean brightness drawn from [mean_lo, mean_hi].
ImageBuffer smooth_field(Rng& rng, const SyntheticOptions& opt = {});

// W^g + N(0, sigma), clamped, g drawn from [gamma_lo, gamma_hi].
ImageBuffer darken(const ImageBuffer& w, Rng& rng, const SyntheticOptions& opt = {});

struct SyntheticSet {
    std::vector<ImageBuffer> welllit_train;
    std::vector<ImageBuffer> lowlight_train;
    std::vector<ImageBuffer> welllit_test;
    std::vector<ImageBuffer> lowlight_test;
};

// Every low-light image comes from its own well-lit source that is never
// part of the well-lit sets.
SyntheticSet make_synthetic_set(std::uint64_t seed, std::size_t train, std::size_t test,
                                const SyntheticOptions& opt = {});

// Writes lowlight/, welllit/, lowlight_test/, welllit_test/ under `root`.
void write_synthetic_set(const SyntheticSet& set, const std::filesystem::path& root);

double mean_value(const ImageBuffer& img);

}  // namespace selfen::testing
