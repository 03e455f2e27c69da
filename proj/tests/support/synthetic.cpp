#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace selfen::testing {

namespace fs = std::filesystem;

namespace {

// Sum of a few random low-frequency cosines, scaled to [0, 1].
std::vector<double> smooth_plane(Rng& rng, std::size_t n) {
    std::vector<double> v(n * n, 0.0);
    const int waves = 4;
    for (int i = 0; i < waves; ++i) {
        const double fx = rng.uniform(0.2, 2.0) * 2 * std::numbers::pi / static_cast<double>(n);
        const double fy = rng.uniform(0.2, 2.0) * 2 * std::numbers::pi / static_cast<double>(n);
        const double ph = rng.uniform(0, 2 * std::numbers::pi);
        const double amp = rng.uniform(0.5, 1.0);
        for (std::size_t y = 0; y < n; ++y)
            for (std::size_t x = 0; x < n; ++x) v[y * n + x] += amp * std::cos(fx * x + fy * y + ph);
    }
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double a = *lo, b = *hi;
    for (auto& e : v) e = (e - a) / std::max(b - a, 1e-12);
    return v;
}

}  // namespace

double mean_value(const ImageBuffer& img) {
    double s = 0;
    for (float v : img.data) s += v;
    return s / static_cast<double>(img.data.size());
}

ImageBuffer smooth_field(Rng& rng, const SyntheticOptions& opt) {
    const std::size_t n = opt.size;
    ImageBuffer img(n, n);
    const auto shared = smooth_plane(rng, n);
    const double target = rng.uniform(opt.mean_lo, opt.mean_hi);
    const double contrast = rng.uniform(0.3, 0.6);
    for (std::size_t c = 0; c < 3; ++c) {
        const auto own = smooth_plane(rng, n);
        const double tint = rng.uniform(-0.08, 0.08);
        for (std::size_t i = 0; i < n * n; ++i) {
            const double v = 0.7 * shared[i] + 0.3 * own[i] - 0.5;
            img.data[c * n * n + i] = static_cast<float>(std::clamp(target + tint + contrast * v, 0.0, 1.0));
        }
    }
    // Re-centre on the drawn mean after clamping.
    const double shift = target - mean_value(img);
    for (auto& v : img.data) v = static_cast<float>(std::clamp(v + shift, 0.0, 1.0));
    return img;
}

ImageBuffer darken(const ImageBuffer& w, Rng& rng, const SyntheticOptions& opt) {
    ImageBuffer out = w;
    const double g = rng.uniform(opt.gamma_lo, opt.gamma_hi);
    for (auto& v : out.data) {
        const double d = std::pow(static_cast<double>(v), g) + opt.noise_sigma * rng.normal();
        v = static_cast<float>(std::clamp(d, 0.0, 1.0));
    }
    return out;
}

SyntheticSet make_synthetic_set(std::uint64_t seed, std::size_t train, std::size_t test, const SyntheticOptions& opt) {
    Rng rng(seed);
    SyntheticSet set;
    for (std::size_t i = 0; i < train; ++i) set.welllit_train.push_back(smooth_field(rng, opt));
    for (std::size_t i = 0; i < test; ++i) set.welllit_test.push_back(smooth_field(rng, opt));
    for (std::size_t i = 0; i < train; ++i) set.lowlight_train.push_back(darken(smooth_field(rng, opt), rng, opt));
    for (std::size_t i = 0; i < test; ++i) set.lowlight_test.push_back(darken(smooth_field(rng, opt), rng, opt));
    return set;
}

void write_synthetic_set(const SyntheticSet& set, const fs::path& root) {
    auto dump = [&root](const std::vector<ImageBuffer>& imgs, const char* sub) {
        const auto dir = root / sub;
        fs::create_directories(dir);
        for (std::size_t i = 0; i < imgs.size(); ++i) {
            char name[32];
            std::snprintf(name, sizeof(name), "%03zu.png", i);
            save_image(dir / name, imgs[i]);
        }
    };
    dump(set.lowlight_train, "lowlight");
    dump(set.welllit_train, "welllit");
    dump(set.lowlight_test, "lowlight_test");
    dump(set.welllit_test, "welllit_test");
}

}  // namespace selfen::testing
