#include "selfen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "json.hpp"

#include "selfen/error.hpp"

namespace selfen {

namespace {

void require_same_size(const ImageBuffer& a, const ImageBuffer& b, const char* what) {
    if (a.width != b.width || a.height != b.height)
        throw ShapeError(std::string(what) + ": image sizes differ (" + std::to_string(a.width) + "x" +
                         std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
                         std::to_string(b.height) + ")");
}

std::vector<double> luma(const ImageBuffer& img) {
    const std::size_t n = img.plane();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = 0.299 * img.data[i] + 0.587 * img.data[n + i] + 0.114 * img.data[2 * n + i];
    return y;
}

// Valid-region separable filtering of a row-major w x h field.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t w, std::size_t h,
                                 const std::vector<double>& k) {
    const std::size_t r = k.size();
    const std::size_t ow = w - r + 1;
    const std::size_t oh = h - r + 1;
    std::vector<double> tmp(ow * h);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0;
            for (std::size_t i = 0; i < r; ++i) s += k[i] * src[y * w + x + i];
            tmp[y * ow + x] = s;
        }
    std::vector<double> out(ow * oh);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double s = 0;
            for (std::size_t i = 0; i < r; ++i) s += k[i] * tmp[(y + i) * ow + x];
            out[y * ow + x] = s;
        }
    return out;
}

double srgb_decode(double c) { return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4); }

double lab_f(double t) {
    constexpr double d = 6.0 / 29.0;
    return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.0 / 29.0;
}

double deg(double rad) { return rad * 180.0 / std::numbers::pi; }
double rad(double deg) { return deg * std::numbers::pi / 180.0; }

std::string fmt(const std::optional<double>& v) {
    if (!v) return "";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", *v);
    return buf;
}

}  // namespace

double psnr(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_size(a, b, "psnr");
    double s = 0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = static_cast<double>(a.data[i]) - b.data[i];
        s += d * d;
    }
    const double mse = s / static_cast<double>(a.data.size());
    if (mse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_size(a, b, "ssim");
    constexpr std::size_t kWin = 11;
    constexpr double kSigma = 1.5;
    if (a.width < kWin || a.height < kWin)
        throw ShapeError("ssim: images must be at least 11x11, got " + std::to_string(a.width) + "x" +
                         std::to_string(a.height));
    std::vector<double> k(kWin);
    double ksum = 0;
    for (std::size_t i = 0; i < kWin; ++i) {
        const double x = static_cast<double>(i) - 5.0;
        k[i] = std::exp(-x * x / (2 * kSigma * kSigma));
        ksum += k[i];
    }
    for (auto& v : k) v /= ksum;
    const auto x = luma(a);
    const auto y = luma(b);
    std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        xx[i] = x[i] * x[i];
        yy[i] = y[i] * y[i];
        xy[i] = x[i] * y[i];
    }
    const auto w = a.width;
    const auto h = a.height;
    const auto mx = filter_valid(x, w, h, k);
    const auto my = filter_valid(y, w, h, k);
    const auto sxx = filter_valid(xx, w, h, k);
    const auto syy = filter_valid(yy, w, h, k);
    const auto sxy = filter_valid(xy, w, h, k);
    constexpr double c1 = 0.01 * 0.01;
    constexpr double c2 = 0.03 * 0.03;
    double total = 0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
        const double vx = sxx[i] - mx[i] * mx[i];
        const double vy = syy[i] - my[i] * my[i];
        const double cov = sxy[i] - mx[i] * my[i];
        total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
                 ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return total / static_cast<double>(mx.size());
}

Lab srgb_to_lab(double r, double g, double b) {
    const double rl = srgb_decode(r), gl = srgb_decode(g), bl = srgb_decode(b);
    const double X = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
    const double Y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
    const double Z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
    constexpr double xn = 0.95047, yn = 1.0, zn = 1.08883;
    const double fx = lab_f(X / xn), fy = lab_f(Y / yn), fz = lab_f(Z / zn);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

double delta_e2000(const Lab& p, const Lab& q) {
    const double L1 = p[0], a1 = p[1], b1 = p[2];
    const double L2 = q[0], a2 = q[1], b2 = q[2];
    const double C1 = std::hypot(a1, b1);
    const double C2 = std::hypot(a2, b2);
    const double Cbar = (C1 + C2) / 2;
    const double Cbar7 = std::pow(Cbar, 7);
    const double G = 0.5 * (1 - std::sqrt(Cbar7 / (Cbar7 + std::pow(25.0, 7))));
    const double a1p = (1 + G) * a1;
    const double a2p = (1 + G) * a2;
    const double C1p = std::hypot(a1p, b1);
    const double C2p = std::hypot(a2p, b2);
    auto hue = [](double b, double a) {
        if (a == 0 && b == 0) return 0.0;
        double h = deg(std::atan2(b, a));
        return h < 0 ? h + 360 : h;
    };
    const double h1p = hue(b1, a1p);
    const double h2p = hue(b2, a2p);

    const double dLp = L2 - L1;
    const double dCp = C2p - C1p;
    double dhp = 0;
    if (C1p * C2p != 0) {
        dhp = h2p - h1p;
        if (dhp > 180) dhp -= 360;
        else if (dhp < -180) dhp += 360;
    }
    const double dHp = 2 * std::sqrt(C1p * C2p) * std::sin(rad(dhp / 2));

    const double Lbarp = (L1 + L2) / 2;
    const double Cbarp = (C1p + C2p) / 2;
    double hbarp = h1p + h2p;
    if (C1p * C2p != 0) {
        if (std::abs(h1p - h2p) <= 180) hbarp /= 2;
        else if (h1p + h2p < 360) hbarp = (hbarp + 360) / 2;
        else hbarp = (hbarp - 360) / 2;
    }
    const double T = 1 - 0.17 * std::cos(rad(hbarp - 30)) + 0.24 * std::cos(rad(2 * hbarp)) +
                     0.32 * std::cos(rad(3 * hbarp + 6)) - 0.20 * std::cos(rad(4 * hbarp - 63));
    const double dtheta = 30 * std::exp(-std::pow((hbarp - 275) / 25, 2));
    const double Cbarp7 = std::pow(Cbarp, 7);
    const double RC = 2 * std::sqrt(Cbarp7 / (Cbarp7 + std::pow(25.0, 7)));
    const double l50 = (Lbarp - 50) * (Lbarp - 50);
    const double SL = 1 + 0.015 * l50 / std::sqrt(20 + l50);
    const double SC = 1 + 0.045 * Cbarp;
    const double SH = 1 + 0.015 * Cbarp * T;
    const double RT = -std::sin(rad(2 * dtheta)) * RC;
    const double tl = dLp / SL, tc = dCp / SC, th = dHp / SH;
    return std::sqrt(tl * tl + tc * tc + th * th + RT * tc * th);
}

double ciede2000(const ImageBuffer& a, const ImageBuffer& b) {
    require_same_size(a, b, "ciede2000");
    const std::size_t n = a.plane();
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto la = srgb_to_lab(a.data[i], a.data[n + i], a.data[2 * n + i]);
        const auto lb = srgb_to_lab(b.data[i], b.data[n + i], b.data[2 * n + i]);
        s += delta_e2000(la, lb);
    }
    return s / static_cast<double>(n);
}

std::vector<float> lightness(const ImageBuffer& img) {
    const std::size_t n = img.plane();
    std::vector<float> out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = std::max({img.data[i], img.data[n + i], img.data[2 * n + i]});
    return out;
}

ImageBuffer downsample_for_loe(const ImageBuffer& img, std::size_t side) {
    const std::size_t shorter = std::min(img.width, img.height);
    if (shorter <= side) return img;
    const double r = static_cast<double>(side) / static_cast<double>(shorter);
    const auto ow = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(img.width * r)));
    const auto oh = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(img.height * r)));
    ImageBuffer out(ow, oh);
    for (std::size_t c = 0; c < ImageBuffer::kChannels; ++c)
        for (std::size_t y = 0; y < oh; ++y) {
            const auto sy = std::min(img.height - 1, y * img.height / oh);
            for (std::size_t x = 0; x < ow; ++x) {
                const auto sx = std::min(img.width - 1, x * img.width / ow);
                out.at(c, y, x) = img.at(c, sy, sx);
            }
        }
    return out;
}

double loe_from_lightness(const std::vector<float>& ref, const std::vector<float>& test) {
    if (ref.size() != test.size()) throw ShapeError("loe: lightness vectors differ in length");
    if (ref.empty()) return 0.0;
    std::uint64_t flips = 0;
    const std::size_t m = ref.size();
    for (std::size_t p = 0; p < m; ++p)
        for (std::size_t q = 0; q < m; ++q) flips += (ref[p] >= ref[q]) != (test[p] >= test[q]);
    return static_cast<double>(flips) / static_cast<double>(m);
}

double loe(const ImageBuffer& original, const ImageBuffer& enhanced) {
    require_same_size(original, enhanced, "loe");
    return loe_from_lightness(lightness(downsample_for_loe(original)), lightness(downsample_for_loe(enhanced)));
}

MetricRow MetricReport::mean() const {
    MetricRow out;
    out.image = "MEAN";
    auto avg = [this](std::optional<double> MetricRow::*field) -> std::optional<double> {
        double s = 0;
        std::size_t n = 0;
        for (const auto& r : rows)
            if (r.*field) {
                s += *(r.*field);
                ++n;
            }
        if (n == 0) return std::nullopt;
        return s / static_cast<double>(n);
    };
    out.psnr = avg(&MetricRow::psnr);
    out.ssim = avg(&MetricRow::ssim);
    out.ciede2000 = avg(&MetricRow::ciede2000);
    out.loe = avg(&MetricRow::loe);
    return out;
}

void MetricReport::write_csv(std::ostream& out) const {
    out << "image,psnr,ssim,ciede2000,loe\n";
    auto line = [&out](const MetricRow& r) {
        out << r.image << ',' << fmt(r.psnr) << ',' << fmt(r.ssim) << ',' << fmt(r.ciede2000) << ',' << fmt(r.loe)
            << '\n';
    };
    for (const auto& r : rows) line(r);
    line(mean());
}

std::string MetricReport::metadata_json() const {
    nlohmann::json j;
    j["images"] = rows.size();
    j["psnr"] = {{"peak", 1.0}, {"cap_db", kPsnrCap}};
    j["ssim"] = {{"channel", "rec601_luma"}, {"window", 11}, {"sigma", 1.5}, {"k1", 0.01}, {"k2", 0.03},
                 {"dynamic_range", 1.0}, {"region", "valid"}};
    j["ciede2000"] = {{"colorspace", "srgb_d65"}, {"kL", 1}, {"kC", 1}, {"kH", 1}};
    j["loe"] = {{"lightness", "max_rgb"}, {"downsample", "nearest"}, {"short_side", kLoeSide},
                {"normalisation", "flip_count_over_pixel_count"}};
    return j.dump(2);
}

}  // namespace selfen
