#include <doctest.h>

#include <cmath>
#include <sstream>

#include "json.hpp"
#include "selfen/error.hpp"
#include "selfen/metrics.hpp"
#include "selfen/rng.hpp"
#include "suites.hpp"

using namespace selfen;

namespace {

ImageBuffer random_image(Rng& rng, std::size_t w, std::size_t h) {
    ImageBuffer img(w, h);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    return img;
}

}  // namespace

TEST_CASE("metric oracles and identities") {
    for (const auto& c : selfen::testing::metric_oracle_cases()) {
        INFO(c.name << ": value=" << c.value << " expected=" << c.expected);
        CHECK(c.pass());
    }
}

TEST_CASE("symmetry") {
    Rng rng(1);
    const auto a = random_image(rng, 16, 14);
    const auto b = random_image(rng, 16, 14);
    CHECK(psnr(a, b) == psnr(b, a));
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)).epsilon(1e-14));
    CHECK(ciede2000(a, b) == doctest::Approx(ciede2000(b, a)).epsilon(1e-12));
}

TEST_CASE("size errors") {
    const ImageBuffer a(12, 12), b(12, 13), tiny(10, 20);
    CHECK_THROWS_AS(psnr(a, b), ShapeError);
    CHECK_THROWS_AS(ciede2000(a, b), ShapeError);
    CHECK_THROWS_AS(loe(a, b), ShapeError);
    CHECK_THROWS_AS(ssim(tiny, tiny), ShapeError);
}

TEST_CASE("srgb to lab anchors") {
    const auto white = srgb_to_lab(1, 1, 1);
    CHECK(white[0] == doctest::Approx(100.0).epsilon(1e-4));
    CHECK(std::abs(white[1]) < 1e-3);
    CHECK(std::abs(white[2]) < 1e-3);
    const auto black = srgb_to_lab(0, 0, 0);
    CHECK(black[0] == doctest::Approx(0.0));
    const auto red = srgb_to_lab(1, 0, 0);
    CHECK(red[0] == doctest::Approx(53.24).epsilon(1e-3));
    CHECK(red[1] == doctest::Approx(80.09).epsilon(1e-3));
    CHECK(red[2] == doctest::Approx(67.20).epsilon(1e-3));
}

TEST_CASE("loe details") {
    CHECK(loe_from_lightness({0.2f, 0.8f}, {0.8f, 0.2f}) == 1.0);
    CHECK(loe_from_lightness({0.1f, 0.5f, 0.9f}, {0.3f, 0.2f, 0.1f}) == doctest::Approx(6.0 / 3.0));
    ImageBuffer img(120, 80);
    const auto small = downsample_for_loe(img);
    CHECK(small.height == 50);
    CHECK(small.width == 75);
    ImageBuffer tiny(30, 20);
    const auto same = downsample_for_loe(tiny);
    CHECK(same.width == 30);
    CHECK(same.height == 20);
    ImageBuffer px(1, 1);
    px.at(0, 0, 0) = 0.2f;
    px.at(1, 0, 0) = 0.7f;
    px.at(2, 0, 0) = 0.1f;
    CHECK(lightness(px)[0] == 0.7f);
}

TEST_CASE("report csv and metadata") {
    MetricReport rep;
    rep.rows.push_back({"a.png", 20.0, 0.5, 3.0, std::nullopt});
    rep.rows.push_back({"b.png", 30.0, 0.7, 5.0, std::nullopt});
    std::ostringstream out;
    rep.write_csv(out);
    CHECK(out.str() ==
          "image,psnr,ssim,ciede2000,loe\n"
          "a.png,20.000000,0.500000,3.000000,\n"
          "b.png,30.000000,0.700000,5.000000,\n"
          "MEAN,25.000000,0.600000,4.000000,\n");
    const auto meta = nlohmann::json::parse(rep.metadata_json());
    CHECK(meta["ssim"]["window"] == 11);
    CHECK(meta.contains("loe"));
}
