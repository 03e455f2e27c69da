#include <doctest.h>

#include <cmath>
#include <set>

#include "gradcheck.hpp"
#include "random_tensor.hpp"
#include "selfen/error.hpp"
#include "selfen/model.hpp"
#include "selfen/ops.hpp"
#include "selfen/simd/kernels.hpp"

using namespace selfen;
using selfen::testing::random_tensor;

namespace {

template <typename Net>
void set_output_constant(Net& net, float bias) {
    for (auto& w : net.output.weight.mutable_data()) w = 0;
    for (auto& b : net.output.bias.mutable_data()) b = bias;
}

EnhanceNetConfig small_fe() {
    EnhanceNetConfig c;
    c.width = 8;
    c.num_blocks = 2;
    c.reduction = 4;
    return c;
}

DenoiseNetConfig small_fd() {
    DenoiseNetConfig c;
    c.width = 8;
    c.num_blocks = 2;
    c.reduction = 4;
    return c;
}

}  // namespace

TEST_CASE("F_E: shape, open range, determinism") {
    EnhanceNet fe({}, 5);
    Rng rng(1);
    const auto img = random_tensor<float>({2, 3, 9, 7}, rng);
    const auto a = fe(img);
    CHECK(a.shape() == Shape{2, 1, 9, 7});
    for (float v : a.data()) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
    const auto b = fe(img);
    CHECK(std::equal(a.data().begin(), a.data().end(), b.data().begin()));
    EnhanceNet same({}, 5);
    const auto c = same(img);
    CHECK(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
    CHECK_THROWS_AS(fe(random_tensor<float>({1, 1, 4, 4}, rng)), ShapeError);
}

TEST_CASE("F_E: layer names and architecture") {
    EnhanceNet fe;
    std::set<std::string> names;
    for (const auto& [n, p] : fe.named_parameters()) names.insert(n);
    CHECK(names.count("fe.input.weight") == 1);
    CHECK(names.count("fe.feedback.weight") == 1);
    CHECK(names.count("fe.fuse.weight") == 1);
    CHECK(names.count("fe.rcab3.ca.squeeze.weight") == 1);
    CHECK(names.count("fe.rcab4.conv1.weight") == 0);
    CHECK(names.count("fe.output.bias") == 1);
    CHECK(fe.input.weight.shape() == Shape{32, 3, 3, 3});
    CHECK(fe.feedback.weight.shape() == Shape{32, 1, 3, 3});
    CHECK(fe.fuse.weight.shape() == Shape{32, 64, 3, 3});
    CHECK(fe.blocks[0].attention.squeeze.weight.shape() == Shape{4, 32, 1, 1});
    CHECK(fe.output.weight.shape() == Shape{1, 32, 3, 3});
}

TEST_CASE("F_E: zeroed output layer with bias b gives sigmoid(b)") {
    EnhanceNet fe({}, 8);
    Rng rng(2);
    const auto img = random_tensor<float>({1, 3, 6, 6}, rng);
    set_output_constant(fe, 0.0f);
    const auto half = fe(img);
    for (float v : half.data()) CHECK(v == 0.5f);
    set_output_constant(fe, 1.3f);
    const auto m = fe(img);
    for (float v : m.data()) CHECK(v == doctest::Approx(1.0 / (1.0 + std::exp(-1.3))).epsilon(1e-6));
}

TEST_CASE("F_E: two passes, the first fed by the constant initial map") {
    EnhanceNet fe({}, 9);
    Rng rng(3);
    const auto img = random_tensor<float>({1, 3, 8, 8}, rng);
    const auto passes = fe.forward_passes(img);
    REQUIRE(passes.size() == 2);
    // pass 1 recomputed with an explicit constant 1/2.2 map
    const auto feat = fe.input.forward(img);
    auto x = fe.fuse.forward(concat_channels(feat, fe.feedback.forward(Tensor::full({1, 1, 8, 8}, static_cast<float>(1.0 / 2.2)))));
    for (const auto& b : fe.blocks) x = b.forward(x);
    const auto p1 = fe.output.forward(x);
    for (std::size_t i = 0; i < p1.numel(); ++i) CHECK(passes[0].data()[i] == p1.data()[i]);
    // with the feedback branch zeroed both passes coincide
    fe.feedback.zero_params();
    const auto z = fe.forward_passes(img);
    for (std::size_t i = 0; i < p1.numel(); ++i) CHECK(z[0].data()[i] == z[1].data()[i]);
    fe.set_feedback_count(0);
    CHECK(fe.forward_passes(img).size() == 1);
}

TEST_CASE("F_E ablation modes build and run") {
    Rng rng(4);
    const auto img = random_tensor<float>({1, 3, 5, 5}, rng);
    EnhanceNetConfig none;
    none.feedback_mode = FeedbackMode::kNone;
    EnhanceNet a(none, 1);
    CHECK(a.forward_passes(img).size() == 1);
    CHECK_FALSE(a.feedback.weight.defined());
    EnhanceNetConfig in;
    in.feedback_mode = FeedbackMode::kInput;
    EnhanceNet b(in, 1);
    CHECK(b.input.weight.shape() == Shape{32, 4, 3, 3});
    CHECK(b(img).shape() == Shape{1, 1, 5, 5});
}

TEST_CASE("F_D: shape, determinism, sensitivity to eta") {
    DenoiseNet fd({}, 11);
    Rng rng(5);
    const auto img = random_tensor<float>({2, 3, 8, 6}, rng);
    const auto eta = random_tensor<float>({2, 1, 8, 6}, rng, 0.3, 0.9);
    const auto y = fd(img, eta);
    CHECK(y.shape() == img.shape());
    for (float v : y.data()) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
    const auto y2 = fd(img, eta);
    CHECK(std::equal(y.data().begin(), y.data().end(), y2.data().begin()));
    const auto eta2 = random_tensor<float>({2, 1, 8, 6}, rng, 0.3, 0.9);
    const auto y3 = fd(img, eta2);
    double diff = 0;
    for (std::size_t i = 0; i < y.numel(); ++i) diff += std::abs(y.data()[i] - y3.data()[i]);
    CHECK(diff > 1e-4);
    CHECK_THROWS_AS(fd(img, random_tensor<float>({2, 1, 8, 5}, rng)), ShapeError);
    std::set<std::string> names;
    for (const auto& [n, p] : fd.named_parameters()) names.insert(n);
    CHECK(names.count("fd.eta.weight") == 1);
    CHECK(fd.output.weight.shape() == Shape{3, 32, 3, 3});
}

TEST_CASE("pipeline: eta of ones returns the denoised image") {
    EnhanceNet fe({}, 1);
    DenoiseNet fd({}, 2);
    set_output_constant(fe, 40.0f);
    Rng rng(6);
    const auto img = random_tensor<float>({1, 3, 6, 6}, rng);
    const auto r = enhance_pipeline(fe, &fd, img);
    for (float v : r.eta.values.data()) REQUIRE(v == 1.0f);
    for (std::size_t i = 0; i < img.numel(); ++i) CHECK(r.enhanced.data()[i] == r.denoised.data()[i]);
    const auto plain = enhance_pipeline(fe, static_cast<const DenoiseNet*>(nullptr), img);
    for (std::size_t i = 0; i < img.numel(); ++i) CHECK(plain.denoised.data()[i] == img.data()[i]);
}

TEST_CASE("pipeline brightens and matches the scalar exponent oracle") {
    EnhanceNetT<double> fe({}, 1);
    for (auto& w : fe.output.weight.mutable_data()) w = 0;
    for (auto& b : fe.output.bias.mutable_data()) b = std::log(0.75 / 0.25);  // sigmoid = 0.75
    const auto img = Tensor64::full({1, 3, 4, 4}, 0.04);
    const auto r = enhance_pipeline(fe, static_cast<const DenoiseNetT<double>*>(nullptr), img);
    for (double v : r.enhanced.data()) CHECK(v == doctest::Approx(std::pow(0.04, 0.75)).epsilon(1e-12));
    CHECK(r.enhanced.data()[0] == doctest::Approx(0.0894).epsilon(1e-3));
    EnhanceNet fe2({}, 3);
    DenoiseNet fd({}, 4);
    Rng rng(7);
    const auto x = random_tensor<float>({1, 3, 7, 7}, rng);
    const auto r2 = enhance_pipeline(fe2, &fd, x);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(r2.enhanced.data()[i] >= r2.denoised.data()[i]);
}

TEST_CASE("clone is deep and checksum tracks values") {
    EnhanceNet fe({}, 3);
    auto copy = fe.clone();
    CHECK(parameter_checksum(fe.named_parameters()) == parameter_checksum(copy.named_parameters()));
    copy.output.bias.mutable_data()[0] += 1.0f;
    CHECK(parameter_checksum(fe.named_parameters()) != parameter_checksum(copy.named_parameters()));
}

TEST_CASE("forward is bit-identical across SIMD levels") {
    EnhanceNet fe({}, 21);
    DenoiseNet fd({}, 22);
    Rng rng(8);
    const auto img = random_tensor<float>({2, 3, 13, 11}, rng);
    const auto before = simd::active_level();
    simd::set_level(simd::Level::kScalar);
    const auto ref = enhance_pipeline(fe, &fd, img);
    for (auto level : {simd::Level::kAvx2, simd::Level::kAvx512}) {
        if (!simd::level_supported(level)) continue;
        CAPTURE(simd::level_name(level));
        simd::set_level(level);
        const auto r = enhance_pipeline(fe, &fd, img);
        CHECK(std::equal(ref.enhanced.data().begin(), ref.enhanced.data().end(), r.enhanced.data().begin()));
        CHECK(std::equal(ref.eta.values.data().begin(), ref.eta.values.data().end(), r.eta.values.data().begin()));
    }
    simd::set_level(before);
}

TEST_CASE("gradient checks through both networks in float64") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CAPTURE(seed);
        Rng rng(seed * 13);
        selfen::testing::GradCheckOptions opt;
        opt.seed = seed;
        opt.coords = 2;
        EnhanceNetT<double> fe(small_fe(), seed);
        DenoiseNetT<double> fd(small_fd(), seed + 1);
        auto img = random_tensor<double>({1, 3, 5, 5}, rng, 0.05, 0.95, true);
        auto eta = random_tensor<double>({1, 1, 5, 5}, rng, 0.3, 0.9, true);
        const auto t1 = random_tensor<double>({1, 1, 5, 5}, rng);
        const auto t3 = random_tensor<double>({1, 3, 5, 5}, rng);
        auto pe = fe.named_parameters();
        pe.emplace_back("img", img);
        auto r = selfen::testing::gradcheck([&] { return mse(fe(img), t1); }, pe, opt);
        INFO("fe worst " << r.worst);
        CHECK(r.max_rel < 1e-5);
        auto pd = fd.named_parameters();
        pd.emplace_back("img", img);
        pd.emplace_back("eta", eta);
        auto r2 = selfen::testing::gradcheck([&] { return mse(fd(img, eta), t3); }, pd, opt);
        INFO("fd worst " << r2.worst);
        CHECK(r2.max_rel < 1e-5);
    }
}
