#include <doctest.h>

#include <cmath>
#include <vector>

#include "gradcheck.hpp"
#include "random_tensor.hpp"
#include "selfen/error.hpp"
#include "selfen/nn.hpp"
#include "selfen/ops.hpp"

using namespace selfen;
using selfen::testing::random_tensor;

namespace {

double sigm(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Channel attention evaluated with plain loops from the layer's weights.
std::vector<double> ca_loops(const ChannelAttentionT<double>& ca, const Tensor64& x) {
    const std::size_t B = x.dim(0), C = x.dim(1), HW = x.dim(2) * x.dim(3);
    const std::size_t R = ca.squeeze.out_channels();
    const auto xd = x.data();
    const auto w1 = ca.squeeze.weight.data();
    const auto b1 = ca.squeeze.bias.data();
    const auto w2 = ca.excite.weight.data();
    const auto b2 = ca.excite.bias.data();
    std::vector<double> out(x.numel());
    for (std::size_t n = 0; n < B; ++n) {
        std::vector<double> g(C), z(R), s(C);
        for (std::size_t c = 0; c < C; ++c) {
            double acc = 0;
            for (std::size_t p = 0; p < HW; ++p) acc += xd[(n * C + c) * HW + p];
            g[c] = acc / static_cast<double>(HW);
        }
        for (std::size_t r = 0; r < R; ++r) {
            double acc = b1[r];
            for (std::size_t c = 0; c < C; ++c) acc += w1[r * C + c] * g[c];
            z[r] = std::max(acc, 0.0);
        }
        for (std::size_t c = 0; c < C; ++c) {
            double acc = b2[c];
            for (std::size_t r = 0; r < R; ++r) acc += w2[c * R + r] * z[r];
            s[c] = sigm(acc);
        }
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t p = 0; p < HW; ++p) out[(n * C + c) * HW + p] = xd[(n * C + c) * HW + p] * s[c];
    }
    return out;
}

}  // namespace

TEST_CASE("channel attention: zero input gives zero output") {
    ChannelAttentionT<double> ca(16, 8);
    ca.init_params(3);
    const auto y = ca.forward(Tensor64::zeros({2, 16, 3, 3}));
    for (double v : y.data()) CHECK(v == 0.0);
}

TEST_CASE("channel attention: saturated excite bias passes x through") {
    ChannelAttentionT<double> ca(16, 8);
    ca.init_params(3);
    for (auto& b : ca.excite.bias.mutable_data()) b = 60.0;
    Rng rng(2);
    const auto x = random_tensor<double>({1, 16, 4, 4}, rng);
    const auto y = ca.forward(x);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-12));
}

TEST_CASE("channel attention matches a step-by-step composition") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        ChannelAttentionT<double> ca(16, 8);
        ca.init_params(seed);
        Rng rng(seed + 50);
        const auto x = random_tensor<double>({2, 16, 5, 3}, rng, -1, 1);
        const auto y = ca.forward(x);
        const auto ref = ca_loops(ca, x);
        for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.data()[i] == doctest::Approx(ref[i]).epsilon(1e-12));
        const auto s = ca.scales(x);
        for (double v : s.data()) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
    ChannelAttentionT<double> ca(16, 8);
    CHECK_THROWS_AS(ca.forward(Tensor64::zeros({1, 8, 2, 2})), ShapeError);
    CHECK_THROWS_AS(ChannelAttentionT<double>(10, 4), ShapeError);
}

TEST_CASE("RCAB with zero weights is the identity") {
    RcabT<double> block(16, 8);
    Rng rng(9);
    const auto x = random_tensor<double>({1, 16, 5, 6}, rng);
    const auto y = block.forward(x);
    CHECK(y.shape() == x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("RCAB preserves shape and matches manual composition") {
    RcabT<double> block(16, 8);
    block.init_params(12);
    Rng rng(10);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{3, 3}, {7, 2}, {1, 9}}) {
        const auto x = random_tensor<double>({2, 16, h, w}, rng, -1, 1);
        const auto y = block.forward(x);
        CHECK(y.shape() == x.shape());
        const auto f = conv2d(relu(conv2d(x, block.conv1.weight, block.conv1.bias)), block.conv2.weight,
                              block.conv2.bias);
        const auto ca = ca_loops(block.attention, f);
        for (std::size_t i = 0; i < x.numel(); ++i)
            CHECK(y.data()[i] == doctest::Approx(x.data()[i] + ca[i]).epsilon(1e-12));
    }
    CHECK_THROWS_AS(block.forward(Tensor64::zeros({1, 8, 2, 2})), ShapeError);
}

TEST_CASE("init_params: deterministic, zero bias, bounded range") {
    ConvLayer a(32, 32, 3, Activation::kNone), b(32, 32, 3, Activation::kNone);
    a.init_params(77);
    b.init_params(77);
    CHECK(std::equal(a.weight.data().begin(), a.weight.data().end(), b.weight.data().begin()));
    for (float v : a.bias.data()) CHECK(v == 0.0f);
    const double limit = std::sqrt(6.0 / (32.0 * 9.0));
    float lo = 1, hi = -1;
    for (float v : a.weight.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= -limit);
    CHECK(hi <= limit);
    // 9216 draws should cover most of the interval
    CHECK(hi > 0.95 * limit);
    CHECK(lo < -0.95 * limit);
    b.init_params(78);
    CHECK_FALSE(std::equal(a.weight.data().begin(), a.weight.data().end(), b.weight.data().begin()));
}

TEST_CASE("gradient checks for CA and RCAB in float64") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        CAPTURE(seed);
        Rng rng(seed * 7);
        selfen::testing::GradCheckOptions opt;
        opt.seed = seed;

        ChannelAttentionT<double> ca(8, 4);
        ca.init_params(seed);
        auto x = random_tensor<double>({2, 8, 3, 4}, rng, -1, 1, true);
        const auto t = random_tensor<double>({2, 8, 3, 4}, rng);
        NamedParams<double> ps{{"x", x}};
        ca.collect("ca", ps);
        auto r = selfen::testing::gradcheck([&] { return mse(ca.forward(x), t); }, ps, opt);
        INFO("ca worst " << r.worst);
        CHECK(r.max_rel < 1e-5);

        RcabT<double> block(8, 4);
        block.init_params(seed + 100);
        NamedParams<double> pr{{"x", x}};
        block.collect("rcab", pr);
        auto r2 = selfen::testing::gradcheck([&] { return mse(block.forward(x), t); }, pr, opt);
        INFO("rcab worst " << r2.worst);
        CHECK(r2.max_rel < 1e-5);
        CHECK(r2.checked > r2.skipped);
    }
}
