#include <doctest.h>

#include <cmath>
#include <vector>

#include "dmfnet/ops.hpp"
#include "support/reference_ops.hpp"

using namespace dmfnet;

TEST_SUITE_BEGIN("conv");

TEST_CASE("3x3 all-ones window sums to 9") {
    Tensor x(1, 1, 3, 3, 1.0f);
    Tensor w(1, 1, 3, 3, 1.0f);
    std::vector<float> b{0.0f};
    auto out = conv2d_forward(x, w, b, ConvSpec{3, 1, 0, 1, 1});
    REQUIRE(out.size() == 1);
    CHECK(out.v[0] == doctest::Approx(9.0f));
}

TEST_CASE("conv1 produces 64 feature maps at 64x64") {
    Tensor x(1, 1, 64, 64, 0.5f);
    Tensor w(64, 1, 5, 5, 0.01f);
    std::vector<float> b(64, 0.0f);
    auto out = conv2d_forward(x, w, b, ConvSpec{5, 1, 2, 1, 64});
    CHECK(out.n == 1);
    CHECK(out.c == 64);
    CHECK(out.h == 64);
    CHECK(out.w == 64);
}

TEST_CASE("matches the naive nested-loop reference on random instances") {
    Rng rng(7);
    for (int trial = 0; trial < 40; ++trial) {
        int n = 1 + rng.uniform_int(3);
        int ic = 1 + rng.uniform_int(4);
        int oc = 1 + rng.uniform_int(5);
        int h = 3 + rng.uniform_int(6);
        int w = 3 + rng.uniform_int(6);
        int k = 1 + rng.uniform_int(3);
        int s = 1 + rng.uniform_int(2);
        int p = rng.uniform_int(2);
        if (h + 2 * p - k < 0 || w + 2 * p - k < 0) continue;
        auto x = refops::random_tensor(n, ic, h, w, rng);
        auto wt = refops::random_tensor(oc, ic, k, k, rng);
        std::vector<float> b(oc);
        for (auto& v : b) v = static_cast<float>(rng.gaussian());
        auto got = conv2d_forward(x, wt, b, ConvSpec{k, s, p, ic, oc});
        auto want = refops::naive_conv2d(x, wt, b, s, p);
        REQUIRE(got.size() == want.size());
        for (size_t i = 0; i < got.size(); ++i)
            CHECK(std::abs(got.v[i] - want.v[i]) < 1e-5);
    }
}

TEST_CASE("linearity with zero bias") {
    Rng rng(11);
    auto x = refops::random_tensor(2, 3, 6, 6, rng);
    auto y = refops::random_tensor(2, 3, 6, 6, rng);
    auto w = refops::random_tensor(4, 3, 3, 3, rng);
    std::vector<float> b(4, 0.0f);
    ConvSpec spec{3, 1, 1, 3, 4};
    const float alpha = 0.7f, beta = -1.3f;
    Tensor mix(2, 3, 6, 6);
    for (size_t i = 0; i < mix.size(); ++i) mix.v[i] = alpha * x.v[i] + beta * y.v[i];
    auto lhs = conv2d_forward(mix, w, b, spec);
    auto fx = conv2d_forward(x, w, b, spec);
    auto fy = conv2d_forward(y, w, b, spec);
    for (size_t i = 0; i < lhs.size(); ++i)
        CHECK(std::abs(lhs.v[i] - (alpha * fx.v[i] + beta * fy.v[i])) < 1e-4);
}

TEST_CASE("zero cotangent gives exactly-zero gradients") {
    Rng rng(13);
    auto x = refops::random_tensor(2, 3, 5, 5, rng);
    auto w = refops::random_tensor(4, 3, 3, 3, rng);
    ConvSpec spec{3, 1, 1, 3, 4};
    Tensor gz(2, 4, 5, 5, 0.0f);
    auto g = conv2d_backward(x, w, gz, spec);
    for (float v : g.input.v) CHECK(v == 0.0f);
    for (float v : g.weights.v) CHECK(v == 0.0f);
    for (float v : g.bias) CHECK(v == 0.0f);
}

TEST_CASE("hand chain rule on the 1x1-kernel case") {
    // 1x1x3x3 ones input, single 1x1 kernel of value 2, grad_out all ones:
    // d/dw = sum(input) = 9, d/dx = w = 2 everywhere
    Tensor x(1, 1, 3, 3, 1.0f);
    Tensor w(1, 1, 1, 1, 2.0f);
    Tensor go(1, 1, 3, 3, 1.0f);
    auto g = conv2d_backward(x, w, go, ConvSpec{1, 1, 0, 1, 1});
    CHECK(g.weights.v[0] == doctest::Approx(9.0f));
    for (float v : g.input.v) CHECK(v == doctest::Approx(2.0f));
    CHECK(g.bias[0] == doctest::Approx(9.0f));
}

TEST_CASE("dimension mismatches are rejected") {
    Tensor x(1, 2, 4, 4);
    Tensor w(3, 2, 3, 3);
    std::vector<float> b(3, 0.0f);
    CHECK_THROWS_AS(conv2d_forward(x, w, b, ConvSpec{3, 1, 1, 4, 3}), Error);
    CHECK_THROWS_AS(conv2d_forward(x, w, b, ConvSpec{5, 1, 1, 2, 3}), Error);
    Tensor bad_go(1, 3, 9, 9);
    CHECK_THROWS_AS(conv2d_backward(x, w, bad_go, ConvSpec{3, 1, 1, 2, 3}), Error);
}

TEST_SUITE_END();
