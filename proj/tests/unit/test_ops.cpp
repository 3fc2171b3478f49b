#include <doctest.h>

#include <cmath>
#include <vector>

#include "dmfnet/ops.hpp"
#include "support/reference_ops.hpp"

using namespace dmfnet;

TEST_SUITE_BEGIN("ops");

TEST_CASE("relu clamps negatives and keeps positives") {
    Tensor x(1, 1, 1, 3);
    x.v = {-3.0f, 0.0f, 2.0f};
    auto y = relu_forward(x);
    CHECK(y.v[0] == 0.0f);
    CHECK(y.v[1] == 0.0f);
    CHECK(y.v[2] == 2.0f);
}

TEST_CASE("relu is the identity on nonnegative input") {
    Rng rng(3);
    auto x = refops::random_tensor(2, 2, 4, 4, rng);
    for (float& v : x.v) v = std::abs(v);
    auto y = relu_forward(x);
    for (size_t i = 0; i < y.size(); ++i) CHECK(y.v[i] == x.v[i]);
}

TEST_CASE("relu backward masks at and below zero") {
    Tensor x(1, 1, 1, 2);
    x.v = {-1.0f, 5.0f};
    Tensor g(1, 1, 1, 2);
    g.v = {7.0f, 7.0f};
    auto gi = relu_backward(x, g);
    CHECK(gi.v[0] == 0.0f);
    CHECK(gi.v[1] == 7.0f);
}

TEST_CASE("batchnorm train output has zero mean and unit variance") {
    Rng rng(5);
    auto x = refops::random_tensor(4, 2, 5, 5, rng, 3.0);
    for (float& v : x.v) v += 1.5f;
    auto st = BatchNormState::init(2);
    auto r = batchnorm_forward_train(x, st);
    const double m = 4.0 * 25.0;
    for (int ch = 0; ch < 2; ++ch) {
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 25; ++j) {
                double v = r.y.v[(static_cast<size_t>(i) * 2 + ch) * 25 + j];
                sum += v;
                sumsq += v * v;
            }
        double mean = sum / m;
        double var = sumsq / m - mean * mean;
        CHECK(std::abs(mean) <= 1e-4);
        CHECK(std::abs(var - 1.0) <= 1e-3);
    }
    CHECK(r.updated.batches_seen == 1);
}

TEST_CASE("constant channel collapses to the shift") {
    Tensor x(2, 1, 3, 3, 4.25f);
    auto st = BatchNormState::init(1);
    st.shift[0] = -0.75f;
    auto r = batchnorm_forward_train(x, st);
    for (float v : r.y.v) CHECK(v == doctest::Approx(-0.75f).epsilon(1e-4));
}

TEST_CASE("eval before any training batch is an error") {
    Tensor x(1, 1, 2, 2, 1.0f);
    auto st = BatchNormState::init(1);
    CHECK_THROWS_WITH_AS(batchnorm_forward_eval(x, st),
                         doctest::Contains("before any running statistics"), Error);
    auto r = batchnorm_forward_train(x, st);
    CHECK_NOTHROW(batchnorm_forward_eval(x, r.updated));
}

TEST_CASE("running statistics follow the 0.9/0.1 moving average") {
    Tensor x(1, 1, 2, 2);
    x.v = {1.0f, 2.0f, 3.0f, 4.0f};  // mean 2.5, biased var 1.25
    auto st = BatchNormState::init(1);
    auto r = batchnorm_forward_train(x, st);
    CHECK(r.updated.running_mean[0] == doctest::Approx(0.9f * 0.0f + 0.1f * 2.5f));
    CHECK(r.updated.running_var[0] == doctest::Approx(0.9f * 1.0f + 0.1f * 1.25f));
}

TEST_CASE("avgpool matches shapes and the naive reference") {
    Rng rng(17);
    auto x = refops::random_tensor(1, 1, 64, 64, rng);
    auto y = avgpool_forward(x, 5, 2);
    CHECK(y.h == 30);
    CHECK(y.w == 30);
    auto want = refops::naive_avgpool(x, 5, 2);
    for (size_t i = 0; i < y.size(); ++i) CHECK(y.v[i] == doctest::Approx(want.v[i]));
}

TEST_CASE("avgpool of a constant is the constant") {
    Tensor x(2, 3, 9, 9, 2.75f);
    auto y = avgpool_forward(x, 5, 2);
    for (float v : y.v) CHECK(v == doctest::Approx(2.75f));
}

TEST_CASE("2x2 mean example") {
    Tensor x(1, 1, 2, 2);
    x.v = {1.0f, 2.0f, 3.0f, 4.0f};
    auto y = avgpool_forward(x, 2, 2);
    REQUIRE(y.size() == 1);
    CHECK(y.v[0] == doctest::Approx(2.5f));
}

TEST_CASE("avgpool rejects kernels larger than the input") {
    Tensor x(1, 1, 4, 4, 1.0f);
    CHECK_THROWS_AS(avgpool_forward(x, 5, 2), Error);
}

TEST_CASE("overlapping avgpool backward accumulates shared positions") {
    // 3x3 input, k=2, s=1 -> 2x2 output; the center input position sits in
    // all four windows, so its gradient is 4 * (1/4) = 1.
    Tensor go(1, 1, 2, 2, 1.0f);
    auto gi = avgpool_backward(3, 3, go, 2, 1);
    CHECK(gi.at(0, 0, 1, 1) == doctest::Approx(1.0f));
    CHECK(gi.at(0, 0, 0, 0) == doctest::Approx(0.25f));
    CHECK(gi.at(0, 0, 0, 1) == doctest::Approx(0.5f));
}

TEST_CASE("global average pool reduces any spatial extent to 1x1") {
    Tensor big(1, 256, 13, 13, 1.0f);
    auto y = global_avgpool_forward(big);
    CHECK(y.n == 1);
    CHECK(y.c == 256);
    CHECK(y.h == 1);
    CHECK(y.w == 1);

    Tensor c(3, 4, 6, 6, -2.5f);
    auto yc = global_avgpool_forward(c);
    for (float v : yc.v) CHECK(v == doctest::Approx(-2.5f));

    Tensor seq(1, 1, 3, 3);
    for (int i = 0; i < 9; ++i) seq.v[i] = static_cast<float>(i + 1);
    CHECK(global_avgpool_forward(seq).v[0] == doctest::Approx(5.0f));
}

TEST_CASE("fully connected with zero weights yields the bias row") {
    Tensor x(3, 4, 1, 1, 2.0f);
    Tensor w(2, 4, 1, 1, 0.0f);
    std::vector<float> b{-1.0f, 3.0f};
    auto y = fully_connected_forward(x, w, b);
    for (int i = 0; i < 3; ++i) {
        CHECK(y.at(i, 0, 0, 0) == doctest::Approx(-1.0f));
        CHECK(y.at(i, 1, 0, 0) == doctest::Approx(3.0f));
    }
}

TEST_CASE("identity-like weights pass the input through") {
    Tensor x(1, 2, 1, 1);
    x.v = {0.25f, -4.0f};
    Tensor w(2, 2, 1, 1, 0.0f);
    w.at(0, 0, 0, 0) = 1.0f;
    w.at(1, 1, 0, 0) = 1.0f;
    std::vector<float> b{0.0f, 0.0f};
    auto y = fully_connected_forward(x, w, b);
    CHECK(y.v[0] == doctest::Approx(0.25f));
    CHECK(y.v[1] == doctest::Approx(-4.0f));
}

TEST_CASE("concat stacks channels and splits gradients back") {
    Rng rng(23);
    auto a = refops::random_tensor(1, 3, 2, 2, rng);
    auto b = refops::random_tensor(1, 2, 2, 2, rng);
    auto y = concat_channels(a, b);
    CHECK(y.c == 5);
    for (int ch = 0; ch < 3; ++ch)
        for (int j = 0; j < 4; ++j) CHECK(y.v[ch * 4 + j] == a.v[ch * 4 + j]);

    auto [ga, gb] = concat_channels_backward(y, 3);
    for (size_t i = 0; i < a.size(); ++i) CHECK(ga.v[i] == a.v[i]);
    for (size_t i = 0; i < b.size(); ++i) CHECK(gb.v[i] == b.v[i]);
}

TEST_CASE("concat with a zero-channel tensor is the identity") {
    Rng rng(29);
    auto a = refops::random_tensor(2, 3, 2, 2, rng);
    Tensor empty(2, 0, 2, 2);
    auto y = concat_channels(a, empty);
    CHECK(y.c == 3);
    for (size_t i = 0; i < a.size(); ++i) CHECK(y.v[i] == a.v[i]);
}

TEST_CASE("concat rejects spatial mismatch") {
    Tensor a(1, 2, 3, 3), b(1, 2, 4, 4);
    CHECK_THROWS_AS(concat_channels(a, b), Error);
}

TEST_CASE("symmetric logits lose ln 2") {
    Tensor l1(1, 2, 1, 1, 0.0f);
    std::vector<int> lab1{0};
    auto r1 = softmax_cross_entropy(l1, lab1);
    CHECK(r1.loss == doctest::Approx(std::log(2.0)).epsilon(1e-5));
    CHECK(r1.grad_logits.v[0] == doctest::Approx(-0.5f));
    CHECK(r1.grad_logits.v[1] == doctest::Approx(0.5f));

    Tensor l2(2, 2, 1, 1, 0.0f);
    std::vector<int> lab2{0, 0};
    auto r2 = softmax_cross_entropy(l2, lab2);
    CHECK(r2.loss == doctest::Approx(std::log(2.0)).epsilon(1e-5));
    CHECK(r2.grad_logits.v[0] == doctest::Approx(-0.25f));
    CHECK(r2.grad_logits.v[1] == doctest::Approx(0.25f));
}

TEST_CASE("saturated logits do not overflow") {
    Tensor l(1, 2, 1, 1);
    l.v = {40.0f, -40.0f};
    std::vector<int> lab{0};
    auto r = softmax_cross_entropy(l, lab);
    CHECK(r.loss == doctest::Approx(0.0f).epsilon(1e-6));
    CHECK(std::isfinite(r.grad_logits.v[0]));
    CHECK(std::isfinite(r.grad_logits.v[1]));
}

TEST_CASE("out-of-range label is rejected") {
    Tensor l(1, 2, 1, 1, 0.0f);
    std::vector<int> lab{2};
    CHECK_THROWS_AS(softmax_cross_entropy(l, lab), Error);
}

TEST_SUITE_END();
