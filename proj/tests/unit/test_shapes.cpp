#include <doctest.h>

#include "dmfnet/tensor.hpp"
#include "dmfnet/rng.hpp"
#include "support/reference_ops.hpp"

using dmfnet::ConvSpec;
using dmfnet::out_shape;

TEST_SUITE_BEGIN("shapes");

TEST_CASE("conv1 geometry preserves 64x64") {
    ConvSpec s{5, 1, 2, 1, 64};
    auto [oh, ow] = out_shape(s, 64, 64);
    CHECK(oh == 64);
    CHECK(ow == 64);
}

TEST_CASE("1x1 kernel is the identity size map") {
    ConvSpec s{1, 1, 0, 3, 3};
    for (int d : {1, 7, 13, 64}) {
        auto [oh, ow] = out_shape(s, d, d + 2);
        CHECK(oh == d);
        CHECK(ow == d + 2);
    }
}

TEST_CASE("strided 5x5 window on 64 gives 30") {
    // window starts 0, 2, ..., 58
    CHECK(refops::enumerate_windows(64, 5, 2, 0) == 30);
    ConvSpec s{5, 2, 0, 1, 1};
    auto [oh, ow] = out_shape(s, 64, 64);
    CHECK(oh == 30);
    CHECK(ow == 30);
}

TEST_CASE("kernel larger than padded input is rejected") {
    ConvSpec s{7, 1, 0, 1, 1};
    CHECK_THROWS_AS(out_shape(s, 5, 5), dmfnet::Error);
    ConvSpec ok{7, 1, 1, 1, 1};
    CHECK_NOTHROW(out_shape(ok, 5, 5));
}

TEST_CASE("shape law matches window enumeration over random geometries") {
    dmfnet::Rng rng(20240517);
    for (int trial = 0; trial < 1000; ++trial) {
        int k = 1 + static_cast<int>(rng.uniform_int(7));
        int s = 1 + static_cast<int>(rng.uniform_int(4));
        int p = static_cast<int>(rng.uniform_int(4));
        int h = 1 + static_cast<int>(rng.uniform_int(80));
        int w = 1 + static_cast<int>(rng.uniform_int(80));
        if (h + 2 * p - k < 0 || w + 2 * p - k < 0) continue;
        ConvSpec spec{k, s, p, 1, 1};
        auto [oh, ow] = out_shape(spec, h, w);
        CHECK(oh == refops::enumerate_windows(h, k, s, p));
        CHECK(ow == refops::enumerate_windows(w, k, s, p));
    }
}

TEST_SUITE_END();
