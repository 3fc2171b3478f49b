#include <doctest.h>

#include "dmfnet/gradcheck.hpp"

using namespace dmfnet;

TEST_SUITE_BEGIN("gradcheck");

TEST_CASE("every operator passes its tolerance over several seeds") {
    auto reports = run_gradient_suite_multi(100, 5);
    for (const auto& r : reports) {
        INFO(r.op, " worst rel err ", r.max_rel_err, " tol ", r.tolerance);
        CHECK(r.pass);
    }
}

TEST_CASE("linear operators check almost exactly") {
    auto reports = run_gradient_suite(7);
    for (const auto& r : reports) {
        if (r.op == "fully_connected") CHECK(r.max_rel_err <= 1e-4f);
        if (r.op == "avgpool") CHECK(r.max_rel_err <= 1e-3f);
        if (r.op == "concat_channels") CHECK(r.max_rel_err <= 1e-3f);
    }
}

TEST_CASE("an injected sign flip in a backward is detected") {
    for (const char* op : {"conv2d", "batchnorm", "composed_network"}) {
        auto reports = run_gradient_suite(3, op);
        bool found = false;
        for (const auto& r : reports) {
            if (r.op == op) {
                found = true;
                CHECK_FALSE(r.pass);
            }
        }
        CHECK(found);
    }
}

TEST_CASE("reports are deterministic at a fixed seed") {
    auto a = run_gradient_suite(42);
    auto b = run_gradient_suite(42);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].max_rel_err == b[i].max_rel_err);
}

TEST_SUITE_END();
