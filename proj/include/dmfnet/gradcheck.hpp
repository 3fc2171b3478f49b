#pragma once

// Central finite-difference gradient checking. The check reduces an operator
// output to a scalar J = sum(output * cotangent) and compares
// (J(x+eps) - J(x-eps)) / (2 eps) against the analytic gradient, reporting
// the max relative error with denominator max(|analytic|, |numeric|, 1e-8).

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dmfnet/tensor.hpp"

namespace dmfnet {

using ForwardFn = std::function<Tensor(const std::vector<Tensor>&)>;
/// Returns one gradient tensor per input, given the output cotangent.
using BackwardFn = std::function<std::vector<Tensor>(const std::vector<Tensor>&, const Tensor&)>;

/// Coordinate subset to probe; empty list means every coordinate of every
/// input (only sensible for small operators).
struct ProbeCoord {
    size_t input = 0;
    size_t flat = 0;
};

float grad_check(const ForwardFn& forward, const BackwardFn& backward,
                 std::vector<Tensor> inputs, float eps, uint64_t cotangent_seed,
                 const std::vector<ProbeCoord>& coords = {});

struct OpCheckReport {
    std::string op;
    float max_rel_err = 0.0f;
    float tolerance = 0.0f;
    bool pass = false;
};

/// Per-operator checks plus the composed bottleneck block and the reduced
/// 8x8 dual-branch network. `flip_backward_of` (when non-empty) negates that
/// operator's analytic gradients, for verifying the checker catches faults.
std::vector<OpCheckReport> run_gradient_suite(uint64_t seed,
                                              const std::string& flip_backward_of = "");

/// Worst error per operator across `seeds` consecutive seeds starting at
/// `seed0`; report `pass` reflects every seed.
std::vector<OpCheckReport> run_gradient_suite_multi(uint64_t seed0, int seeds);

}  // namespace dmfnet
