#pragma once

// Forward/backward implementations of every layer operator the network uses.
// All operators are pure functions of their inputs; batch-norm training
// returns the updated running statistics instead of mutating shared state.
// Internal parallelism only ever partitions disjoint outputs, so results are
// bit-identical to a sequential run.

#include <span>
#include <utility>
#include <vector>

#include "dmfnet/tensor.hpp"

namespace dmfnet {

/// Cross-correlation with symmetric zero padding; bias added per out channel.
/// weights dims: (out_channels, in_channels, k, k).
Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      std::span<const float> bias, const ConvSpec& spec);

struct ConvGrads {
    Tensor input;    // empty when need_input_grad is false
    Tensor weights;
    std::vector<float> bias;
};

/// Exact gradients of conv2d_forward. grad_bias is the per-channel sum of
/// grad_out. Pass need_input_grad=false for the first layer of a chain.
ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights,
                          const Tensor& grad_out, const ConvSpec& spec,
                          bool need_input_grad = true);

/// Elementwise max(0, x).
Tensor relu_forward(Tensor x);

/// grad_out where the layer input was > 0, else 0. Accepts the layer input or
/// (equivalently) its output, since max(0,x) > 0 exactly when x > 0.
Tensor relu_backward(const Tensor& input_or_output, const Tensor& grad_out);

struct BatchNormState {
    std::vector<float> scale;         // per channel, init 1
    std::vector<float> shift;         // per channel, init 0
    std::vector<float> running_mean;  // init 0
    std::vector<float> running_var;   // init 1, entries >= 0
    float momentum = 0.1f;            // new = (1-momentum)*old + momentum*batch
    float epsilon = 1e-5f;
    long batches_seen = 0;            // 0 means eval mode is not usable yet

    static BatchNormState init(int channels);
};

struct BatchNormTrainResult {
    Tensor y;
    std::vector<float> mean;     // batch mean per channel, saved for backward
    std::vector<float> inv_std;  // 1/sqrt(batch var + eps)
    BatchNormState updated;      // running statistics after this batch
};

/// Train-mode forward: normalize per channel by batch statistics and apply
/// scale/shift. Requires n*h*w >= 2.
BatchNormTrainResult batchnorm_forward_train(const Tensor& x, const BatchNormState& state);

/// Eval-mode forward using running statistics. Throws if the state has never
/// seen a training batch.
Tensor batchnorm_forward_eval(const Tensor& x, const BatchNormState& state);

struct BatchNormGrads {
    Tensor input;
    std::vector<float> scale;
    std::vector<float> shift;
};

/// Exact gradients through train-mode normalization (the batch statistics are
/// functions of x and are differentiated through).
BatchNormGrads batchnorm_backward(const Tensor& x, const Tensor& grad_out,
                                  std::span<const float> scale,
                                  std::span<const float> mean,
                                  std::span<const float> inv_std);

/// Mean over k x k windows at the given stride, pad 0, floor output sizes.
Tensor avgpool_forward(const Tensor& x, int kernel, int stride);

/// Distributes grad/(k*k) back to every covered input position; positions in
/// several windows accumulate.
Tensor avgpool_backward(int in_h, int in_w, const Tensor& grad_out, int kernel, int stride);

/// Per-channel mean over the whole spatial extent -> (n, c, 1, 1).
Tensor global_avgpool_forward(const Tensor& x);
Tensor global_avgpool_backward(int in_h, int in_w, const Tensor& grad_out);

/// Affine map on the flattened input: x (n, d) -> logits (n, classes, 1, 1).
/// weights dims: (classes, d, 1, 1).
Tensor fully_connected_forward(const Tensor& x, const Tensor& weights,
                               std::span<const float> bias);

struct FcGrads {
    Tensor input;
    Tensor weights;
    std::vector<float> bias;
};

FcGrads fully_connected_backward(const Tensor& x, const Tensor& weights,
                                 const Tensor& grad_out);

/// Channel concatenation; a and b must agree on n, h, w.
Tensor concat_channels(const Tensor& a, const Tensor& b);

/// Splits grad_out back into the two branch gradients.
std::pair<Tensor, Tensor> concat_channels_backward(const Tensor& grad_out, int c_a);

struct LossResult {
    float loss = 0.0f;   // mean negative log softmax probability of the true class
    Tensor grad_logits;  // (softmax - onehot) / n
};

/// Numerically stabilized by max-subtraction. labels must be in [0, classes).
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace dmfnet
