#pragma once

// DMF-Net graph construction and execution: bottleneck residual blocks, the
// single-branch CNN, and the dual-branch multi-scale feature-fusion network.
// Graphs are immutable after construction; training owns its ParamBundle and
// every update produces explicit new state.

#include <map>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dmfnet/ops.hpp"
#include "dmfnet/tensor.hpp"

namespace dmfnet {

/// Per-branch settings. prep_kernel 0 means no preprocessing layer.
struct BranchConfig {
    int prep_kernel = 0;  // 0 | 3 | 5
    int brb_count = 2;    // 1 | 2 | 3
};

/// Paper order is conv -> ReLU -> BN; the conventional conv -> BN -> ReLU is
/// available for comparison.
enum class LayerOrder { ConvReluBn, ConvBnRelu };

struct NetworkConfig {
    BranchConfig branch_a{3, 2};
    BranchConfig branch_b{5, 2};
    int num_classes = 2;
    int input_channels = 1;
    int input_h = 64;
    int input_w = 64;
    bool prep_trainable = true;   // frozen prep uses a fixed high-pass kernel
    bool single_branch = false;   // build branch_a only (BRB-count ablation)
    LayerOrder order = LayerOrder::ConvReluBn;
};

enum class LayerKind { Conv, Relu, BatchNorm, AvgPool, GlobalAvgPool };

struct LayerDesc {
    LayerKind kind = LayerKind::Relu;
    std::string name;  // parameter prefix; empty for relu/pools
    ConvSpec conv{};
    int pool_kernel = 0;
    int pool_stride = 0;
    int channels = 0;  // BatchNorm
};

/// Residual unit: out = main(x) + shortcut(x); empty shortcut = identity.
struct BottleneckBlock {
    std::vector<LayerDesc> main;
    std::vector<LayerDesc> shortcut;
};

using BranchNode = std::variant<LayerDesc, BottleneckBlock>;

struct BranchGraph {
    std::string prefix;
    BranchConfig config;
    std::vector<BranchNode> nodes;
    int feature_dim = 256;
};

/// One row of the build-time dimension audit (also the `inspect` table).
struct LayerRow {
    std::string name;
    std::string kind;
    int in_c = 0, in_h = 0, in_w = 0;
    int out_c = 0, out_h = 0, out_w = 0;
    long params = 0;
};

struct NetworkGraph {
    NetworkConfig config;
    std::vector<BranchGraph> branches;
    std::string fc_name = "fc";
    int fc_in = 0;
    int fc_out = 0;
    std::vector<LayerRow> table;       // audit rows in execution order
    std::vector<std::string> frozen;   // parameter names excluded from updates
};

/// Named tensor collection: weights, biases, BN scale/shift/running stats,
/// plus the "bn_batches" counter that gates eval mode.
struct ParamBundle {
    std::map<std::string, Tensor> tensors;

    Tensor& at(const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool has(const std::string& name) const { return tensors.count(name) != 0; }
    long bn_batches() const;
};

using GradBundle = std::map<std::string, Tensor>;

/// The 1x1 -> 3x3 -> 1x1 bottleneck stack (channels 64, 64, 256), each conv
/// followed by ReLU and BN in the configured order. The shortcut is the
/// identity when in_channels == 256, otherwise a 1x1 projection conv with its
/// own BN.
BottleneckBlock build_brb(int in_channels, const std::string& name_prefix,
                          LayerOrder order = LayerOrder::ConvReluBn);

/// [prep] -> Conv1(5x5, s1, p2, ->64) -> ReLU -> BN -> avgpool(5, s2) ->
/// BRB x brb_count with avgpool(5, s2) between consecutive blocks -> global
/// average pool -> 256-wide feature.
BranchGraph build_branch(const BranchConfig& cfg, const std::string& prefix,
                         LayerOrder order = LayerOrder::ConvReluBn);

/// Builds the full network and validates every layer's dimension chain.
/// Throws if any intermediate extent would be non-positive.
NetworkGraph build_dmfnet(const NetworkConfig& cfg);

/// He-initialized conv/FC weights (std sqrt(2/fan_in)), zero biases, BN scale
/// 1 / shift 0, running stats (0, 1). A frozen preprocessing layer gets the
/// fixed zero-sum high-pass kernel instead of random weights. Fully
/// determined by seed.
ParamBundle init_params(const NetworkGraph& graph, uint64_t seed);

/// Total learnable scalars (weights + biases + BN scale/shift; running
/// statistics and the bn_batches counter excluded).
long param_count(const NetworkGraph& graph);

struct ForwardResult {
    Tensor logits;
    std::vector<Tensor> branch_features;  // one (n, 256, 1, 1) tensor per branch
};

/// Eval-mode forward: BN uses running statistics and nothing is updated.
/// Throws if the bundle has never seen a training batch.
ForwardResult forward_eval(const NetworkGraph& graph, const ParamBundle& params,
                           const Tensor& batch);

struct TrainStepResult {
    float loss = 0.0f;
    Tensor logits;
    GradBundle grads;  // one entry per learnable parameter (frozen ones zeroed)
};

/// Train-mode forward + loss + reverse traversal. Commits the BN running
/// statistics of this batch into `params` (the caller's private training
/// state) and increments its bn_batches counter.
TrainStepResult train_step(const NetworkGraph& graph, ParamBundle& params,
                           const Tensor& batch, std::span<const int> labels);

/// Train-mode forward and loss only (no gradients); running statistics are
/// committed as in train_step. The gradient checker probes with this.
float forward_train_loss(const NetworkGraph& graph, ParamBundle& params, const Tensor& batch,
                         std::span<const int> labels);

/// Validates that a bundle provides exactly the parameters the graph needs,
/// with matching dimensions. Throws on any mismatch or orphan entry.
void check_bundle(const NetworkGraph& graph, const ParamBundle& params);

}  // namespace dmfnet
