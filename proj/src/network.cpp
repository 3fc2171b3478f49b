#include "dmfnet/network.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dmfnet/rng.hpp"

namespace dmfnet {

namespace {

constexpr const char* kBnCounter = "bn_batches";

LayerDesc conv_layer(const std::string& name, int k, int s, int p, int in_c, int out_c) {
    LayerDesc l;
    l.kind = LayerKind::Conv;
    l.name = name;
    l.conv = ConvSpec{k, s, p, in_c, out_c};
    return l;
}

LayerDesc relu_layer(const std::string& name) {
    LayerDesc l;
    l.kind = LayerKind::Relu;
    l.name = name;
    return l;
}

LayerDesc bn_layer(const std::string& name, int channels) {
    LayerDesc l;
    l.kind = LayerKind::BatchNorm;
    l.name = name;
    l.channels = channels;
    return l;
}

LayerDesc pool_layer(const std::string& name, int k, int s) {
    LayerDesc l;
    l.kind = LayerKind::AvgPool;
    l.name = name;
    l.pool_kernel = k;
    l.pool_stride = s;
    return l;
}

LayerDesc global_pool_layer(const std::string& name) {
    LayerDesc l;
    l.kind = LayerKind::GlobalAvgPool;
    l.name = name;
    return l;
}

// conv unit with activation and normalization in the configured order
void push_conv_unit(std::vector<LayerDesc>& seq, const std::string& name, int k, int s, int p,
                    int in_c, int out_c, LayerOrder order) {
    seq.push_back(conv_layer(name, k, s, p, in_c, out_c));
    if (order == LayerOrder::ConvReluBn) {
        seq.push_back(relu_layer(name + ".relu"));
        seq.push_back(bn_layer(name + ".bn", out_c));
    } else {
        seq.push_back(bn_layer(name + ".bn", out_c));
        seq.push_back(relu_layer(name + ".relu"));
    }
}

long layer_params(const LayerDesc& l) {
    switch (l.kind) {
        case LayerKind::Conv:
            return static_cast<long>(l.conv.out_channels) * l.conv.in_channels * l.conv.kernel *
                       l.conv.kernel +
                   l.conv.out_channels;
        case LayerKind::BatchNorm:
            return 2L * l.channels;
        default:
            return 0;
    }
}

const char* kind_str(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::Relu: return "relu";
        case LayerKind::BatchNorm: return "batchnorm";
        case LayerKind::AvgPool: return "avgpool";
        case LayerKind::GlobalAvgPool: return "global_avgpool";
    }
    return "?";
}

struct Dims {
    int c, h, w;
};

Dims layer_out_dims(const LayerDesc& l, Dims in) {
    switch (l.kind) {
        case LayerKind::Conv: {
            if (in.c != l.conv.in_channels)
                throw Error("build: layer " + l.name + " expects " +
                            std::to_string(l.conv.in_channels) + " channels, got " +
                            std::to_string(in.c));
            auto [oh, ow] = out_shape(l.conv, in.h, in.w);
            return {l.conv.out_channels, oh, ow};
        }
        case LayerKind::AvgPool: {
            ConvSpec s{l.pool_kernel, l.pool_stride, 0, in.c, in.c};
            auto [oh, ow] = out_shape(s, in.h, in.w);
            return {in.c, oh, ow};
        }
        case LayerKind::GlobalAvgPool:
            return {in.c, 1, 1};
        default:
            return in;
    }
}

void audit_seq(const std::vector<LayerDesc>& seq, Dims& dims, std::vector<LayerRow>& rows) {
    for (const auto& l : seq) {
        Dims out = layer_out_dims(l, dims);
        rows.push_back({l.name, kind_str(l.kind), dims.c, dims.h, dims.w, out.c, out.h, out.w,
                        layer_params(l)});
        dims = out;
    }
}

template <typename Fn>
void for_each_layer(const NetworkGraph& g, Fn&& fn) {
    for (const auto& br : g.branches) {
        for (const auto& node : br.nodes) {
            if (std::holds_alternative<LayerDesc>(node)) {
                fn(std::get<LayerDesc>(node));
            } else {
                const auto& blk = std::get<BottleneckBlock>(node);
                for (const auto& l : blk.main) fn(l);
                for (const auto& l : blk.shortcut) fn(l);
            }
        }
    }
}

}  // namespace

Tensor& ParamBundle::at(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("ParamBundle: missing parameter '" + name + "'");
    return it->second;
}

const Tensor& ParamBundle::at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("ParamBundle: missing parameter '" + name + "'");
    return it->second;
}

long ParamBundle::bn_batches() const {
    auto it = tensors.find(kBnCounter);
    return it == tensors.end() ? 0 : static_cast<long>(it->second.v[0]);
}

BottleneckBlock build_brb(int in_channels, const std::string& name_prefix, LayerOrder order) {
    if (in_channels < 1) throw Error("build_brb: in_channels must be >= 1");
    BottleneckBlock blk;
    push_conv_unit(blk.main, name_prefix + ".reduce", 1, 1, 0, in_channels, 64, order);
    push_conv_unit(blk.main, name_prefix + ".mid", 3, 1, 1, 64, 64, order);
    push_conv_unit(blk.main, name_prefix + ".expand", 1, 1, 0, 64, 256, order);
    if (in_channels != 256) {
        blk.shortcut.push_back(conv_layer(name_prefix + ".proj", 1, 1, 0, in_channels, 256));
        blk.shortcut.push_back(bn_layer(name_prefix + ".proj.bn", 256));
    }
    return blk;
}

BranchGraph build_branch(const BranchConfig& cfg, const std::string& prefix, LayerOrder order) {
    if (cfg.brb_count < 1 || cfg.brb_count > 3)
        throw Error("build_branch: brb_count must be in {1,2,3}");
    if (cfg.prep_kernel != 0 && cfg.prep_kernel != 3 && cfg.prep_kernel != 5)
        throw Error("build_branch: prep_kernel must be none, 3 or 5");

    BranchGraph br;
    br.prefix = prefix;
    br.config = cfg;
    if (cfg.prep_kernel != 0)
        br.nodes.emplace_back(conv_layer(prefix + ".prep", cfg.prep_kernel, 1,
                                         (cfg.prep_kernel - 1) / 2, 1, 1));
    std::vector<LayerDesc> stem;
    push_conv_unit(stem, prefix + ".conv1", 5, 1, 2, 1, 64, order);
    for (auto& l : stem) br.nodes.emplace_back(std::move(l));
    int pool_index = 1;
    br.nodes.emplace_back(pool_layer(prefix + ".pool" + std::to_string(pool_index++), 5, 2));
    int channels = 64;
    for (int i = 1; i <= cfg.brb_count; ++i) {
        if (i > 1)
            br.nodes.emplace_back(pool_layer(prefix + ".pool" + std::to_string(pool_index++), 5, 2));
        br.nodes.emplace_back(build_brb(channels, prefix + ".brb" + std::to_string(i), order));
        channels = 256;
    }
    br.nodes.emplace_back(global_pool_layer(prefix + ".pool" + std::to_string(pool_index)));
    br.feature_dim = 256;
    return br;
}

NetworkGraph build_dmfnet(const NetworkConfig& cfg) {
    if (cfg.num_classes < 2) throw Error("build_dmfnet: num_classes must be >= 2");
    NetworkGraph g;
    g.config = cfg;
    g.branches.push_back(build_branch(cfg.branch_a, "a", cfg.order));
    if (!cfg.single_branch) g.branches.push_back(build_branch(cfg.branch_b, "b", cfg.order));

    int fused = 0;
    for (auto& br : g.branches) {
        Dims dims{cfg.input_channels, cfg.input_h, cfg.input_w};
        for (auto& node : br.nodes) {
            if (std::holds_alternative<LayerDesc>(node)) {
                audit_seq({std::get<LayerDesc>(node)}, dims, g.table);
            } else {
                auto& blk = std::get<BottleneckBlock>(node);
                Dims block_in = dims;
                audit_seq(blk.main, dims, g.table);
                if (!blk.shortcut.empty()) {
                    Dims sdims = block_in;
                    audit_seq(blk.shortcut, sdims, g.table);
                    if (sdims.c != dims.c || sdims.h != dims.h || sdims.w != dims.w)
                        throw Error("build: shortcut dims diverge in a bottleneck block");
                } else if (block_in.c != dims.c || block_in.h != dims.h || block_in.w != dims.w) {
                    throw Error("build: identity shortcut needs matching dims");
                }
            }
        }
        if (dims.c != br.feature_dim || dims.h != 1 || dims.w != 1)
            throw Error("build: branch " + br.prefix + " does not end in a " +
                        std::to_string(br.feature_dim) + "-wide feature");
        fused += br.feature_dim;
    }
    g.fc_in = fused;
    g.fc_out = cfg.num_classes;
    g.table.push_back({g.fc_name, "fully_connected", fused, 1, 1, cfg.num_classes, 1, 1,
                       static_cast<long>(fused) * cfg.num_classes + cfg.num_classes});
    if (!cfg.prep_trainable) {
        for (const auto& br : g.branches) {
            if (br.config.prep_kernel != 0) {
                g.frozen.push_back(br.prefix + ".prep.w");
                g.frozen.push_back(br.prefix + ".prep.b");
            }
        }
    }
    return g;
}

namespace {

// Zero-sum high-pass kernel used when the preprocessing layer is frozen:
// unit center, the remaining k*k - 1 taps at -1/(k*k - 1).
void fill_high_pass(Tensor& w) {
    int k = w.h;
    float off = -1.0f / static_cast<float>(k * k - 1);
    for (float& v : w.v) v = off;
    w.at(0, 0, k / 2, k / 2) = 1.0f;
}

}  // namespace

ParamBundle init_params(const NetworkGraph& graph, uint64_t seed) {
    ParamBundle p;
    Rng rng(mix_seed(seed, 0x494e4954));
    auto he_fill = [&rng](Tensor& t, int fan_in) {
        double std = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (float& v : t.v) v = static_cast<float>(rng.gaussian() * std);
    };
    std::set<std::string> frozen(graph.frozen.begin(), graph.frozen.end());

    for_each_layer(graph, [&](const LayerDesc& l) {
        if (l.kind == LayerKind::Conv) {
            const auto& s = l.conv;
            Tensor w(s.out_channels, s.in_channels, s.kernel, s.kernel);
            if (frozen.count(l.name + ".w"))
                fill_high_pass(w);
            else
                he_fill(w, s.in_channels * s.kernel * s.kernel);
            p.tensors[l.name + ".w"] = std::move(w);
            p.tensors[l.name + ".b"] = Tensor(1, s.out_channels, 1, 1, 0.0f);
        } else if (l.kind == LayerKind::BatchNorm) {
            p.tensors[l.name + ".gamma"] = Tensor(1, l.channels, 1, 1, 1.0f);
            p.tensors[l.name + ".beta"] = Tensor(1, l.channels, 1, 1, 0.0f);
            p.tensors[l.name + ".rmean"] = Tensor(1, l.channels, 1, 1, 0.0f);
            p.tensors[l.name + ".rvar"] = Tensor(1, l.channels, 1, 1, 1.0f);
        }
    });
    Tensor fcw(graph.fc_out, graph.fc_in, 1, 1);
    he_fill(fcw, graph.fc_in);
    p.tensors[graph.fc_name + ".w"] = std::move(fcw);
    p.tensors[graph.fc_name + ".b"] = Tensor(1, graph.fc_out, 1, 1, 0.0f);
    p.tensors[kBnCounter] = Tensor(1, 1, 1, 1, 0.0f);
    return p;
}

long param_count(const NetworkGraph& graph) {
    long total = 0;
    for_each_layer(graph, [&](const LayerDesc& l) { total += layer_params(l); });
    if (graph.fc_in > 0)
        total += static_cast<long>(graph.fc_in) * graph.fc_out + graph.fc_out;
    return total;
}

void check_bundle(const NetworkGraph& graph, const ParamBundle& params) {
    std::map<std::string, std::array<int, 4>> want;
    for_each_layer(graph, [&](const LayerDesc& l) {
        if (l.kind == LayerKind::Conv) {
            const auto& s = l.conv;
            want[l.name + ".w"] = {s.out_channels, s.in_channels, s.kernel, s.kernel};
            want[l.name + ".b"] = {1, s.out_channels, 1, 1};
        } else if (l.kind == LayerKind::BatchNorm) {
            for (const char* suffix : {".gamma", ".beta", ".rmean", ".rvar"})
                want[l.name + suffix] = {1, l.channels, 1, 1};
        }
    });
    want[graph.fc_name + ".w"] = {graph.fc_out, graph.fc_in, 1, 1};
    want[graph.fc_name + ".b"] = {1, graph.fc_out, 1, 1};
    want[kBnCounter] = {1, 1, 1, 1};

    for (const auto& [name, dims] : want) {
        auto it = params.tensors.find(name);
        if (it == params.tensors.end())
            throw Error("checkpoint/graph mismatch: missing parameter '" + name + "'");
        const Tensor& t = it->second;
        if (t.n != dims[0] || t.c != dims[1] || t.h != dims[2] || t.w != dims[3])
            throw Error("checkpoint/graph mismatch: parameter '" + name + "' has dims " +
                        t.dims_str());
    }
    for (const auto& [name, t] : params.tensors)
        if (want.find(name) == want.end())
            throw Error("checkpoint/graph mismatch: orphan parameter '" + name + "'");
}

// ---------------------------------------------------------------------------
// execution

namespace {

using TensorPtr = std::shared_ptr<Tensor>;

struct StepTrace {
    TensorPtr in;        // conv / bn input
    TensorPtr relu_out;  // relu output, mask source for its backward
    std::vector<float> bn_mean, bn_inv_std;
    int in_h = 0, in_w = 0;  // pool input extent
};

struct BlockTraceT {
    std::vector<StepTrace> main, shortcut;
};

struct NodeTrace {
    std::vector<StepTrace> seq;  // plain layer: one step
    BlockTraceT block;
    bool is_block = false;
};

struct NetTrace {
    std::vector<std::vector<NodeTrace>> branches;
    std::vector<TensorPtr> features;
    TensorPtr fused;
};

BatchNormState assemble_bn(const ParamBundle& p, const std::string& name, long batches) {
    BatchNormState s;
    const Tensor& gamma = p.at(name + ".gamma");
    s.scale = gamma.v;
    s.shift = p.at(name + ".beta").v;
    s.running_mean = p.at(name + ".rmean").v;
    s.running_var = p.at(name + ".rvar").v;
    s.batches_seen = batches;
    return s;
}

// `commit` is non-null only in train mode; BN running statistics are written
// back to it.
TensorPtr run_layer_forward(const LayerDesc& l, TensorPtr x, const ParamBundle& params,
                            ParamBundle* commit, StepTrace* st) {
    switch (l.kind) {
        case LayerKind::Conv: {
            if (st) st->in = x;
            auto y = std::make_shared<Tensor>(conv2d_forward(
                *x, params.at(l.name + ".w"),
                std::span<const float>(params.at(l.name + ".b").v), l.conv));
            return y;
        }
        case LayerKind::Relu: {
            TensorPtr y;
            if (x.use_count() == 1) {
                y = std::make_shared<Tensor>(relu_forward(std::move(*x)));
            } else {
                y = std::make_shared<Tensor>(relu_forward(Tensor(*x)));
            }
            if (st) st->relu_out = y;
            return y;
        }
        case LayerKind::BatchNorm: {
            auto state = assemble_bn(params, l.name, params.bn_batches());
            if (commit) {
                auto r = batchnorm_forward_train(*x, state);
                if (st) {
                    st->in = x;
                    st->bn_mean = r.mean;
                    st->bn_inv_std = r.inv_std;
                }
                commit->at(l.name + ".rmean").v = r.updated.running_mean;
                commit->at(l.name + ".rvar").v = r.updated.running_var;
                return std::make_shared<Tensor>(std::move(r.y));
            }
            return std::make_shared<Tensor>(batchnorm_forward_eval(*x, state));
        }
        case LayerKind::AvgPool: {
            if (st) {
                st->in_h = x->h;
                st->in_w = x->w;
            }
            return std::make_shared<Tensor>(avgpool_forward(*x, l.pool_kernel, l.pool_stride));
        }
        case LayerKind::GlobalAvgPool: {
            if (st) {
                st->in_h = x->h;
                st->in_w = x->w;
            }
            return std::make_shared<Tensor>(global_avgpool_forward(*x));
        }
    }
    throw Error("unreachable layer kind");
}

TensorPtr run_seq_forward(const std::vector<LayerDesc>& seq, TensorPtr x,
                          const ParamBundle& params, ParamBundle* commit,
                          std::vector<StepTrace>* trace) {
    for (const auto& l : seq) {
        StepTrace st;
        x = run_layer_forward(l, std::move(x), params, commit, trace ? &st : nullptr);
        if (trace) trace->push_back(std::move(st));
    }
    return x;
}

TensorPtr add_tensors(const Tensor& a, const Tensor& b) {
    if (!a.same_dims(b)) throw Error("residual add: dims mismatch");
    auto y = std::make_shared<Tensor>(a.n, a.c, a.h, a.w);
    for (size_t i = 0; i < a.size(); ++i) y->v[i] = a.v[i] + b.v[i];
    return y;
}

TensorPtr run_branch_forward(const BranchGraph& br, TensorPtr x, const ParamBundle& params,
                             ParamBundle* commit, std::vector<NodeTrace>* trace) {
    for (const auto& node : br.nodes) {
        NodeTrace nt;
        if (std::holds_alternative<LayerDesc>(node)) {
            StepTrace st;
            x = run_layer_forward(std::get<LayerDesc>(node), std::move(x), params, commit,
                                  trace ? &st : nullptr);
            if (trace) nt.seq.push_back(std::move(st));
        } else {
            const auto& blk = std::get<BottleneckBlock>(node);
            nt.is_block = true;
            TensorPtr block_in = x;
            TensorPtr main_out = run_seq_forward(blk.main, x, params, commit,
                                                 trace ? &nt.block.main : nullptr);
            TensorPtr short_out =
                blk.shortcut.empty()
                    ? block_in
                    : run_seq_forward(blk.shortcut, block_in, params, commit,
                                      trace ? &nt.block.shortcut : nullptr);
            x = add_tensors(*main_out, *short_out);
        }
        if (trace) trace->push_back(std::move(nt));
    }
    return x;
}

TensorPtr run_layer_backward(const LayerDesc& l, StepTrace& st, const ParamBundle& params,
                             TensorPtr grad, GradBundle& grads, bool need_input_grad) {
    switch (l.kind) {
        case LayerKind::Conv: {
            auto g = conv2d_backward(*st.in, params.at(l.name + ".w"), *grad, l.conv,
                                     need_input_grad);
            grads[l.name + ".w"] = std::move(g.weights);
            Tensor gb(1, l.conv.out_channels, 1, 1);
            gb.v = std::move(g.bias);
            grads[l.name + ".b"] = std::move(gb);
            st.in.reset();
            return need_input_grad ? std::make_shared<Tensor>(std::move(g.input)) : nullptr;
        }
        case LayerKind::Relu: {
            auto gi = std::make_shared<Tensor>(relu_backward(*st.relu_out, *grad));
            st.relu_out.reset();
            return gi;
        }
        case LayerKind::BatchNorm: {
            auto g = batchnorm_backward(*st.in, *grad,
                                        std::span<const float>(params.at(l.name + ".gamma").v),
                                        st.bn_mean, st.bn_inv_std);
            Tensor gs(1, l.channels, 1, 1), gb(1, l.channels, 1, 1);
            gs.v = std::move(g.scale);
            gb.v = std::move(g.shift);
            grads[l.name + ".gamma"] = std::move(gs);
            grads[l.name + ".beta"] = std::move(gb);
            st.in.reset();
            return std::make_shared<Tensor>(std::move(g.input));
        }
        case LayerKind::AvgPool:
            return std::make_shared<Tensor>(
                avgpool_backward(st.in_h, st.in_w, *grad, l.pool_kernel, l.pool_stride));
        case LayerKind::GlobalAvgPool:
            return std::make_shared<Tensor>(global_avgpool_backward(st.in_h, st.in_w, *grad));
    }
    throw Error("unreachable layer kind");
}

TensorPtr run_seq_backward(const std::vector<LayerDesc>& seq, std::vector<StepTrace>& trace,
                           const ParamBundle& params, TensorPtr grad, GradBundle& grads,
                           bool need_input_grad) {
    for (size_t i = seq.size(); i-- > 0;) {
        bool need = need_input_grad || i > 0;
        grad = run_layer_backward(seq[i], trace[i], params, std::move(grad), grads, need);
    }
    return grad;
}

TensorPtr run_branch_backward(const BranchGraph& br, std::vector<NodeTrace>& trace,
                              const ParamBundle& params, TensorPtr grad, GradBundle& grads) {
    for (size_t i = br.nodes.size(); i-- > 0;) {
        // the first node consumes the image batch; no gradient needed past it
        bool need_input = i > 0;
        const auto& node = br.nodes[i];
        NodeTrace& nt = trace[i];
        if (!nt.is_block) {
            grad = run_layer_backward(std::get<LayerDesc>(node), nt.seq[0], params,
                                      std::move(grad), grads, need_input);
        } else {
            const auto& blk = std::get<BottleneckBlock>(node);
            TensorPtr g_main =
                run_seq_backward(blk.main, nt.block.main, params, grad, grads, need_input);
            TensorPtr g_short;
            if (blk.shortcut.empty()) {
                g_short = grad;
            } else {
                g_short = run_seq_backward(blk.shortcut, nt.block.shortcut, params, grad, grads,
                                           need_input);
            }
            if (!need_input) {
                grad = nullptr;
            } else {
                grad = add_tensors(*g_main, *g_short);
            }
        }
    }
    return grad;
}

void check_batch(const NetworkGraph& g, const Tensor& batch) {
    if (batch.c != g.config.input_channels || batch.h != g.config.input_h ||
        batch.w != g.config.input_w)
        throw Error("forward: batch dims " + batch.dims_str() + " do not match network input " +
                    std::to_string(g.config.input_channels) + "x" +
                    std::to_string(g.config.input_h) + "x" + std::to_string(g.config.input_w));
    if (batch.n < 1) throw Error("forward: empty batch");
}

}  // namespace

ForwardResult forward_eval(const NetworkGraph& graph, const ParamBundle& params,
                           const Tensor& batch) {
    check_batch(graph, batch);
    ForwardResult r;
    std::vector<TensorPtr> features;
    auto x0 = std::make_shared<Tensor>(batch);
    for (const auto& br : graph.branches) {
        auto f = run_branch_forward(br, x0, params, nullptr, nullptr);
        r.branch_features.push_back(*f);
        features.push_back(std::move(f));
    }
    TensorPtr fused = features.size() == 1 ? features[0]
                                           : std::make_shared<Tensor>(concat_channels(
                                                 *features[0], *features[1]));
    r.logits = fully_connected_forward(*fused, params.at(graph.fc_name + ".w"),
                                       std::span<const float>(params.at(graph.fc_name + ".b").v));
    return r;
}

float forward_train_loss(const NetworkGraph& graph, ParamBundle& params, const Tensor& batch,
                         std::span<const int> labels) {
    check_batch(graph, batch);
    std::vector<TensorPtr> features;
    auto x0 = std::make_shared<Tensor>(batch);
    for (const auto& br : graph.branches)
        features.push_back(run_branch_forward(br, x0, params, &params, nullptr));
    TensorPtr fused = features.size() == 1
                          ? features[0]
                          : std::make_shared<Tensor>(concat_channels(*features[0], *features[1]));
    Tensor logits =
        fully_connected_forward(*fused, params.at(graph.fc_name + ".w"),
                                std::span<const float>(params.at(graph.fc_name + ".b").v));
    params.at(kBnCounter).v[0] += 1.0f;
    return softmax_cross_entropy(logits, labels).loss;
}

TrainStepResult train_step(const NetworkGraph& graph, ParamBundle& params, const Tensor& batch,
                           std::span<const int> labels) {
    check_batch(graph, batch);
    if (static_cast<int>(labels.size()) != batch.n)
        throw Error("train_step: label count does not match batch size");

    NetTrace trace;
    trace.branches.resize(graph.branches.size());
    auto x0 = std::make_shared<Tensor>(batch);
    for (size_t b = 0; b < graph.branches.size(); ++b)
        trace.features.push_back(run_branch_forward(graph.branches[b], x0, params, &params,
                                                    &trace.branches[b]));
    trace.fused = trace.features.size() == 1
                      ? trace.features[0]
                      : std::make_shared<Tensor>(
                            concat_channels(*trace.features[0], *trace.features[1]));

    TrainStepResult r;
    r.logits = fully_connected_forward(*trace.fused, params.at(graph.fc_name + ".w"),
                                       std::span<const float>(params.at(graph.fc_name + ".b").v));
    auto loss = softmax_cross_entropy(r.logits, labels);
    r.loss = loss.loss;

    auto fc = fully_connected_backward(*trace.fused, params.at(graph.fc_name + ".w"),
                                       loss.grad_logits);
    r.grads[graph.fc_name + ".w"] = std::move(fc.weights);
    Tensor fcb(1, graph.fc_out, 1, 1);
    fcb.v = std::move(fc.bias);
    r.grads[graph.fc_name + ".b"] = std::move(fcb);

    std::vector<TensorPtr> feature_grads;
    if (graph.branches.size() == 1) {
        feature_grads.push_back(std::make_shared<Tensor>(std::move(fc.input)));
    } else {
        auto [ga, gb] = concat_channels_backward(fc.input, graph.branches[0].feature_dim);
        feature_grads.push_back(std::make_shared<Tensor>(std::move(ga)));
        feature_grads.push_back(std::make_shared<Tensor>(std::move(gb)));
    }
    for (size_t b = graph.branches.size(); b-- > 0;)
        run_branch_backward(graph.branches[b], trace.branches[b], params,
                            std::move(feature_grads[b]), r.grads);

    for (const auto& name : graph.frozen) {
        auto it = r.grads.find(name);
        if (it != r.grads.end()) std::fill(it->second.v.begin(), it->second.v.end(), 0.0f);
    }
    params.at(kBnCounter).v[0] += 1.0f;
    return r;
}

}  // namespace dmfnet
