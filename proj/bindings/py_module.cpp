#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dmfnet/checkpoint.hpp"
#include "dmfnet/dataset.hpp"
#include "dmfnet/gradcheck.hpp"
#include "dmfnet/network.hpp"
#include "dmfnet/ops.hpp"
#include "dmfnet/synth.hpp"
#include "dmfnet/train.hpp"

namespace py = pybind11;
using namespace dmfnet;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor tensor_from(const FloatArray& a, const char* what) {
    if (a.ndim() != 4) throw Error(std::string(what) + ": expected a 4-d (n, c, h, w) array");
    Tensor t(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
             static_cast<int>(a.shape(2)), static_cast<int>(a.shape(3)));
    std::copy(a.data(), a.data() + t.size(), t.v.begin());
    return t;
}

py::array_t<float> tensor_to(const Tensor& t) {
    py::array_t<float> a({t.n, t.c, t.h, t.w});
    std::copy(t.v.begin(), t.v.end(), a.mutable_data());
    return a;
}

std::vector<float> vec_from(const FloatArray& a, const char* what) {
    if (a.ndim() != 1) throw Error(std::string(what) + ": expected a 1-d array");
    return std::vector<float>(a.data(), a.data() + a.shape(0));
}

GrayImage image_from(const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw Error("expected a 2-d uint8 image");
    GrayImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    std::copy(a.data(), a.data() + img.pixels.size(), img.pixels.begin());
    return img;
}

py::array_t<uint8_t> image_to(const GrayImage& img) {
    py::array_t<uint8_t> a({img.height, img.width});
    std::copy(img.pixels.begin(), img.pixels.end(), a.mutable_data());
    return a;
}

LayerOrder order_from(const std::string& s) {
    if (s == "conv-relu-bn") return LayerOrder::ConvReluBn;
    if (s == "conv-bn-relu") return LayerOrder::ConvBnRelu;
    throw Error("order must be 'conv-relu-bn' or 'conv-bn-relu'");
}

// Network graph plus its parameters, the unit the Python side works with.
struct PyNetwork {
    NetworkGraph graph;
    ParamBundle params;
    bool initialized = false;

    explicit PyNetwork(const NetworkConfig& cfg) : graph(build_dmfnet(cfg)) {}

    void init(uint64_t seed) {
        params = init_params(graph, seed);
        initialized = true;
    }
    void require_init() const {
        if (!initialized) throw Error("network parameters not initialized; call init(seed)");
    }
};

SynthConfig synth_cfg(int module_px, float genuine_blur_sigma, float capture_lo, float capture_hi,
                      float copy_scan_blur_sigma, float burr_density, int burr_amplitude,
                      float noise_std_genuine, float noise_std_copied, int requantize_levels,
                      uint64_t master_seed) {
    SynthConfig cfg;
    cfg.module_px = module_px;
    cfg.genuine_blur_sigma = genuine_blur_sigma;
    cfg.capture_blur_sigma_lo = capture_lo;
    cfg.capture_blur_sigma_hi = capture_hi;
    cfg.copy_scan_blur_sigma = copy_scan_blur_sigma;
    cfg.burr_density = burr_density;
    cfg.burr_amplitude = burr_amplitude;
    cfg.noise_std_genuine = noise_std_genuine;
    cfg.noise_std_copied = noise_std_copied;
    cfg.requantize_levels = requantize_levels;
    cfg.master_seed = master_seed;
    return cfg;
}

constexpr const char* kSynthArgsDoc =
    "module_px=16, genuine_blur_sigma=0.5, capture_blur_sigma=(0.3, 1.0), "
    "copy_scan_blur_sigma=1.2, burr_density=0.15, burr_amplitude=2, "
    "noise_std=(3.0, 6.0), requantize_levels=2";

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "DMF-Net core: tensor operators, network builder, synthetic corpus, training";

    py::register_exception<Error>(m, "DmfnetError", PyExc_RuntimeError);

    m.def(
        "out_shape",
        [](int kernel, int stride, int pad, int in_h, int in_w) {
            return out_shape(ConvSpec{kernel, stride, pad, 1, 1}, in_h, in_w);
        },
        py::arg("kernel"), py::arg("stride"), py::arg("pad"), py::arg("in_h"), py::arg("in_w"),
        "Output spatial size: floor((in + 2p - k)/s) + 1.");

    m.def(
        "conv2d_forward",
        [](const FloatArray& x, const FloatArray& w, const FloatArray& bias, int stride,
           int pad) {
            Tensor xt = tensor_from(x, "input");
            Tensor wt = tensor_from(w, "weights");
            ConvSpec spec{wt.h, stride, pad, wt.c, wt.n};
            auto b = vec_from(bias, "bias");
            return tensor_to(conv2d_forward(xt, wt, b, spec));
        },
        py::arg("x"), py::arg("weights"), py::arg("bias"), py::arg("stride") = 1,
        py::arg("pad") = 0);

    m.def(
        "conv2d_backward",
        [](const FloatArray& x, const FloatArray& w, const FloatArray& grad_out, int stride,
           int pad) {
            Tensor xt = tensor_from(x, "input");
            Tensor wt = tensor_from(w, "weights");
            ConvSpec spec{wt.h, stride, pad, wt.c, wt.n};
            auto g = conv2d_backward(xt, wt, tensor_from(grad_out, "grad_out"), spec);
            py::array_t<float> gb(static_cast<py::ssize_t>(g.bias.size()));
            std::copy(g.bias.begin(), g.bias.end(), gb.mutable_data());
            return py::make_tuple(tensor_to(g.input), tensor_to(g.weights), gb);
        },
        py::arg("x"), py::arg("weights"), py::arg("grad_out"), py::arg("stride") = 1,
        py::arg("pad") = 0, "Returns (grad_input, grad_weights, grad_bias).");

    m.def("relu", [](const FloatArray& x) { return tensor_to(relu_forward(tensor_from(x, "x"))); });
    m.def("relu_backward", [](const FloatArray& x, const FloatArray& g) {
        return tensor_to(relu_backward(tensor_from(x, "x"), tensor_from(g, "grad_out")));
    });
    m.def("avgpool", [](const FloatArray& x, int kernel, int stride) {
        return tensor_to(avgpool_forward(tensor_from(x, "x"), kernel, stride));
    }, py::arg("x"), py::arg("kernel") = 5, py::arg("stride") = 2);
    m.def("global_avgpool",
          [](const FloatArray& x) { return tensor_to(global_avgpool_forward(tensor_from(x, "x"))); });
    m.def("concat_channels", [](const FloatArray& a, const FloatArray& b) {
        return tensor_to(concat_channels(tensor_from(a, "a"), tensor_from(b, "b")));
    });
    m.def(
        "softmax_cross_entropy",
        [](const FloatArray& logits, const std::vector<int>& labels) {
            auto r = softmax_cross_entropy(tensor_from(logits, "logits"), labels);
            return py::make_tuple(r.loss, tensor_to(r.grad_logits));
        },
        py::arg("logits"), py::arg("labels"), "Returns (loss, grad_logits).");

    m.def(
        "lr_at",
        [](int epoch, float base_lr, float gamma, double step_fraction, int epochs) {
            TrainConfig cfg;
            cfg.base_lr = base_lr;
            cfg.gamma = gamma;
            cfg.step_fraction = step_fraction;
            cfg.epochs = epochs;
            return lr_at(cfg, epoch);
        },
        py::arg("epoch"), py::arg("base_lr") = 0.01f, py::arg("gamma") = 0.1f,
        py::arg("step_fraction") = 1.0 / 3.0, py::arg("epochs") = 30);

    py::class_<PyNetwork>(m, "Network")
        .def(py::init([](int prep_a, int prep_b, int brbs, int classes, int input_size,
                         bool single_branch, bool prep_trainable, const std::string& order) {
                 NetworkConfig cfg;
                 cfg.branch_a = {prep_a, brbs};
                 cfg.branch_b = {prep_b, brbs};
                 cfg.num_classes = classes;
                 cfg.input_h = cfg.input_w = input_size;
                 cfg.single_branch = single_branch;
                 cfg.prep_trainable = prep_trainable;
                 cfg.order = order_from(order);
                 return new PyNetwork(cfg);
             }),
             py::arg("prep_a") = 3, py::arg("prep_b") = 5, py::arg("brbs") = 2,
             py::arg("classes") = 2, py::arg("input_size") = 64, py::arg("single_branch") = false,
             py::arg("prep_trainable") = true, py::arg("order") = "conv-relu-bn")
        .def("init", &PyNetwork::init, py::arg("seed"))
        .def("param_count", [](const PyNetwork& n) { return param_count(n.graph); })
        .def("param_names",
             [](const PyNetwork& n) {
                 n.require_init();
                 std::vector<std::string> names;
                 for (const auto& [k, v] : n.params.tensors) names.push_back(k);
                 return names;
             })
        .def("get_param",
             [](const PyNetwork& n, const std::string& name) {
                 n.require_init();
                 return tensor_to(n.params.at(name));
             })
        .def("forward",
             [](const PyNetwork& n, const FloatArray& x) {
                 n.require_init();
                 return tensor_to(forward_eval(n.graph, n.params, tensor_from(x, "batch")).logits);
             },
             "Eval-mode forward; returns (n, classes, 1, 1) logits.")
        .def("features",
             [](const PyNetwork& n, const FloatArray& x) {
                 n.require_init();
                 auto r = forward_eval(n.graph, n.params, tensor_from(x, "batch"));
                 std::vector<py::array_t<float>> out;
                 for (const auto& f : r.branch_features) out.push_back(tensor_to(f));
                 return out;
             })
        .def("train_batch",
             [](PyNetwork& n, const FloatArray& x, const std::vector<int>& labels, float lr,
                float momentum) {
                 n.require_init();
                 static GradBundle velocity;  // per-process scratch for smoke use
                 auto step = train_step(n.graph, n.params, tensor_from(x, "batch"), labels);
                 GradBundle grads = std::move(step.grads);
                 for (const auto& f : n.graph.frozen) grads.erase(f);
                 sgd_step(n.params, grads, velocity, lr, momentum, 0.0f);
                 return step.loss;
             },
             py::arg("x"), py::arg("labels"), py::arg("lr") = 0.01f, py::arg("momentum") = 0.9f,
             "One SGD step in train mode (BN batch statistics); returns the loss.")
        .def("layer_table",
             [](const PyNetwork& n) {
                 py::list rows;
                 for (const auto& r : n.graph.table) {
                     py::dict d;
                     d["name"] = r.name;
                     d["kind"] = r.kind;
                     d["in"] = py::make_tuple(r.in_c, r.in_h, r.in_w);
                     d["out"] = py::make_tuple(r.out_c, r.out_h, r.out_w);
                     d["params"] = r.params;
                     rows.append(d);
                 }
                 return rows;
             })
        .def("save",
             [](const PyNetwork& n, const std::string& path) {
                 n.require_init();
                 save_checkpoint(path, n.params, n.graph.config);
             })
        .def_static("load", [](const std::string& path) {
            auto ckpt = load_checkpoint(path);
            auto* net = new PyNetwork(ckpt.config);
            check_bundle(net->graph, ckpt.params);
            net->params = std::move(ckpt.params);
            net->initialized = true;
            return net;
        });

    m.def(
        "gen_qr_pattern",
        [](uint64_t seed, int module_px) {
            SynthConfig cfg;
            cfg.module_px = module_px;
            return image_to(gen_qr_pattern(cfg, seed));
        },
        py::arg("seed"), py::arg("module_px") = 16);

    m.def(
        "render_genuine",
        [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& pattern,
           uint64_t seed, int module_px, float genuine_blur_sigma, std::pair<float, float> capture,
           float copy_scan_blur_sigma, float burr_density, int burr_amplitude,
           std::pair<float, float> noise_std, int requantize_levels) {
            auto cfg = synth_cfg(module_px, genuine_blur_sigma, capture.first, capture.second,
                                 copy_scan_blur_sigma, burr_density, burr_amplitude,
                                 noise_std.first, noise_std.second, requantize_levels, 0);
            return image_to(render_genuine(image_from(pattern), cfg, seed));
        },
        py::arg("pattern"), py::arg("seed"), py::arg("module_px") = 16,
        py::arg("genuine_blur_sigma") = 0.5f,
        py::arg("capture_blur_sigma") = std::pair<float, float>(0.3f, 1.0f),
        py::arg("copy_scan_blur_sigma") = 1.2f, py::arg("burr_density") = 0.15f,
        py::arg("burr_amplitude") = 2, py::arg("noise_std") = std::pair<float, float>(3.0f, 6.0f),
        py::arg("requantize_levels") = 2, kSynthArgsDoc);

    m.def(
        "render_copied",
        [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& genuine,
           uint64_t seed, int module_px, float genuine_blur_sigma, std::pair<float, float> capture,
           float copy_scan_blur_sigma, float burr_density, int burr_amplitude,
           std::pair<float, float> noise_std, int requantize_levels) {
            auto cfg = synth_cfg(module_px, genuine_blur_sigma, capture.first, capture.second,
                                 copy_scan_blur_sigma, burr_density, burr_amplitude,
                                 noise_std.first, noise_std.second, requantize_levels, 0);
            return image_to(render_copied(image_from(genuine), cfg, seed));
        },
        py::arg("genuine"), py::arg("seed"), py::arg("module_px") = 16,
        py::arg("genuine_blur_sigma") = 0.5f,
        py::arg("capture_blur_sigma") = std::pair<float, float>(0.3f, 1.0f),
        py::arg("copy_scan_blur_sigma") = 1.2f, py::arg("burr_density") = 0.15f,
        py::arg("burr_amplitude") = 2, py::arg("noise_std") = std::pair<float, float>(3.0f, 6.0f),
        py::arg("requantize_levels") = 2, kSynthArgsDoc);

    m.def(
        "gen_corpus",
        [](const std::string& out_dir, int codes, int copies, uint64_t seed) {
            SynthConfig cfg;
            cfg.master_seed = seed;
            auto result = gen_corpus(cfg, codes, copies, out_dir);
            py::dict d;
            d["images"] = result.report.images;
            d["mean_genuine"] = result.report.mean_genuine;
            d["mean_copied"] = result.report.mean_copied;
            d["mean_overlap"] = result.report.mean_overlap;
            d["roughness_fraction"] = result.report.roughness_fraction;
            return d;
        },
        py::arg("out_dir"), py::arg("codes") = 20, py::arg("copies") = 5, py::arg("seed") = 0);

    m.def(
        "edge_roughness",
        [](const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& image,
           const py::array_t<uint8_t, py::array::c_style | py::array::forcecast>& clean) {
            return edge_roughness(image_from(image), image_from(clean));
        },
        py::arg("image"), py::arg("clean_pattern"));

    m.def(
        "run_gradcheck",
        [](uint64_t seed, int seeds) {
            py::list out;
            for (const auto& r : run_gradient_suite_multi(seed, seeds)) {
                py::dict d;
                d["op"] = r.op;
                d["max_rel_err"] = r.max_rel_err;
                d["tolerance"] = r.tolerance;
                d["pass"] = r.pass;
                out.append(d);
            }
            return out;
        },
        py::arg("seed") = 1, py::arg("seeds") = 3);
}
