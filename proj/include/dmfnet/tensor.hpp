#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dmfnet {

/// Error type thrown by every module; the CLI maps it to exit code 2.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Rank-4 array (batch, channel, height, width), contiguous row-major float32.
/// Carrier of all activations, weights and gradients.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> v;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_, float fill = 0.0f)
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {
        if (n_ < 0 || c_ < 0 || h_ < 0 || w_ < 0) throw Error("Tensor: negative dim");
    }

    size_t size() const { return v.size(); }
    size_t plane() const { return static_cast<size_t>(h) * w; }

    float* data() { return v.data(); }
    const float* data() const { return v.data(); }

    size_t index(int in, int ic, int iy, int ix) const {
        return ((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix;
    }
    float& at(int in, int ic, int iy, int ix) { return v[index(in, ic, iy, ix)]; }
    float at(int in, int ic, int iy, int ix) const { return v[index(in, ic, iy, ix)]; }

    bool same_dims(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    std::string dims_str() const {
        return std::to_string(n) + "x" + std::to_string(c) + "x" +
               std::to_string(h) + "x" + std::to_string(w);
    }
};

/// Square-kernel convolution geometry: kernel k, stride s, symmetric zero pad p.
struct ConvSpec {
    int kernel = 1;
    int stride = 1;
    int pad = 0;
    int in_channels = 1;
    int out_channels = 1;
};

/// Output spatial size of a conv/pool window sweep: floor((in + 2p - k)/s) + 1.
/// Rejects geometries where the kernel exceeds the padded input.
inline std::pair<int, int> out_shape(const ConvSpec& spec, int in_h, int in_w) {
    if (spec.kernel < 1 || spec.stride < 1 || spec.pad < 0)
        throw Error("out_shape: kernel/stride must be >= 1 and pad >= 0");
    if (in_h + 2 * spec.pad - spec.kernel < 0 || in_w + 2 * spec.pad - spec.kernel < 0)
        throw Error("out_shape: kernel " + std::to_string(spec.kernel) +
                    " exceeds padded input " + std::to_string(in_h) + "x" + std::to_string(in_w));
    int oh = (in_h + 2 * spec.pad - spec.kernel) / spec.stride + 1;
    int ow = (in_w + 2 * spec.pad - spec.kernel) / spec.stride + 1;
    return {oh, ow};
}

}  // namespace dmfnet
