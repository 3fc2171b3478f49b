#include "dmfnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "kernels.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace dmfnet {

namespace {

// Per-worker scratch that keeps its capacity across operator calls.
std::vector<float>& scratch_buffer(int which) {
    static thread_local std::vector<float> bufs[3];
    return bufs[which];
}

// im2col in (K, N) layout: row k = (ic, ky, kx), column = output position.
// K rows are contiguous over the N = oh*ow output positions.
void im2col(const float* src, int c, int h, int w, const ConvSpec& s, int oh, int ow,
            float* col) {
    const int N = oh * ow;
    for (int ic = 0; ic < c; ++ic) {
        const float* plane = src + static_cast<size_t>(ic) * h * w;
        for (int ky = 0; ky < s.kernel; ++ky) {
            for (int kx = 0; kx < s.kernel; ++kx) {
                float* row = col + (static_cast<size_t>(ic) * s.kernel * s.kernel +
                                    static_cast<size_t>(ky) * s.kernel + kx) * N;
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * s.stride + ky - s.pad;
                    float* dst = row + static_cast<size_t>(oy) * ow;
                    if (iy < 0 || iy >= h) {
                        std::memset(dst, 0, sizeof(float) * ow);
                        continue;
                    }
                    const float* srow = plane + static_cast<size_t>(iy) * w;
                    if (s.stride == 1) {
                        int x0 = kx - s.pad;             // input x of output column 0
                        int lo = std::max(0, -x0);       // first valid output column
                        int hi = std::min(ow, w - x0);   // one past last valid column
                        if (lo > 0) std::memset(dst, 0, sizeof(float) * lo);
                        if (hi > lo) std::memcpy(dst + lo, srow + x0 + lo, sizeof(float) * (hi - lo));
                        if (hi < ow) std::memset(dst + std::max(hi, lo), 0,
                                                 sizeof(float) * (ow - std::max(hi, lo)));
                    } else {
                        for (int ox = 0; ox < ow; ++ox) {
                            int ix = ox * s.stride + kx - s.pad;
                            dst[ox] = (ix >= 0 && ix < w) ? srow[ix] : 0.0f;
                        }
                    }
                }
            }
        }
    }
}

// Scatter-add of the (K, N) column gradient back onto one input sample.
void col2im_add(const float* col, int c, int h, int w, const ConvSpec& s, int oh, int ow,
                float* dst) {
    const int N = oh * ow;
    for (int ic = 0; ic < c; ++ic) {
        float* plane = dst + static_cast<size_t>(ic) * h * w;
        for (int ky = 0; ky < s.kernel; ++ky) {
            for (int kx = 0; kx < s.kernel; ++kx) {
                const float* row = col + (static_cast<size_t>(ic) * s.kernel * s.kernel +
                                          static_cast<size_t>(ky) * s.kernel + kx) * N;
                for (int oy = 0; oy < oh; ++oy) {
                    int iy = oy * s.stride + ky - s.pad;
                    if (iy < 0 || iy >= h) continue;
                    float* drow = plane + static_cast<size_t>(iy) * w;
                    const float* srow = row + static_cast<size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        int ix = ox * s.stride + kx - s.pad;
                        if (ix >= 0 && ix < w) drow[ix] += srow[ox];
                    }
                }
            }
        }
    }
}

void check_conv_args(const Tensor& input, const Tensor& weights,
                     std::span<const float> bias, const ConvSpec& spec) {
    if (input.c != spec.in_channels)
        throw Error("conv2d: input has " + std::to_string(input.c) + " channels, spec expects " +
                    std::to_string(spec.in_channels));
    if (weights.n != spec.out_channels || weights.c != spec.in_channels ||
        weights.h != spec.kernel || weights.w != spec.kernel)
        throw Error("conv2d: weight dims " + weights.dims_str() + " do not match spec");
    if (!bias.empty() && static_cast<int>(bias.size()) != spec.out_channels)
        throw Error("conv2d: bias size mismatch");
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                      std::span<const float> bias, const ConvSpec& spec) {
    check_conv_args(input, weights, bias, spec);
    auto [oh, ow] = out_shape(spec, input.h, input.w);
    const int M = spec.out_channels;
    const int K = spec.in_channels * spec.kernel * spec.kernel;
    const int N = oh * ow;
    const bool direct = spec.kernel == 1 && spec.stride == 1 && spec.pad == 0;
    Tensor out(input.n, M, oh, ow);

#pragma omp parallel for schedule(static)
    for (int i = 0; i < input.n; ++i) {
        const float* src = input.data() + static_cast<size_t>(i) * input.c * input.plane();
        float* dst = out.data() + static_cast<size_t>(i) * M * N;
        const float* colp = src;
        if (!direct) {
            auto& col = scratch_buffer(0);
            col.resize(static_cast<size_t>(K) * N);
            im2col(src, input.c, input.h, input.w, spec, oh, ow, col.data());
            colp = col.data();
        }
        detail::gemm_nn(weights.data(), K, colp, N, dst, N, M, K, N, false);
        if (!bias.empty()) {
            for (int oc = 0; oc < M; ++oc) {
                float b = bias[oc];
                float* row = dst + static_cast<size_t>(oc) * N;
                for (int j = 0; j < N; ++j) row[j] += b;
            }
        }
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const Tensor& weights,
                          const Tensor& grad_out, const ConvSpec& spec,
                          bool need_input_grad) {
    check_conv_args(input, weights, {}, spec);
    auto [oh, ow] = out_shape(spec, input.h, input.w);
    if (grad_out.n != input.n || grad_out.c != spec.out_channels || grad_out.h != oh ||
        grad_out.w != ow)
        throw Error("conv2d_backward: grad_out dims " + grad_out.dims_str() +
                    " do not match forward output");
    const int M = spec.out_channels;
    const int K = spec.in_channels * spec.kernel * spec.kernel;
    const int N = oh * ow;
    const bool direct = spec.kernel == 1 && spec.stride == 1 && spec.pad == 0;

    ConvGrads g;
    g.weights = Tensor(weights.n, weights.c, weights.h, weights.w);
    g.bias.assign(M, 0.0f);
    if (need_input_grad) g.input = Tensor(input.n, input.c, input.h, input.w);

    // weights are packed transposed once; every sample reuses it
    std::vector<float> wt;
    if (need_input_grad) {
        wt.resize(static_cast<size_t>(K) * M);
        for (int m = 0; m < M; ++m)
            for (int k = 0; k < K; ++k) wt[static_cast<size_t>(k) * M + m] = weights.v[static_cast<size_t>(m) * K + k];
    }

    // per-sample weight-gradient contributions, summed in sample order below
    std::vector<float> gw_all(static_cast<size_t>(input.n) * M * K);

#pragma omp parallel for schedule(static)
    for (int i = 0; i < input.n; ++i) {
        const float* src = input.data() + static_cast<size_t>(i) * input.c * input.plane();
        const float* go = grad_out.data() + static_cast<size_t>(i) * M * N;
        float* gw = gw_all.data() + static_cast<size_t>(i) * M * K;
        const float* colp = src;
        if (!direct) {
            auto& col = scratch_buffer(0);
            col.resize(static_cast<size_t>(K) * N);
            im2col(src, input.c, input.h, input.w, spec, oh, ow, col.data());
            colp = col.data();
        }
        detail::gemm_abt(go, N, colp, N, gw, K, M, N, K, false);
        if (need_input_grad) {
            float* gi = g.input.data() + static_cast<size_t>(i) * input.c * input.plane();
            if (direct) {
                detail::gemm_nn(wt.data(), M, go, N, gi, N, K, M, N, false);
            } else {
                auto& colg = scratch_buffer(1);
                colg.resize(static_cast<size_t>(K) * N);
                detail::gemm_nn(wt.data(), M, go, N, colg.data(), N, K, M, N, false);
                col2im_add(colg.data(), input.c, input.h, input.w, spec, oh, ow, gi);
            }
        }
    }

    for (int i = 0; i < input.n; ++i) {
        const float* gw = gw_all.data() + static_cast<size_t>(i) * M * K;
        for (size_t j = 0; j < static_cast<size_t>(M) * K; ++j) g.weights.v[j] += gw[j];
    }
    for (int oc = 0; oc < M; ++oc) {
        double s = 0.0;
        for (int i = 0; i < grad_out.n; ++i) {
            const float* row = grad_out.data() + (static_cast<size_t>(i) * M + oc) * N;
            for (int j = 0; j < N; ++j) s += row[j];
        }
        g.bias[oc] = static_cast<float>(s);
    }
    return g;
}

Tensor relu_forward(Tensor x) {
    for (float& v : x.v) v = v > 0.0f ? v : 0.0f;
    return x;
}

Tensor relu_backward(const Tensor& input_or_output, const Tensor& grad_out) {
    if (!input_or_output.same_dims(grad_out))
        throw Error("relu_backward: dims mismatch " + input_or_output.dims_str() + " vs " +
                    grad_out.dims_str());
    Tensor g(grad_out.n, grad_out.c, grad_out.h, grad_out.w);
    for (size_t i = 0; i < g.size(); ++i)
        g.v[i] = input_or_output.v[i] > 0.0f ? grad_out.v[i] : 0.0f;
    return g;
}

BatchNormState BatchNormState::init(int channels) {
    BatchNormState s;
    s.scale.assign(channels, 1.0f);
    s.shift.assign(channels, 0.0f);
    s.running_mean.assign(channels, 0.0f);
    s.running_var.assign(channels, 1.0f);
    return s;
}

BatchNormTrainResult batchnorm_forward_train(const Tensor& x, const BatchNormState& state) {
    const int C = x.c;
    if (static_cast<int>(state.scale.size()) != C)
        throw Error("batchnorm: channel count mismatch");
    const size_t m = static_cast<size_t>(x.n) * x.plane();
    if (m < 2) throw Error("batchnorm: train mode needs n*h*w >= 2 per channel");

    BatchNormTrainResult r;
    r.y = Tensor(x.n, x.c, x.h, x.w);
    r.mean.assign(C, 0.0f);
    r.inv_std.assign(C, 0.0f);
    r.updated = state;

#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < C; ++ch) {
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < x.n; ++i) {
            const float* p = x.data() + (static_cast<size_t>(i) * C + ch) * x.plane();
            for (size_t j = 0; j < x.plane(); ++j) {
                double v = p[j];
                sum += v;
                sumsq += v * v;
            }
        }
        double mean = sum / static_cast<double>(m);
        double var = std::max(0.0, sumsq / static_cast<double>(m) - mean * mean);
        float inv_std = static_cast<float>(1.0 / std::sqrt(var + state.epsilon));
        r.mean[ch] = static_cast<float>(mean);
        r.inv_std[ch] = inv_std;
        float a = state.scale[ch] * inv_std;
        float b = state.shift[ch] - static_cast<float>(mean) * a;
        for (int i = 0; i < x.n; ++i) {
            const float* p = x.data() + (static_cast<size_t>(i) * C + ch) * x.plane();
            float* q = r.y.data() + (static_cast<size_t>(i) * C + ch) * x.plane();
            for (size_t j = 0; j < x.plane(); ++j) q[j] = p[j] * a + b;
        }
        float mom = state.momentum;
        r.updated.running_mean[ch] =
            (1.0f - mom) * state.running_mean[ch] + mom * static_cast<float>(mean);
        r.updated.running_var[ch] =
            (1.0f - mom) * state.running_var[ch] + mom * static_cast<float>(var);
    }
    r.updated.batches_seen = state.batches_seen + 1;
    return r;
}

Tensor batchnorm_forward_eval(const Tensor& x, const BatchNormState& state) {
    const int C = x.c;
    if (static_cast<int>(state.scale.size()) != C)
        throw Error("batchnorm: channel count mismatch");
    if (state.batches_seen == 0)
        throw Error("batchnorm: eval mode before any running statistics exist");
    Tensor y(x.n, x.c, x.h, x.w);
#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < C; ++ch) {
        float inv_std = 1.0f / std::sqrt(state.running_var[ch] + state.epsilon);
        float a = state.scale[ch] * inv_std;
        float b = state.shift[ch] - state.running_mean[ch] * a;
        for (int i = 0; i < x.n; ++i) {
            const float* p = x.data() + (static_cast<size_t>(i) * C + ch) * x.plane();
            float* q = y.data() + (static_cast<size_t>(i) * C + ch) * x.plane();
            for (size_t j = 0; j < x.plane(); ++j) q[j] = p[j] * a + b;
        }
    }
    return y;
}

BatchNormGrads batchnorm_backward(const Tensor& x, const Tensor& grad_out,
                                  std::span<const float> scale,
                                  std::span<const float> mean,
                                  std::span<const float> inv_std) {
    if (!x.same_dims(grad_out)) throw Error("batchnorm_backward: dims mismatch");
    const int C = x.c;
    const double m = static_cast<double>(x.n) * x.plane();
    BatchNormGrads g;
    g.input = Tensor(x.n, x.c, x.h, x.w);
    g.scale.assign(C, 0.0f);
    g.shift.assign(C, 0.0f);

#pragma omp parallel for schedule(static)
    for (int ch = 0; ch < C; ++ch) {
        float mu = mean[ch], is = inv_std[ch];
        double sum_g = 0.0, sum_gx = 0.0;
        for (int i = 0; i < x.n; ++i) {
            const float* xp = x.data() + (static_cast<size_t>(i) * C + ch) * x.plane();
            const float* gp = grad_out.data() + (static_cast<size_t>(i) * C + ch) * x.plane();
            for (size_t j = 0; j < x.plane(); ++j) {
                double xhat = (xp[j] - mu) * is;
                sum_g += gp[j];
                sum_gx += gp[j] * xhat;
            }
        }
        g.shift[ch] = static_cast<float>(sum_g);
        g.scale[ch] = static_cast<float>(sum_gx);
        float k1 = static_cast<float>(sum_g / m);
        float k2 = static_cast<float>(sum_gx / m);
        float a = scale[ch] * is;
        for (int i = 0; i < x.n; ++i) {
            const float* xp = x.data() + (static_cast<size_t>(i) * C + ch) * x.plane();
            const float* gp = grad_out.data() + (static_cast<size_t>(i) * C + ch) * x.plane();
            float* op = g.input.data() + (static_cast<size_t>(i) * C + ch) * x.plane();
            for (size_t j = 0; j < x.plane(); ++j) {
                float xhat = (xp[j] - mu) * is;
                op[j] = a * (gp[j] - k1 - xhat * k2);
            }
        }
    }
    return g;
}

Tensor avgpool_forward(const Tensor& x, int kernel, int stride) {
    ConvSpec s{kernel, stride, 0, x.c, x.c};
    auto [oh, ow] = out_shape(s, x.h, x.w);
    Tensor out(x.n, x.c, oh, ow);
    const float inv = 1.0f / static_cast<float>(kernel * kernel);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < x.n; ++i) {
        for (int ch = 0; ch < x.c; ++ch) {
            const float* plane = x.data() + (static_cast<size_t>(i) * x.c + ch) * x.plane();
            float* dst = out.data() + (static_cast<size_t>(i) * x.c + ch) * out.plane();
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    float sum = 0.0f;
                    for (int ky = 0; ky < kernel; ++ky) {
                        const float* row = plane + static_cast<size_t>(oy * stride + ky) * x.w +
                                           static_cast<size_t>(ox) * stride;
                        for (int kx = 0; kx < kernel; ++kx) sum += row[kx];
                    }
                    dst[static_cast<size_t>(oy) * ow + ox] = sum * inv;
                }
            }
        }
    }
    return out;
}

Tensor avgpool_backward(int in_h, int in_w, const Tensor& grad_out, int kernel, int stride) {
    ConvSpec s{kernel, stride, 0, grad_out.c, grad_out.c};
    auto [oh, ow] = out_shape(s, in_h, in_w);
    if (grad_out.h != oh || grad_out.w != ow)
        throw Error("avgpool_backward: grad_out dims do not match forward output");
    Tensor gi(grad_out.n, grad_out.c, in_h, in_w);
    const float inv = 1.0f / static_cast<float>(kernel * kernel);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < grad_out.n; ++i) {
        for (int ch = 0; ch < grad_out.c; ++ch) {
            const float* src = grad_out.data() + (static_cast<size_t>(i) * grad_out.c + ch) * grad_out.plane();
            float* plane = gi.data() + (static_cast<size_t>(i) * grad_out.c + ch) * gi.plane();
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    float gval = src[static_cast<size_t>(oy) * ow + ox] * inv;
                    for (int ky = 0; ky < kernel; ++ky) {
                        float* row = plane + static_cast<size_t>(oy * stride + ky) * in_w +
                                     static_cast<size_t>(ox) * stride;
                        for (int kx = 0; kx < kernel; ++kx) row[kx] += gval;
                    }
                }
            }
        }
    }
    return gi;
}

Tensor global_avgpool_forward(const Tensor& x) {
    if (x.h < 1 || x.w < 1) throw Error("global_avgpool: empty spatial extent");
    Tensor out(x.n, x.c, 1, 1);
    const double inv = 1.0 / static_cast<double>(x.plane());
    for (int i = 0; i < x.n; ++i) {
        for (int ch = 0; ch < x.c; ++ch) {
            const float* plane = x.data() + (static_cast<size_t>(i) * x.c + ch) * x.plane();
            double sum = 0.0;
            for (size_t j = 0; j < x.plane(); ++j) sum += plane[j];
            out.v[static_cast<size_t>(i) * x.c + ch] = static_cast<float>(sum * inv);
        }
    }
    return out;
}

Tensor global_avgpool_backward(int in_h, int in_w, const Tensor& grad_out) {
    if (grad_out.h != 1 || grad_out.w != 1)
        throw Error("global_avgpool_backward: grad_out must be (n, c, 1, 1)");
    Tensor gi(grad_out.n, grad_out.c, in_h, in_w);
    const float inv = 1.0f / static_cast<float>(in_h * in_w);
    for (int i = 0; i < grad_out.n; ++i) {
        for (int ch = 0; ch < grad_out.c; ++ch) {
            float gval = grad_out.v[static_cast<size_t>(i) * grad_out.c + ch] * inv;
            float* plane = gi.data() + (static_cast<size_t>(i) * gi.c + ch) * gi.plane();
            for (size_t j = 0; j < gi.plane(); ++j) plane[j] = gval;
        }
    }
    return gi;
}

Tensor fully_connected_forward(const Tensor& x, const Tensor& weights,
                               std::span<const float> bias) {
    const int d = x.c * x.h * x.w;
    const int classes = weights.n;
    if (weights.c * weights.h * weights.w != d)
        throw Error("fully_connected: weight columns " +
                    std::to_string(weights.c * weights.h * weights.w) +
                    " do not match input width " + std::to_string(d));
    if (static_cast<int>(bias.size()) != classes)
        throw Error("fully_connected: bias size mismatch");
    Tensor out(x.n, classes, 1, 1);
    for (int i = 0; i < x.n; ++i) {
        const float* xi = x.data() + static_cast<size_t>(i) * d;
        for (int cl = 0; cl < classes; ++cl) {
            const float* wr = weights.data() + static_cast<size_t>(cl) * d;
            double s = bias[cl];
            for (int j = 0; j < d; ++j) s += static_cast<double>(xi[j]) * wr[j];
            out.v[static_cast<size_t>(i) * classes + cl] = static_cast<float>(s);
        }
    }
    return out;
}

FcGrads fully_connected_backward(const Tensor& x, const Tensor& weights,
                                 const Tensor& grad_out) {
    const int d = x.c * x.h * x.w;
    const int classes = weights.n;
    if (grad_out.n != x.n || grad_out.c != classes || grad_out.h != 1 || grad_out.w != 1)
        throw Error("fully_connected_backward: grad_out dims mismatch");
    FcGrads g;
    g.input = Tensor(x.n, x.c, x.h, x.w);
    g.weights = Tensor(weights.n, weights.c, weights.h, weights.w);
    g.bias.assign(classes, 0.0f);
    for (int i = 0; i < x.n; ++i) {
        const float* xi = x.data() + static_cast<size_t>(i) * d;
        const float* go = grad_out.data() + static_cast<size_t>(i) * classes;
        float* gi = g.input.data() + static_cast<size_t>(i) * d;
        for (int cl = 0; cl < classes; ++cl) {
            const float* wr = weights.data() + static_cast<size_t>(cl) * d;
            float* gw = g.weights.data() + static_cast<size_t>(cl) * d;
            float gv = go[cl];
            for (int j = 0; j < d; ++j) {
                gi[j] += gv * wr[j];
                gw[j] += gv * xi[j];
            }
            g.bias[cl] += gv;
        }
    }
    return g;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    if (a.n != b.n || a.h != b.h || a.w != b.w)
        throw Error("concat_channels: batch/spatial mismatch " + a.dims_str() + " vs " +
                    b.dims_str());
    Tensor out(a.n, a.c + b.c, a.h, a.w);
    const size_t pa = static_cast<size_t>(a.c) * a.plane();
    const size_t pb = static_cast<size_t>(b.c) * b.plane();
    for (int i = 0; i < a.n; ++i) {
        std::memcpy(out.data() + static_cast<size_t>(i) * (pa + pb), a.data() + static_cast<size_t>(i) * pa,
                    sizeof(float) * pa);
        std::memcpy(out.data() + static_cast<size_t>(i) * (pa + pb) + pa,
                    b.data() + static_cast<size_t>(i) * pb, sizeof(float) * pb);
    }
    return out;
}

std::pair<Tensor, Tensor> concat_channels_backward(const Tensor& grad_out, int c_a) {
    if (c_a < 0 || c_a > grad_out.c) throw Error("concat_channels_backward: bad split point");
    const int c_b = grad_out.c - c_a;
    Tensor ga(grad_out.n, c_a, grad_out.h, grad_out.w);
    Tensor gb(grad_out.n, c_b, grad_out.h, grad_out.w);
    const size_t pa = static_cast<size_t>(c_a) * grad_out.plane();
    const size_t pb = static_cast<size_t>(c_b) * grad_out.plane();
    for (int i = 0; i < grad_out.n; ++i) {
        const float* src = grad_out.data() + static_cast<size_t>(i) * (pa + pb);
        std::memcpy(ga.data() + static_cast<size_t>(i) * pa, src, sizeof(float) * pa);
        std::memcpy(gb.data() + static_cast<size_t>(i) * pb, src + pa, sizeof(float) * pb);
    }
    return {std::move(ga), std::move(gb)};
}

LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    const int classes = logits.c * logits.h * logits.w;
    if (logits.n < 1) throw Error("softmax_cross_entropy: empty batch");
    if (static_cast<int>(labels.size()) != logits.n)
        throw Error("softmax_cross_entropy: label count mismatch");
    LossResult r;
    r.grad_logits = Tensor(logits.n, logits.c, logits.h, logits.w);
    double total = 0.0;
    const float invn = 1.0f / static_cast<float>(logits.n);
    for (int i = 0; i < logits.n; ++i) {
        if (labels[i] < 0 || labels[i] >= classes)
            throw Error("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                        " out of range");
        const float* l = logits.data() + static_cast<size_t>(i) * classes;
        float* g = r.grad_logits.data() + static_cast<size_t>(i) * classes;
        float mx = l[0];
        for (int cl = 1; cl < classes; ++cl) mx = std::max(mx, l[cl]);
        double z = 0.0;
        for (int cl = 0; cl < classes; ++cl) z += std::exp(static_cast<double>(l[cl]) - mx);
        total += -(static_cast<double>(l[labels[i]]) - mx - std::log(z));
        for (int cl = 0; cl < classes; ++cl) {
            double p = std::exp(static_cast<double>(l[cl]) - mx) / z;
            g[cl] = (static_cast<float>(p) - (cl == labels[i] ? 1.0f : 0.0f)) * invn;
        }
    }
    r.loss = static_cast<float>(total / logits.n);
    return r;
}

}  // namespace dmfnet
