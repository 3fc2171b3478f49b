#pragma once

// Test-only brute-force references. These stay independent of the library's
// im2col/GEMM path: plain nested loops, no shared helpers beyond the Tensor
// container itself.

#include <vector>

#include "dmfnet/rng.hpp"
#include "dmfnet/tensor.hpp"

namespace refops {

// Window-enumeration oracle for output sizes: counts the start positions
// -p, -p+s, -p+2s, ... whose k-wide window still fits in the padded extent.
inline int enumerate_windows(int in, int k, int s, int p) {
    int count = 0;
    for (int start = -p; start + k <= in + p; start += s) ++count;
    return count;
}

// Seven-loop cross-correlation with zero padding.
inline dmfnet::Tensor naive_conv2d(const dmfnet::Tensor& x, const dmfnet::Tensor& w,
                                   const std::vector<float>& bias, int stride, int pad) {
    int k = w.h;
    int oh = (x.h + 2 * pad - k) / stride + 1;
    int ow = (x.w + 2 * pad - k) / stride + 1;
    dmfnet::Tensor out(x.n, w.n, oh, ow);
    for (int i = 0; i < x.n; ++i)
        for (int oc = 0; oc < w.n; ++oc)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    float sum = bias.empty() ? 0.0f : bias[oc];
                    for (int ic = 0; ic < x.c; ++ic)
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                int iy = oy * stride + ky - pad;
                                int ix = ox * stride + kx - pad;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w) continue;
                                sum += x.at(i, ic, iy, ix) * w.at(oc, ic, ky, kx);
                            }
                    out.at(i, oc, oy, ox) = sum;
                }
    return out;
}

inline dmfnet::Tensor naive_avgpool(const dmfnet::Tensor& x, int k, int s) {
    int oh = (x.h - k) / s + 1;
    int ow = (x.w - k) / s + 1;
    dmfnet::Tensor out(x.n, x.c, oh, ow);
    for (int i = 0; i < x.n; ++i)
        for (int c = 0; c < x.c; ++c)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    float sum = 0.0f;
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) sum += x.at(i, c, oy * s + ky, ox * s + kx);
                    out.at(i, c, oy, ox) = sum / static_cast<float>(k * k);
                }
    return out;
}

inline dmfnet::Tensor random_tensor(int n, int c, int h, int w, dmfnet::Rng& rng,
                                    double scale = 1.0) {
    dmfnet::Tensor t(n, c, h, w);
    for (float& v : t.v) v = static_cast<float>(rng.gaussian() * scale);
    return t;
}

}  // namespace refops
