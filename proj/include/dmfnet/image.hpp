#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dmfnet/tensor.hpp"

namespace dmfnet {

/// 8-bit grayscale image, row-major.
struct GrayImage {
    int width = 0;
    int height = 0;
    std::vector<uint8_t> pixels;

    GrayImage() = default;
    GrayImage(int w, int h, uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

    uint8_t at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
    uint8_t& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
};

/// Binary PGM ("P5"), maxval 255 only. Lossless round trip with write_pgm.
GrayImage read_pgm(const std::string& path);
void write_pgm(const GrayImage& image, const std::string& path);

/// Non-overlapping row-major tiling; image dims must be divisible by patch.
/// Patch (r, c) covers rows [patch*r, patch*r+patch) and the same for columns.
std::vector<GrayImage> extract_patches(const GrayImage& image, int patch);

}  // namespace dmfnet
