#pragma once

// Synthetic copy-forgery corpus: QR-like genuine patterns and copied
// counterparts carrying the copy-process signature (re-binarized edges,
// boundary burrs, heavier noise), while class mean intensities stay
// overlapping so brightness is no shortcut.

#include <cstdint>
#include <string>
#include <vector>

#include "dmfnet/dataset.hpp"
#include "dmfnet/image.hpp"

namespace dmfnet {

struct SynthConfig {
    int image_size = 512;
    int module_px = 16;  // one QR module; must divide image_size
    float genuine_blur_sigma = 0.5f;
    float capture_blur_sigma_lo = 0.3f;  // smartphone capture, drawn per image
    float capture_blur_sigma_hi = 1.0f;
    float copy_scan_blur_sigma = 1.2f;
    float burr_density = 0.15f;     // fraction of edge pixels perturbed
    int burr_amplitude = 2;         // max pixel offset of a flipped neighbor
    float noise_std_genuine = 3.0f;
    float noise_std_copied = 6.0f;
    int requantize_levels = 2;      // re-binarization in the copy chain
    uint64_t master_seed = 0;
};

void validate(const SynthConfig& cfg);

/// Module grid with finder squares in three corners and seeded random
/// black/white modules elsewhere; values strictly {0, 255}.
GrayImage gen_qr_pattern(const SynthConfig& cfg, uint64_t seed);

/// Print blur -> additive noise -> capture blur drawn from the configured
/// range; clamped to [0, 255].
GrayImage render_genuine(const GrayImage& pattern, const SynthConfig& cfg, uint64_t seed);

/// Scan blur -> re-quantization -> edge-burr injection -> print noise ->
/// capture blur; clamped.
GrayImage render_copied(const GrayImage& genuine, const SynthConfig& cfg, uint64_t seed);

/// Perimeter of the 128-thresholded image divided by the perimeter of the
/// clean pattern; copies come out rougher.
double edge_roughness(const GrayImage& image, const GrayImage& clean_pattern);

struct CorpusReport {
    int images = 0;
    double mean_genuine = 0.0, mean_copied = 0.0;
    double std_genuine = 0.0, std_copied = 0.0;   // std of per-image means
    double pooled_std = 0.0;
    bool mean_overlap = false;        // |delta mean| < 0.5 * pooled std
    int roughness_pairs = 0;
    int roughness_separated = 0;      // pairs with copied rougher than genuine
    double roughness_fraction = 0.0;

    std::string to_string() const;
};

struct CorpusResult {
    DatasetManifest manifest;
    CorpusReport report;
};

/// Writes PGMs, manifest.txt and synth_config.txt under out_dir. Per-item
/// seeds derive from (master_seed, code, item), so output does not depend on
/// generation order. group_id = code index; exactly copies_per_code genuine
/// captures and copies_per_code copies per code.
CorpusResult gen_corpus(const SynthConfig& cfg, int n_codes, int copies_per_code,
                        const std::string& out_dir);

/// Standalone signature check on freshly seeded pattern pairs: fraction with
/// edge_roughness(copied) > edge_roughness(genuine).
double roughness_separation_fraction(const SynthConfig& cfg, int pairs, uint64_t seed0);

}  // namespace dmfnet
