#include "dmfnet/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dmfnet/rng.hpp"

namespace dmfnet {

namespace {

void to_float(const GrayImage& img, std::vector<float>& f) {
    f.resize(img.pixels.size());
    for (size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(img.pixels[i]);
}

GrayImage to_u8(const std::vector<float>& f, int w, int h) {
    GrayImage img(w, h);
    for (size_t i = 0; i < f.size(); ++i) {
        float v = std::clamp(f[i], 0.0f, 255.0f);
        img.pixels[i] = static_cast<uint8_t>(std::lround(v));
    }
    return img;
}

int reflect(int i, int n) {
    if (i < 0) return -i - 1;
    if (i >= n) return 2 * n - i - 1;
    return i;
}

// separable Gaussian, kernel radius ceil(3*sigma), reflected borders
void gaussian_blur(std::vector<float>& f, int w, int h, float sigma) {
    if (sigma <= 0.0f) return;
    const int radius = static_cast<int>(std::ceil(3.0f * sigma));
    std::vector<float> kernel(2 * radius + 1);
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * (i / static_cast<double>(sigma)) * (i / static_cast<double>(sigma)));
        kernel[i + radius] = static_cast<float>(v);
        sum += v;
    }
    for (float& v : kernel) v = static_cast<float>(v / sum);

    std::vector<float> tmp(f.size());
    for (int y = 0; y < h; ++y) {
        const float* row = f.data() + static_cast<size_t>(y) * w;
        float* out = tmp.data() + static_cast<size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            float acc = 0.0f;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * row[reflect(x + i, w)];
            out[x] = acc;
        }
    }
    for (int x = 0; x < w; ++x) {
        for (int y = 0; y < h; ++y) {
            float acc = 0.0f;
            for (int i = -radius; i <= radius; ++i)
                acc += kernel[i + radius] * tmp[static_cast<size_t>(reflect(y + i, h)) * w + x];
            f[static_cast<size_t>(y) * w + x] = acc;
        }
    }
}

void add_noise(std::vector<float>& f, float std, Rng& rng) {
    if (std <= 0.0f) return;
    for (float& v : f) v += static_cast<float>(rng.gaussian() * std);
}

void requantize(std::vector<float>& f, int levels) {
    if (levels < 2) throw Error("synth: requantize_levels must be >= 2");
    const float steps = static_cast<float>(levels - 1);
    for (float& v : f) {
        float t = std::clamp(v, 0.0f, 255.0f) / 255.0f;
        v = std::round(t * steps) / steps * 255.0f;
    }
}

// Boundary burrs: every edge pixel of the quantized image may copy its value
// onto a nearby neighbor, roughening the contour in both directions.
void inject_burrs(std::vector<float>& f, int w, int h, const SynthConfig& cfg, Rng& rng) {
    if (cfg.burr_density <= 0.0f) return;
    std::vector<float> src = f;
    auto is_edge = [&](int y, int x) {
        float v = src[static_cast<size_t>(y) * w + x];
        if (x + 1 < w && std::abs(src[static_cast<size_t>(y) * w + x + 1] - v) > 127.0f) return true;
        if (x > 0 && std::abs(src[static_cast<size_t>(y) * w + x - 1] - v) > 127.0f) return true;
        if (y + 1 < h && std::abs(src[static_cast<size_t>(y + 1) * w + x] - v) > 127.0f) return true;
        if (y > 0 && std::abs(src[static_cast<size_t>(y - 1) * w + x] - v) > 127.0f) return true;
        return false;
    };
    const int amp = std::max(1, cfg.burr_amplitude);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!is_edge(y, x)) continue;
            if (rng.uniform() >= cfg.burr_density) continue;
            int dx = 0, dy = 0;
            while (dx == 0 && dy == 0) {
                dx = static_cast<int>(rng.uniform_int(2 * amp + 1)) - amp;
                dy = static_cast<int>(rng.uniform_int(2 * amp + 1)) - amp;
            }
            int ny = std::clamp(y + dy, 0, h - 1);
            int nx = std::clamp(x + dx, 0, w - 1);
            f[static_cast<size_t>(ny) * w + nx] = src[static_cast<size_t>(y) * w + x];
        }
    }
}

void stamp_finder(GrayImage& pattern, int gy, int gx, int module_px) {
    // 7x7 finder: black ring, white ring, 3x3 black core
    for (int my = 0; my < 7; ++my) {
        for (int mx = 0; mx < 7; ++mx) {
            bool ring1 = my == 0 || my == 6 || mx == 0 || mx == 6;
            bool core = my >= 2 && my <= 4 && mx >= 2 && mx <= 4;
            uint8_t v = (ring1 || core) ? 0 : 255;
            for (int py = 0; py < module_px; ++py)
                for (int px = 0; px < module_px; ++px)
                    pattern.at((gy + my) * module_px + py, (gx + mx) * module_px + px) = v;
        }
    }
}

}  // namespace

void validate(const SynthConfig& cfg) {
    if (cfg.image_size < 1 || cfg.module_px < 1 || cfg.image_size % cfg.module_px != 0)
        throw Error("synth: module_px must divide image_size");
    if (cfg.image_size / cfg.module_px < 14)
        throw Error("synth: module grid too small for finder squares");
    if (cfg.genuine_blur_sigma < 0 || cfg.copy_scan_blur_sigma < 0 ||
        cfg.capture_blur_sigma_lo < 0 || cfg.capture_blur_sigma_hi < cfg.capture_blur_sigma_lo)
        throw Error("synth: blur sigmas must be >= 0 with lo <= hi");
    if (cfg.burr_density < 0.0f || cfg.burr_density > 1.0f)
        throw Error("synth: burr_density must be in [0, 1]");
    if (cfg.requantize_levels < 2) throw Error("synth: requantize_levels must be >= 2");
}

GrayImage gen_qr_pattern(const SynthConfig& cfg, uint64_t seed) {
    validate(cfg);
    const int grid = cfg.image_size / cfg.module_px;
    GrayImage pattern(cfg.image_size, cfg.image_size);
    Rng rng(mix_seed(seed, 0x9a77e51));
    for (int gy = 0; gy < grid; ++gy) {
        for (int gx = 0; gx < grid; ++gx) {
            uint8_t v = rng.uniform() < 0.5 ? 0 : 255;
            for (int py = 0; py < cfg.module_px; ++py)
                for (int px = 0; px < cfg.module_px; ++px)
                    pattern.at(gy * cfg.module_px + py, gx * cfg.module_px + px) = v;
        }
    }
    stamp_finder(pattern, 0, 0, cfg.module_px);
    stamp_finder(pattern, 0, grid - 7, cfg.module_px);
    stamp_finder(pattern, grid - 7, 0, cfg.module_px);
    return pattern;
}

GrayImage render_genuine(const GrayImage& pattern, const SynthConfig& cfg, uint64_t seed) {
    Rng rng(mix_seed(seed, 0x6e41));
    float capture_sigma =
        static_cast<float>(rng.uniform_range(cfg.capture_blur_sigma_lo, cfg.capture_blur_sigma_hi));
    std::vector<float> f;
    to_float(pattern, f);
    gaussian_blur(f, pattern.width, pattern.height, cfg.genuine_blur_sigma);
    add_noise(f, cfg.noise_std_genuine, rng);
    gaussian_blur(f, pattern.width, pattern.height, capture_sigma);
    return to_u8(f, pattern.width, pattern.height);
}

GrayImage render_copied(const GrayImage& genuine, const SynthConfig& cfg, uint64_t seed) {
    Rng rng(mix_seed(seed, 0xc0b1));
    float capture_sigma =
        static_cast<float>(rng.uniform_range(cfg.capture_blur_sigma_lo, cfg.capture_blur_sigma_hi));
    std::vector<float> f;
    to_float(genuine, f);
    gaussian_blur(f, genuine.width, genuine.height, cfg.copy_scan_blur_sigma);
    requantize(f, cfg.requantize_levels);
    inject_burrs(f, genuine.width, genuine.height, cfg, rng);
    add_noise(f, cfg.noise_std_copied, rng);
    gaussian_blur(f, genuine.width, genuine.height, capture_sigma);
    return to_u8(f, genuine.width, genuine.height);
}

double edge_roughness(const GrayImage& image, const GrayImage& clean_pattern) {
    auto perimeter = [](const GrayImage& img) {
        long p = 0;
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                bool v = img.at(y, x) >= 128;
                if (x + 1 < img.width && v != (img.at(y, x + 1) >= 128)) ++p;
                if (y + 1 < img.height && v != (img.at(y + 1, x) >= 128)) ++p;
            }
        return p;
    };
    long clean = perimeter(clean_pattern);
    if (clean == 0) throw Error("edge_roughness: blank clean pattern");
    return static_cast<double>(perimeter(image)) / static_cast<double>(clean);
}

std::string CorpusReport::to_string() const {
    std::ostringstream os;
    os << "corpus statistics (" << images << " images)\n";
    os << "  mean intensity   genuine " << mean_genuine << " +- " << std_genuine << ", copied "
       << mean_copied << " +- " << std_copied << "\n";
    os << "  mean overlap     |delta| = " << std::abs(mean_genuine - mean_copied) << " vs 0.5*pooled std = "
       << 0.5 * pooled_std << (mean_overlap ? "  [ok]" : "  [SHORTCUT RISK]") << "\n";
    os << "  edge roughness   copied > genuine on " << roughness_separated << "/"
       << roughness_pairs << " pairs (" << 100.0 * roughness_fraction << "%)\n";
    return os.str();
}

namespace {

// per-item seeds: hash(master_seed, code, item); item space partitioned into
// pattern (0), copy source (1), genuine captures (100+j), copies (200+j)
uint64_t item_seed(const SynthConfig& cfg, int code, int item) {
    return mix_seed(cfg.master_seed, static_cast<uint64_t>(code), static_cast<uint64_t>(item));
}

double image_mean(const GrayImage& img) {
    double s = 0.0;
    for (uint8_t p : img.pixels) s += p;
    return s / static_cast<double>(img.pixels.size());
}

}  // namespace

CorpusResult gen_corpus(const SynthConfig& cfg, int n_codes, int copies_per_code,
                        const std::string& out_dir) {
    validate(cfg);
    if (n_codes < 2) throw Error("gen_corpus: n_codes must be >= 2");
    if (copies_per_code < 1) throw Error("gen_corpus: copies_per_code must be >= 1");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error("gen_corpus: cannot create output directory '" + out_dir + "'");

    // the copy source is the genuine print itself (no capture blur yet)
    SynthConfig print_cfg = cfg;
    print_cfg.capture_blur_sigma_lo = 0.0f;
    print_cfg.capture_blur_sigma_hi = 0.0f;

    CorpusResult result;
    CorpusReport& rep = result.report;
    std::vector<double> means[2];

    for (int code = 0; code < n_codes; ++code) {
        GrayImage pattern = gen_qr_pattern(cfg, item_seed(cfg, code, 0));
        GrayImage print = render_genuine(pattern, print_cfg, item_seed(cfg, code, 1));
        char name[64];
        for (int j = 0; j < copies_per_code; ++j) {
            GrayImage gen = render_genuine(pattern, cfg, item_seed(cfg, code, 100 + j));
            GrayImage cop = render_copied(print, cfg, item_seed(cfg, code, 200 + j));

            std::snprintf(name, sizeof(name), "code%03d_gen%02d.pgm", code, j);
            write_pgm(gen, out_dir + "/" + name);
            result.manifest.records.push_back({name, 0, code});
            std::snprintf(name, sizeof(name), "code%03d_copy%02d.pgm", code, j);
            write_pgm(cop, out_dir + "/" + name);
            result.manifest.records.push_back({name, 1, code});

            means[0].push_back(image_mean(gen));
            means[1].push_back(image_mean(cop));
            rep.roughness_pairs += 1;
            if (edge_roughness(cop, pattern) > edge_roughness(gen, pattern))
                rep.roughness_separated += 1;
        }
    }

    rep.images = static_cast<int>(result.manifest.records.size());
    auto stats = [](const std::vector<double>& xs) {
        double m = 0.0, v = 0.0;
        for (double x : xs) m += x;
        m /= static_cast<double>(xs.size());
        for (double x : xs) v += (x - m) * (x - m);
        v /= static_cast<double>(xs.size());
        return std::pair<double, double>(m, std::sqrt(v));
    };
    auto [mg, sg] = stats(means[0]);
    auto [mc, sc] = stats(means[1]);
    rep.mean_genuine = mg;
    rep.std_genuine = sg;
    rep.mean_copied = mc;
    rep.std_copied = sc;
    rep.pooled_std = std::sqrt(0.5 * (sg * sg + sc * sc));
    rep.mean_overlap = std::abs(mg - mc) < 0.5 * rep.pooled_std;
    rep.roughness_fraction =
        rep.roughness_pairs ? static_cast<double>(rep.roughness_separated) / rep.roughness_pairs
                            : 0.0;

    write_manifest(result.manifest, out_dir + "/manifest.txt");
    std::ofstream prov(out_dir + "/synth_config.txt");
    prov << "image_size=" << cfg.image_size << "\nmodule_px=" << cfg.module_px
         << "\ngenuine_blur_sigma=" << cfg.genuine_blur_sigma
         << "\ncapture_blur_sigma_lo=" << cfg.capture_blur_sigma_lo
         << "\ncapture_blur_sigma_hi=" << cfg.capture_blur_sigma_hi
         << "\ncopy_scan_blur_sigma=" << cfg.copy_scan_blur_sigma
         << "\nburr_density=" << cfg.burr_density << "\nburr_amplitude=" << cfg.burr_amplitude
         << "\nnoise_std_genuine=" << cfg.noise_std_genuine
         << "\nnoise_std_copied=" << cfg.noise_std_copied
         << "\nrequantize_levels=" << cfg.requantize_levels
         << "\nmaster_seed=" << cfg.master_seed << "\nn_codes=" << n_codes
         << "\ncopies_per_code=" << copies_per_code << "\n";
    return result;
}

double roughness_separation_fraction(const SynthConfig& cfg, int pairs, uint64_t seed0) {
    validate(cfg);
    SynthConfig print_cfg = cfg;
    print_cfg.capture_blur_sigma_lo = 0.0f;
    print_cfg.capture_blur_sigma_hi = 0.0f;
    int separated = 0;
    for (int k = 0; k < pairs; ++k) {
        uint64_t s = mix_seed(seed0, static_cast<uint64_t>(k));
        GrayImage pattern = gen_qr_pattern(cfg, mix_seed(s, 0));
        GrayImage print = render_genuine(pattern, print_cfg, mix_seed(s, 1));
        GrayImage gen = render_genuine(pattern, cfg, mix_seed(s, 2));
        GrayImage cop = render_copied(print, cfg, mix_seed(s, 3));
        if (edge_roughness(cop, pattern) > edge_roughness(gen, pattern)) ++separated;
    }
    return pairs ? static_cast<double>(separated) / pairs : 0.0;
}

}  // namespace dmfnet
