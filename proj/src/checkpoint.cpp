#include "dmfnet/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace dmfnet {

namespace {

constexpr uint32_t kVersion = 1;

void put_u16(std::ostream& os, uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    os.write(b, 2);
}

void put_u32(std::ostream& os, uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

uint16_t get_u16(std::istream& is) {
    unsigned char b[2];
    is.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_floats(std::ostream& os, const std::vector<float>& v) {
    for (float f : v) {
        uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(os, bits);
    }
}

void get_floats(std::istream& is, std::vector<float>& v) {
    for (float& f : v) {
        uint32_t bits = get_u32(is);
        std::memcpy(&f, &bits, 4);
    }
}

std::string order_str(LayerOrder o) {
    return o == LayerOrder::ConvReluBn ? "conv_relu_bn" : "conv_bn_relu";
}

}  // namespace

KvMap config_to_kv(const NetworkConfig& cfg) {
    KvMap kv;
    kv["prep_a"] = std::to_string(cfg.branch_a.prep_kernel);
    kv["brbs_a"] = std::to_string(cfg.branch_a.brb_count);
    kv["prep_b"] = std::to_string(cfg.branch_b.prep_kernel);
    kv["brbs_b"] = std::to_string(cfg.branch_b.brb_count);
    kv["classes"] = std::to_string(cfg.num_classes);
    kv["input_channels"] = std::to_string(cfg.input_channels);
    kv["input_h"] = std::to_string(cfg.input_h);
    kv["input_w"] = std::to_string(cfg.input_w);
    kv["prep_trainable"] = cfg.prep_trainable ? "1" : "0";
    kv["single_branch"] = cfg.single_branch ? "1" : "0";
    kv["layer_order"] = order_str(cfg.order);
    return kv;
}

NetworkConfig config_from_kv(const KvMap& kv) {
    NetworkConfig cfg;
    auto geti = [&kv](const char* key, int dflt) {
        auto it = kv.find(key);
        return it == kv.end() ? dflt : std::stoi(it->second);
    };
    cfg.branch_a.prep_kernel = geti("prep_a", cfg.branch_a.prep_kernel);
    cfg.branch_a.brb_count = geti("brbs_a", cfg.branch_a.brb_count);
    cfg.branch_b.prep_kernel = geti("prep_b", cfg.branch_b.prep_kernel);
    cfg.branch_b.brb_count = geti("brbs_b", cfg.branch_b.brb_count);
    cfg.num_classes = geti("classes", cfg.num_classes);
    cfg.input_channels = geti("input_channels", cfg.input_channels);
    cfg.input_h = geti("input_h", cfg.input_h);
    cfg.input_w = geti("input_w", cfg.input_w);
    cfg.prep_trainable = geti("prep_trainable", 1) != 0;
    cfg.single_branch = geti("single_branch", 0) != 0;
    auto it = kv.find("layer_order");
    if (it != kv.end())
        cfg.order = it->second == "conv_bn_relu" ? LayerOrder::ConvBnRelu : LayerOrder::ConvReluBn;
    return cfg;
}

void save_checkpoint(const std::string& path, const ParamBundle& params,
                     const NetworkConfig& config, const KvMap& extra) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("checkpoint: cannot open '" + path + "' for writing");
    os.write("DMFN", 4);
    put_u32(os, kVersion);
    put_u32(os, static_cast<uint32_t>(params.tensors.size()));
    for (const auto& [name, t] : params.tensors) {
        if (name.size() > 0xffff) throw Error("checkpoint: parameter name too long");
        put_u16(os, static_cast<uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        os.put(static_cast<char>(4));
        put_u32(os, static_cast<uint32_t>(t.n));
        put_u32(os, static_cast<uint32_t>(t.c));
        put_u32(os, static_cast<uint32_t>(t.h));
        put_u32(os, static_cast<uint32_t>(t.w));
        put_floats(os, t.v);
    }
    if (!os) throw Error("checkpoint: write failed for '" + path + "'");

    std::ofstream meta(path + ".meta");
    if (!meta) throw Error("checkpoint: cannot open '" + path + ".meta' for writing");
    auto kv = config_to_kv(config);
    for (const auto& [k, v] : extra) kv[k] = v;
    for (const auto& [k, v] : kv) meta << k << "=" << v << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("checkpoint: cannot open '" + path + "'");
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "DMFN", 4) != 0)
        throw Error("checkpoint: bad magic in '" + path + "'");
    uint32_t version = get_u32(is);
    if (version != kVersion)
        throw Error("checkpoint: unsupported format version " + std::to_string(version));
    uint32_t count = get_u32(is);

    Checkpoint ckpt;
    for (uint32_t i = 0; i < count; ++i) {
        uint16_t len = get_u16(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        int rank = is.get();
        if (rank < 1 || rank > 4) throw Error("checkpoint: bad tensor rank");
        uint32_t dims[4] = {1, 1, 1, 1};
        for (int d = 0; d < rank; ++d) dims[4 - rank + d] = get_u32(is);
        Tensor t(static_cast<int>(dims[0]), static_cast<int>(dims[1]),
                 static_cast<int>(dims[2]), static_cast<int>(dims[3]));
        get_floats(is, t.v);
        if (!is) throw Error("checkpoint: truncated payload in '" + path + "'");
        ckpt.params.tensors[name] = std::move(t);
    }

    std::ifstream meta(path + ".meta");
    if (!meta) throw Error("checkpoint: missing sidecar '" + path + ".meta'");
    KvMap kv;
    std::string line;
    while (std::getline(meta, line)) {
        auto eq = line.find('=');
        if (eq == std::string::npos || line.empty()) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    ckpt.config = config_from_kv(kv);
    auto config_keys = config_to_kv(ckpt.config);
    for (const auto& [k, v] : kv)
        if (config_keys.find(k) == config_keys.end()) ckpt.extra[k] = v;
    return ckpt;
}

}  // namespace dmfnet
