#include "dmfnet/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "dmfnet/rng.hpp"

namespace dmfnet {

DatasetManifest read_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error("manifest: cannot open '" + path + "'");
    DatasetManifest m;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto c1 = line.find(',');
        auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw Error("manifest: malformed line " + std::to_string(lineno) + " in '" + path +
                        "'");
        ManifestRecord r;
        r.path = line.substr(0, c1);
        r.label = std::stoi(line.substr(c1 + 1, c2 - c1 - 1));
        r.group_id = std::stoi(line.substr(c2 + 1));
        if (r.label != 0 && r.label != 1)
            throw Error("manifest: label must be 0 or 1 at line " + std::to_string(lineno));
        m.records.push_back(std::move(r));
    }
    return m;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw Error("manifest: cannot open '" + path + "' for writing");
    for (const auto& r : m.records) os << r.path << "," << r.label << "," << r.group_id << "\n";
    if (!os) throw Error("manifest: write failed for '" + path + "'");
}

std::pair<DatasetManifest, DatasetManifest> split_manifest(const DatasetManifest& m,
                                                           double train_fraction,
                                                           uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw Error("split: train_fraction must be in (0, 1)");
    std::set<int> group_set;
    for (const auto& r : m.records) group_set.insert(r.group_id);
    if (group_set.size() < 2) throw Error("split: need at least 2 groups");

    std::vector<int> groups(group_set.begin(), group_set.end());
    Rng rng(mix_seed(seed, 0x5b117));
    portable_shuffle(groups, rng);
    size_t n_train = static_cast<size_t>(train_fraction * static_cast<double>(groups.size()));
    n_train = std::clamp<size_t>(n_train, 1, groups.size() - 1);
    std::set<int> train_groups(groups.begin(), groups.begin() + static_cast<long>(n_train));

    std::pair<DatasetManifest, DatasetManifest> out;
    for (const auto& r : m.records)
        (train_groups.count(r.group_id) ? out.first : out.second).records.push_back(r);
    return out;
}

PatchSet load_patches(const DatasetManifest& m, const std::string& root_dir, int patch) {
    PatchSet ps;
    ps.patch = patch;
    const size_t per_pixel = static_cast<size_t>(patch) * patch;
    for (size_t i = 0; i < m.records.size(); ++i) {
        const auto& r = m.records[i];
        GrayImage img = read_pgm(root_dir + "/" + r.path);
        auto patches = extract_patches(img, patch);
        for (auto& p : patches) {
            ps.pixels.insert(ps.pixels.end(), p.pixels.begin(), p.pixels.end());
            ps.labels.push_back(r.label);
            ps.groups.push_back(r.group_id);
            ps.image_ids.push_back(static_cast<int>(i));
        }
    }
    ps.count = ps.labels.size();
    if (ps.pixels.size() != ps.count * per_pixel) throw Error("load_patches: size bookkeeping bug");
    return ps;
}

namespace {

PatchSet take_subset(const PatchSet& p, const std::vector<uint32_t>& idx) {
    PatchSet out;
    out.patch = p.patch;
    const size_t pp = static_cast<size_t>(p.patch) * p.patch;
    out.pixels.reserve(idx.size() * pp);
    for (uint32_t i : idx) {
        const uint8_t* src = p.pixels.data() + static_cast<size_t>(i) * pp;
        out.pixels.insert(out.pixels.end(), src, src + pp);
        out.labels.push_back(p.labels[i]);
        out.groups.push_back(p.groups[i]);
        out.image_ids.push_back(p.image_ids[i]);
    }
    out.count = idx.size();
    return out;
}

}  // namespace

std::pair<PatchSet, PatchSet> split_patches(const PatchSet& p, double train_fraction,
                                            uint64_t seed) {
    if (train_fraction <= 0.0 || train_fraction >= 1.0)
        throw Error("split: train_fraction must be in (0, 1)");
    if (p.count < 2) throw Error("split: need at least 2 patches");
    std::vector<uint32_t> idx(p.count);
    for (size_t i = 0; i < p.count; ++i) idx[i] = static_cast<uint32_t>(i);
    Rng rng(mix_seed(seed, 0x5b118));
    portable_shuffle(idx, rng);
    size_t n_train = static_cast<size_t>(train_fraction * static_cast<double>(p.count));
    n_train = std::clamp<size_t>(n_train, 1, p.count - 1);
    std::vector<uint32_t> train_idx(idx.begin(), idx.begin() + static_cast<long>(n_train));
    std::vector<uint32_t> val_idx(idx.begin() + static_cast<long>(n_train), idx.end());
    // manifest order within each side keeps loading deterministic
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    return {take_subset(p, train_idx), take_subset(p, val_idx)};
}

uint64_t split_hash(const std::vector<int>& val_side_ids) {
    std::vector<int> ids = val_side_ids;
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    uint64_t h = 1469598103934665603ULL;
    for (int id : ids) {
        for (int byte = 0; byte < 4; ++byte) {
            h ^= static_cast<uint64_t>((static_cast<uint32_t>(id) >> (8 * byte)) & 0xff);
            h *= 1099511628211ULL;
        }
    }
    return h;
}

BatchIterator::BatchIterator(const PatchSet& data, int batch_size, uint64_t seed, int epoch)
    : data_(data), batch_size_(batch_size) {
    if (batch_size < 1) throw Error("batch_iter: batch_size must be >= 1");
    if (data.count == 0) throw Error("batch_iter: empty patch set");
    order_.resize(data.count);
    for (size_t i = 0; i < data.count; ++i) order_[i] = static_cast<uint32_t>(i);
    Rng rng(mix_seed(seed, static_cast<uint64_t>(epoch), 0xba7c4));
    portable_shuffle(order_, rng);
}

size_t BatchIterator::batches() const {
    return (data_.count + static_cast<size_t>(batch_size_) - 1) / batch_size_;
}

bool BatchIterator::next(Batch& out) {
    if (cursor_ >= order_.size()) return false;
    const size_t n = std::min<size_t>(batch_size_, order_.size() - cursor_);
    const size_t pp = static_cast<size_t>(data_.patch) * data_.patch;
    out.x = Tensor(static_cast<int>(n), 1, data_.patch, data_.patch);
    out.labels.resize(n);
    out.image_ids.resize(n);
    constexpr float kScale = 1.0f / 255.0f;
    for (size_t j = 0; j < n; ++j) {
        uint32_t src = order_[cursor_ + j];
        const uint8_t* px = data_.pixels.data() + static_cast<size_t>(src) * pp;
        float* dst = out.x.data() + j * pp;
        for (size_t k = 0; k < pp; ++k) dst[k] = static_cast<float>(px[k]) * kScale;
        out.labels[j] = data_.labels[src];
        out.image_ids[j] = data_.image_ids[src];
    }
    cursor_ += n;
    return true;
}

}  // namespace dmfnet
