#pragma once

// Labeled manifests, leakage-safe splits and seeded batch iteration.
// Manifest file format: UTF-8 text, one `path,label,group_id` record per
// line, no header. Labels: 0 genuine, 1 copied.

#include <cstdint>
#include <string>
#include <vector>

#include "dmfnet/image.hpp"
#include "dmfnet/tensor.hpp"

namespace dmfnet {

struct ManifestRecord {
    std::string path;  // relative to the manifest's directory
    int label = 0;
    int group_id = 0;  // stable across all patches of one source image
};

struct DatasetManifest {
    std::vector<ManifestRecord> records;
};

DatasetManifest read_manifest(const std::string& path);
void write_manifest(const DatasetManifest& m, const std::string& path);

/// Group-granular split: every record of one group lands on the same side.
/// Deterministic in seed; needs at least 2 groups.
std::pair<DatasetManifest, DatasetManifest> split_manifest(const DatasetManifest& m,
                                                           double train_fraction,
                                                           uint64_t seed);

/// All patches of a record list, flattened in manifest order then row-major
/// patch order. Pixels stay 8-bit until batching.
struct PatchSet {
    int patch = 64;
    std::vector<uint8_t> pixels;   // count * patch * patch
    std::vector<int> labels;       // per patch
    std::vector<int> groups;       // per patch
    std::vector<int> image_ids;    // per patch: index of the source record
    size_t count = 0;
};

/// Reads every image under root_dir and tiles it into patches.
PatchSet load_patches(const DatasetManifest& m, const std::string& root_dir, int patch = 64);

/// Patch-granular split (leaks groups across sides; mirrors a per-patch
/// protocol). Deterministic in seed.
std::pair<PatchSet, PatchSet> split_patches(const PatchSet& p, double train_fraction,
                                            uint64_t seed);

/// FNV-1a over the sorted validation-side identity (group ids, or patch
/// indices for patch-granular splits); logged so runs can assert they share
/// one split.
uint64_t split_hash(const std::vector<int>& val_side_ids);

struct Batch {
    Tensor x;                 // (n, 1, patch, patch), pixels scaled to [0,1]
    std::vector<int> labels;
    std::vector<int> image_ids;
};

/// Deterministic per-epoch shuffle in (seed, epoch); the final short batch is
/// emitted.
class BatchIterator {
public:
    BatchIterator(const PatchSet& data, int batch_size, uint64_t seed, int epoch);

    bool next(Batch& out);
    size_t batches() const;

private:
    const PatchSet& data_;
    int batch_size_;
    std::vector<uint32_t> order_;
    size_t cursor_ = 0;
};

}  // namespace dmfnet
