#pragma once

// Checkpoint container: magic "DMFN", u32 format version, u32 tensor count,
// then per tensor u16 name length + UTF-8 name, u8 rank, u32 dims, raw
// little-endian float32 payload. A sidecar text file (<path>.meta) records the
// NetworkConfig plus free-form provenance as key=value lines.

#include <map>
#include <string>

#include "dmfnet/network.hpp"

namespace dmfnet {

using KvMap = std::map<std::string, std::string>;

void save_checkpoint(const std::string& path, const ParamBundle& params,
                     const NetworkConfig& config, const KvMap& extra = {});

struct Checkpoint {
    ParamBundle params;
    NetworkConfig config;
    KvMap extra;  // sidecar keys that are not part of NetworkConfig
};

/// Loads tensors and the sidecar config. Throws on a bad magic, unsupported
/// version, truncation, or a missing sidecar.
Checkpoint load_checkpoint(const std::string& path);

KvMap config_to_kv(const NetworkConfig& cfg);
NetworkConfig config_from_kv(const KvMap& kv);

}  // namespace dmfnet
