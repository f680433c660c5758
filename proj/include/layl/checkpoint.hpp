#pragma once
#include <memory>
#include <string>
#include <vector>

#include "layl/compositor.hpp"

namespace layl {

// LAYL checkpoint: magic "LAYL", u32 version (1), u32 K, u32 N, K
// length-prefixed f64 field blobs, N*K*8 f64 layout scalars in (q, t, s)
// order, one length-prefixed f64 optimizer blob (length 0 when absent), and
// a trailing CRC32 over everything before it. All integers little-endian.
void save_checkpoint(const SceneModel& model, const std::vector<double>& optimizer_blob,
                     const std::string& path);

struct LoadedCheckpoint {
    std::unique_ptr<SceneModel> model;
    std::vector<double> optimizer_blob;
};

// Validates the CRC before constructing anything.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace layl
