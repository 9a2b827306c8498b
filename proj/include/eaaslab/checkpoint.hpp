#pragma once

#include <filesystem>

#include "eaaslab/encoder.hpp"

namespace eaaslab {

// Versioned checkpoint container: magic + format version, a JSON metadata
// block (arch, width, feature_dim, input shape, seed, provenance, training
// config digest, weight count) and the float32 weight payload. Round-trips
// bit-exactly.
void save_checkpoint(const Encoder& enc, const std::filesystem::path& path);
Encoder load_checkpoint(const std::filesystem::path& path);

}  // namespace eaaslab
