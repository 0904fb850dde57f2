#pragma once

#include <string>

#include "mergelab/model.hpp"

namespace mergelab {

// MMCK envelope: magic, version u16, spec_hash (32 bytes), m u64,
// little-endian f64 payload, SHA-256 footer over the payload.
void write_checkpoint(const ParamVector& params, const std::string& path);

// Rejects bad magic, hash mismatch against `expected_spec` (when given),
// and payload digest mismatch.
ParamVector read_checkpoint(const std::string& path, const ModelSpec* expected_spec = nullptr);

// Digest of the parameter payload, used as provenance id.
std::string checkpoint_digest(const ParamVector& params);

} // namespace mergelab
