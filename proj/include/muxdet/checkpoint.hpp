#pragma once

#include <string>

#include "muxdet/trainer.hpp"

namespace muxdet {

// Binary checkpoint: magic "MUXCKPT1", u64 LE header length, JSON header
// (architecture + tensor catalog), then the tensors as raw little-endian
// IEEE-754 doubles in catalog order. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const HybridModel& model);
HybridModel load_checkpoint(const std::string& path);

}  // namespace muxdet
