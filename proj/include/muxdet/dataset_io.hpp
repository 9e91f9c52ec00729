#pragma once

#include <string>
#include <vector>

#include "muxdet/config.hpp"
#include "muxdet/trainer.hpp"

namespace muxdet {

// Synthesizes the benchmark corpus in memory: even indices real, odd fake.
// Real videos are band-limited textures with AR(1) temporal correlation;
// fakes add a periodic high-frequency artifact of strength s and a
// correspondingly weakened correlation. s = 0 makes the classes identical
// in distribution.
Dataset make_synthetic_dataset(const SyntheticConfig& cfg);

// 8-bit binary PGM (P5).
void write_pgm(const std::string& path, const RealGrid& img);  // clamps [0,1]
RealGrid read_pgm(const std::string& path);                    // -> [0,1]

// Writes one directory per video (frame_000.pgm, ...) plus manifest.json.
// Deterministic: same cfg -> bit-identical files. Returns the manifest path.
std::string gen_synthetic(const SyntheticConfig& cfg,
                          const std::string& out_dir);

// Loads a manifest.json corpus; throws std::runtime_error listing every
// problem found (missing files, shape mismatches, bad labels).
Dataset ingest(const std::string& manifest_path);

}  // namespace muxdet
