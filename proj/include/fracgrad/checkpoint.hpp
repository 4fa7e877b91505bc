#pragma once

// Model checkpoint = JSON manifest + raw parameter blob.
//
//   <dir>/model.json  {"format": "fracgrad-checkpoint", "version": 1,
//                      "dtype": "float64", "byte_order": "little",
//                      "data_file": "model.bin", "input_shape": [...],
//                      "cfg": {...},
//                      "layers": [{"kind": "conv2d", "in": 1, "out": 8,
//                                  "params": [{"name": "weights", "shape": [8,3,3,1],
//                                              "offset": 0, "count": 72}, ...]}, ...]}
//   <dir>/model.bin   IEEE-754 binary64 values, little-endian, row-major,
//                     concatenated in layer order (weights then bias);
//                     "offset" is in bytes from the start of the file.

#include "fracgrad/frac_math.hpp"
#include "fracgrad/nn.hpp"

#include <filesystem>

namespace fracgrad {

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& dir, const Network& network, const FgdConfig& cfg);

struct Checkpoint {
    Network network;
    FgdConfig cfg;
};

/// Throws FormatError on unknown format/version or inconsistent sizes.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

} // namespace fracgrad
