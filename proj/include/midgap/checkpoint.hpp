#pragma once
#include <string>
#include <vector>

#include "midgap/config.hpp"
#include "midgap/tensor.hpp"

namespace midgap {

// Binary checkpoint: magic "MIDGAP01", format version, the effective config
// echoed as text, the iteration counter, a random-state snapshot, then a
// length-prefixed manifest of (name, shape, byte offset) and a blob of
// little-endian 64-bit floats. Round-trips bit-exactly.
struct Checkpoint {
    Config config;
    long iteration = 0;
    std::string rng_state;
    std::vector<std::pair<std::string, Tensor>> tensors;

    Tensor find(const std::string& name) const;
    bool has(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace midgap
