#pragma once

#include <optional>
#include <string>

#include "stdepth/net.hpp"
#include "stdepth/optim.hpp"

namespace stdepth {

// Run-level metadata stored alongside the parameters. Channel scale and
// d_max travel inside NetworkParams; these three describe the training run.
struct CheckpointInfo {
    Arch arch = Arch::siamese;
    int sign = +1;
    int epoch = 0;  // epochs completed when saved
};

struct Checkpoint {
    NetworkParams params;
    CheckpointInfo info;
    std::optional<AdamState> opt;  // present when saved mid-training
};

// Binary container: magic "STDL", format version u32, tensor count u32, then
// per tensor: name length u16 + UTF-8 name, rank u8, dims u32 each, dtype
// tag u8 (0 = 32-bit float), raw little-endian data. All integers
// little-endian. Tensors appear in a fixed order (metadata, then layers in
// execution order, then optimizer state), so identical state produces
// byte-identical files. Writes are atomic (temp file + rename).
void save_checkpoint(const std::string& path, const NetworkParams& params,
                     const CheckpointInfo& info, const AdamState* opt = nullptr);

// Strict load: bad magic/version, truncation, missing or unexpected tensors,
// and shape mismatches all throw; nothing partial is returned.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace stdepth
