#pragma once

#include <string>

#include "tbe/network.hpp"
#include "tbe/optim.hpp"

namespace tbe {

/// Binary network checkpoint: magic "TBECKPT", format version, input shape,
/// layer specs, parameter tensors as raw little-endian doubles, and the
/// freeze state (unit -> multiplier, freezing task). Round-trips bit-exactly.
/// Layout documented in docs/checkpoint-format.md.
void save_checkpoint(const Network& net, const FreezeState& freeze, const std::string& path);

struct Checkpoint {
    Network net;
    FreezeState freeze;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace tbe
