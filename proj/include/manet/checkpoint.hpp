#pragma once

#include <string>

#include "manet/model.hpp"

namespace manet {

// Binary snapshot of every registered parameter. Layout (all little-endian):
//   magic "MANC", version u32,
//   config text: u32 length + bytes (canonical model config),
//   param count u32, then per parameter:
//     name u32 length + bytes, trainable u8, ndim u32, dims i32 each,
//     numel u64, raw f32 values.
// Round trips are byte-identical.
inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const ModelConfig& cfg, const ParamRegistry& reg);

// Loads into an existing registry; the file's config and the model's must
// match, as must every name, shape and trainable flag, in order.
ModelConfig load_checkpoint(const std::string& path, ParamRegistry& reg);

// Reads only the embedded model config (to build the model before loading).
ModelConfig peek_checkpoint_config(const std::string& path);

}  // namespace manet
