#pragma once

namespace coopsteer {

inline constexpr const char* version_string = "coopsteer 1.0.0";

// Checkpoint container magic. Bump the trailing number on any layout change.
inline constexpr const char* checkpoint_magic = "COOPSTEER-CKPT-1";

}  // namespace coopsteer
