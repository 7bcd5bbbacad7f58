#pragma once

namespace statsformer {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace statsformer
