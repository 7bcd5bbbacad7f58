#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace statsformer {

using Rng = std::mt19937_64;

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// FNV-1a over a stage label; stable across platforms.
constexpr std::uint64_t label_hash(std::string_view label) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Derives an independent sub-stream seed from a root seed, a stage label and
/// any number of integer coordinates (fold, config, replicate, ...).
///
/// All randomness in the library flows from the user seed through this
/// function, so results never depend on scheduling order.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stage,
                                 std::initializer_list<std::uint64_t> coords = {}) noexcept {
    std::uint64_t h = mix64(root ^ label_hash(stage));
    for (std::uint64_t c : coords) {
        h = mix64(h ^ mix64(c + 0x632be59bd9b4e019ULL));
    }
    return h;
}

}  // namespace statsformer
