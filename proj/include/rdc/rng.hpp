#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>

namespace rdc {

using Engine = std::mt19937_64;

// FNV-1a, used only to derive stable sub-stream keys from names.
constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Independent engine for (seed, name). Each feature draws from its own
/// named stream, so toggling one feature does not shift another's draws.
inline Engine stream(std::uint64_t seed, std::string_view name) {
    const std::uint64_t key = fnv1a(name);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
    return Engine(seq);
}

inline std::string engine_state(const Engine& e) {
    std::ostringstream os;
    os << e;
    return os.str();
}

inline Engine engine_from_state(const std::string& s) {
    Engine e;
    std::istringstream is(s);
    is >> e;
    if (!is) throw std::invalid_argument("corrupt random engine state");
    return e;
}

inline double uniform01(Engine& e) { return std::uniform_real_distribution<double>(0.0, 1.0)(e); }

}  // namespace rdc
