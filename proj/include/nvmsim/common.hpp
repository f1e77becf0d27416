#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nvmsim {

using Cycle = std::uint64_t;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A mathematical precondition was violated (non-positive voltage, negative aging, ...).
class DomainError : public Error {
  public:
    using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// The controller asked the memory model for something the hardware cannot do.
/// Raised only on an internal bug; the engine surfaces it as a simulation failure.
class SchedulingError : public Error {
  public:
    using Error::Error;
};

enum class OpKind : std::uint8_t { Read, Write };

inline constexpr std::string_view to_string(OpKind k) { return k == OpKind::Read ? "R" : "W"; }

/// The three logic blocks of a bank's peripheral circuit: pulse shaper,
/// verify logic and sense amplifier.
enum class Block : std::uint8_t { PS = 0, VR = 1, SA = 2 };

inline constexpr std::size_t kBlockCount = 3;
inline constexpr std::array<Block, kBlockCount> kAllBlocks{Block::PS, Block::VR, Block::SA};

inline constexpr std::size_t index(Block b) { return static_cast<std::size_t>(b); }

inline constexpr std::string_view to_string(Block b) {
    switch (b) {
    case Block::PS: return "PS";
    case Block::VR: return "VR";
    case Block::SA: return "SA";
    }
    return "?";
}

inline Block parse_block(std::string_view s) {
    if (s == "PS") return Block::PS;
    if (s == "VR" || s == "VF") return Block::VR;
    if (s == "SA") return Block::SA;
    throw DomainError("unknown logic block '" + std::string(s) + "'");
}

/// Ceil division for cycle arithmetic.
inline constexpr Cycle ceil_div(Cycle a, Cycle b) { return (a + b - 1) / b; }

inline constexpr double kNsPerYear = 365.25 * 24.0 * 3600.0 * 1e9;

} // namespace nvmsim
