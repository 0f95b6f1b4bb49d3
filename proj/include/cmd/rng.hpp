#pragma once

#include <cstdint>

#include "cmd/linop.hpp"

namespace cmd {

/// Deterministic standard-normal samples.
///
/// Generator: std::mt19937_64 seeded with `seed`; each 64-bit draw is mapped
/// to a uniform by taking the top 53 bits, and pairs of uniforms are passed
/// through the Box-Muller transform. mt19937_64 output is fixed by the
/// standard, so a given (seed, n) is bit-stable across platforms.
Vec gaussian(std::uint64_t seed, Index n);

}  // namespace cmd
