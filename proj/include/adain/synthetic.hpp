#pragma once

#include <cstdint>
#include <filesystem>

#include "adain/image.hpp"

namespace adain {

/// Smooth two-colour gradient background with a handful of flat-coloured
/// discs, rectangles and triangles.
Image synthetic_content(std::uint64_t seed, Index height, Index width);

/// One of four texture families picked by seed: oriented stripes, checkers,
/// dot lattices or palette-mapped value noise, each in a random 2-4 colour palette.
Image synthetic_style(std::uint64_t seed, Index height, Index width);

enum class SyntheticKind { Content, Style };

/// Writes `count` PNGs named <prefix>_<index>.png; image i uses seed + i.
void write_synthetic_set(const std::filesystem::path& dir, SyntheticKind kind, int count, Index size,
                         std::uint64_t seed);

}  // namespace adain
