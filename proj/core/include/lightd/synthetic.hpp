#pragma once

// Seeded procedural scenes with matching captions and a VQA pair. Used by
// the CLI corpus generator, the tests and the benchmarks.

#include <cstdint>
#include <string>
#include <vector>

#include "lightd/image.hpp"

namespace lightd {

struct SyntheticScene {
  Image image;
  std::vector<std::string> captions;  // three phrasings of the same content
  std::string question;
  std::string answer;
};

/// Smooth two-color background, one to three soft-edged shapes, mild
/// shading and fine sensor-like noise.
SyntheticScene synthetic_scene(std::uint64_t seed, int height, int width);

/// Scenes for seeds base_seed, base_seed + 1, ...
std::vector<SyntheticScene> synthetic_corpus(std::uint64_t base_seed, int count,
                                             int height, int width);

}  // namespace lightd
