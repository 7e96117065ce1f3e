#pragma once

#include <string>
#include <vector>

#include "compdiff/vec2.hpp"

namespace compdiff {

struct ScatterPanel {
  std::string label;
  std::vector<Vec2> points;
};

// Up to four labeled scatter panels in one row, shared fixed axes [lo, hi].
// Exactly one <circle> element per input point (points outside the axes are
// clipped visually, never dropped), fixed-precision coordinates and no
// volatile content, so the byte stream is a pure function of the inputs.
// Throws ConfigError for zero or more than four panels.
std::string render_scatter_svg(const std::vector<ScatterPanel>& panels,
                               Vec2 lo = {-1.6, -1.6}, Vec2 hi = {1.6, 1.6});

}  // namespace compdiff
