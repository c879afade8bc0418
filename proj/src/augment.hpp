#pragma once

#include "grid.hpp"
#include "rng.hpp"

namespace gridvit {

// Random horizontal flip (p = 0.5) and random quarter-turn rotation, the
// same draw applied to every slice of every channel. Slices are transformed
// individually and re-packed, so the grid layout itself never rotates.
// Odd quarter-turns require square slices; on non-square slices the draw is
// reduced to the nearest even turn.
GridSample augment(const GridSample& sample, Rng& rng);

// Deterministic variant used by tests: forces the flip decision and the
// quarter-turn count r in {0,1,2,3}.
GridSample augment_with(const GridSample& sample, bool flip, int quarter_turns);

}  // namespace gridvit
