#pragma once

#include <vector>

#include "dragwarp/core.hpp"
#include "dragwarp/warpage.hpp"

namespace dragwarp {

struct RelocationCounters {
    std::size_t written = 0;
    std::size_t dropped_out_of_bounds = 0;
    std::size_t dropped_occupied = 0;
};

struct WrittenTarget {
    Cell target;
    Cell source;
};

struct RelocationResult {
    LatentGrid grid;                     // may contain null cells
    std::vector<Cell> null_region;       // row-major
    std::vector<WrittenTarget> written;  // in write order
    RelocationCounters counters;
};

/// Rounds each coordinate half away from zero.
Cell round_to_cell(Vec2 p);

/// Moves every mask cell by its warpage vector in one pass. Mask points are
/// visited in row-major order and the first writer of a target cell wins.
/// Mask cells that never receive a value become null; targets outside the
/// grid are dropped. Values are read from the untouched input grid.
RelocationResult relocate(const LatentGrid& grid, const MaskPointSet& mask, const WarpageField& field);

}  // namespace dragwarp
