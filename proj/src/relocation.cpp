#include "dragwarp/relocation.hpp"

#include <cmath>

namespace dragwarp {

Cell round_to_cell(Vec2 p) {
    // std::round is half-away-from-zero.
    return {static_cast<int>(std::round(p.x)), static_cast<int>(std::round(p.y))};
}

RelocationResult relocate(const LatentGrid& grid, const MaskPointSet& mask, const WarpageField& field) {
    if (grid.null_count() != 0) {
        throw ValidationError("relocation input must not contain null cells");
    }
    if (field.points != mask.points()) {
        throw ValidationError("warpage field does not cover exactly the mask points");
    }

    RelocationResult result;
    result.grid = grid;
    std::vector<std::uint8_t> occupied(grid.cell_count(), 0);
    const auto index = [&](Cell c) { return static_cast<std::size_t>(c.y) * grid.width() + c.x; };

    for (std::size_t j = 0; j < field.size(); ++j) {
        const Cell source = field.points[j];
        const Vec2 moved = source.center() + field.vectors[j];
        const Vec2 rounded{std::round(moved.x), std::round(moved.y)};
        if (!grid.in_bounds(rounded)) {
            ++result.counters.dropped_out_of_bounds;
            continue;
        }
        const Cell target = round_to_cell(rounded);
        if (occupied[index(target)]) {
            ++result.counters.dropped_occupied;
            continue;
        }
        occupied[index(target)] = 1;
        result.grid.set(target.x, target.y, grid.at(source.x, source.y));
        result.written.push_back({target, source});
        ++result.counters.written;
    }

    for (const auto& p : mask.points()) {
        if (!occupied[index(p)]) {
            result.grid.set_null(p.x, p.y);
            result.null_region.push_back(p);
        }
    }
    return result;
}

}  // namespace dragwarp
