#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <vector>

#include "dragwarp/core.hpp"
#include "dragwarp/relocation.hpp"

namespace dragwarp {

enum class Direction { up = 0, right = 1, down = 2, left = 3 };

struct Reference {
    std::vector<double> value;
    int distance = 0;  // cells, >= 1
};

/// Nearest valued cell in each of the four axis directions.
struct ReferenceSet {
    std::array<std::optional<Reference>, 4> refs;

    const std::optional<Reference>& operator[](Direction d) const { return refs[static_cast<int>(d)]; }
    std::optional<Reference>& operator[](Direction d) { return refs[static_cast<int>(d)]; }
    std::size_t present() const;
};

class NoReferencesError : public std::runtime_error {
public:
    NoReferencesError() : std::runtime_error("null cell has no valued neighbor in any direction") {}
};

/// Scans outward from (x, y) along its row and column across the whole grid.
ReferenceSet find_references(const LatentGrid& snapshot, int x, int y);

/// Inverse-distance blend over the present directions. Throws
/// NoReferencesError when none are present.
std::vector<double> interpolate_point(const ReferenceSet& refs);

/// Normalized inverse-distance weights in up/right/down/left order; absent
/// directions get weight 0.
std::array<double, 4> reference_weights(const ReferenceSet& refs);

enum class VisitOrder { forward, reverse };

/// Fills every null cell of `relocated.grid`. `original` is the grid before
/// relocation; it backs the original-value strategy and the BNNI fallback for
/// cells with no reference in any direction. Reads always come from a frozen
/// snapshot, so the visiting order never changes the result.
LatentGrid interpolate_grid(const RelocationResult& relocated, const LatentGrid& original, NullFill strategy,
                            std::uint64_t seed, VisitOrder order = VisitOrder::forward);

}  // namespace dragwarp
