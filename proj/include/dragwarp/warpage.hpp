#pragma once

#include <vector>

#include "dragwarp/core.hpp"

namespace dragwarp {

/// Stretch factor of point `p` under a drag whose force point is `handle`.
///
/// The ray from `handle` through `p` meets the reference circle at q on the
/// far side of p; the factor is |p q| / |handle q|. It is 1 at the handle and
/// decays linearly to 0 on the circle.
///
/// Throws GeometryError when the handle is not strictly inside the circle or
/// when `p` lies outside it.
double stretch_factor(Vec2 p, Vec2 handle, const ReferenceCircle& circle);

/// Far intersection of the ray from `handle` through `p` with the circle.
/// Requires p != handle and the handle strictly inside the circle.
Vec2 ray_circle_exit(Vec2 p, Vec2 handle, const ReferenceCircle& circle);

/// Inverse-distance weights of each instruction's handle relative to `p`.
/// A handle coinciding with `p` takes the full weight (lowest index wins).
std::vector<double> instruction_weights(Vec2 p, const DragSet& drags);

/// Aggregated displacement of `p`: sum over i of w_i * lambda_i * d_i.
Vec2 warpage_vector(Vec2 p, const DragSet& drags, const ReferenceCircle& circle);

struct WarpageField {
    std::vector<Cell> points;  // row-major, same order as the mask
    std::vector<Vec2> vectors;
    // Row-major m x k tables; empty in object modes.
    std::vector<double> weights;
    std::vector<double> stretch;
    std::size_t instruction_count = 0;

    std::size_t size() const { return points.size(); }
};

/// Warpage vectors for every mask point. Object modes shift the whole mask
/// uniformly by the single drag vector.
WarpageField compute_warpage_field(const MaskPointSet& mask, const DragSet& drags);

}  // namespace dragwarp
