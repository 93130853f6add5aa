#include "dragwarp/warpage.hpp"

#include <algorithm>
#include <cmath>

namespace dragwarp {

namespace {

// Positive root t of |handle + t*u - c|^2 = R^2 for unit u, with the handle
// strictly inside (so the constant term is negative and exactly one root is
// positive). Uses the cancellation-free form when b > 0.
double exit_parameter(Vec2 handle, Vec2 u, const ReferenceCircle& circle) {
    const Vec2 sc = handle - circle.center;
    const double b = dot(u, sc);
    const double k = circle.radius * circle.radius - dot(sc, sc);  // > 0
    const double root = std::sqrt(b * b + k);
    return b > 0.0 ? k / (b + root) : root - b;
}

void require_handle_inside(Vec2 handle, const ReferenceCircle& circle) {
    if (!circle.strictly_contains(handle)) {
        throw GeometryError("handle outside reference circle");
    }
}

}  // namespace

Vec2 ray_circle_exit(Vec2 p, Vec2 handle, const ReferenceCircle& circle) {
    require_handle_inside(handle, circle);
    const double len = distance(p, handle);
    if (len == 0.0) {
        throw GeometryError("ray direction undefined for p == handle");
    }
    const Vec2 u = (1.0 / len) * (p - handle);
    return handle + exit_parameter(handle, u, circle) * u;
}

double stretch_factor(Vec2 p, Vec2 handle, const ReferenceCircle& circle) {
    require_handle_inside(handle, circle);
    if (!circle.contains(p)) {
        throw GeometryError("point outside reference circle");
    }
    const double len = distance(p, handle);
    if (len == 0.0) {
        return 1.0;
    }
    const Vec2 u = (1.0 / len) * (p - handle);
    const double t = exit_parameter(handle, u, circle);
    // p within 1e-9 of the circle may give t marginally below len.
    return std::clamp((t - len) / t, 0.0, 1.0);
}

std::vector<double> instruction_weights(Vec2 p, const DragSet& drags) {
    const auto k = drags.instructions.size();
    std::vector<double> weights(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        if (drags.instructions[i].handle == p) {
            weights[i] = 1.0;
            return weights;
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        weights[i] = 1.0 / distance(p, drags.instructions[i].handle);
        total += weights[i];
    }
    for (auto& w : weights) {
        w /= total;
    }
    return weights;
}

namespace {

// Stretch factor for one instruction; zero-length drags contribute nothing
// and are allowed a handle anywhere, so their factor is reported as 0 when
// the geometry is undefined.
double instruction_stretch(Vec2 p, const DragInstruction& ins, const ReferenceCircle& circle) {
    const Vec2 d = ins.vector();
    if (d.x == 0.0 && d.y == 0.0 && !circle.strictly_contains(ins.handle)) {
        return 0.0;
    }
    return stretch_factor(p, ins.handle, circle);
}

}  // namespace

Vec2 warpage_vector(Vec2 p, const DragSet& drags, const ReferenceCircle& circle) {
    const auto weights = instruction_weights(p, drags);
    Vec2 v;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const auto& ins = drags.instructions[i];
        const double scale = weights[i] * instruction_stretch(p, ins, circle);
        v = v + scale * ins.vector();
    }
    return v;
}

WarpageField compute_warpage_field(const MaskPointSet& mask, const DragSet& drags) {
    if (drags.instructions.empty()) {
        throw ValidationError("at least one drag instruction is required");
    }
    WarpageField field;
    field.points = mask.points();
    field.vectors.reserve(field.points.size());

    if (drags.mode != DragMode::stretch) {
        if (drags.instructions.size() != 1) {
            throw ValidationError("object mode requires one instruction");
        }
        field.vectors.assign(field.points.size(), drags.instructions.front().vector());
        return field;
    }

    const auto k = drags.instructions.size();
    const auto& circle = mask.circle();
    field.instruction_count = k;
    field.weights.reserve(field.points.size() * k);
    field.stretch.reserve(field.points.size() * k);
    for (const auto& cell : field.points) {
        const Vec2 p = cell.center();
        const auto weights = instruction_weights(p, drags);
        Vec2 v;
        for (std::size_t i = 0; i < k; ++i) {
            const auto& ins = drags.instructions[i];
            const double lambda = instruction_stretch(p, ins, circle);
            v = v + (weights[i] * lambda) * ins.vector();
            field.weights.push_back(weights[i]);
            field.stretch.push_back(lambda);
        }
        field.vectors.push_back(v);
    }
    return field;
}

}  // namespace dragwarp
