#include "dragwarp/bnni.hpp"

#include <algorithm>

namespace dragwarp {

std::size_t ReferenceSet::present() const {
    return static_cast<std::size_t>(std::count_if(refs.begin(), refs.end(), [](const auto& r) { return r.has_value(); }));
}

ReferenceSet find_references(const LatentGrid& snapshot, int x, int y) {
    static constexpr std::array<Cell, 4> kSteps{{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};
    ReferenceSet refs;
    for (std::size_t dir = 0; dir < kSteps.size(); ++dir) {
        int cx = x + kSteps[dir].x;
        int cy = y + kSteps[dir].y;
        for (int dist = 1; snapshot.in_bounds(cx, cy); ++dist, cx += kSteps[dir].x, cy += kSteps[dir].y) {
            if (!snapshot.is_null(cx, cy)) {
                const auto v = snapshot.at(cx, cy);
                refs.refs[dir] = Reference{{v.begin(), v.end()}, dist};
                break;
            }
        }
    }
    return refs;
}

std::array<double, 4> reference_weights(const ReferenceSet& refs) {
    std::array<double, 4> weights{};
    double total = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        if (refs.refs[i]) {
            weights[i] = 1.0 / refs.refs[i]->distance;
            total += weights[i];
        }
    }
    if (total == 0.0) {
        throw NoReferencesError();
    }
    for (auto& w : weights) {
        w /= total;
    }
    return weights;
}

std::vector<double> interpolate_point(const ReferenceSet& refs) {
    const auto weights = reference_weights(refs);
    std::vector<double> value;
    for (std::size_t i = 0; i < 4; ++i) {
        if (!refs.refs[i]) continue;
        const auto& ref = refs.refs[i]->value;
        if (value.empty()) value.assign(ref.size(), 0.0);
        for (std::size_t ch = 0; ch < ref.size(); ++ch) {
            value[ch] += weights[i] * ref[ch];
        }
    }
    return value;
}

LatentGrid interpolate_grid(const RelocationResult& relocated, const LatentGrid& original, NullFill strategy,
                            std::uint64_t seed, VisitOrder order) {
    const LatentGrid& snapshot = relocated.grid;
    if (!snapshot.same_shape(original)) {
        throw ValidationError("original grid shape differs from relocated grid");
    }
    LatentGrid out = snapshot;

    std::vector<Cell> nulls;
    for (int y = 0; y < snapshot.height(); ++y) {
        for (int x = 0; x < snapshot.width(); ++x) {
            if (snapshot.is_null(x, y)) nulls.push_back({x, y});
        }
    }
    if (order == VisitOrder::reverse) {
        std::reverse(nulls.begin(), nulls.end());
    }

    const auto channels = static_cast<std::size_t>(snapshot.channels());
    switch (strategy) {
        case NullFill::bnni:
            for (const auto& c : nulls) {
                const auto refs = find_references(snapshot, c.x, c.y);
                if (refs.present() == 0) {
                    out.set(c.x, c.y, original.at(c.x, c.y));
                } else {
                    out.set(c.x, c.y, interpolate_point(refs));
                }
            }
            break;
        case NullFill::original_value:
            for (const auto& c : nulls) out.set(c.x, c.y, original.at(c.x, c.y));
            break;
        case NullFill::zero: {
            const std::vector<double> zeros(channels, 0.0);
            for (const auto& c : nulls) out.set(c.x, c.y, zeros);
            break;
        }
        case NullFill::random: {
            // Draws follow row-major order regardless of `order` so the seed
            // alone determines each cell's noise.
            std::sort(nulls.begin(), nulls.end());
            GaussianStream noise(seed);
            std::vector<double> value(channels);
            for (const auto& c : nulls) {
                for (auto& v : value) v = noise.next();
                out.set(c.x, c.y, value);
            }
            break;
        }
    }
    return out;
}

}  // namespace dragwarp
