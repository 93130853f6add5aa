#include <doctest.h>

#include <cmath>
#include <random>

#include "dragwarp/synthetic.hpp"
#include "dragwarp/warpage.hpp"

using namespace dragwarp;

namespace {

// Independent oracle: march from p away from the handle until leaving the
// circle, then bisect the crossing.
double marched_stretch(Vec2 p, Vec2 s, const ReferenceCircle& c) {
    const Vec2 d = p - s;
    const double len = norm(d);
    const Vec2 u{d.x / len, d.y / len};
    const double step = c.radius / 256.0;
    double lo = len, hi = len;
    while (distance(s + hi * u, c.center) <= c.radius) {
        lo = hi;
        hi += step;
    }
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (distance(s + mid * u, c.center) <= c.radius ? lo : hi) = mid;
    }
    const double t = 0.5 * (lo + hi);
    return (t - len) / t;
}

DragSet stretch_drags(std::vector<DragInstruction> list) { return {std::move(list), DragMode::stretch}; }

}  // namespace

TEST_CASE("stretch factor: handle at the centre") {
    const ReferenceCircle c{{0, 0}, 10};
    CHECK(stretch_factor({5, 0}, {0, 0}, c) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(stretch_factor({10, 0}, {0, 0}, c) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(stretch_factor({0, 0}, {0, 0}, c) == 1.0);
}

TEST_CASE("stretch factor: off-centre handle") {
    const ReferenceCircle c{{0, 0}, 10};
    // Exit q = (2, sqrt(96)); lambda = (sqrt(96) - 6) / sqrt(96).
    const double expected = (std::sqrt(96.0) - 6.0) / std::sqrt(96.0);
    CHECK(stretch_factor({2, 6}, {2, 0}, c) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(stretch_factor({2, 6}, {2, 0}, c) == doctest::Approx(0.38763).epsilon(1e-5));
    const Vec2 q = ray_circle_exit({2, 6}, {2, 0}, c);
    CHECK(q.x == doctest::Approx(2.0));
    CHECK(q.y == doctest::Approx(std::sqrt(96.0)));
}

TEST_CASE("stretch factor: preconditions") {
    const ReferenceCircle c{{0, 0}, 10};
    CHECK_THROWS_AS(stretch_factor({1, 1}, {10, 0}, c), GeometryError);
    CHECK_THROWS_AS(stretch_factor({11, 0}, {0, 0}, c), GeometryError);
}

TEST_CASE("stretch factor agrees with the ray-marching oracle on random geometry") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    int checked = 0;
    while (checked < 2000) {
        const ReferenceCircle c{{uni(rng) * 50, uni(rng) * 50}, 0.5 + 40 * (uni(rng) + 1)};
        const Vec2 s{c.center.x + uni(rng) * c.radius, c.center.y + uni(rng) * c.radius};
        const Vec2 p{c.center.x + uni(rng) * c.radius, c.center.y + uni(rng) * c.radius};
        if (!c.strictly_contains(s) || !c.contains(p) || distance(p, s) < 1e-6) continue;
        const double got = stretch_factor(p, s, c);
        CHECK(got == doctest::Approx(marched_stretch(p, s, c)).epsilon(1e-9));
        CHECK(got >= 0.0);
        CHECK(got <= 1.0);
        ++checked;
    }
}

TEST_CASE("stretch factor decreases monotonically along a ray") {
    const ReferenceCircle c{{3, -2}, 7};
    const Vec2 s{4, -1};
    const Vec2 u{0.6, -0.8};
    double prev = 1.0;
    for (double t = 0.05; c.contains(s + t * u); t += 0.05) {
        const double lambda = stretch_factor(s + t * u, s, c);
        CHECK(lambda < prev);
        prev = lambda;
    }
}

TEST_CASE("instruction weights: inverse distance, summing to one") {
    const auto drags = stretch_drags({{{0, 0}, {1, 0}}, {{8, 0}, {8, 1}}});
    const auto w = instruction_weights({2, 0}, drags);
    CHECK(w[0] == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(0.25).epsilon(1e-12));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(0.0, 30.0);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<DragInstruction> list(1 + trial % 5);
        for (auto& d : list) d = {{uni(rng), uni(rng)}, {uni(rng), uni(rng)}};
        const auto ws = instruction_weights({uni(rng), uni(rng)}, stretch_drags(list));
        double sum = 0.0;
        for (double v : ws) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("instruction weights: coincident handle takes the full weight") {
    const auto drags = stretch_drags({{{4, 4}, {5, 4}}, {{2, 2}, {2, 3}}, {{2, 2}, {3, 3}}});
    CHECK(instruction_weights({2, 2}, drags) == std::vector<double>{0, 1, 0});
}

TEST_CASE("warpage vector: single drag equals lambda times d") {
    const ReferenceCircle c{{0, 0}, 10};
    const auto drags = stretch_drags({{{0, 0}, {2, 1}}});
    const Vec2 v = warpage_vector({5, 0}, drags, c);
    CHECK(v.x == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(v.y == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("warpage field: handle moves by its drag, boundary barely moves") {
    const auto mask = build_mask_point_set(synthetic::rect_mask(32, 32, 8, 8, 22, 22));
    const auto drags = stretch_drags({{{15, 15}, {18, 13}}});
    const auto field = compute_warpage_field(mask, drags);
    CHECK(field.size() == mask.size());
    CHECK(field.instruction_count == 1);
    CHECK(field.weights.size() == mask.size());
    const double r = mask.circle().radius;
    for (std::size_t j = 0; j < field.size(); ++j) {
        const Vec2 p = field.points[j].center();
        const Vec2 v = field.vectors[j];
        if (field.points[j] == Cell{15, 15}) {
            CHECK(v.x == 3.0);
            CHECK(v.y == -2.0);
        }
        // |v| <= |d| and shrinks linearly with distance to the circle.
        CHECK(norm(v) <= norm(drags.instructions[0].vector()) + 1e-12);
        const double slack = r - distance(p, mask.circle().center);
        CHECK(field.stretch[j] <= slack / (r - distance({15, 15}, mask.circle().center)) + 1e-9);
    }
}

TEST_CASE("warpage field: multi-drag vectors stay within the largest drag") {
    const auto mask = build_mask_point_set(synthetic::rect_mask(40, 40, 5, 5, 34, 30));
    const auto drags = stretch_drags({{{10, 10}, {14, 12}}, {{25, 20}, {22, 24}}, {{30, 8}, {30, 8}}});
    const auto field = compute_warpage_field(mask, drags);
    CHECK(field.weights.size() == mask.size() * 3);
    for (std::size_t j = 0; j < field.size(); ++j) {
        CHECK(norm(field.vectors[j]) <= 5.0 + 1e-9);
        double sum = 0.0;
        for (std::size_t i = 0; i < 3; ++i) sum += field.weights[j * 3 + i];
        CHECK(sum == doctest::Approx(1.0));
    }
}

TEST_CASE("warpage field: object modes shift uniformly") {
    const auto mask = build_mask_point_set(synthetic::rect_mask(16, 16, 2, 2, 5, 5));
    for (auto mode : {DragMode::object_move, DragMode::object_replicate}) {
        const auto field = compute_warpage_field(mask, DragSet{{{{3, 3}, {9, 10}}}, mode});
        CHECK(field.weights.empty());
        for (const auto& v : field.vectors) CHECK(v == Vec2{6, 7});
    }
}
