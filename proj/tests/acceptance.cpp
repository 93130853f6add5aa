// Acceptance suite: one PASS/FAIL line per primary criterion.

#include <CLI11.hpp>

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "dragwarp/io.hpp"
#include "dragwarp/pipeline.hpp"
#include "dragwarp/synthetic.hpp"

using namespace dragwarp;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances.
constexpr int kStretchCases = 1000;
constexpr double kMarchStep = 1e-3;
constexpr double kStretchTol = 1e-2;
constexpr double kBoundaryTol = 1e-6;
constexpr double kStretchSeconds = 5.0;
constexpr double kAngleTol = 1e-6;
constexpr double kLinearityTol = 1e-9;
constexpr double kWeightSumTol = 1e-9;
constexpr int kRelocationCases = 200;
constexpr double kBnniFixtureTol = 1e-12;
constexpr int kBlobSeeds = 20;
constexpr int kBlobRequired = 18;
constexpr double kBlobDistance = 2.0;
constexpr double kMaxDragLength = 40.0;
constexpr double kZeroPredictorRoundTrip = 1e-12;
// Measured maximum over the round-trip corpus below: 4.69e-4.
constexpr double kToyRoundTripBound = 6e-4;
constexpr double kCpTol = 1e-6;
constexpr double kOneStepMs = 50.0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double elapsed_s(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* format, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

// Ray marching with a fixed step: first sample outside the circle.
double marched_stretch(Vec2 p, Vec2 s, const ReferenceCircle& c) {
    const Vec2 d = p - s;
    const double len = norm(d);
    const Vec2 u{d.x / len, d.y / len};
    double t = len;
    while (distance(s + t * u, c.center) <= c.radius) t += kMarchStep;
    return (t - len) / t;
}

Outcome stretch_oracle() {
    const auto start = Clock::now();
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    double worst = 0.0;
    int cases = 0;
    while (cases < kStretchCases) {
        const ReferenceCircle c{{uni(rng) * 40, uni(rng) * 40}, 1.0 + 30.0 * (uni(rng) + 1.0)};
        const Vec2 s{c.center.x + uni(rng) * c.radius, c.center.y + uni(rng) * c.radius};
        const Vec2 p{c.center.x + uni(rng) * c.radius, c.center.y + uni(rng) * c.radius};
        if (!c.strictly_contains(s) || !c.contains(p) || distance(p, s) < 1e-3) continue;
        worst = std::max(worst, std::abs(stretch_factor(p, s, c) - marched_stretch(p, s, c)));
        ++cases;
    }
    double boundary = 0.0;
    for (int i = 0; i < 200; ++i) {
        const ReferenceCircle c{{uni(rng) * 10, uni(rng) * 10}, 2.0 + 10.0 * (uni(rng) + 1.0)};
        const Vec2 s{c.center.x + 0.5 * uni(rng) * c.radius, c.center.y + 0.5 * uni(rng) * c.radius};
        const double a = 3.14159265358979 * uni(rng);
        const Vec2 on{c.center.x + c.radius * std::cos(a), c.center.y + c.radius * std::sin(a)};
        boundary = std::max(boundary, std::abs(stretch_factor(s, s, c) - 1.0));
        boundary = std::max(boundary, std::abs(stretch_factor(on, s, c)));
    }
    const double secs = elapsed_s(start);
    return {worst <= kStretchTol && boundary <= kBoundaryTol && secs < kStretchSeconds,
            fmt("%d cases, max |closed - marched| %.2e, boundary error %.2e, %.2f s", cases, worst, boundary, secs)};
}

Outcome warpage_properties() {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    double worst_angle = 0.0, worst_handle = 0.0, worst_linear = 0.0, worst_sum = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const int x0 = 4 + static_cast<int>(uni(rng) * 10), y0 = 4 + static_cast<int>(uni(rng) * 10);
        const int x1 = x0 + 10 + static_cast<int>(uni(rng) * 30), y1 = y0 + 10 + static_cast<int>(uni(rng) * 30);
        const auto mask = build_mask_point_set(synthetic::rect_mask(64, 64, x0, y0, x1, y1));
        const Vec2 s{std::round(x0 + uni(rng) * (x1 - x0)), std::round(y0 + uni(rng) * (y1 - y0))};
        const DragSet single{{{s, s + Vec2{uni(rng) * 16 - 8, uni(rng) * 16 - 8}}}, DragMode::stretch};
        const Vec2 d = single.instructions[0].vector();
        const auto field = compute_warpage_field(mask, single);
        for (std::size_t j = 0; j < field.size(); ++j) {
            const Vec2 v = field.vectors[j];
            if (norm(v) > 0) {
                const double cross = v.x * d.y - v.y * d.x;
                worst_angle = std::max(worst_angle, std::abs(std::atan2(cross, dot(v, d))));
            }
            if (field.points[j].center() == s) worst_handle = std::max(worst_handle, norm(v - d));
        }

        // Linearity and weight normalization on multi-drag sets.
        std::vector<DragInstruction> list;
        for (int i = 0; i < 3; ++i) {
            const Vec2 h{std::round(x0 + uni(rng) * (x1 - x0)), std::round(y0 + uni(rng) * (y1 - y0))};
            list.push_back({h, h + Vec2{uni(rng) * 10 - 5, uni(rng) * 10 - 5}});
        }
        const double alpha = 0.25 + 2.0 * uni(rng);
        auto scaled = list;
        for (auto& ins : scaled) ins.target = ins.handle + alpha * ins.vector();
        const auto f1 = compute_warpage_field(mask, {list, DragMode::stretch});
        const auto f2 = compute_warpage_field(mask, {scaled, DragMode::stretch});
        for (std::size_t j = 0; j < f1.size(); ++j) {
            const double ref = norm(alpha * f1.vectors[j]);
            const double err = norm(f2.vectors[j] - alpha * f1.vectors[j]);
            worst_linear = std::max(worst_linear, ref > 0 ? err / ref : err);
            double sum = 0.0;
            for (std::size_t i = 0; i < f1.instruction_count; ++i) sum += f1.weights[j * f1.instruction_count + i];
            worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
        }
    }
    return {worst_angle < kAngleTol && worst_handle == 0.0 && worst_linear <= kLinearityTol && worst_sum <= kWeightSumTol,
            fmt("max angle %.2e rad, handle error %.2e, linearity %.2e, weight sum %.2e", worst_angle, worst_handle,
                worst_linear, worst_sum)};
}

bool relocation_case(const LatentGrid& grid, const MaskPointSet& mask, const WarpageField& field) {
    const auto r = relocate(grid, mask, field);
    std::set<Cell> targets;
    for (const auto& w : r.written) {
        if (!targets.insert(w.target).second) return false;  // written twice
        for (int ch = 0; ch < grid.channels(); ++ch) {
            if (r.grid.at(w.target.x, w.target.y, ch) != grid.at(w.source.x, w.source.y, ch)) return false;
        }
    }
    const auto& c = r.counters;
    if (c.written + c.dropped_occupied + c.dropped_out_of_bounds != mask.size()) return false;
    const auto again = relocate(grid, mask, field);
    return again.grid == r.grid && again.null_region == r.null_region;
}

Outcome relocation_properties() {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    int passed = 0;
    for (int trial = 0; trial < kRelocationCases; ++trial) {
        const auto grid = synthetic::random_grid(64, 64, 4, 1000 + trial);
        MaskBitmap bitmap(64, 64);
        const double fraction = 0.05 + 0.5 * uni(rng);
        for (auto& cell : bitmap.cells) cell = uni(rng) < fraction;
        bitmap.set(32, 32);
        const auto mask = build_mask_point_set(bitmap);
        const Vec2 s = mask.points()[static_cast<std::size_t>(uni(rng) * mask.size())].center();
        const DragSet drags{{{s, s + Vec2{uni(rng) * 30 - 15, uni(rng) * 30 - 15}}}, DragMode::stretch};
        if (mask.circle().strictly_contains(s) && relocation_case(grid, mask, compute_warpage_field(mask, drags))) ++passed;
    }

    // Hand-traced collision: three cells in a row all land on x = 3.
    LatentGrid row(5, 1, 1);
    for (int x = 0; x < 5; ++x) row.at(x, 0, 0) = x + 1.0;
    MaskBitmap bm(5, 1);
    bm.set(0, 0);
    bm.set(1, 0);
    bm.set(2, 0);
    const auto mask = build_mask_point_set(bm);
    const WarpageField field{mask.points(), {{3, 0}, {1.6, 0}, {0.5, 0}}, {}, {}, 0};
    const auto r = relocate(row, mask, field);
    const bool fixture = r.grid.at(3, 0, 0) == 1.0 && r.counters.written == 1 && r.counters.dropped_occupied == 2 &&
                         r.null_region.size() == 3 && relocation_case(row, mask, field);
    return {passed == kRelocationCases && fixture,
            fmt("%d/%d randomized 64x64 cases, collision fixture %s", passed, kRelocationCases, fixture ? "ok" : "wrong")};
}

Outcome bnni_properties() {
    ReferenceSet refs;
    const int dist[4] = {1, 2, 1, 2};
    const double vals[4] = {0, 6, 3, 12};
    for (int i = 0; i < 4; ++i) refs.refs[i] = Reference{{vals[i]}, dist[i]};
    const auto w = reference_weights(refs);
    const double fixture_err = std::max({std::abs(w[0] - 1.0 / 3), std::abs(w[1] - 1.0 / 6), std::abs(w[2] - 1.0 / 3),
                                         std::abs(w[3] - 1.0 / 6), std::abs(interpolate_point(refs)[0] - 4.0)});

    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    bool complete = true, convex = true, order_free = true;
    for (int trial = 0; trial < 100; ++trial) {
        const auto original = synthetic::random_grid(48, 40, 4, 2000 + trial);
        RelocationResult r;
        r.grid = original;
        const double fraction = 0.05 + 0.8 * uni(rng);
        for (int y = 0; y < 40; ++y) {
            for (int x = 0; x < 48; ++x) {
                if (uni(rng) < fraction) {
                    r.grid.set_null(x, y);
                    r.null_region.push_back({x, y});
                }
            }
        }
        const auto fwd = interpolate_grid(r, original, NullFill::bnni, 0);
        const auto rev = interpolate_grid(r, original, NullFill::bnni, 0, VisitOrder::reverse);
        complete = complete && fwd.null_count() == 0;
        order_free = order_free && fwd == rev;
        for (const auto& c : r.null_region) {
            const auto found = find_references(r.grid, c.x, c.y);
            if (found.present() == 0) continue;
            for (int ch = 0; ch < 4; ++ch) {
                double lo = 1e300, hi = -1e300;
                for (const auto& ref : found.refs) {
                    if (!ref) continue;
                    lo = std::min(lo, ref->value[ch]);
                    hi = std::max(hi, ref->value[ch]);
                }
                const double v = fwd.at(c.x, c.y, ch);
                convex = convex && v >= lo - 1e-12 && v <= hi + 1e-12;
            }
        }
    }
    return {fixture_err <= kBnniFixtureTol && complete && convex && order_free,
            fmt("fixture error %.1e, complete %s, convex %s, order-independent %s", fixture_err, complete ? "yes" : "no",
                convex ? "yes" : "no", order_free ? "yes" : "no")};
}

Outcome blob_fidelity() {
    int within = 0, identical = 0;
    double worst = 0.0;
    for (int seed = 0; seed < kBlobSeeds; ++seed) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> pos(70, 186), angle(0, 2 * 3.14159265358979), length(5, kMaxDragLength);
        const Vec2 c{std::round(pos(rng)), std::round(pos(rng))};
        const double a = angle(rng), len = length(rng);
        const Vec2 t{std::round(c.x + len * std::cos(a)), std::round(c.y + len * std::sin(a))};
        const synthetic::BlobSpec blob{c};
        const auto image = synthetic::blob_scene(256, 256, 3, blob);
        // Editable region: the blob and its destination plus a 96-cell margin.
        const int margin = 96;
        const auto mask = synthetic::rect_mask(256, 256, static_cast<int>(std::min(c.x, t.x)) - margin,
                                               static_cast<int>(std::min(c.y, t.y)) - margin,
                                               static_cast<int>(std::max(c.x, t.x)) + margin,
                                               static_cast<int>(std::max(c.y, t.y)) + margin);
        EditConfig config;
        config.seed = static_cast<std::uint64_t>(seed);
        const DragSet drags{{{c, t}}, DragMode::stretch};
        const double d = drag_fidelity(edit_pixel(image, mask, drags, config).image, drags,
                                       synthetic::blob_template(3, blob, 12));
        worst = std::max(worst, d);
        if (d <= kBlobDistance) ++within;
        if (edit_pixel(image, mask, {{{c, c}}, DragMode::stretch}, config).image == image) ++identical;
    }
    return {within >= kBlobRequired && identical == kBlobSeeds,
            fmt("%d/%d within %.0f cells (worst %.3f), zero-drag identical %d/%d", within, kBlobSeeds, kBlobDistance, worst,
                identical, kBlobSeeds)};
}

std::vector<LatentGrid> round_trip_corpus() {
    std::vector<LatentGrid> latents;
    const ToyAutoencoder ae(4);
    for (int i = 0; i < 8; ++i) {
        latents.push_back(ae.encode(synthetic::random_grid(64, 64, 3, 300 + i)));
        latents.push_back(ae.encode(synthetic::blob_scene(64, 64, 3, {{10.0 + 6 * i, 50.0 - 4 * i}})));
    }
    return latents;
}

Outcome toy_round_trip() {
    const auto schedule = DiffusionSchedule::scaled_linear(10);
    const ZeroPredictor zero;
    const auto toy = default_predictor(3);
    double zero_err = 0.0, toy_err = 0.0;
    for (const auto& z0 : round_trip_corpus()) {
        const auto a = invert(z0, schedule, zero);
        zero_err = std::max(zero_err, relative_l2(sample(a.trajectory.back(), 10, schedule, zero, &a.cache, {}), z0));
        SamplingOptions cp;
        cp.cp_enabled = true;
        const auto b = invert(z0, schedule, toy);
        toy_err = std::max(toy_err, relative_l2(sample(b.trajectory.back(), 10, schedule, toy, &b.cache, cp), z0));
    }
    return {zero_err <= kZeroPredictorRoundTrip && toy_err <= kToyRoundTripBound,
            fmt("zero predictor %.2e (<= %.0e), toy predictor %.2e (<= pinned %.1e)", zero_err, kZeroPredictorRoundTrip,
                toy_err, kToyRoundTripBound)};
}

Outcome cp_identity() {
    double on_off = 0.0, on_rec = 0.0;
    const auto predictor = default_predictor(3);
    for (int i = 0; i < 4; ++i) {
        const auto image = synthetic::blob_scene(64, 48, 3, {{20.0 + 8 * i, 24}});
        const auto mask = synthetic::rect_mask(64, 48, 8, 8, 55, 39);
        const DragSet zero{{{{30, 24}, {30, 24}}}, DragMode::stretch};
        EditConfig config;
        config.backend = Backend::toy_latent;
        const auto on = edit_latent(image, mask, zero, config, predictor).image;
        config.cp_enabled = false;
        const auto off = edit_latent(image, mask, zero, config, predictor).image;
        const auto rec = reconstruct(image, config, predictor);
        for (std::size_t k = 0; k < on.data().size(); ++k) {
            on_off = std::max(on_off, std::abs(on.data()[k] - off.data()[k]));
            on_rec = std::max(on_rec, std::abs(on.data()[k] - rec.data()[k]));
        }
    }
    return {on_off <= kCpTol && on_rec <= kCpTol,
            fmt("max |CP on - CP off| %.2e, max |CP on - reconstruct| %.2e (<= %.0e)", on_off, on_rec, kCpTol)};
}

Outcome one_step_performance() {
    const auto grid = synthetic::random_grid(64, 64, 4, 5);
    // 32 x 32 square: 25% of the grid.
    const auto mask = build_mask_point_set(synthetic::rect_mask(64, 64, 16, 16, 47, 47));
    const DragSet drags{{{{28, 30}, {38, 35}}, {{40, 20}, {36, 26}}}, DragMode::stretch};
    EditConfig config;
    double best = 1e300;
    int passes = 0;
    for (int rep = 0; rep < 5; ++rep) {
        EditDiagnostics diag;
        const auto start = Clock::now();
        const auto result = warp_one_step(grid, mask, drags, config, diag);
        best = std::min(best, elapsed_s(start) * 1000.0);
        passes = diag.warp_passes;
        if (result.grid.null_count() != 0) passes = -1;
    }
    const auto outcome = edit_pixel(grid, synthetic::rect_mask(64, 64, 16, 16, 47, 47), drags, config);
    const bool one_pass = passes == 1 && outcome.diagnostics.warp_passes == 1;
    return {best < kOneStepMs && one_pass,
            fmt("warp + relocate + BNNI on 64x64x4, %zu mask points: %.2f ms (< %.0f), passes %d", mask.size(), best,
                kOneStepMs, outcome.diagnostics.warp_passes)};
}

int run_cli(const std::string& cli, const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome cli_contract(const std::string& cli, const fs::path& fixtures, const fs::path& work) {
    fs::create_directories(work);
    const auto q = [](const fs::path& p) { return "\"" + p.string() + "\""; };
    const auto a = work / "valid_a.png", b = work / "valid_b.png";
    fs::remove(a);
    fs::remove(b);
    const int ok = run_cli(cli, "--spec " + q(fixtures / "valid.json") + " --out " + q(a) + " --seed 3");
    run_cli(cli, "--spec " + q(fixtures / "valid.json") + " --out " + q(b) + " --seed 3");
    const int usage = run_cli(cli, "--out " + q(work / "usage.png"));
    const int invalid = run_cli(cli, "--spec " + q(fixtures / "empty_mask.json") + " --out " + q(work / "empty.png"));
    const bool same = fs::exists(a) && slurp(a) == slurp(b);
    return {ok == 0 && usage == 1 && invalid == 2 && same,
            fmt("exit codes valid=%d missing-spec=%d empty-mask=%d, repeat run byte-identical %s", ok, usage, invalid,
                same ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dragwarp acceptance suite"};
    std::string cli;
    std::string fixtures;
    std::string work = (fs::temp_directory_path() / "dragwarp_acceptance").string();
    app.add_option("--cli", cli, "Path to the dragwarp CLI")->required();
    app.add_option("--fixtures", fixtures, "Fixture spec directory")->required()->check(CLI::ExistingDirectory);
    app.add_option("--work", work, "Scratch directory");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"stretch-factor oracle", stretch_oracle},
        {"warpage properties", warpage_properties},
        {"relocation", relocation_properties},
        {"bnni", bnni_properties},
        {"drag fidelity (pixel backend)", blob_fidelity},
        {"toy diffusion round trip", toy_round_trip},
        {"consistency-preserving no-op", cp_identity},
        {"one-step performance", one_step_performance},
        {"cli contract", [&] { return cli_contract(cli, fixtures, work); }},
    };
    int failed = 0;
    for (const auto& [name, check] : criteria) {
        Outcome out;
        try {
            out = check();
        } catch (const std::exception& e) {
            out = {false, std::string("threw: ") + e.what()};
        }
        std::printf("%s %s: %s\n", out.pass ? "PASS" : "FAIL", name.c_str(), out.detail.c_str());
        std::fflush(stdout);
        failed += out.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
