#include "dragwarp/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dragwarp {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
    return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

int floor_mod(int a, int b) {
    const int m = a % b;
    return m < 0 ? m + b : m;
}

void require_valid(int width, int height, const DragSet& drags, const MaskPointSet& mask, const EditConfig& config) {
    const auto errors = validate_edit_request(width, height, drags, mask, config);
    if (!errors.empty()) {
        throw ValidationError(format_errors(errors));
    }
}

}  // namespace

LatentGrid apply_object_move_fill(const RelocationResult& relocated, const LatentGrid& pre, const DragSet& drags,
                                  const EditConfig& config) {
    if (drags.mode == DragMode::stretch || drags.instructions.size() != 1) {
        throw ValidationError("object fill requires an object mode with exactly one instruction");
    }
    if (!relocated.grid.same_shape(pre)) {
        throw ValidationError("pre-warp grid shape differs from relocated grid");
    }
    LatentGrid out = relocated.grid;
    if (relocated.null_region.empty()) return out;

    if (drags.mode == DragMode::object_replicate) {
        for (const auto& c : relocated.null_region) out.set(c.x, c.y, pre.at(c.x, c.y));
        return out;
    }

    const int r = config.object_move_radius;
    if (r < 1) throw ValidationError("object_move_radius must be at least 1");
    const Cell target = round_to_cell(drags.instructions.front().target);
    const int bx0 = std::max(0, target.x - r);
    const int by0 = std::max(0, target.y - r);
    const int bx1 = std::min(pre.width() - 1, target.x + r - 1);
    const int by1 = std::min(pre.height() - 1, target.y + r - 1);
    if (bx0 > bx1 || by0 > by1) throw ValidationError("object fill block lies outside the grid");
    const int bw = bx1 - bx0 + 1;
    const int bh = by1 - by0 + 1;

    int nx0 = std::numeric_limits<int>::max();
    int ny0 = std::numeric_limits<int>::max();
    for (const auto& c : relocated.null_region) {
        nx0 = std::min(nx0, c.x);
        ny0 = std::min(ny0, c.y);
    }
    for (const auto& c : relocated.null_region) {
        out.set(c.x, c.y, pre.at(bx0 + floor_mod(c.x - nx0, bw), by0 + floor_mod(c.y - ny0, bh)));
    }
    return out;
}

OneStepResult warp_one_step(const LatentGrid& grid, const MaskPointSet& mask, const DragSet& drags,
                            const EditConfig& config, EditDiagnostics& diagnostics) {
    auto start = Clock::now();
    OneStepResult result;
    result.field = compute_warpage_field(mask, drags);
    diagnostics.timings.warpage_ms = elapsed_ms(start);

    start = Clock::now();
    result.relocation = relocate(grid, mask, result.field);
    diagnostics.timings.relocation_ms = elapsed_ms(start);

    start = Clock::now();
    if (drags.mode == DragMode::stretch) {
        result.grid = interpolate_grid(result.relocation, grid, config.null_fill, config.seed);
    } else {
        result.grid = apply_object_move_fill(result.relocation, grid, drags, config);
    }
    diagnostics.timings.fill_ms = elapsed_ms(start);

    diagnostics.mask_points = mask.size();
    diagnostics.null_count = result.relocation.null_region.size();
    diagnostics.relocation = result.relocation.counters;
    diagnostics.mode = drags.mode;
    ++diagnostics.warp_passes;
    return result;
}

EditOutcome edit_pixel(const LatentGrid& image, const MaskBitmap& mask, const DragSet& drags, const EditConfig& config) {
    const auto start = Clock::now();
    if (mask.width != image.width() || mask.height != image.height()) {
        throw ValidationError("mask size differs from image size");
    }
    const auto points = build_mask_point_set(mask);
    require_valid(image.width(), image.height(), drags, points, config);

    EditOutcome outcome;
    outcome.config = config;
    outcome.diagnostics.backend = Backend::pixel;
    outcome.image = warp_one_step(image, points, drags, config, outcome.diagnostics).grid;
    outcome.diagnostics.timings.total_ms = elapsed_ms(start);
    return outcome;
}

LatentEditGeometry scale_to_latent(const MaskBitmap& mask, const DragSet& drags, int factor, int latent_width,
                                   int latent_height) {
    LatentEditGeometry geometry;
    geometry.mask = MaskBitmap(latent_width, latent_height);
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.get(x, y)) geometry.mask.set(std::min(x / factor, latent_width - 1), std::min(y / factor, latent_height - 1));
        }
    }
    // Pixel coordinates up to width - 1 can land past the last latent cell
    // centre after division; clamp them back onto the grid.
    const auto scale = [&](Vec2 p) {
        return Vec2{std::clamp(p.x / factor, 0.0, latent_width - 1.0), std::clamp(p.y / factor, 0.0, latent_height - 1.0)};
    };
    geometry.drags.mode = drags.mode;
    for (const auto& ins : drags.instructions) {
        geometry.drags.instructions.push_back({scale(ins.handle), scale(ins.target)});
    }
    return geometry;
}

ToyNoisePredictor default_predictor(int channels) {
    if (channels == kDefaultPredictorChannels) return ToyNoisePredictor(default_predictor_weights());
    return ToyNoisePredictor(generate_predictor_weights(channels, kDefaultPredictorEmbedDim, kDefaultPredictorSeed));
}

namespace {

SamplingOptions sampling_options(const EditConfig& config) {
    return {config.cp_enabled, config.cp_start_step, config.sigma, config.seed};
}

// Samples from the latent at `step` (already taken from or derived from the
// inversion trajectory) according to config.resample_from.
LatentGrid resample(const LatentGrid& latent, int step, const InversionResult& inversion,
                    const DiffusionSchedule& schedule, const NoisePredictor& predictor, const EditConfig& config,
                    StageTimings& timings) {
    auto start = Clock::now();
    LatentGrid from = latent;
    int from_step = step;
    if (config.resample_from == ResampleFrom::final_step && step < schedule.steps()) {
        from = invert_range(latent, step, schedule.steps(), schedule, predictor, nullptr).back();
        from_step = schedule.steps();
        timings.inversion_ms += elapsed_ms(start);
        start = Clock::now();
    }
    auto z0 = sample(from, from_step, schedule, predictor, &inversion.cache, sampling_options(config));
    timings.sampling_ms = elapsed_ms(start);
    return z0;
}

}  // namespace

EditOutcome edit_latent(const LatentGrid& image, const MaskBitmap& mask, const DragSet& drags, const EditConfig& config,
                        const NoisePredictor& predictor) {
    const auto start = Clock::now();
    if (mask.width != image.width() || mask.height != image.height()) {
        throw ValidationError("mask size differs from image size");
    }
    if (auto errors = validate_config(config); !errors.empty()) {
        throw ValidationError(format_errors(errors));
    }
    // Pixel-level checks first so bounds errors name pixel coordinates.
    require_valid(image.width(), image.height(), drags, build_mask_point_set(mask), config);

    EditOutcome outcome;
    outcome.config = config;
    auto& diag = outcome.diagnostics;
    diag.backend = Backend::toy_latent;

    auto stage = Clock::now();
    const ToyAutoencoder autoencoder(config.latent_factor);
    const LatentGrid z0 = autoencoder.encode(image);
    diag.latent_width = z0.width();
    diag.latent_height = z0.height();
    diag.timings.encode_ms = elapsed_ms(stage);

    const auto geometry = scale_to_latent(mask, drags, config.latent_factor, z0.width(), z0.height());
    if (geometry.mask.count() == 0) {
        throw ValidationError("mask vanishes at latent resolution");
    }
    const auto latent_points = build_mask_point_set(geometry.mask);
    require_valid(z0.width(), z0.height(), geometry.drags, latent_points, config);

    stage = Clock::now();
    const auto schedule = DiffusionSchedule::scaled_linear(config.inversion_steps);
    const auto inversion = invert(z0, schedule, predictor);
    diag.timings.inversion_ms = elapsed_ms(stage);

    const int step = config.optimize_step;
    const auto warped = warp_one_step(inversion.trajectory[static_cast<std::size_t>(step)], latent_points,
                                      geometry.drags, config, diag);

    const auto z0_edited = resample(warped.grid, step, inversion, schedule, predictor, config, diag.timings);

    stage = Clock::now();
    outcome.image = autoencoder.decode(z0_edited, image.width(), image.height());
    diag.timings.decode_ms = elapsed_ms(stage);
    diag.timings.total_ms = elapsed_ms(start);
    return outcome;
}

EditOutcome edit_latent(const LatentGrid& image, const MaskBitmap& mask, const DragSet& drags, const EditConfig& config) {
    return edit_latent(image, mask, drags, config, default_predictor(image.channels()));
}

EditOutcome run_edit(const LatentGrid& image, const MaskBitmap& mask, const DragSet& drags, const EditConfig& config) {
    return config.backend == Backend::pixel ? edit_pixel(image, mask, drags, config)
                                            : edit_latent(image, mask, drags, config);
}

LatentGrid reconstruct(const LatentGrid& image, const EditConfig& config, const NoisePredictor& predictor) {
    if (auto errors = validate_config(config); !errors.empty()) {
        throw ValidationError(format_errors(errors));
    }
    const ToyAutoencoder autoencoder(config.latent_factor);
    const auto schedule = DiffusionSchedule::scaled_linear(config.inversion_steps);
    const auto inversion = invert(autoencoder.encode(image), schedule, predictor);
    StageTimings unused;
    const auto z0 = resample(inversion.trajectory[static_cast<std::size_t>(config.optimize_step)], config.optimize_step,
                             inversion, schedule, predictor, config, unused);
    return autoencoder.decode(z0, image.width(), image.height());
}

TemplateMatch match_template(const LatentGrid& image, const LatentGrid& templ) {
    if (templ.width() % 2 == 0 || templ.height() % 2 == 0) {
        throw std::invalid_argument("template dimensions must be odd");
    }
    if (templ.channels() != image.channels() || templ.width() > image.width() || templ.height() > image.height()) {
        throw std::invalid_argument("template does not fit the image");
    }
    {
        const auto d = image.data();
        const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
        if (*lo == *hi) throw std::invalid_argument("image has zero variance");
    }

    const auto t = templ.data();
    const double n = static_cast<double>(t.size());
    double t_mean = 0.0;
    for (double v : t) t_mean += v;
    t_mean /= n;
    double t_norm = 0.0;
    for (double v : t) t_norm += (v - t_mean) * (v - t_mean);
    if (t_norm == 0.0) throw std::invalid_argument("template has zero variance");

    const int tw = templ.width();
    const int th = templ.height();
    const int ch = image.channels();
    TemplateMatch best{{0.0, 0.0}, -std::numeric_limits<double>::infinity()};
    for (int oy = 0; oy + th <= image.height(); ++oy) {
        for (int ox = 0; ox + tw <= image.width(); ++ox) {
            double sum = 0.0;
            double sum_sq = 0.0;
            double cross = 0.0;
            for (int y = 0; y < th; ++y) {
                for (int x = 0; x < tw; ++x) {
                    const auto iv = image.at(ox + x, oy + y);
                    const auto tv = templ.at(x, y);
                    for (int c = 0; c < ch; ++c) {
                        sum += iv[c];
                        sum_sq += iv[c] * iv[c];
                        cross += iv[c] * (tv[c] - t_mean);
                    }
                }
            }
            const double i_var = sum_sq - sum * sum / n;
            if (i_var <= 1e-15) continue;
            const double score = cross / std::sqrt(i_var * t_norm);
            if (score > best.score) {
                best = {{static_cast<double>(ox + tw / 2), static_cast<double>(oy + th / 2)}, score};
            }
        }
    }
    if (!std::isfinite(best.score)) throw std::invalid_argument("no textured window to match against");
    return best;
}

double drag_fidelity(const LatentGrid& output, const DragSet& drags, const LatentGrid& templ) {
    if (drags.instructions.empty()) throw std::invalid_argument("drag fidelity needs at least one instruction");
    return distance(match_template(output, templ).location, drags.instructions.front().target);
}

}  // namespace dragwarp
