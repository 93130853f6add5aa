#pragma once

#include <cstddef>

#include "dragwarp/bnni.hpp"
#include "dragwarp/core.hpp"
#include "dragwarp/diffusion.hpp"
#include "dragwarp/relocation.hpp"
#include "dragwarp/warpage.hpp"

namespace dragwarp {

struct StageTimings {
    double warpage_ms = 0.0;
    double relocation_ms = 0.0;
    double fill_ms = 0.0;
    double encode_ms = 0.0;
    double inversion_ms = 0.0;
    double sampling_ms = 0.0;
    double decode_ms = 0.0;
    double total_ms = 0.0;
};

struct EditDiagnostics {
    Backend backend = Backend::pixel;
    DragMode mode = DragMode::stretch;
    std::size_t mask_points = 0;
    std::size_t null_count = 0;
    RelocationCounters relocation;
    /// Number of warp + relocate + fill passes run; always 1 for an edit.
    int warp_passes = 0;
    int latent_width = 0;
    int latent_height = 0;
    StageTimings timings;
};

struct EditOutcome {
    LatentGrid image;
    EditDiagnostics diagnostics;
    EditConfig config;
};

/// Output of the single warp pass on one grid.
struct OneStepResult {
    LatentGrid grid;  // no nulls
    WarpageField field;
    RelocationResult relocation;
};

/// Warpage field, relocation and null fill on `grid`, run exactly once.
/// Stretch mode fills nulls with `config.null_fill`; object modes use
/// apply_object_move_fill. Records counters and stage timings.
OneStepResult warp_one_step(const LatentGrid& grid, const MaskPointSet& mask, const DragSet& drags,
                            const EditConfig& config, EditDiagnostics& diagnostics);

/// Null handling for object modes. Move: tile the (2r) x (2r) block of
/// `pre` centred on the target (cropped to the grid) over the null region.
/// Replicate: restore the null cells from `pre`.
LatentGrid apply_object_move_fill(const RelocationResult& relocated, const LatentGrid& pre, const DragSet& drags,
                                  const EditConfig& config);

EditOutcome edit_pixel(const LatentGrid& image, const MaskBitmap& mask, const DragSet& drags, const EditConfig& config);

/// Encode, invert, warp the latent at config.optimize_step, sample and
/// decode. The predictor's channel count must match the image.
EditOutcome edit_latent(const LatentGrid& image, const MaskBitmap& mask, const DragSet& drags, const EditConfig& config,
                        const NoisePredictor& predictor);
/// As above with the seeded toy predictor for the image's channel count.
EditOutcome edit_latent(const LatentGrid& image, const MaskBitmap& mask, const DragSet& drags, const EditConfig& config);

/// Dispatches on config.backend.
EditOutcome run_edit(const LatentGrid& image, const MaskBitmap& mask, const DragSet& drags, const EditConfig& config);

/// Encode -> invert -> sample -> decode with no warp, using the same
/// schedule and sampling settings as edit_latent.
LatentGrid reconstruct(const LatentGrid& image, const EditConfig& config, const NoisePredictor& predictor);

/// Toy predictor with the default seed for `channels` channels; the golden
/// weights when channels == 3.
ToyNoisePredictor default_predictor(int channels);

/// Mask and drags mapped to latent resolution: floor division for mask cells,
/// real division for points (clamped to the latent grid).
struct LatentEditGeometry {
    MaskBitmap mask;
    DragSet drags;
};
LatentEditGeometry scale_to_latent(const MaskBitmap& mask, const DragSet& drags, int factor, int latent_width,
                                   int latent_height);

struct TemplateMatch {
    Vec2 location;  // template centre
    double score = 0.0;
};

/// Normalized cross-correlation of an odd-sized template over every
/// placement inside `image`; returns the best-scoring centre.
/// Throws std::invalid_argument when the image has zero variance.
TemplateMatch match_template(const LatentGrid& image, const LatentGrid& templ);

/// Distance in cells from the best template match to the first target.
double drag_fidelity(const LatentGrid& output, const DragSet& drags, const LatentGrid& templ);

}  // namespace dragwarp
