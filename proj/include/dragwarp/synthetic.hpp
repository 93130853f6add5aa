#pragma once

#include <cstdint>

#include "dragwarp/core.hpp"

namespace dragwarp::synthetic {

struct BlobSpec {
    Vec2 center;
    double sigma = 5.0;
    double amplitude = 0.7;
};

/// Constant background plus one isotropic Gaussian blob, clamped to [0, 1].
LatentGrid blob_scene(int width, int height, int channels, const BlobSpec& blob, double background = 0.2);

/// Odd-sized template of the blob alone, centred on the middle cell.
LatentGrid blob_template(int channels, const BlobSpec& blob, int half_size);

/// Axis-aligned filled rectangle of mask cells, clipped to the bitmap.
MaskBitmap rect_mask(int width, int height, int x0, int y0, int x1, int y1);

/// Uniform random values in [0, 1) from a seed.
LatentGrid random_grid(int width, int height, int channels, std::uint64_t seed);

}  // namespace dragwarp::synthetic
