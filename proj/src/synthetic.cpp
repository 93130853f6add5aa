#include "dragwarp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dragwarp::synthetic {

LatentGrid blob_scene(int width, int height, int channels, const BlobSpec& blob, double background) {
    LatentGrid grid(width, height, channels);
    const double inv = 1.0 / (2.0 * blob.sigma * blob.sigma);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double dx = x - blob.center.x;
            const double dy = y - blob.center.y;
            const double v = std::clamp(background + blob.amplitude * std::exp(-(dx * dx + dy * dy) * inv), 0.0, 1.0);
            for (int c = 0; c < channels; ++c) grid.at(x, y, c) = v;
        }
    }
    return grid;
}

LatentGrid blob_template(int channels, const BlobSpec& blob, int half_size) {
    const int size = 2 * half_size + 1;
    BlobSpec centred = blob;
    centred.center = {static_cast<double>(half_size), static_cast<double>(half_size)};
    return blob_scene(size, size, channels, centred, 0.0);
}

MaskBitmap rect_mask(int width, int height, int x0, int y0, int x1, int y1) {
    MaskBitmap mask(width, height);
    for (int y = std::max(0, y0); y <= std::min(height - 1, y1); ++y) {
        for (int x = std::max(0, x0); x <= std::min(width - 1, x1); ++x) mask.set(x, y);
    }
    return mask;
}

LatentGrid random_grid(int width, int height, int channels, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    LatentGrid grid(width, height, channels);
    for (auto& v : grid.data()) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return grid;
}

}  // namespace dragwarp::synthetic
