#include "dragwarp/core.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace dragwarp {

double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double norm(Vec2 a) { return std::hypot(a.x, a.y); }
double distance(Vec2 a, Vec2 b) { return norm(a - b); }

LatentGrid::LatentGrid(int width, int height, int channels, double fill)
    : width_(width), height_(height), channels_(channels) {
    if (width < 1 || height < 1 || channels < 1) {
        throw ValidationError("grid dimensions must be positive");
    }
    data_.assign(cell_count() * channels, fill);
    null_.assign(cell_count(), 0);
}

bool LatentGrid::in_bounds(Vec2 p) const {
    return p.x >= 0.0 && p.y >= 0.0 && p.x <= width_ - 1 && p.y <= height_ - 1;
}

std::span<const double> LatentGrid::at(int x, int y) const {
    return {data_.data() + offset(x, y), static_cast<std::size_t>(channels_)};
}

std::span<double> LatentGrid::at(int x, int y) {
    return {data_.data() + offset(x, y), static_cast<std::size_t>(channels_)};
}

void LatentGrid::set_null(int x, int y) {
    null_[index(x, y)] = 1;
    // Null cells carry no value; zero them so equality never depends on stale data.
    std::fill_n(data_.begin() + offset(x, y), channels_, 0.0);
}

void LatentGrid::set(int x, int y, std::span<const double> values) {
    std::copy(values.begin(), values.end(), data_.begin() + offset(x, y));
    null_[index(x, y)] = 0;
}

std::size_t LatentGrid::null_count() const {
    return static_cast<std::size_t>(std::count(null_.begin(), null_.end(), std::uint8_t{1}));
}

bool LatentGrid::same_shape(const LatentGrid& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
}

std::size_t MaskBitmap::count() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](auto v) { return v != 0; }));
}

MaskPointSet::MaskPointSet(std::vector<Cell> points) : points_(std::move(points)) {
    if (points_.empty()) {
        throw ValidationError("mask is empty");
    }
    std::sort(points_.begin(), points_.end());
    points_.erase(std::unique(points_.begin(), points_.end()), points_.end());

    bounds_ = {points_.front().x, points_.front().y, points_.front().x, points_.front().y};
    for (const auto& p : points_) {
        bounds_.min_x = std::min(bounds_.min_x, p.x);
        bounds_.max_x = std::max(bounds_.max_x, p.x);
        bounds_.min_y = std::min(bounds_.min_y, p.y);
        bounds_.max_y = std::max(bounds_.max_y, p.y);
    }
    const double w = bounds_.max_x - bounds_.min_x;
    const double h = bounds_.max_y - bounds_.min_y;
    circle_.center = {(bounds_.min_x + bounds_.max_x) / 2.0, (bounds_.min_y + bounds_.max_y) / 2.0};
    circle_.radius = std::max(kMinCircleRadius, 0.5 * std::sqrt(w * w + h * h));
}

bool MaskPointSet::contains(Cell c) const { return std::binary_search(points_.begin(), points_.end(), c); }

MaskPointSet build_mask_point_set(const MaskBitmap& mask) {
    std::vector<Cell> points;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.get(x, y)) {
                points.push_back({x, y});
            }
        }
    }
    return MaskPointSet(std::move(points));
}

std::vector<FieldError> validate_config(const EditConfig& config) {
    std::vector<FieldError> errors;
    if (config.inversion_steps < 1 || config.inversion_steps > kMaxInversionSteps) {
        errors.push_back({"config.inversion_steps", "must lie in [1, " + std::to_string(kMaxInversionSteps) + "]"});
    }
    if (config.optimize_step < 1 || config.optimize_step > config.inversion_steps) {
        errors.push_back({"config.optimize_step", "must lie in [1, inversion_steps]"});
    }
    if (config.cp_start_step < 0 || config.cp_start_step > config.inversion_steps) {
        errors.push_back({"config.cp_start_step", "must lie in [0, inversion_steps]"});
    }
    if (!std::isfinite(config.sigma) || config.sigma < 0.0) {
        errors.push_back({"config.sigma", "must be finite and non-negative"});
    }
    if (config.object_move_radius < 1) {
        errors.push_back({"config.object_move_radius", "must be at least 1"});
    }
    if (config.latent_factor < 1) {
        errors.push_back({"config.latent_factor", "must be at least 1"});
    }
    return errors;
}

std::vector<FieldError> validate_edit_request(int grid_width, int grid_height, const DragSet& drags,
                                              const MaskPointSet& mask, const EditConfig& config) {
    std::vector<FieldError> errors;
    if (grid_width < 1 || grid_height < 1) {
        errors.push_back({"image", "grid dimensions must be positive"});
        return errors;
    }
    const auto in_bounds = [&](Vec2 p) {
        return std::isfinite(p.x) && std::isfinite(p.y) && p.x >= 0.0 && p.y >= 0.0 && p.x <= grid_width - 1 &&
               p.y <= grid_height - 1;
    };

    const auto k = drags.instructions.size();
    if (k == 0) {
        errors.push_back({"instructions", "at least one drag instruction is required"});
    }
    if (drags.mode != DragMode::stretch && k > 1) {
        errors.push_back({"instructions", "object mode requires one instruction"});
    }

    const auto& circle = mask.circle();
    for (std::size_t i = 0; i < k; ++i) {
        const auto& ins = drags.instructions[i];
        const std::string prefix = "instructions[" + std::to_string(i) + "]";
        const bool handle_ok = in_bounds(ins.handle);
        if (!handle_ok) {
            errors.push_back({prefix + ".handle", "handle out of bounds"});
        }
        if (!in_bounds(ins.target)) {
            errors.push_back({prefix + ".target", "target out of bounds"});
        }
        // Zero-length drags contribute nothing, so their handle may sit anywhere.
        if (handle_ok && drags.mode == DragMode::stretch && norm(ins.vector()) > 0.0 &&
            !circle.strictly_contains(ins.handle)) {
            errors.push_back({prefix + ".handle", "handle outside reference circle"});
        }
    }

    for (const auto& p : mask.points()) {
        if (p.x < 0 || p.y < 0 || p.x >= grid_width || p.y >= grid_height) {
            errors.push_back({"mask", "mask point out of bounds"});
            break;
        }
    }

    auto config_errors = validate_config(config);
    errors.insert(errors.end(), config_errors.begin(), config_errors.end());
    return errors;
}

std::string to_string(DragMode mode) {
    switch (mode) {
        case DragMode::stretch: return "stretch";
        case DragMode::object_move: return "move";
        case DragMode::object_replicate: return "replicate";
    }
    return "stretch";
}

std::string to_string(NullFill fill) {
    switch (fill) {
        case NullFill::bnni: return "bnni";
        case NullFill::original_value: return "original";
        case NullFill::zero: return "zero";
        case NullFill::random: return "random";
    }
    return "bnni";
}

std::string to_string(Backend backend) { return backend == Backend::pixel ? "pixel" : "toy-latent"; }

std::string to_string(ResampleFrom from) {
    return from == ResampleFrom::optimize_step ? "optimize-step" : "final-step";
}

std::optional<DragMode> parse_drag_mode(const std::string& s) {
    if (s == "stretch") return DragMode::stretch;
    if (s == "move") return DragMode::object_move;
    if (s == "replicate") return DragMode::object_replicate;
    return std::nullopt;
}

std::optional<NullFill> parse_null_fill(const std::string& s) {
    if (s == "bnni") return NullFill::bnni;
    if (s == "original") return NullFill::original_value;
    if (s == "zero") return NullFill::zero;
    if (s == "random") return NullFill::random;
    return std::nullopt;
}

std::optional<Backend> parse_backend(const std::string& s) {
    if (s == "pixel") return Backend::pixel;
    if (s == "toy-latent") return Backend::toy_latent;
    return std::nullopt;
}

std::optional<ResampleFrom> parse_resample_from(const std::string& s) {
    if (s == "optimize-step") return ResampleFrom::optimize_step;
    if (s == "final-step") return ResampleFrom::final_step;
    return std::nullopt;
}

std::string format_errors(const std::vector<FieldError>& errors) {
    std::ostringstream out;
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (i > 0) out << "; ";
        out << errors[i].field << ": " << errors[i].message;
    }
    return out.str();
}

GaussianStream::GaussianStream(std::uint64_t seed) : engine_(seed) {}

double GaussianStream::uniform() {
    // 53-bit mantissa in (0, 1].
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
}

double GaussianStream::next() {
    if (spare_) {
        const double v = *spare_;
        spare_.reset();
        return v;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    return r * std::cos(theta);
}

}  // namespace dragwarp
