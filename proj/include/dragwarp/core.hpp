#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dragwarp {

/// Thrown for malformed requests that a caller could have validated up front.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown when geometric preconditions of the warp fail (e.g. a handle outside
/// the reference circle).
class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2, Vec2) = default;
};

double dot(Vec2 a, Vec2 b);
double norm(Vec2 a);
double distance(Vec2 a, Vec2 b);

/// Integer cell position. Origin top-left, x rightward, y downward.
struct Cell {
    int x = 0;
    int y = 0;

    Vec2 center() const { return {static_cast<double>(x), static_cast<double>(y)}; }
    friend bool operator==(Cell, Cell) = default;
    /// Row-major ordering: y first, then x.
    friend bool operator<(Cell a, Cell b) { return a.y != b.y ? a.y < b.y : a.x < b.x; }
};

/// Dense w x h x c grid of doubles where each cell is either fully valued or
/// null. Used for both pixel images and diffusion latents.
class LatentGrid {
public:
    LatentGrid() = default;
    LatentGrid(int width, int height, int channels, double fill = 0.0);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    std::size_t cell_count() const { return static_cast<std::size_t>(width_) * height_; }

    bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
    bool in_bounds(Cell c) const { return in_bounds(c.x, c.y); }
    bool in_bounds(Vec2 p) const;

    std::span<const double> at(int x, int y) const;
    std::span<double> at(int x, int y);
    double& at(int x, int y, int ch) { return data_[offset(x, y) + ch]; }
    double at(int x, int y, int ch) const { return data_[offset(x, y) + ch]; }

    bool is_null(int x, int y) const { return null_[index(x, y)] != 0; }
    void set_null(int x, int y);
    void set(int x, int y, std::span<const double> values);
    std::size_t null_count() const;

    std::span<const double> data() const { return data_; }
    std::span<double> data() { return data_; }

    bool same_shape(const LatentGrid& other) const;
    /// Bitwise equality of values and null markers.
    friend bool operator==(const LatentGrid&, const LatentGrid&) = default;

private:
    std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width_ + x; }
    std::size_t offset(int x, int y) const { return index(x, y) * channels_; }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<double> data_;
    std::vector<std::uint8_t> null_;
};

struct DragInstruction {
    Vec2 handle;
    Vec2 target;

    Vec2 vector() const { return target - handle; }
};

enum class DragMode { stretch, object_move, object_replicate };

struct DragSet {
    std::vector<DragInstruction> instructions;
    DragMode mode = DragMode::stretch;
};

/// Boolean bitmap; nonzero cells are editable.
struct MaskBitmap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> cells;

    MaskBitmap() = default;
    MaskBitmap(int w, int h) : width(w), height(h), cells(static_cast<std::size_t>(w) * h, 0) {}

    bool get(int x, int y) const { return cells[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v = true) { cells[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t count() const;
};

struct ReferenceCircle {
    Vec2 center;
    double radius = 0.0;

    bool contains(Vec2 p, double tol = 1e-9) const { return distance(p, center) <= radius + tol; }
    bool strictly_contains(Vec2 p) const { return distance(p, center) < radius; }
};

/// Minimum circle radius for degenerate (single-cell or collinear) masks.
inline constexpr double kMinCircleRadius = 0.5;

struct BoundingRect {
    int min_x = 0;
    int min_y = 0;
    int max_x = 0;
    int max_y = 0;
};

/// Editable cells in row-major order plus the circumscribed reference circle
/// of their bounding rectangle.
class MaskPointSet {
public:
    /// Throws ValidationError on an empty set.
    explicit MaskPointSet(std::vector<Cell> points);

    const std::vector<Cell>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    const BoundingRect& bounds() const { return bounds_; }
    const ReferenceCircle& circle() const { return circle_; }
    bool contains(Cell c) const;

private:
    std::vector<Cell> points_;
    BoundingRect bounds_;
    ReferenceCircle circle_;
};

MaskPointSet build_mask_point_set(const MaskBitmap& mask);

/// Upper bound on DDIM steps carved out of the 1000-step training schedule.
inline constexpr int kMaxInversionSteps = 500;

enum class NullFill { bnni, original_value, zero, random };
enum class Backend { pixel, toy_latent };
enum class ResampleFrom { optimize_step, final_step };

struct EditConfig {
    int inversion_steps = 10;
    int optimize_step = 7;
    bool cp_enabled = true;
    int cp_start_step = 0;
    double sigma = 0.0;
    NullFill null_fill = NullFill::bnni;
    int object_move_radius = 2;
    std::uint64_t seed = 0;
    Backend backend = Backend::pixel;
    ResampleFrom resample_from = ResampleFrom::optimize_step;
    /// Autoencoder downsample factor for the toy-latent backend.
    int latent_factor = 4;
};

struct FieldError {
    std::string field;
    std::string message;

    friend bool operator==(const FieldError&, const FieldError&) = default;
};

std::vector<FieldError> validate_config(const EditConfig& config);

/// Checks every cross-type invariant of an edit and returns all violations.
/// An empty result means every downstream precondition holds.
std::vector<FieldError> validate_edit_request(int grid_width, int grid_height, const DragSet& drags,
                                              const MaskPointSet& mask, const EditConfig& config);

std::string to_string(DragMode mode);
std::string to_string(NullFill fill);
std::string to_string(Backend backend);
std::string to_string(ResampleFrom from);
std::optional<DragMode> parse_drag_mode(const std::string& s);
std::optional<NullFill> parse_null_fill(const std::string& s);
std::optional<Backend> parse_backend(const std::string& s);
std::optional<ResampleFrom> parse_resample_from(const std::string& s);

/// Joins errors into "field: message; field: message".
std::string format_errors(const std::vector<FieldError>& errors);

/// Portable unit-Gaussian stream (mt19937_64 + Box-Muller) so seeded fills
/// are identical across standard library implementations.
class GaussianStream {
public:
    explicit GaussianStream(std::uint64_t seed);
    double next();

private:
    double uniform();

    std::mt19937_64 engine_;
    std::optional<double> spare_;
};

}  // namespace dragwarp
