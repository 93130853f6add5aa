#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "dragwarp/core.hpp"
#include "dragwarp/pipeline.hpp"
#include "dragwarp/warpage.hpp"

namespace dragwarp::io {

/// Unsupported or corrupt image data.
class ImageFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Drag spec that failed to parse or validate; carries every field error.
class SpecError : public ValidationError {
public:
    explicit SpecError(std::vector<FieldError> errors);
    const std::vector<FieldError>& errors() const { return errors_; }

private:
    std::vector<FieldError> errors_;
};

// --- images ---------------------------------------------------------------

/// 8-bit PNG or binary PPM (P6) -> 3-channel grid with values v / 255.
LatentGrid load_image(const std::filesystem::path& path);
LatentGrid decode_image(std::span<const std::uint8_t> bytes);
/// Writes PNG or PPM by extension. Values are clamped to [0, 1] and rounded.
void save_image(const LatentGrid& grid, const std::filesystem::path& path);
/// 1, 3 or 4 channels -> gray, RGB or RGBA PNG.
std::vector<std::uint8_t> encode_png(const LatentGrid& grid);
std::vector<std::uint8_t> encode_ppm(const LatentGrid& grid);
std::uint8_t quantize(double v);

// --- masks ----------------------------------------------------------------

/// Grayscale luminance thresholded at 128 (>= 128 is masked).
MaskBitmap load_mask(const std::filesystem::path& path);
MaskBitmap decode_mask(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_mask_png(const MaskBitmap& mask);

/// Row-major run lengths alternating unmasked/masked, starting unmasked.
struct MaskRle {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> runs;

    friend bool operator==(const MaskRle&, const MaskRle&) = default;
};
MaskRle to_rle(const MaskBitmap& mask);
/// Throws ValidationError when the runs do not cover width * height exactly.
MaskBitmap from_rle(const MaskRle& rle);

// --- drag spec documents --------------------------------------------------

struct DragSpecDocument {
    std::string image;
    std::variant<std::string, MaskRle> mask;
    std::vector<DragInstruction> instructions;
    DragMode mode = DragMode::stretch;
    EditConfig config;
};

bool operator==(const DragSpecDocument& a, const DragSpecDocument& b);

/// Parses and validates a JSON drag spec, applying config defaults. Unknown
/// fields are rejected. Throws SpecError listing every malformed field.
DragSpecDocument parse_drag_spec(const std::string& text);
std::string serialize_drag_spec(const DragSpecDocument& doc);

/// Parses instruction, mode and config fields shared by spec documents and
/// API requests. Appends errors rather than throwing.
std::vector<DragInstruction> parse_instructions(const nlohmann::json& value, std::vector<FieldError>& errors);
EditConfig parse_config(const nlohmann::json& value, std::vector<FieldError>& errors);
nlohmann::json config_to_json(const EditConfig& config);
nlohmann::json instructions_to_json(const std::vector<DragInstruction>& instructions);

struct LoadedEdit {
    LatentGrid image;
    MaskBitmap mask;
    DragSet drags;
    EditConfig config;
};

/// Loads the referenced image and mask (paths relative to `base_dir`) and
/// runs full request validation. Throws SpecError.
LoadedEdit load_edit(const DragSpecDocument& doc, const std::filesystem::path& base_dir);

/// Cross-checks an in-memory request; returns every violation, including an
/// empty mask or a mask/image size mismatch.
std::vector<FieldError> validate_loaded(const LatentGrid& image, const MaskBitmap& mask, const DragSet& drags,
                                        const EditConfig& config);

// --- diagnostics ----------------------------------------------------------

nlohmann::json diagnostics_to_json(const EditOutcome& outcome);

/// Header line then one row per mask point:
/// "x y vx vy w_1 lambda_1 ... w_k lambda_k" (object modes: "x y vx vy").
void write_warpage_table(std::ostream& out, const WarpageField& field);

// --- base64 ---------------------------------------------------------------

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws std::invalid_argument on malformed input.
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace dragwarp::io
