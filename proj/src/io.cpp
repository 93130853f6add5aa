#include "dragwarp/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <memory>
#include <ostream>
#include <sstream>

namespace dragwarp::io {

using nlohmann::json;

SpecError::SpecError(std::vector<FieldError> errors)
    : ValidationError(format_errors(errors)), errors_(std::move(errors)) {}

namespace {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

bool is_png(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

bool is_pnm(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '6' || bytes[1] == '5');
}

struct Raster {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
};

Raster decode_png_raster(std::span<const std::uint8_t> bytes, png_uint_32 format) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw ImageFormatError(std::string("invalid PNG: ") + image.message);
    }
    image.format = format;
    Raster raster;
    raster.width = static_cast<int>(image.width);
    raster.height = static_cast<int>(image.height);
    raster.channels = static_cast<int>(PNG_IMAGE_PIXEL_CHANNELS(format));
    raster.pixels.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, raster.pixels.data(), 0, nullptr)) {
        const std::string message = image.message;
        png_image_free(&image);
        throw ImageFormatError("PNG decode failed: " + message);
    }
    return raster;
}

// Binary PPM (P6) or PGM (P5), maxval 255.
Raster decode_pnm_raster(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 2;
    const auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
    };
    const auto read_int = [&] {
        skip_space();
        long value = 0;
        const std::size_t begin = pos;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            value = value * 10 + (bytes[pos] - '0');
            if (value > 1'000'000) throw ImageFormatError("PNM header value too large");
            ++pos;
        }
        if (pos == begin) throw ImageFormatError("malformed PNM header");
        return static_cast<int>(value);
    };
    Raster raster;
    raster.channels = bytes[1] == '6' ? 3 : 1;
    raster.width = read_int();
    raster.height = read_int();
    const int maxval = read_int();
    if (maxval != 255) throw ImageFormatError("only 8-bit PNM (maxval 255) is supported");
    if (raster.width < 1 || raster.height < 1) throw ImageFormatError("PNM has empty dimensions");
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw ImageFormatError("malformed PNM header");
    ++pos;
    const auto count = static_cast<std::size_t>(raster.width) * raster.height * raster.channels;
    if (bytes.size() - pos < count) throw ImageFormatError("truncated PNM pixel data");
    raster.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                         bytes.begin() + static_cast<std::ptrdiff_t>(pos + count));
    return raster;
}

LatentGrid raster_to_grid(const Raster& raster) {
    LatentGrid grid(raster.width, raster.height, raster.channels);
    auto data = grid.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = raster.pixels[i] / 255.0;
    return grid;
}

MaskBitmap raster_to_mask(const Raster& raster) {
    MaskBitmap mask(raster.width, raster.height);
    for (std::size_t i = 0; i < mask.cells.size(); ++i) {
        if (raster.channels == 1) {
            mask.cells[i] = raster.pixels[i] >= 128 ? 1 : 0;
        } else {
            const auto* p = &raster.pixels[i * 3];
            const double luma = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
            mask.cells[i] = luma >= 128.0 ? 1 : 0;
        }
    }
    return mask;
}

std::vector<std::uint8_t> encode_png_raster(int width, int height, int channels, const std::uint8_t* pixels) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    switch (channels) {
        case 1: image.format = PNG_FORMAT_GRAY; break;
        case 3: image.format = PNG_FORMAT_RGB; break;
        case 4: image.format = PNG_FORMAT_RGBA; break;
        default: throw ImageFormatError("PNG export supports 1, 3 or 4 channels");
    }
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0, nullptr)) {
        throw ImageFormatError(std::string("PNG encode failed: ") + image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0, nullptr)) {
        throw ImageFormatError(std::string("PNG encode failed: ") + image.message);
    }
    out.resize(size);
    return out;
}

std::vector<std::uint8_t> quantize_grid(const LatentGrid& grid) {
    if (grid.null_count() != 0) throw ValidationError("cannot export a grid with null cells");
    std::vector<std::uint8_t> pixels(grid.data().size());
    std::transform(grid.data().begin(), grid.data().end(), pixels.begin(), quantize);
    return pixels;
}

std::string lower_extension(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext;
}

}  // namespace

std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

LatentGrid decode_image(std::span<const std::uint8_t> bytes) {
    if (is_png(bytes)) return raster_to_grid(decode_png_raster(bytes, PNG_FORMAT_RGB));
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return raster_to_grid(decode_pnm_raster(bytes));
    throw ImageFormatError("unsupported image format (expected PNG or binary PPM)");
}

LatentGrid load_image(const std::filesystem::path& path) { return decode_image(read_file(path)); }

std::vector<std::uint8_t> encode_png(const LatentGrid& grid) {
    const auto pixels = quantize_grid(grid);
    return encode_png_raster(grid.width(), grid.height(), grid.channels(), pixels.data());
}

std::vector<std::uint8_t> encode_ppm(const LatentGrid& grid) {
    if (grid.channels() != 3) throw ImageFormatError("PPM export requires 3 channels");
    const auto pixels = quantize_grid(grid);
    const std::string header = "P6\n" + std::to_string(grid.width()) + " " + std::to_string(grid.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), pixels.begin(), pixels.end());
    return out;
}

void save_image(const LatentGrid& grid, const std::filesystem::path& path) {
    const auto ext = lower_extension(path);
    if (ext == ".ppm") {
        write_file(path, encode_ppm(grid));
    } else if (ext == ".png") {
        write_file(path, encode_png(grid));
    } else {
        throw ImageFormatError("unsupported output extension '" + ext + "' (use .png or .ppm)");
    }
}

MaskBitmap decode_mask(std::span<const std::uint8_t> bytes) {
    if (is_png(bytes)) return raster_to_mask(decode_png_raster(bytes, PNG_FORMAT_GRAY));
    if (is_pnm(bytes)) return raster_to_mask(decode_pnm_raster(bytes));
    throw ImageFormatError("unsupported mask format (expected PNG, PGM or PPM)");
}

MaskBitmap load_mask(const std::filesystem::path& path) { return decode_mask(read_file(path)); }

std::vector<std::uint8_t> encode_mask_png(const MaskBitmap& mask) {
    std::vector<std::uint8_t> pixels(mask.cells.size());
    std::transform(mask.cells.begin(), mask.cells.end(), pixels.begin(),
                   [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 255 : 0); });
    return encode_png_raster(mask.width, mask.height, 1, pixels.data());
}

MaskRle to_rle(const MaskBitmap& mask) {
    MaskRle rle{mask.width, mask.height, {}};
    bool current = false;
    std::uint32_t run = 0;
    for (auto cell : mask.cells) {
        if ((cell != 0) != current) {
            rle.runs.push_back(run);
            current = !current;
            run = 0;
        }
        ++run;
    }
    rle.runs.push_back(run);
    return rle;
}

MaskBitmap from_rle(const MaskRle& rle) {
    if (rle.width < 1 || rle.height < 1) throw ValidationError("mask dimensions must be positive");
    MaskBitmap mask(rle.width, rle.height);
    std::size_t pos = 0;
    bool value = false;
    for (auto run : rle.runs) {
        if (run > mask.cells.size() - pos) throw ValidationError("mask runs exceed width * height");
        std::fill_n(mask.cells.begin() + static_cast<std::ptrdiff_t>(pos), run, value ? 1 : 0);
        pos += run;
        value = !value;
    }
    if (pos != mask.cells.size()) throw ValidationError("mask runs do not cover width * height");
    return mask;
}

// --- spec parsing ---------------------------------------------------------

namespace {

bool parse_point(const json& value, Vec2& out) {
    if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number()) return false;
    out = {value[0].get<double>(), value[1].get<double>()};
    return std::isfinite(out.x) && std::isfinite(out.y);
}

void reject_unknown(const json& object, std::initializer_list<const char*> known, const std::string& prefix,
                    std::vector<FieldError>& errors) {
    for (const auto& [key, _] : object.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; })) {
            errors.push_back({prefix + key, "unknown field"});
        }
    }
}

std::string locator(const std::string& prefix, const char* key) { return prefix + key; }

}  // namespace

std::vector<DragInstruction> parse_instructions(const json& value, std::vector<FieldError>& errors) {
    std::vector<DragInstruction> instructions;
    if (!value.is_array()) {
        errors.push_back({"instructions", "expected an array of {handle, target} objects"});
        return instructions;
    }
    if (value.empty()) {
        errors.push_back({"instructions", "at least one drag instruction is required"});
    }
    for (std::size_t i = 0; i < value.size(); ++i) {
        const std::string prefix = "instructions[" + std::to_string(i) + "]";
        const auto& item = value[i];
        if (!item.is_object()) {
            errors.push_back({prefix, "expected an object with handle and target"});
            continue;
        }
        reject_unknown(item, {"handle", "target"}, prefix + ".", errors);
        DragInstruction ins;
        bool ok = true;
        for (const auto* key : {"handle", "target"}) {
            Vec2& point = std::string(key) == "handle" ? ins.handle : ins.target;
            const std::string field = prefix + "." + key;
            if (!item.contains(key)) {
                errors.push_back({field, "missing"});
                ok = false;
            } else if (!parse_point(item[key], point)) {
                errors.push_back({field, "expected [x, y] number pair"});
                ok = false;
            } else if (point.x < 0.0 || point.y < 0.0) {
                errors.push_back({field, std::string(key) + " out of bounds"});
                ok = false;
            }
        }
        if (ok) instructions.push_back(ins);
    }
    return instructions;
}

EditConfig parse_config(const json& value, std::vector<FieldError>& errors) {
    EditConfig config;
    if (value.is_null()) return config;
    if (!value.is_object()) {
        errors.push_back({"config", "expected an object"});
        return config;
    }
    const std::string prefix = "config.";
    reject_unknown(value,
                   {"inversionSteps", "optimizeStep", "cpEnabled", "cpStartStep", "sigma", "nullFill",
                    "objectMoveRadius", "seed", "backend", "resampleFrom", "latentFactor"},
                   prefix, errors);

    const auto get_int = [&](const char* key, int& out) {
        if (!value.contains(key)) return;
        const auto& v = value[key];
        if (!v.is_number_integer()) {
            errors.push_back({locator(prefix, key), "expected an integer"});
            return;
        }
        const auto n = v.get<long long>();
        if (n < -1'000'000'000LL || n > 1'000'000'000LL) {
            errors.push_back({locator(prefix, key), "out of range"});
            return;
        }
        out = static_cast<int>(n);
    };
    get_int("inversionSteps", config.inversion_steps);
    get_int("optimizeStep", config.optimize_step);
    get_int("cpStartStep", config.cp_start_step);
    get_int("objectMoveRadius", config.object_move_radius);
    get_int("latentFactor", config.latent_factor);

    if (value.contains("cpEnabled")) {
        if (value["cpEnabled"].is_boolean()) {
            config.cp_enabled = value["cpEnabled"].get<bool>();
        } else {
            errors.push_back({"config.cpEnabled", "expected a boolean"});
        }
    }
    if (value.contains("sigma")) {
        if (value["sigma"].is_number()) {
            config.sigma = value["sigma"].get<double>();
        } else {
            errors.push_back({"config.sigma", "expected a number"});
        }
    }
    if (value.contains("seed")) {
        if (value["seed"].is_number_unsigned()) {
            config.seed = value["seed"].get<std::uint64_t>();
        } else if (value["seed"].is_number_integer()) {
            const auto seed = value["seed"].get<std::int64_t>();
            if (seed >= 0) {
                config.seed = static_cast<std::uint64_t>(seed);
            } else {
                errors.push_back({"config.seed", "must be non-negative"});
            }
        } else {
            errors.push_back({"config.seed", "expected an integer"});
        }
    }

    const auto get_enum = [&](const char* key, auto parse, auto& out, const char* choices) {
        if (!value.contains(key)) return;
        const auto& v = value[key];
        if (!v.is_string()) {
            errors.push_back({locator(prefix, key), std::string("expected one of ") + choices});
            return;
        }
        if (auto parsed = parse(v.template get<std::string>())) {
            out = *parsed;
        } else {
            errors.push_back({locator(prefix, key), std::string("expected one of ") + choices});
        }
    };
    get_enum("nullFill", parse_null_fill, config.null_fill, "bnni, original, zero, random");
    get_enum("backend", parse_backend, config.backend, "pixel, toy-latent");
    get_enum("resampleFrom", parse_resample_from, config.resample_from, "optimize-step, final-step");

    auto range_errors = validate_config(config);
    for (auto& e : range_errors) {
        // validate_config uses snake_case names; report the JSON key instead.
        static const std::pair<const char*, const char*> kNames[] = {
            {"config.inversion_steps", "config.inversionSteps"}, {"config.optimize_step", "config.optimizeStep"},
            {"config.cp_start_step", "config.cpStartStep"},      {"config.object_move_radius", "config.objectMoveRadius"},
            {"config.latent_factor", "config.latentFactor"},
        };
        for (const auto& [from, to] : kNames) {
            if (e.field == from) e.field = to;
        }
        errors.push_back(std::move(e));
    }
    return config;
}

json config_to_json(const EditConfig& config) {
    return json{{"inversionSteps", config.inversion_steps},
                {"optimizeStep", config.optimize_step},
                {"cpEnabled", config.cp_enabled},
                {"cpStartStep", config.cp_start_step},
                {"sigma", config.sigma},
                {"nullFill", to_string(config.null_fill)},
                {"objectMoveRadius", config.object_move_radius},
                {"seed", config.seed},
                {"backend", to_string(config.backend)},
                {"resampleFrom", to_string(config.resample_from)},
                {"latentFactor", config.latent_factor}};
}

json instructions_to_json(const std::vector<DragInstruction>& instructions) {
    json out = json::array();
    for (const auto& ins : instructions) {
        out.push_back({{"handle", {ins.handle.x, ins.handle.y}}, {"target", {ins.target.x, ins.target.y}}});
    }
    return out;
}

bool operator==(const DragSpecDocument& a, const DragSpecDocument& b) {
    const auto same_config = config_to_json(a.config) == config_to_json(b.config);
    const auto same_instructions =
        a.instructions.size() == b.instructions.size() &&
        std::equal(a.instructions.begin(), a.instructions.end(), b.instructions.begin(),
                   [](const auto& x, const auto& y) { return x.handle == y.handle && x.target == y.target; });
    return a.image == b.image && a.mask == b.mask && a.mode == b.mode && same_config && same_instructions;
}

DragSpecDocument parse_drag_spec(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SpecError(std::vector<FieldError>{{"$", std::string("malformed JSON: ") + e.what()}});
    }
    if (!root.is_object()) throw SpecError(std::vector<FieldError>{{"$", "expected a JSON object"}});

    std::vector<FieldError> errors;
    reject_unknown(root, {"image", "mask", "instructions", "mode", "config"}, "", errors);

    DragSpecDocument doc;
    if (!root.contains("image") || !root["image"].is_string() || root["image"].get<std::string>().empty()) {
        errors.push_back({"image", "expected a non-empty path"});
    } else {
        doc.image = root["image"].get<std::string>();
    }

    if (!root.contains("mask")) {
        errors.push_back({"mask", "missing"});
    } else if (const auto& m = root["mask"]; m.is_string()) {
        doc.mask = m.get<std::string>();
    } else if (m.is_object()) {
        reject_unknown(m, {"width", "height", "runs"}, "mask.", errors);
        MaskRle rle;
        bool ok = true;
        for (const auto* key : {"width", "height"}) {
            if (!m.contains(key) || !m[key].is_number_integer() || m[key].get<long long>() < 1 ||
                m[key].get<long long>() > 1'000'000) {
                errors.push_back({std::string("mask.") + key, "expected a positive integer"});
                ok = false;
            }
        }
        if (!m.contains("runs") || !m["runs"].is_array()) {
            errors.push_back({"mask.runs", "expected an array of run lengths"});
            ok = false;
        } else {
            for (std::size_t i = 0; i < m["runs"].size(); ++i) {
                const auto& r = m["runs"][i];
                if (!r.is_number_unsigned() || r.get<std::uint64_t>() > 0xffffffffu) {
                    errors.push_back({"mask.runs[" + std::to_string(i) + "]", "expected a non-negative integer"});
                    ok = false;
                } else {
                    rle.runs.push_back(r.get<std::uint32_t>());
                }
            }
        }
        if (ok) {
            rle.width = m["width"].get<int>();
            rle.height = m["height"].get<int>();
            try {
                from_rle(rle);
            } catch (const ValidationError& e) {
                errors.push_back({"mask.runs", e.what()});
            }
            doc.mask = std::move(rle);
        }
    } else {
        errors.push_back({"mask", "expected a path or {width, height, runs}"});
    }

    if (root.contains("mode")) {
        const auto& m = root["mode"];
        if (auto mode = m.is_string() ? parse_drag_mode(m.get<std::string>()) : std::nullopt) {
            doc.mode = *mode;
        } else {
            errors.push_back({"mode", "expected one of stretch, move, replicate"});
        }
    }

    if (!root.contains("instructions")) {
        errors.push_back({"instructions", "missing"});
    } else {
        doc.instructions = parse_instructions(root["instructions"], errors);
        if (doc.mode != DragMode::stretch && root["instructions"].is_array() && root["instructions"].size() > 1) {
            errors.push_back({"instructions", "object mode requires one instruction"});
        }
    }

    doc.config = parse_config(root.contains("config") ? root["config"] : json(), errors);

    if (!errors.empty()) throw SpecError(std::move(errors));
    return doc;
}

std::string serialize_drag_spec(const DragSpecDocument& doc) {
    json root;
    root["image"] = doc.image;
    if (const auto* path = std::get_if<std::string>(&doc.mask)) {
        root["mask"] = *path;
    } else {
        const auto& rle = std::get<MaskRle>(doc.mask);
        root["mask"] = {{"width", rle.width}, {"height", rle.height}, {"runs", rle.runs}};
    }
    root["instructions"] = instructions_to_json(doc.instructions);
    root["mode"] = to_string(doc.mode);
    root["config"] = config_to_json(doc.config);
    return root.dump(2);
}

std::vector<FieldError> validate_loaded(const LatentGrid& image, const MaskBitmap& mask, const DragSet& drags,
                                        const EditConfig& config) {
    if (mask.width != image.width() || mask.height != image.height()) {
        return {{"mask", "mask size " + std::to_string(mask.width) + "x" + std::to_string(mask.height) +
                             " differs from image size " + std::to_string(image.width()) + "x" +
                             std::to_string(image.height())}};
    }
    if (mask.count() == 0) {
        return {{"mask", "mask is empty"}};
    }
    return validate_edit_request(image.width(), image.height(), drags, build_mask_point_set(mask), config);
}

LoadedEdit load_edit(const DragSpecDocument& doc, const std::filesystem::path& base_dir) {
    const auto resolve = [&](const std::string& p) {
        const std::filesystem::path path(p);
        return path.is_absolute() ? path : base_dir / path;
    };
    LoadedEdit edit;
    try {
        edit.image = load_image(resolve(doc.image));
    } catch (const std::exception& e) {
        throw SpecError(std::vector<FieldError>{{"image", e.what()}});
    }
    try {
        if (const auto* path = std::get_if<std::string>(&doc.mask)) {
            edit.mask = load_mask(resolve(*path));
        } else {
            edit.mask = from_rle(std::get<MaskRle>(doc.mask));
        }
    } catch (const std::exception& e) {
        throw SpecError(std::vector<FieldError>{{"mask", e.what()}});
    }
    edit.drags = {doc.instructions, doc.mode};
    edit.config = doc.config;
    if (auto errors = validate_loaded(edit.image, edit.mask, edit.drags, edit.config); !errors.empty()) {
        throw SpecError(std::move(errors));
    }
    return edit;
}

json diagnostics_to_json(const EditOutcome& outcome) {
    const auto& d = outcome.diagnostics;
    const auto& t = d.timings;
    json out{{"backend", to_string(d.backend)},
             {"mode", to_string(d.mode)},
             {"maskPoints", d.mask_points},
             {"nullCount", d.null_count},
             {"warpPasses", d.warp_passes},
             {"relocation",
              {{"written", d.relocation.written},
               {"droppedOutOfBounds", d.relocation.dropped_out_of_bounds},
               {"droppedOccupied", d.relocation.dropped_occupied}}},
             {"timingsMs",
              {{"warpage", t.warpage_ms},
               {"relocation", t.relocation_ms},
               {"fill", t.fill_ms},
               {"encode", t.encode_ms},
               {"inversion", t.inversion_ms},
               {"sampling", t.sampling_ms},
               {"decode", t.decode_ms},
               {"total", t.total_ms}}},
             {"config", config_to_json(outcome.config)}};
    if (d.backend == Backend::toy_latent) {
        out["latentSize"] = {d.latent_width, d.latent_height};
    }
    return out;
}

void write_warpage_table(std::ostream& out, const WarpageField& field) {
    const auto k = field.instruction_count;
    out << "x y vx vy";
    for (std::size_t i = 1; i <= k; ++i) out << " w" << i << " lambda" << i;
    out << '\n';
    out << std::setprecision(17);
    for (std::size_t j = 0; j < field.size(); ++j) {
        out << field.points[j].x << ' ' << field.points[j].y << ' ' << field.vectors[j].x << ' ' << field.vectors[j].y;
        for (std::size_t i = 0; i < k; ++i) {
            out << ' ' << field.weights[j * k + i] << ' ' << field.stretch[j * k + i];
        }
        out << '\n';
    }
}

// --- base64 ---------------------------------------------------------------

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 2 < bytes.size(); i += 3) {
        const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kAlphabet[(n >> 18) & 63];
        out += kAlphabet[(n >> 12) & 63];
        out += kAlphabet[(n >> 6) & 63];
        out += kAlphabet[n & 63];
    }
    if (const auto rest = bytes.size() - i; rest > 0) {
        std::uint32_t n = bytes[i] << 16;
        if (rest == 2) n |= bytes[i + 1] << 8;
        out += kAlphabet[(n >> 18) & 63];
        out += kAlphabet[(n >> 12) & 63];
        out += rest == 2 ? kAlphabet[(n >> 6) & 63] : '=';
        out += '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    std::vector<std::uint8_t> out;
    std::uint32_t buffer = 0;
    int bits = 0;
    std::size_t padding = 0;
    for (char c : text) {
        if (c == '=') {
            ++padding;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        if (padding > 0) throw std::invalid_argument("base64 data after padding");
        const char* p = std::strchr(kAlphabet, c);
        if (p == nullptr || c == '\0') throw std::invalid_argument("invalid base64 character");
        buffer = (buffer << 6) | static_cast<std::uint32_t>(p - kAlphabet);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((buffer >> bits) & 0xff));
        }
    }
    if (padding > 2 || bits >= 6) throw std::invalid_argument("malformed base64 length");
    return out;
}

}  // namespace dragwarp::io
