#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dragwarp/io.hpp"
#include "dragwarp/pipeline.hpp"

namespace py = pybind11;
using namespace dragwarp;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using MaskArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using PointList = std::vector<std::pair<std::pair<double, double>, std::pair<double, double>>>;

// (H, W) or (H, W, C) float array -> grid. NaN marks a null cell.
LatentGrid to_grid(const Array& array) {
    if (array.ndim() != 2 && array.ndim() != 3) throw py::value_error("expected an (H, W) or (H, W, C) array");
    const int h = static_cast<int>(array.shape(0));
    const int w = static_cast<int>(array.shape(1));
    const int c = array.ndim() == 3 ? static_cast<int>(array.shape(2)) : 1;
    LatentGrid grid(w, h, c);
    std::copy(array.data(), array.data() + grid.data().size(), grid.data().begin());
    return grid;
}

Array to_array(const LatentGrid& grid) {
    Array out({grid.height(), grid.width(), grid.channels()});
    auto* dst = out.mutable_data();
    std::copy(grid.data().begin(), grid.data().end(), dst);
    for (int y = 0; y < grid.height(); ++y) {
        for (int x = 0; x < grid.width(); ++x) {
            if (grid.is_null(x, y)) {
                std::fill_n(dst + (static_cast<std::size_t>(y) * grid.width() + x) * grid.channels(), grid.channels(),
                            std::numeric_limits<double>::quiet_NaN());
            }
        }
    }
    return out;
}

MaskBitmap to_mask(const MaskArray& array) {
    if (array.ndim() != 2) throw py::value_error("mask must be a 2-D array");
    MaskBitmap mask(static_cast<int>(array.shape(1)), static_cast<int>(array.shape(0)));
    for (std::size_t i = 0; i < mask.cells.size(); ++i) mask.cells[i] = array.data()[i] != 0 ? 1 : 0;
    return mask;
}

DragSet to_drags(const PointList& points, const std::string& mode) {
    DragSet drags;
    const auto parsed = parse_drag_mode(mode);
    if (!parsed) throw py::value_error("mode must be stretch, move or replicate");
    drags.mode = *parsed;
    for (const auto& [h, t] : points) drags.instructions.push_back({{h.first, h.second}, {t.first, t.second}});
    return drags;
}

EditConfig to_config(const std::string& config_json) {
    std::vector<FieldError> errors;
    const auto config = io::parse_config(nlohmann::json::parse(config_json.empty() ? "{}" : config_json), errors);
    if (!errors.empty()) throw py::value_error(format_errors(errors));
    return config;
}

py::tuple edit(const Array& image, const MaskArray& mask, const PointList& points, const std::string& mode,
               const std::string& config_json) {
    const auto outcome = run_edit(to_grid(image), to_mask(mask), to_drags(points, mode), to_config(config_json));
    return py::make_tuple(to_array(outcome.image), io::diagnostics_to_json(outcome).dump());
}

}  // namespace

PYBIND11_MODULE(_dragwarp, m) {
    m.doc() = "One-step drag editing: warpage field, relocation, hole filling and toy diffusion.";

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<GeometryError>(m, "GeometryError", PyExc_ValueError);

    m.def("reference_circle", [](const MaskArray& mask) {
        const auto points = build_mask_point_set(to_mask(mask));
        const auto& c = points.circle();
        return py::make_tuple(py::make_tuple(c.center.x, c.center.y), c.radius);
    }, py::arg("mask"), "Centre and radius of the mask's reference circle.");

    m.def("stretch_factor", [](std::pair<double, double> p, std::pair<double, double> handle,
                               std::pair<double, double> center, double radius) {
        return stretch_factor({p.first, p.second}, {handle.first, handle.second}, {{center.first, center.second}, radius});
    }, py::arg("p"), py::arg("handle"), py::arg("center"), py::arg("radius"));

    m.def("instruction_weights", [](std::pair<double, double> p, const PointList& points) {
        return instruction_weights({p.first, p.second}, to_drags(points, "stretch"));
    }, py::arg("p"), py::arg("instructions"));

    m.def("warpage_field", [](const MaskArray& mask, const PointList& points, const std::string& mode) {
        const auto field = compute_warpage_field(build_mask_point_set(to_mask(mask)), to_drags(points, mode));
        py::array_t<int> cells({static_cast<py::ssize_t>(field.size()), py::ssize_t{2}});
        Array vectors({static_cast<py::ssize_t>(field.size()), py::ssize_t{2}});
        for (std::size_t j = 0; j < field.size(); ++j) {
            cells.mutable_at(j, 0) = field.points[j].x;
            cells.mutable_at(j, 1) = field.points[j].y;
            vectors.mutable_at(j, 0) = field.vectors[j].x;
            vectors.mutable_at(j, 1) = field.vectors[j].y;
        }
        return py::make_tuple(cells, vectors);
    }, py::arg("mask"), py::arg("instructions"), py::arg("mode") = "stretch",
       "Mask cells (m, 2) as (x, y) and their warpage vectors (m, 2).");

    m.def("relocate", [](const Array& grid, const MaskArray& mask, const PointList& points, const std::string& mode) {
        const auto mask_points = build_mask_point_set(to_mask(mask));
        const auto drags = to_drags(points, mode);
        const auto result = relocate(to_grid(grid), mask_points, compute_warpage_field(mask_points, drags));
        return py::make_tuple(to_array(result.grid), result.counters.written, result.counters.dropped_out_of_bounds,
                              result.counters.dropped_occupied);
    }, py::arg("grid"), py::arg("mask"), py::arg("instructions"), py::arg("mode") = "stretch",
       "Relocated grid (NaN marks null cells) and written/dropped counters.");

    m.def("fill_nulls", [](const Array& relocated, const Array& original, const std::string& strategy, std::uint64_t seed) {
        const auto fill = parse_null_fill(strategy);
        if (!fill) throw py::value_error("strategy must be bnni, original, zero or random");
        RelocationResult r;
        r.grid = to_grid(relocated);
        for (int y = 0; y < r.grid.height(); ++y) {
            for (int x = 0; x < r.grid.width(); ++x) {
                const auto v = r.grid.at(x, y);
                if (std::isnan(v[0])) {
                    r.grid.set_null(x, y);
                    r.null_region.push_back({x, y});
                }
            }
        }
        return to_array(interpolate_grid(r, to_grid(original), *fill, seed));
    }, py::arg("relocated"), py::arg("original"), py::arg("strategy") = "bnni", py::arg("seed") = 0,
       "Fill NaN cells of a relocated grid.");

    m.def("edit", &edit, py::arg("image"), py::arg("mask"), py::arg("instructions"), py::arg("mode") = "stretch",
          py::arg("config_json") = "{}", "Run one drag edit; returns (image, diagnostics JSON).");

    m.def("reconstruct", [](const Array& image, const std::string& config_json) {
        const auto grid = to_grid(image);
        return to_array(reconstruct(grid, to_config(config_json), default_predictor(grid.channels())));
    }, py::arg("image"), py::arg("config_json") = "{}");

    m.def("drag_fidelity", [](const Array& output, std::pair<double, double> target, const Array& templ) {
        DragSet drags;
        drags.instructions.push_back({{target.first, target.second}, {target.first, target.second}});
        return drag_fidelity(to_grid(output), drags, to_grid(templ));
    }, py::arg("output"), py::arg("target"), py::arg("template"));

    m.def("load_image", [](const std::string& path) { return to_array(io::load_image(path)); }, py::arg("path"));
    m.def("save_image", [](const Array& image, const std::string& path) { io::save_image(to_grid(image), path); },
          py::arg("image"), py::arg("path"));
    m.def("normalize_drag_spec", [](const std::string& text) {
        try {
            return io::serialize_drag_spec(io::parse_drag_spec(text));
        } catch (const io::SpecError& e) {
            throw py::value_error(e.what());
        }
    }, py::arg("text"), "Parse, validate and re-serialize a drag spec with defaults applied.");
    m.def("weights_checksum", [] { return weights_checksum(default_predictor_weights()); });
}
