#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dragwarp/io.hpp"
#include "dragwarp/synthetic.hpp"

using namespace dragwarp;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
    const auto dir = fs::temp_directory_path() / "dragwarp_test_io";
    fs::create_directories(dir);
    return dir;
}

bool has_field(const io::SpecError& e, const std::string& field) {
    for (const auto& err : e.errors()) {
        if (err.field == field) return true;
    }
    return false;
}

io::SpecError spec_error(const std::string& text) {
    try {
        io::parse_drag_spec(text);
    } catch (const io::SpecError& e) {
        return e;
    }
    FAIL("expected a spec error");
    return io::SpecError({});
}

LatentGrid quantized(int w, int h, int c, std::uint64_t seed) {
    auto g = synthetic::random_grid(w, h, c, seed);
    for (auto& v : g.data()) v = io::quantize(v) / 255.0;
    return g;
}

}  // namespace

TEST_CASE("base64 test vectors") {
    const std::string plain = "foobar";
    for (std::size_t n = 0; n <= plain.size(); ++n) {
        const std::vector<std::uint8_t> bytes(plain.begin(), plain.begin() + n);
        const auto enc = io::base64_encode(bytes);
        static const char* expected[] = {"", "Zg==", "Zm8=", "Zm9v", "Zm9vYg==", "Zm9vYmE=", "Zm9vYmFy"};
        CHECK(enc == expected[n]);
        CHECK(io::base64_decode(enc) == bytes);
    }
    CHECK_THROWS_AS(io::base64_decode("Zm9v!"), std::invalid_argument);
}

TEST_CASE("quantization rounds and clamps") {
    CHECK(io::quantize(-0.2) == 0);
    CHECK(io::quantize(1.7) == 255);
    CHECK(io::quantize(0.5) == 128);
    CHECK(io::quantize(100.0 / 255.0) == 100);
}

TEST_CASE("PNG and PPM round trips are exact on 8-bit values") {
    const auto image = quantized(13, 7, 3, 1);
    const auto dir = scratch_dir();
    for (const char* name : {"rt.png", "rt.ppm"}) {
        io::save_image(image, dir / name);
        CHECK(io::load_image(dir / name) == image);
    }
    CHECK(io::decode_image(io::encode_png(image)) == image);
    CHECK_THROWS_AS(io::decode_image(std::vector<std::uint8_t>{1, 2, 3, 4}), io::ImageFormatError);
}

TEST_CASE("mask PNG thresholds at 128") {
    LatentGrid gray(4, 1, 1);
    gray.at(0, 0, 0) = 127.0 / 255;
    gray.at(1, 0, 0) = 128.0 / 255;
    gray.at(2, 0, 0) = 1.0;
    const auto mask = io::decode_mask(io::encode_png(gray));
    CHECK(mask.cells == std::vector<std::uint8_t>{0, 1, 1, 0});

    const auto painted = synthetic::rect_mask(9, 6, 2, 1, 5, 4);
    CHECK(io::decode_mask(io::encode_mask_png(painted)).cells == painted.cells);
}

TEST_CASE("mask RLE round trip") {
    std::mt19937 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        MaskBitmap mask(1 + trial % 9, 1 + trial % 7);
        for (auto& c : mask.cells) c = rng() % 3 == 0;
        const auto rle = io::to_rle(mask);
        CHECK(io::from_rle(rle).cells == mask.cells);
    }
    const auto rle = io::to_rle(synthetic::rect_mask(4, 2, 1, 0, 2, 0));
    CHECK(rle.runs == std::vector<std::uint32_t>{1, 2, 5});
    CHECK_THROWS_AS(io::from_rle({2, 2, {1, 1}}), ValidationError);
}

TEST_CASE("drag spec parse, defaults and round trip") {
    const auto doc = io::parse_drag_spec(R"({
        "image": "scene.png", "mask": "mask.png",
        "instructions": [{"handle": [10, 12], "target": [20.5, 12]}],
        "config": {"inversionSteps": 20, "optimizeStep": 14, "nullFill": "zero", "backend": "toy-latent"}
    })");
    CHECK(doc.image == "scene.png");
    CHECK(std::get<std::string>(doc.mask) == "mask.png");
    CHECK(doc.mode == DragMode::stretch);
    CHECK(doc.instructions[0].target == Vec2{20.5, 12});
    CHECK(doc.config.inversion_steps == 20);
    CHECK(doc.config.null_fill == NullFill::zero);
    CHECK(doc.config.backend == Backend::toy_latent);
    CHECK(doc.config.object_move_radius == 2);
    CHECK(io::parse_drag_spec(io::serialize_drag_spec(doc)) == doc);

    const auto rle_doc = io::parse_drag_spec(R"({
        "image": "a.ppm", "mask": {"width": 3, "height": 1, "runs": [1, 2]}, "mode": "move",
        "instructions": [{"handle": [1, 0], "target": [2, 0]}]
    })");
    CHECK(std::get<io::MaskRle>(rle_doc.mask).runs == std::vector<std::uint32_t>{1, 2});
    CHECK(rle_doc.mode == DragMode::object_move);
    CHECK(io::parse_drag_spec(io::serialize_drag_spec(rle_doc)) == rle_doc);
}

TEST_CASE("drag spec errors carry locators") {
    CHECK(has_field(spec_error("[1]"), "$"));
    CHECK(has_field(spec_error("{not json"), "$"));
    const auto e = spec_error(R"({
        "image": "a.png", "mask": "m.png", "extra": 1,
        "instructions": [{"handle": [1, 1], "target": [2, 2]}, {"handle": [1], "target": [2, 2], "weight": 3}],
        "config": {"sigma": "big", "nullFill": "median", "optimizeStep": 40}
    })");
    CHECK(has_field(e, "extra"));
    CHECK(has_field(e, "instructions[1].handle"));
    CHECK(has_field(e, "instructions[1].weight"));
    CHECK(has_field(e, "config.sigma"));
    CHECK(has_field(e, "config.nullFill"));
    CHECK(has_field(e, "config.optimizeStep"));
    CHECK(has_field(spec_error(R"({"image": "a.png", "mask": "m.png", "instructions": []})"), "instructions"));
}

TEST_CASE("load_edit resolves paths and validates") {
    const auto dir = scratch_dir();
    io::save_image(synthetic::blob_scene(32, 32, 3, {{16, 16}}), dir / "scene.png");
    io::save_image(LatentGrid(32, 32, 1, 0.0), dir / "empty_mask.png");
    std::ofstream(dir / "mask.png", std::ios::binary) << [] {
        const auto bytes = io::encode_mask_png(synthetic::rect_mask(32, 32, 8, 8, 24, 24));
        return std::string(bytes.begin(), bytes.end());
    }();

    auto doc = io::parse_drag_spec(
        R"({"image": "scene.png", "mask": "mask.png", "instructions": [{"handle": [16, 16], "target": [20, 16]}]})");
    const auto edit = io::load_edit(doc, dir);
    CHECK(edit.image.width() == 32);
    CHECK(edit.mask.count() == 17 * 17);

    doc.mask = std::string("empty_mask.png");
    try {
        io::load_edit(doc, dir);
        FAIL("expected a spec error");
    } catch (const io::SpecError& e) {
        CHECK(e.errors().front().field == "mask");
        CHECK(e.errors().front().message == "mask is empty");
    }
    doc.mask = std::string("missing.png");
    CHECK_THROWS_AS(io::load_edit(doc, dir), io::SpecError);
}

TEST_CASE("diagnostics record and warpage table") {
    const auto image = synthetic::random_grid(16, 16, 3, 2);
    const auto mask = synthetic::rect_mask(16, 16, 4, 4, 11, 11);
    const DragSet drags{{{{7, 7}, {9, 8}}}, DragMode::stretch};
    const auto outcome = run_edit(image, mask, drags, EditConfig{});
    const auto diag = io::diagnostics_to_json(outcome);
    CHECK(diag["warpPasses"] == 1);
    CHECK(diag["maskPoints"] == 64);
    CHECK(diag["backend"] == "pixel");
    CHECK(diag["timingsMs"]["total"].get<double>() >= 0.0);
    CHECK(diag["config"]["optimizeStep"] == 7);

    std::ostringstream table;
    io::write_warpage_table(table, compute_warpage_field(build_mask_point_set(mask), drags));
    std::istringstream lines(table.str());
    std::string header;
    std::getline(lines, header);
    CHECK(header == "x y vx vy w1 lambda1");
    int rows = 0;
    for (std::string line; std::getline(lines, line);) ++rows;
    CHECK(rows == 64);
}
