// Batch drag edit from a JSON spec.
//
// Exit codes: 0 success, 1 usage, 2 validation, 3 runtime failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "dragwarp/io.hpp"
#include "dragwarp/pipeline.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
    using namespace dragwarp;

    CLI::App app{"Drag-based image editing with a one-step latent warp"};
    std::string spec_path;
    std::string out_path;
    std::string backend_name;
    std::string diag_path;
    std::string table_path;
    std::uint64_t seed = 0;

    app.add_option("--spec", spec_path, "Drag spec JSON")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out_path, "Output image (.png or .ppm)")->required();
    auto* backend_opt = app.add_option("--backend", backend_name, "pixel | toy-latent (overrides the spec)")
                            ->check(CLI::IsMember({"pixel", "toy-latent"}));
    app.add_option("--diag", diag_path, "Write the diagnostics record (JSON) here");
    auto* seed_opt = app.add_option("--seed", seed, "Seed for random fills and sampling noise (overrides the spec)");
    app.add_option("--warpage-table", table_path, "Write the per-point warpage table here (pixel backend)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    io::LoadedEdit edit;
    try {
        std::ifstream in(spec_path);
        std::stringstream text;
        text << in.rdbuf();
        auto doc = io::parse_drag_spec(text.str());
        if (*backend_opt) doc.config.backend = *parse_backend(backend_name);
        if (*seed_opt) doc.config.seed = seed;
        edit = io::load_edit(doc, std::filesystem::path(spec_path).parent_path());
    } catch (const io::SpecError& e) {
        std::cerr << "invalid spec:\n";
        for (const auto& err : e.errors()) std::cerr << "  " << err.field << ": " << err.message << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }

    try {
        const auto outcome = run_edit(edit.image, edit.mask, edit.drags, edit.config);
        io::save_image(outcome.image, out_path);
        if (!diag_path.empty()) {
            std::ofstream diag(diag_path);
            diag << io::diagnostics_to_json(outcome).dump(2) << '\n';
        }
        if (!table_path.empty()) {
            const auto field = compute_warpage_field(build_mask_point_set(edit.mask), edit.drags);
            std::ofstream table(table_path);
            io::write_warpage_table(table, field);
        }
    } catch (const ValidationError& e) {
        std::cerr << "invalid request: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
