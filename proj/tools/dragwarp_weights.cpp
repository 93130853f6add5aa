// Regenerates (or verifies) the golden toy-predictor weights file.

#include <CLI11.hpp>

#include <iostream>

#include "dragwarp/diffusion.hpp"

int main(int argc, char** argv) {
    using namespace dragwarp;

    CLI::App app{"Toy predictor weights"};
    std::string out_path;
    std::string check_path;
    int channels = kDefaultPredictorChannels;
    int embed_dim = kDefaultPredictorEmbedDim;
    std::uint64_t seed = kDefaultPredictorSeed;
    app.add_option("--out", out_path, "Write weights here");
    app.add_option("--check", check_path, "Compare an existing file with the regenerated weights");
    app.add_option("--channels", channels)->check(CLI::PositiveNumber);
    app.add_option("--embed-dim", embed_dim)->check(CLI::PositiveNumber);
    app.add_option("--seed", seed);
    CLI11_PARSE(app, argc, argv);

    const auto weights = generate_predictor_weights(channels, embed_dim, seed);
    std::cout << "checksum " << weights_checksum(weights) << '\n';
    if (!out_path.empty()) {
        save_weights(weights, out_path);
    }
    if (!check_path.empty()) {
        if (load_weights(check_path) != weights) {
            std::cerr << check_path << " differs from weights regenerated with seed " << seed << '\n';
            return 2;
        }
        std::cout << check_path << " matches\n";
    }
    return 0;
}
