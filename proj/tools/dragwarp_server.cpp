#include <CLI11.hpp>
#include <httplib.h>

#include <iostream>
#include <thread>

#include "dragwarp/diffusion.hpp"
#include "dragwarp/service.hpp"

int main(int argc, char** argv) {
    using namespace dragwarp;

    CLI::App app{"HTTP service for drag edits"};
    std::string host = "127.0.0.1";
    int port = 8080;
    std::size_t workers = std::max(1u, std::thread::hardware_concurrency());
    std::string persist;
    app.add_option("--host", host, "Bind address");
    app.add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
    app.add_option("--workers", workers, "Edit worker threads")->check(CLI::PositiveNumber);
    app.add_option("--persist", persist, "Directory for job and image persistence");
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    service::ServiceOptions options;
    options.workers = workers;
    options.weights_checksum = weights_checksum(default_predictor_weights());
    if (!persist.empty()) options.persist_dir = persist;

    service::EditService edits(options);
    httplib::Server server;
    service::mount_routes(server, edits);
    std::cerr << "listening on http://" << host << ":" << port << "/api\n";
    if (!server.listen(host, port)) {
        std::cerr << "failed to bind " << host << ":" << port << '\n';
        return 3;
    }
    return 0;
}
