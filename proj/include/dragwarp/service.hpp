#pragma once

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "dragwarp/core.hpp"

namespace httplib {
class Server;
}

namespace dragwarp::service {

inline constexpr const char* kVersion = "0.1.0";

enum class JobState { queued, running, done, failed };
std::string to_string(JobState state);

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

struct ServiceOptions {
    std::size_t workers = 2;
    /// Jobs and uploaded images are mirrored here and reloaded on start.
    std::optional<std::filesystem::path> persist_dir;
    /// Largest image (in pixels) that a "sync": true request runs inline.
    std::size_t sync_max_pixels = 256 * 256;
    /// Reported by /api/health.
    std::string weights_checksum;
};

/// Image store, job store and worker pool behind the HTTP API. Handlers take
/// and return JSON so they can be exercised without a socket.
class EditService {
public:
    explicit EditService(ServiceOptions options);
    ~EditService();
    EditService(const EditService&) = delete;
    EditService& operator=(const EditService&) = delete;

    /// POST /api/images  {"image": <base64 PNG or PPM>}  -> 201 {"id"}
    ApiResponse upload_image(const nlohmann::json& body);
    /// POST /api/edits  {imageId, maskPng, instructions, mode?, config?, sync?, jobId?}
    ApiResponse submit_edit(const nlohmann::json& body);
    /// GET /api/edits/{id}
    ApiResponse get_edit(const std::string& id) const;
    /// GET /api/health
    ApiResponse health() const;

    /// Blocks until no job is queued or running.
    void wait_idle();

private:
    struct Job {
        std::string id;
        JobState state = JobState::queued;
        nlohmann::json request;
        nlohmann::json result;
        std::vector<FieldError> errors;
    };
    struct Work;

    nlohmann::json job_to_json(const Job& job) const;
    void worker_loop();
    void run_job(const std::shared_ptr<Work>& work);
    void persist_job(const Job& job) const;
    void load_persisted();

    ServiceOptions options_;
    mutable std::mutex mutex_;
    std::condition_variable queue_cv_;
    std::condition_variable idle_cv_;
    std::map<std::string, std::vector<std::uint8_t>> images_;
    std::map<std::string, Job> jobs_;
    std::deque<std::shared_ptr<Work>> queue_;
    std::size_t active_ = 0;
    std::uint64_t next_image_ = 1;
    std::uint64_t next_job_ = 1;
    bool stopping_ = false;
    std::vector<std::thread> workers_;
};

/// Registers the /api routes (plus permissive CORS headers for the editor UI).
void mount_routes(httplib::Server& server, EditService& service);

}  // namespace dragwarp::service
