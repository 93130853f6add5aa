#include "dragwarp/service.hpp"

#include <httplib.h>

#include <cstdio>
#include <fstream>
#include <iterator>

#include "dragwarp/io.hpp"
#include "dragwarp/pipeline.hpp"

namespace dragwarp::service {

using nlohmann::json;

std::string to_string(JobState state) {
    switch (state) {
        case JobState::queued: return "queued";
        case JobState::running: return "running";
        case JobState::done: return "done";
        case JobState::failed: return "failed";
    }
    return "failed";
}

namespace {

std::optional<JobState> parse_state(const std::string& s) {
    for (auto state : {JobState::queued, JobState::running, JobState::done, JobState::failed}) {
        if (to_string(state) == s) return state;
    }
    return std::nullopt;
}

json errors_to_json(const std::vector<FieldError>& errors) {
    json out = json::array();
    for (const auto& e : errors) out.push_back({{"field", e.field}, {"message", e.message}});
    return out;
}

ApiResponse bad_request(std::vector<FieldError> errors) { return {400, {{"errors", errors_to_json(errors)}}}; }

ApiResponse not_found(const std::string& what) { return {404, {{"errors", errors_to_json({{"id", what + " not found"}})}}}; }

std::string make_id(const char* prefix, std::uint64_t n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s-%06llu", prefix, static_cast<unsigned long long>(n));
    return buf;
}

bool valid_id(const std::string& id) {
    return !id.empty() && id.size() <= 64 &&
           std::all_of(id.begin(), id.end(), [](unsigned char c) { return std::isalnum(c) || c == '-' || c == '_'; });
}

}  // namespace

struct EditService::Work {
    std::string job_id;
    LatentGrid image;
    MaskBitmap mask;
    DragSet drags;
    EditConfig config;
};

EditService::EditService(ServiceOptions options) : options_(std::move(options)) {
    if (options_.persist_dir) {
        std::filesystem::create_directories(*options_.persist_dir / "images");
        load_persisted();
    }
    const auto n = std::max<std::size_t>(1, options_.workers);
    for (std::size_t i = 0; i < n; ++i) workers_.emplace_back([this] { worker_loop(); });
}

EditService::~EditService() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
    }
    queue_cv_.notify_all();
    for (auto& w : workers_) w.join();
}

ApiResponse EditService::upload_image(const json& body) {
    if (!body.is_object() || !body.contains("image") || !body["image"].is_string()) {
        return bad_request({{"image", "expected base64-encoded PNG or PPM"}});
    }
    std::vector<FieldError> errors;
    for (const auto& [key, _] : body.items()) {
        if (key != "image") errors.push_back({key, "unknown field"});
    }
    if (!errors.empty()) return bad_request(std::move(errors));

    std::vector<std::uint8_t> bytes;
    try {
        bytes = io::base64_decode(body["image"].get<std::string>());
        io::decode_image(bytes);
    } catch (const std::exception& e) {
        return bad_request({{"image", e.what()}});
    }

    std::string id;
    {
        std::lock_guard lock(mutex_);
        id = make_id("img", next_image_++);
        images_[id] = bytes;
    }
    if (options_.persist_dir) {
        std::ofstream out(*options_.persist_dir / "images" / (id + ".bin"), std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    return {201, {{"id", id}}};
}

ApiResponse EditService::submit_edit(const json& body) {
    if (!body.is_object()) return bad_request({{"$", "expected a JSON object"}});

    std::vector<FieldError> errors;
    for (const auto& [key, _] : body.items()) {
        static const char* kKnown[] = {"imageId", "maskPng", "instructions", "mode", "config", "sync", "jobId"};
        if (std::none_of(std::begin(kKnown), std::end(kKnown), [&](const char* k) { return key == k; })) {
            errors.push_back({key, "unknown field"});
        }
    }

    auto work = std::make_shared<Work>();
    std::string image_id;
    if (!body.contains("imageId") || !body["imageId"].is_string()) {
        errors.push_back({"imageId", "expected an image id string"});
    } else {
        image_id = body["imageId"].get<std::string>();
    }
    if (!body.contains("maskPng") || !body["maskPng"].is_string()) {
        errors.push_back({"maskPng", "expected base64-encoded PNG"});
    } else {
        try {
            work->mask = io::decode_mask(io::base64_decode(body["maskPng"].get<std::string>()));
        } catch (const std::exception& e) {
            errors.push_back({"maskPng", e.what()});
        }
    }
    if (!body.contains("instructions")) {
        errors.push_back({"instructions", "missing"});
    } else {
        work->drags.instructions = io::parse_instructions(body["instructions"], errors);
    }
    if (body.contains("mode")) {
        const auto& m = body["mode"];
        if (auto mode = m.is_string() ? parse_drag_mode(m.get<std::string>()) : std::nullopt) {
            work->drags.mode = *mode;
        } else {
            errors.push_back({"mode", "expected one of stretch, move, replicate"});
        }
    }
    work->config = io::parse_config(body.contains("config") ? body["config"] : json(), errors);
    const bool sync = body.contains("sync") && body["sync"].is_boolean() && body["sync"].get<bool>();
    if (body.contains("sync") && !body["sync"].is_boolean()) errors.push_back({"sync", "expected a boolean"});

    std::optional<std::string> requested_id;
    if (body.contains("jobId")) {
        if (body["jobId"].is_string() && valid_id(body["jobId"].get<std::string>())) {
            requested_id = body["jobId"].get<std::string>();
        } else {
            errors.push_back({"jobId", "expected 1-64 characters from [A-Za-z0-9_-]"});
        }
    }
    if (!errors.empty()) return bad_request(std::move(errors));

    std::vector<std::uint8_t> image_bytes;
    {
        std::lock_guard lock(mutex_);
        const auto it = images_.find(image_id);
        if (it == images_.end()) return not_found("image " + image_id);
        image_bytes = it->second;
    }
    work->image = io::decode_image(image_bytes);
    if (auto problems = io::validate_loaded(work->image, work->mask, work->drags, work->config); !problems.empty()) {
        return bad_request(std::move(problems));
    }

    json request = body;
    request.erase("maskPng");
    request.erase("sync");

    const bool inline_run = sync && work->image.cell_count() <= options_.sync_max_pixels;
    {
        std::lock_guard lock(mutex_);
        std::string id;
        if (requested_id) {
            if (jobs_.count(*requested_id) != 0) {
                return {409, {{"id", *requested_id}, {"errors", errors_to_json({{"jobId", "job already exists"}})}}};
            }
            id = *requested_id;
        } else {
            do {
                id = make_id("job", next_job_++);
            } while (jobs_.count(id) != 0);
        }
        work->job_id = id;
        Job job;
        job.id = id;
        job.request = std::move(request);
        jobs_.emplace(id, std::move(job));
        if (!inline_run) {
            queue_.push_back(work);
        }
    }

    if (inline_run) {
        run_job(work);
        return {200, get_edit(work->job_id).body};
    }
    queue_cv_.notify_one();
    return {202, {{"id", work->job_id}, {"state", "queued"}}};
}

ApiResponse EditService::get_edit(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) return not_found("job " + id);
    return {200, job_to_json(it->second)};
}

ApiResponse EditService::health() const {
    return {200, {{"status", "ok"}, {"version", kVersion}, {"weightsChecksum", options_.weights_checksum}}};
}

void EditService::wait_idle() {
    std::unique_lock lock(mutex_);
    idle_cv_.wait(lock, [this] { return queue_.empty() && active_ == 0; });
}

json EditService::job_to_json(const Job& job) const {
    json out{{"id", job.id}, {"state", to_string(job.state)}, {"request", job.request}};
    if (job.state == JobState::done) out["result"] = job.result;
    if (job.state == JobState::failed) out["errors"] = errors_to_json(job.errors);
    return out;
}

void EditService::worker_loop() {
    for (;;) {
        std::shared_ptr<Work> work;
        {
            std::unique_lock lock(mutex_);
            queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
            if (stopping_ && queue_.empty()) return;
            work = queue_.front();
            queue_.pop_front();
            ++active_;
        }
        run_job(work);
        {
            std::lock_guard lock(mutex_);
            --active_;
        }
        idle_cv_.notify_all();
    }
}

void EditService::run_job(const std::shared_ptr<Work>& work) {
    {
        std::lock_guard lock(mutex_);
        jobs_.at(work->job_id).state = JobState::running;
    }
    json result;
    std::vector<FieldError> errors;
    try {
        const auto outcome = run_edit(work->image, work->mask, work->drags, work->config);
        result = {{"image", io::base64_encode(io::encode_png(outcome.image))},
                  {"diagnostics", io::diagnostics_to_json(outcome)}};
    } catch (const std::exception& e) {
        errors.push_back({"edit", e.what()});
    }

    Job snapshot;
    {
        std::lock_guard lock(mutex_);
        auto& job = jobs_.at(work->job_id);
        if (errors.empty()) {
            job.result = std::move(result);
            job.state = JobState::done;
        } else {
            job.errors = std::move(errors);
            job.state = JobState::failed;
        }
        snapshot = job;
    }
    persist_job(snapshot);
}

void EditService::persist_job(const Job& job) const {
    if (!options_.persist_dir) return;
    std::ofstream out(*options_.persist_dir / (job.id + ".json"));
    out << job_to_json(job).dump();
}

void EditService::load_persisted() {
    namespace fs = std::filesystem;
    const auto& dir = *options_.persist_dir;
    for (const auto& entry : fs::directory_iterator(dir / "images")) {
        if (entry.path().extension() != ".bin") continue;
        std::ifstream in(entry.path(), std::ios::binary);
        images_[entry.path().stem().string()] = {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
        ++next_image_;
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".json") continue;
        try {
            std::ifstream in(entry.path());
            const auto record = json::parse(in);
            Job job;
            job.id = record.at("id").get<std::string>();
            job.state = parse_state(record.at("state").get<std::string>()).value_or(JobState::failed);
            job.request = record.value("request", json::object());
            if (job.state == JobState::done) job.result = record.at("result");
            if (job.state == JobState::failed) {
                for (const auto& e : record.value("errors", json::array())) {
                    job.errors.push_back({e.value("field", ""), e.value("message", "")});
                }
            }
            jobs_[job.id] = std::move(job);
            ++next_job_;
        } catch (const std::exception& e) {
            std::fprintf(stderr, "skipping unreadable job record %s: %s\n", entry.path().c_str(), e.what());
        }
    }
}

void mount_routes(httplib::Server& server, EditService& service) {
    const auto reply = [](httplib::Response& res, const ApiResponse& api) {
        res.status = api.status;
        res.set_content(api.body.dump(), "application/json");
    };
    const auto parse_body = [](const httplib::Request& req, json& out) {
        try {
            out = json::parse(req.body);
            return true;
        } catch (const json::parse_error&) {
            return false;
        }
    };
    const auto malformed = ApiResponse{400, {{"errors", errors_to_json({{"$", "malformed JSON body"}})}}};

    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Post("/api/images", [&service, reply, parse_body, malformed](const httplib::Request& req, httplib::Response& res) {
        json body;
        reply(res, parse_body(req, body) ? service.upload_image(body) : malformed);
    });
    server.Post("/api/edits", [&service, reply, parse_body, malformed](const httplib::Request& req, httplib::Response& res) {
        json body;
        reply(res, parse_body(req, body) ? service.submit_edit(body) : malformed);
    });
    server.Get(R"(/api/edits/([A-Za-z0-9_-]+))", [&service, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, service.get_edit(req.matches[1]));
    });
    server.Get("/api/health", [&service, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, service.health());
    });
}

}  // namespace dragwarp::service
