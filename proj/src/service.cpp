#include "karyoseg/service.h"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <functional>

#include <httplib.h>

#include "karyoseg/image_io.h"

namespace fs = std::filesystem;

namespace karyoseg {

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument:
        case ErrorCode::Decode: return 400;
        case ErrorCode::NotFound: return 404;
        case ErrorCode::Conflict: return 409;
        case ErrorCode::DegenerateHistogram:
        case ErrorCode::DanglingIntersection:
        case ErrorCode::UnfillableGap:
        case ErrorCode::MissingScore:
        case ErrorCode::LayoutFailure: return 422;
        case ErrorCode::Io: return 500;
    }
    return 500;
}

nlohmann::json error_json(ErrorCode code, const std::string& message) {
    return {{"code", to_string(code)}, {"message", message}};
}

fs::path default_data_dir() {
    if (const char* env = std::getenv("KARYOSEG_DATA"); env != nullptr && *env != '\0') return env;
    return "karyoseg-data";
}

namespace {

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

void send_json(httplib::Response& res, const nlohmann::json& j, int status = 200) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
    send_json(res, error_json(code, message), http_status(code));
}

void send_png(httplib::Response& res, const fs::path& file) {
    if (!fs::is_regular_file(file)) fail(ErrorCode::NotFound, "no such image: " + file.filename().string());
    const auto bytes = read_file(file);
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
}

/// Turns every failure into a structured error response.
Handler guarded(Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
        try {
            h(req, res);
        } catch (const Error& e) {
            send_error(res, e.code(), e.what());
        } catch (const nlohmann::json::exception& e) {
            send_error(res, ErrorCode::InvalidArgument, std::string("malformed JSON: ") + e.what());
        } catch (const fs::filesystem_error& e) {
            send_error(res, ErrorCode::Io, e.what());
        } catch (const std::exception& e) {
            send_error(res, ErrorCode::Io, e.what());
        }
    };
}

nlohmann::json parse_json(const std::string& text, const char* what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorCode::InvalidArgument, std::string(what) + " is not JSON: " + e.what());
    }
}

nlohmann::json parse_body(const httplib::Request& req, bool allow_empty = false) {
    if (req.body.empty() && allow_empty) return nlohmann::json::object();
    return parse_json(req.body, "request body");
}

const std::string& param(const httplib::Request& req, const char* name) { return req.path_params.at(name); }

bool safe_component(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    });
}

}  // namespace

Service::Service(fs::path data_dir) : store_(std::move(data_dir)) {}

std::shared_ptr<std::shared_mutex> Service::lock_for(const std::string& id) {
    std::lock_guard guard(locks_mutex_);
    auto& slot = locks_[id];
    if (!slot) slot = std::make_shared<std::shared_mutex>();
    return slot;
}

void Service::install(httplib::Server& server) {
    // Runs `f` on the opened session under a shared (read) or exclusive (write) lock.
    auto reading = [this](auto f) {
        return guarded([this, f](const httplib::Request& req, httplib::Response& res) {
            const auto& id = param(req, "id");
            auto lock = lock_for(id);
            std::shared_lock guard(*lock);
            auto s = store_.open(id);
            f(s, req, res);
        });
    };
    auto writing = [this](auto f) {
        return guarded([this, f](const httplib::Request& req, httplib::Response& res) {
            const auto& id = param(req, "id");
            auto lock = lock_for(id);
            std::unique_lock guard(*lock);
            auto s = store_.open(id);
            f(s, req, res);
        });
    };

    server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
                   send_json(res, {{"sessions", store_.list()}});
               }));

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    std::string image;
                    PipelineConfig config;
                    if (req.is_multipart_form_data()) {
                        if (!req.has_file("image")) fail(ErrorCode::InvalidArgument, "multipart field 'image' is required");
                        image = req.get_file_value("image").content;
                        if (req.has_file("config"))
                            config = parse_json(req.get_file_value("config").content, "config").get<PipelineConfig>();
                    } else {
                        image = req.body;
                    }
                    if (image.empty()) fail(ErrorCode::InvalidArgument, "no image in request");
                    const std::span bytes(reinterpret_cast<const std::uint8_t*>(image.data()), image.size());
                    std::lock_guard guard(create_mutex_);
                    auto s = store_.create(bytes, config);
                    send_json(res, s.summary(), 201);
                }));

    server.Get("/sessions/:id", reading([](Session& s, const httplib::Request&, httplib::Response& res) {
                   send_json(res, s.summary());
               }));

    server.Get("/sessions/:id/source", reading([](Session& s, const httplib::Request&, httplib::Response& res) {
                   send_png(res, s.dir() / "source.png");
               }));

    server.Get("/sessions/:id/crops/:cid/image",
               reading([](Session& s, const httplib::Request& req, httplib::Response& res) {
                   const auto& cid = s.crop(param(req, "cid")).crop.id;
                   send_png(res, s.dir() / "crops" / (cid + ".png"));
               }));

    server.Post("/sessions/:id/crops/:cid/seeds",
                writing([](Session& s, const httplib::Request& req, httplib::Response& res) {
                    const auto seeds = parse_body(req).get<SeedSet>();
                    auto preview = s.set_seeds(param(req, "cid"), seeds);
                    auto j = preview.stats;
                    const auto px = preview.map.labels.data();
                    j["labels"] = std::vector<int>(px.begin(), px.end());
                    j["labels_url"] = "/sessions/" + s.id() + "/crops/" + param(req, "cid") + "/labels";
                    send_json(res, j);
                }));

    server.Get("/sessions/:id/crops/:cid/labels",
               reading([](Session& s, const httplib::Request& req, httplib::Response& res) {
                   const auto& cid = s.crop(param(req, "cid")).crop.id;
                   send_png(res, s.dir() / "seeds" / (cid + "_labels.png"));
               }));

    server.Post("/sessions/:id/crops/:cid/separate",
                writing([](Session& s, const httplib::Request& req, httplib::Response& res) {
                    const auto body = parse_body(req, true);
                    std::optional<int> method, above;
                    for (const auto& [key, v] : body.items()) {
                        if (key == "method") method = v.get<int>();
                        else if (key == "above_label") {
                            if (!v.is_null()) above = v.get<int>();
                        } else
                            fail(ErrorCode::InvalidArgument, "unknown separation option: " + key);
                    }
                    const auto& cid = param(req, "cid");
                    const auto out = s.separate(cid, method, above);
                    nlohmann::json list = nlohmann::json::array();
                    for (const auto& sep : out) {
                        const auto uid = cid + "_" + std::to_string(sep.label);
                        auto j = provenance_json(sep);
                        j["id"] = uid;
                        j["image_url"] = "/sessions/" + s.id() + "/separated/" + uid + "/image";
                        list.push_back(j);
                    }
                    send_json(res, {{"crop", cid}, {"chromosomes", list}});
                }));

    server.Get("/sessions/:id/separated/:uid/image",
               reading([](Session& s, const httplib::Request& req, httplib::Response& res) {
                   const auto& uid = param(req, "uid");
                   if (!safe_component(uid)) fail(ErrorCode::NotFound, "unknown separated chromosome " + uid);
                   send_png(res, s.dir() / "separated" / (uid + ".png"));
               }));

    server.Post("/sessions/:id/scores", writing([](Session& s, const httplib::Request& req, httplib::Response& res) {
                    const auto body = parse_body(req);
                    Assignment a;
                    if (body.is_object() && body.contains("provider")) {
                        const auto name = body.at("provider").get<std::string>();
                        if (name != "toy") fail(ErrorCode::InvalidArgument, "unknown score provider: " + name);
                        a = s.score_with(ToyScoreProvider(s.config().classes));
                    } else {
                        a = s.set_scores(body.get<ScoreMatrix>());
                    }
                    send_json(res, {{"assignment", assignment_json(a)},
                                    {"counts", class_counts(a, s.config().classes)}});
                }));

    server.Post("/sessions/:id/distribute",
                writing([](Session& s, const httplib::Request&, httplib::Response& res) {
                    const auto d = s.distribute();
                    send_json(res, {{"assignment", assignment_json(d.assignment)},
                                    {"report", distribution_report(d)},
                                    {"counts", class_counts(d.assignment, s.config().classes)}});
                }));

    // Rendering writes karyogram.json/png, so it takes the exclusive lock.
    server.Get("/sessions/:id/karyogram", writing([](Session& s, const httplib::Request&, httplib::Response& res) {
                   auto j = s.karyogram();
                   j["image_url"] = "/sessions/" + s.id() + "/karyogram.png";
                   send_json(res, j);
               }));

    server.Get("/sessions/:id/karyogram.png",
               reading([](Session& s, const httplib::Request&, httplib::Response& res) {
                   const auto png = encode_png(s.karyogram_image());
                   res.set_content(std::string(png.begin(), png.end()), "image/png");
               }));
}

}  // namespace karyoseg
