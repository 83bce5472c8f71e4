#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>

#include <json.hpp>

#include "karyoseg/error.h"
#include "karyoseg/session.h"

namespace httplib {
class Server;
}

namespace karyoseg {

/// HTTP status for an error code: 400 malformed input, 404 unknown ids,
/// 409 out-of-order requests, 422 well-formed input the pipeline rejects,
/// 500 storage failures.
int http_status(ErrorCode code);

/// The structured `{code, message}` payload.
nlohmann::json error_json(ErrorCode code, const std::string& message);

/// Data directory from KARYOSEG_DATA, else "karyoseg-data" in the working directory.
std::filesystem::path default_data_dir();

/// JSON API over a SessionStore. Sessions are independent; mutations within
/// a session are serialized and reads share a lock.
///
///   GET  /sessions
///   POST /sessions                                 multipart "image" [+ "config"], or raw image body
///   GET  /sessions/{id}
///   GET  /sessions/{id}/source
///   GET  /sessions/{id}/crops/{cid}/image
///   POST /sessions/{id}/crops/{cid}/seeds          SeedSet JSON -> label raster + region stats
///   GET  /sessions/{id}/crops/{cid}/labels         label raster PNG (pixel value = label)
///   POST /sessions/{id}/crops/{cid}/separate       {"method": 1|2, "above_label": k} (both optional)
///   GET  /sessions/{id}/separated/{uid}/image
///   POST /sessions/{id}/scores                     ScoreMatrix JSON, or {"provider": "toy"}
///   POST /sessions/{id}/distribute
///   GET  /sessions/{id}/karyogram                  layout JSON
///   GET  /sessions/{id}/karyogram.png
class Service {
public:
    explicit Service(std::filesystem::path data_dir);

    SessionStore& store() { return store_; }
    void install(httplib::Server& server);

private:
    std::shared_ptr<std::shared_mutex> lock_for(const std::string& id);

    SessionStore store_;
    std::mutex create_mutex_;
    std::mutex locks_mutex_;
    std::map<std::string, std::shared_ptr<std::shared_mutex>> locks_;
};

}  // namespace karyoseg
