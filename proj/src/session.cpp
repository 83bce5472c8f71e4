#include "karyoseg/session.h"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "karyoseg/geometry.h"
#include "karyoseg/image_io.h"
#include "karyoseg/imgcore.h"

namespace fs = std::filesystem;

namespace karyoseg {

std::string_view to_string(CropStatus s) {
    switch (s) {
        case CropStatus::Pending: return "pending";
        case CropStatus::Seeded: return "seeded";
        case CropStatus::Separated: return "separated";
        case CropStatus::Classified: return "classified";
    }
    return "pending";
}

CropStatus crop_status_from_string(std::string_view s) {
    if (s == "pending") return CropStatus::Pending;
    if (s == "seeded") return CropStatus::Seeded;
    if (s == "separated") return CropStatus::Separated;
    if (s == "classified") return CropStatus::Classified;
    fail(ErrorCode::InvalidArgument, "unknown crop status: " + std::string(s));
}

namespace {

nlohmann::json rect_json(const RotatedRect& r) {
    return {{"center", {r.center.x, r.center.y}}, {"width", r.width}, {"height", r.height}, {"angle", r.angle}};
}

RotatedRect rect_from_json(const nlohmann::json& j) {
    RotatedRect r;
    r.center = {j.at("center")[0].get<double>(), j.at("center")[1].get<double>()};
    r.width = j.at("width").get<double>();
    r.height = j.at("height").get<double>();
    r.angle = j.at("angle").get<double>();
    return r;
}

nlohmann::json read_json(const fs::path& p) {
    const auto bytes = read_file(p);
    try {
        return nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Io, "malformed JSON in " + p.string() + ": " + e.what());
    }
}

void write_json(const fs::path& p, const nlohmann::json& j) { write_text(p, j.dump(2) + "\n"); }

GrayImage gray_from_mask(const BinaryMask& m) { return mask_to_gray(m); }

BinaryMask mask_from_gray(const GrayImage& g) {
    BinaryMask m(g.width(), g.height());
    for (std::size_t i = 0; i < g.size(); ++i) m.data()[i] = g.data()[i] >= 128 ? 1 : 0;
    return m;
}

RotatedRect mask_rect(const BinaryMask& mask, Point offset) {
    std::vector<Point> pts;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.test(x, y)) pts.push_back({x + offset.x, y + offset.y});
    if (pts.empty()) return {};
    return min_area_rect(pts);
}

std::string unit_id(const std::string& cid, int label) { return cid + "_" + std::to_string(label); }

void remove_if_present(const fs::path& p) {
    std::error_code ec;
    fs::remove(p, ec);
}

}  // namespace

std::string session_id_for(std::span<const std::uint8_t> image_bytes, const PipelineConfig& config) {
    // 64-bit FNV-1a over the image bytes followed by the canonical config JSON.
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&](std::uint8_t b) {
        h ^= b;
        h *= 1099511628211ULL;
    };
    for (auto b : image_bytes) mix(b);
    for (char c : nlohmann::json(config).dump()) mix(static_cast<std::uint8_t>(c));
    char buf[20];
    std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Session Session::create(const fs::path& dir, const GrayImage& source, const PipelineConfig& config,
                        const std::string& id) {
    config.validate();
    require(!fs::exists(dir), "session directory already exists: " + dir.string());
    Session s;
    s.id_ = id;
    s.config_ = config;

    auto extraction = extract_objects(source, config);
    s.threshold_ = extraction.threshold;
    s.warning_ = extraction.warning;
    for (auto& crop : extraction.crops) {
        auto analysis = analyze_crop(crop, config);
        crop.kind = analysis.kind;
        s.crops_.push_back({std::move(crop), CropStatus::Pending, std::move(analysis.branch_points), {}});
    }

    // Build next to the target and rename into place so a failure leaves nothing.
    const fs::path staging = dir.parent_path() / ("." + dir.filename().string() + ".staging");
    fs::remove_all(staging);
    try {
        s.dir_ = staging;
        for (const char* sub : {"crops", "seeds", "separated"}) fs::create_directories(staging / sub);
        write_png(s.path("source.png"), source);
        write_png(s.path("edges.png"),
                  mask_to_gray(canny_edges(source, config.canny_aperture, config.canny_low, config.canny_high)));
        for (const auto& e : s.crops_) {
            const auto& c = e.crop;
            write_png(s.path("crops/" + c.id + ".png"), c.image);
            write_png(s.path("crops/" + c.id + "_mask.png"), gray_from_mask(c.mask));
            write_json(s.path("crops/" + c.id + ".json"),
                       {{"offset", {c.offset.x, c.offset.y}}, {"bbox", rect_json(c.bbox)}, {"kind", to_string(c.kind)}});
        }
        s.save();
        fs::rename(staging, dir);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(staging, ec);
        throw;
    }
    s.dir_ = dir;
    return s;
}

void Session::save() const {
    nlohmann::json crops = nlohmann::json::array();
    for (const auto& e : crops_) {
        nlohmann::json bps = nlohmann::json::array();
        for (const auto& b : e.branch_points)
            bps.push_back({{"x", b.position.x}, {"y", b.position.y}, {"crossing_number", b.crossing_number}});
        crops.push_back({{"id", e.crop.id},
                         {"kind", to_string(e.crop.kind)},
                         {"status", to_string(e.status)},
                         {"offset", {e.crop.offset.x, e.crop.offset.y}},
                         {"size", {e.crop.image.width(), e.crop.image.height()}},
                         {"bbox", rect_json(e.crop.bbox)},
                         {"branch_points", bps},
                         {"separated", e.separated_labels}});
    }
    write_json(path("session.json"), {{"id", id_},
                                      {"config", config_},
                                      {"threshold", threshold_},
                                      {"warning", warning_ ? nlohmann::json(*warning_) : nlohmann::json(nullptr)},
                                      {"crops", crops}});
}

Session Session::open(const fs::path& dir) {
    if (!fs::is_regular_file(dir / "session.json")) fail(ErrorCode::NotFound, "no session at " + dir.string());
    const auto j = read_json(dir / "session.json");
    Session s;
    s.dir_ = dir;
    s.id_ = j.at("id").get<std::string>();
    s.config_ = j.at("config").get<PipelineConfig>();
    s.threshold_ = j.at("threshold").get<int>();
    if (!j.at("warning").is_null()) s.warning_ = j.at("warning").get<std::string>();
    for (const auto& c : j.at("crops")) {
        CropEntry e;
        e.crop.id = c.at("id").get<std::string>();
        e.crop.kind = crop_kind_from_string(c.at("kind").get<std::string>());
        e.crop.offset = {c.at("offset")[0].get<int>(), c.at("offset")[1].get<int>()};
        e.crop.bbox = rect_from_json(c.at("bbox"));
        e.crop.image = read_image(dir / "crops" / (e.crop.id + ".png"));
        e.crop.mask = mask_from_gray(read_image(dir / "crops" / (e.crop.id + "_mask.png")));
        e.status = crop_status_from_string(c.at("status").get<std::string>());
        for (const auto& b : c.at("branch_points"))
            e.branch_points.push_back({{b.at("x").get<double>(), b.at("y").get<double>()},
                                       b.at("crossing_number").get<int>()});
        e.separated_labels = c.at("separated").get<std::vector<int>>();
        s.crops_.push_back(std::move(e));
    }
    return s;
}

const CropEntry& Session::crop(const std::string& cid) const {
    for (const auto& e : crops_)
        if (e.crop.id == cid) return e;
    fail(ErrorCode::NotFound, "session " + id_ + " has no crop " + cid);
}

nlohmann::json Session::summary() const {
    auto j = read_json(path("session.json"));
    const auto a = assignment();
    j["scored"] = fs::exists(path("scores.json"));
    j["distributed"] = fs::exists(path("distribution.json"));
    j["units"] = nlohmann::json::array();
    for (const auto& u : units()) {
        nlohmann::json unit{{"id", u.id}, {"kind", to_string(u.kind)}};
        if (a && a->count(u.id)) unit["class"] = a->at(u.id).cls;
        j["units"].push_back(unit);
    }
    return j;
}

SegmentPreview Session::set_seeds(const std::string& cid, const SeedSet& seeds) {
    auto& e = const_cast<CropEntry&>(crop(cid));
    if (e.status == CropStatus::Classified)
        fail(ErrorCode::Conflict, "crop " + cid + " is already classified; seeds can no longer change");
    seeds.validate(e.crop.image.width(), e.crop.image.height());
    for (const auto& s : seeds.seeds) require(s.label <= 255, "seed labels must be at most 255");

    SegmentPreview preview{watershed(e.crop.image, seeds, e.crop.mask), {}};
    GrayImage raster(e.crop.image.width(), e.crop.image.height(), 0);
    for (std::size_t i = 0; i < raster.size(); ++i)
        raster.data()[i] = static_cast<std::uint8_t>(preview.map.labels.data()[i]);

    nlohmann::json regions = nlohmann::json::array();
    for (int label : seeds.labels()) {
        int x0 = raster.width(), y0 = raster.height(), x1 = -1, y1 = -1;
        std::size_t n = 0;
        for (int y = 0; y < raster.height(); ++y)
            for (int x = 0; x < raster.width(); ++x)
                if (preview.map.labels.at(x, y) == label) {
                    ++n;
                    x0 = std::min(x0, x), y0 = std::min(y0, y), x1 = std::max(x1, x), y1 = std::max(y1, y);
                }
        regions.push_back({{"label", label},
                           {"role", to_string(seeds.role_of(label))},
                           {"pixels", n},
                           {"bbox", {x0, y0, x1, y1}}});
    }
    std::size_t lines = 0;
    for (std::size_t i = 0; i < raster.size(); ++i)
        lines += preview.map.labels.data()[i] == 0 && e.crop.mask.data()[i] != 0;
    preview.stats = {{"crop", cid}, {"width", raster.width()}, {"height", raster.height()},
                     {"regions", regions}, {"line_pixels", lines}};

    write_json(path("seeds/" + cid + ".json"), seeds);
    write_png(path("seeds/" + cid + "_labels.png"), raster);
    e.status = std::max(e.status, CropStatus::Seeded);
    save();
    return preview;
}

std::optional<SeedSet> Session::seeds(const std::string& cid) const {
    crop(cid);
    const auto p = path("seeds/" + cid + ".json");
    if (!fs::exists(p)) return std::nullopt;
    return read_json(p).get<SeedSet>();
}

std::vector<SeparatedChromosome> Session::separate(const std::string& cid, std::optional<int> method,
                                                   std::optional<int> above_label) {
    auto& e = const_cast<CropEntry&>(crop(cid));
    if (e.status == CropStatus::Classified)
        fail(ErrorCode::Conflict, "crop " + cid + " is already classified; it can no longer be separated");
    auto s = seeds(cid);
    if (!s) fail(ErrorCode::Conflict, "crop " + cid + " has no seeds yet");
    if (method) s->method = *method;
    if (above_label) s->above_label = *above_label;
    auto out = karyoseg::separate(e.crop, *s);

    for (int k : e.separated_labels)
        for (const char* ext : {".png", "_mask.png", ".json"}) remove_if_present(path("separated/" + unit_id(cid, k) + ext));
    e.separated_labels.clear();
    for (const auto& sep : out) {
        const auto uid = unit_id(cid, sep.label);
        write_png(path("separated/" + uid + ".png"), sep.image);
        write_png(path("separated/" + uid + "_mask.png"), gray_from_mask(sep.mask));
        auto prov = provenance_json(sep);
        prov["method"] = s->method;
        write_json(path("separated/" + uid + ".json"), prov);
        e.separated_labels.push_back(sep.label);
    }
    e.status = CropStatus::Separated;
    save();
    return out;
}

std::vector<CropRecord> Session::units() const {
    std::vector<CropRecord> out;
    for (const auto& e : crops_) {
        if (e.separated_labels.empty()) {
            out.push_back(e.crop);
            continue;
        }
        for (int k : e.separated_labels) {
            CropRecord u;
            u.id = unit_id(e.crop.id, k);
            u.image = read_image(path("separated/" + u.id + ".png"));
            u.mask = mask_from_gray(read_image(path("separated/" + u.id + "_mask.png")));
            u.offset = e.crop.offset;
            u.bbox = mask_rect(u.mask, u.offset);
            u.kind = CropKind::Single;
            out.push_back(std::move(u));
        }
    }
    return out;
}

Assignment Session::set_scores(const ScoreMatrix& scores) {
    scores.validate();
    require(scores.classes == config_.classes, "scores have " + std::to_string(scores.classes) +
                                                   " classes, the session expects " + std::to_string(config_.classes));
    ScoreMatrix m;
    m.classes = scores.classes;
    for (const auto& u : units()) {
        m.ids.push_back(u.id);
        m.rows.push_back(scores.rows[scores.row_of(u.id)]);
    }
    require(!m.ids.empty(), "the session has no crops to score");
    const auto a = argmax_assign(m);
    write_json(path("scores.json"), m);
    write_json(path("assignment.json"), assignment_json(a));
    for (const char* stale : {"distribution.json", "karyogram.json", "karyogram.png"}) remove_if_present(path(stale));
    for (auto& e : crops_) e.status = CropStatus::Classified;
    save();
    return a;
}

Assignment Session::score_with(const ScoreProvider& provider) { return set_scores(score_crops(units(), provider)); }

std::optional<ScoreMatrix> Session::scores() const {
    if (!fs::exists(path("scores.json"))) return std::nullopt;
    return read_json(path("scores.json")).get<ScoreMatrix>();
}

std::optional<Assignment> Session::assignment() const {
    if (!fs::exists(path("assignment.json"))) return std::nullopt;
    return assignment_from_json(read_json(path("assignment.json")));
}

Distribution Session::distribute() {
    const auto m = scores();
    if (!m) fail(ErrorCode::Conflict, "session " + id_ + " has no scores yet; post scores before distributing");
    auto d = karyoseg::distribute(*m, argmax_assign(*m), expected_counts(config_.expected_total, config_.classes));
    write_json(path("assignment.json"), assignment_json(d.assignment));
    write_json(path("distribution.json"), distribution_report(d));
    for (const char* stale : {"karyogram.json", "karyogram.png"}) remove_if_present(path(stale));
    return d;
}

nlohmann::json Session::karyogram() {
    const auto a = assignment();
    if (!a) fail(ErrorCode::Conflict, "session " + id_ + " has no assignment yet; post scores first");
    const auto expected = expected_counts(config_.expected_total, config_.classes);
    nlohmann::json rows = nlohmann::json::array();
    for (int c = 1; c <= config_.classes; ++c) {
        std::vector<std::string> ids;
        for (const auto& [id, v] : *a)
            if (v.cls == c) ids.push_back(id);
        rows.push_back({{"class", c}, {"expected", expected.per_class[static_cast<std::size_t>(c - 1)]}, {"units", ids}});
    }
    nlohmann::json j{{"session", id_}, {"classes", config_.classes}, {"rows", rows}};
    write_json(path("karyogram.json"), j);
    write_png(path("karyogram.png"), karyogram_image());
    return j;
}

GrayImage Session::karyogram_image() const {
    const auto a = assignment();
    if (!a) fail(ErrorCode::Conflict, "session " + id_ + " has no assignment yet; post scores first");
    constexpr int kGap = 4, kMargin = 2;
    struct Cell {
        const CropRecord* unit;
        int x0, y0, x1, y1;
    };
    const auto all = units();
    std::vector<std::vector<Cell>> rows(static_cast<std::size_t>(config_.classes));
    for (const auto& u : all) {
        const auto it = a->find(u.id);
        if (it == a->end()) continue;
        Cell cell{&u, u.mask.width(), u.mask.height(), -1, -1};
        for (int y = 0; y < u.mask.height(); ++y)
            for (int x = 0; x < u.mask.width(); ++x)
                if (u.mask.test(x, y))
                    cell.x0 = std::min(cell.x0, x), cell.y0 = std::min(cell.y0, y), cell.x1 = std::max(cell.x1, x),
                    cell.y1 = std::max(cell.y1, y);
        if (cell.x1 < 0) continue;
        rows[static_cast<std::size_t>(it->second.cls - 1)].push_back(cell);
    }
    int width = 1, height = kGap;
    std::vector<int> row_height;
    for (const auto& row : rows) {
        int w = kGap, h = 8;
        for (const auto& c : row) {
            w += c.x1 - c.x0 + 1 + 2 * kMargin + kGap;
            h = std::max(h, c.y1 - c.y0 + 1 + 2 * kMargin);
        }
        width = std::max(width, w);
        row_height.push_back(h);
        height += h + kGap + 1;
    }
    GrayImage img(width, height, 255);
    int y = kGap;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        int x = kGap;
        for (const auto& c : rows[r]) {
            for (int yy = c.y0; yy <= c.y1; ++yy)
                for (int xx = c.x0; xx <= c.x1; ++xx)
                    if (c.unit->mask.test(xx, yy))
                        img.at(x + kMargin + xx - c.x0, y + kMargin + yy - c.y0) = c.unit->image.at(xx, yy);
            x += c.x1 - c.x0 + 1 + 2 * kMargin + kGap;
        }
        y += row_height[r] + kGap;
        for (int xx = 0; xx < width; ++xx) img.at(xx, y) = 200;  // row separator
        y += 1;
    }
    return img;
}

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

Session SessionStore::create(std::span<const std::uint8_t> image_bytes, const PipelineConfig& config) {
    config.validate();
    const auto source = decode_image(image_bytes);
    const auto base = session_id_for(image_bytes, config);
    std::string id = base;
    for (int n = 2; fs::exists(root_ / id); ++n) id = base + "-" + std::to_string(n);
    return Session::create(root_ / id, source, config, id);
}

Session SessionStore::open(const std::string& id) const {
    const bool valid = !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
    });
    if (!valid) fail(ErrorCode::NotFound, "unknown session " + id);
    return Session::open(root_ / id);
}

std::vector<std::string> SessionStore::list() const {
    std::vector<std::string> out;
    for (const auto& entry : fs::directory_iterator(root_))
        if (fs::is_regular_file(entry.path() / "session.json")) out.push_back(entry.path().filename().string());
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace karyoseg
