#include <doctest.h>

#include <algorithm>
#include <thread>

#include <httplib.h>

#include "karyoseg/image_io.h"
#include "karyoseg/service.h"
#include "support.h"

using namespace karyoseg;
using namespace karyoseg::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

class TestServer {
public:
    explicit TestServer(const fs::path& root) : service_(root) {
        service_.install(server_);
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~TestServer() {
        server_.stop();
        thread_.join();
    }

    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port_);
        c.set_read_timeout(60);
        return c;
    }

private:
    Service service_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

struct Fixture {
    synth::SynthSpec spec;
    synth::GroundTruth gt;
    std::string png;
};

const Fixture& overlap_fixture() {
    static const Fixture f = [] {
        Fixture x;
        x.spec = synth::metaphase_with_overlap(9);
        x.gt = synth::generate(x.spec);
        const auto bytes = encode_png(x.gt.metaphase);
        x.png.assign(bytes.begin(), bytes.end());
        return x;
    }();
    return f;
}

json body(const httplib::Result& r) {
    REQUIRE(r);
    return json::parse(r->body);
}

void check_error(const httplib::Result& r, int status, const std::string& code) {
    REQUIRE(r);
    CHECK(r->status == status);
    const auto j = json::parse(r->body);
    CHECK(j.at("code") == code);
    CHECK(!j.at("message").get<std::string>().empty());
}

GrayImage png_body(const httplib::Result& r) {
    REQUIRE(r);
    REQUIRE(r->status == 200);
    CHECK(r->get_header_value("Content-Type") == "image/png");
    return decode_image(std::span(reinterpret_cast<const std::uint8_t*>(r->body.data()), r->body.size()));
}

std::string post_session(httplib::Client& c, const std::string& image) {
    const httplib::MultipartFormDataItems items{{"image", image, "metaphase.png", "image/png"}};
    const auto r = c.Post("/sessions", items);
    REQUIRE(r);
    REQUIRE(r->status == 201);
    return json::parse(r->body).at("id").get<std::string>();
}

/// Rebuilds the crop record the server holds so tests can script seeds against it.
CropRecord server_crop(httplib::Client& c, const std::string& id, const json& crop) {
    CropRecord rec;
    rec.id = crop.at("id").get<std::string>();
    rec.offset = {crop.at("offset")[0].get<int>(), crop.at("offset")[1].get<int>()};
    rec.image = png_body(c.Get("/sessions/" + id + "/crops/" + rec.id + "/image"));
    rec.mask = BinaryMask(rec.image.width(), rec.image.height());
    return rec;
}

}  // namespace

TEST_CASE("error codes map to HTTP statuses") {
    CHECK(http_status(ErrorCode::InvalidArgument) == 400);
    CHECK(http_status(ErrorCode::Decode) == 400);
    CHECK(http_status(ErrorCode::NotFound) == 404);
    CHECK(http_status(ErrorCode::Conflict) == 409);
    CHECK(http_status(ErrorCode::MissingScore) == 422);
    CHECK(http_status(ErrorCode::DanglingIntersection) == 422);
    CHECK(http_status(ErrorCode::Io) == 500);
    CHECK(error_json(ErrorCode::Conflict, "x") == json{{"code", "conflict"}, {"message", "x"}});
}

TEST_CASE("happy path on a synthetic overlap session") {
    TempDir tmp;
    TestServer server(tmp.path());
    auto c = server.client();
    const auto& f = overlap_fixture();

    const auto id = post_session(c, f.png);
    const auto summary = body(c.Get("/sessions/" + id));
    CHECK(summary.at("id") == id);
    REQUIRE(summary.at("crops").size() == 45);
    CHECK(body(c.Get("/sessions")).at("sessions") == json::array({id}));
    const auto source = png_body(c.Get("/sessions/" + id + "/source"));
    CHECK(source == f.gt.metaphase);

    const auto& crops = summary.at("crops");
    const auto sus = std::find_if(crops.begin(), crops.end(), [](const json& j) { return j.at("kind") == "suspect-multi"; });
    REQUIRE(sus != crops.end());
    CHECK(std::count_if(crops.begin(), crops.end(), [](const json& j) { return j.at("kind") == "suspect-multi"; }) == 1);
    auto crop = server_crop(c, id, *sus);
    const auto cid = crop.id;
    for (std::size_t i = 0; i < crop.image.size(); ++i) crop.mask.data()[i] = crop.image.data()[i] != 255;

    // Distribution needs scores first.
    check_error(c.Post("/sessions/" + id + "/distribute", "", "application/json"), 409, "conflict");
    check_error(c.Get("/sessions/" + id + "/karyogram"), 409, "conflict");
    check_error(c.Post("/sessions/" + id + "/crops/" + cid + "/separate", "{}", "application/json"), 409, "conflict");

    const auto seeds = scripted_seeds(f.spec, f.gt, crop, 2, {0, 2});
    const auto preview = body(c.Post("/sessions/" + id + "/crops/" + cid + "/seeds", json(seeds).dump(),
                                     "application/json"));
    const int w = preview.at("width"), h = preview.at("height");
    CHECK(w == crop.image.width());
    CHECK(h == crop.image.height());
    const auto labels = preview.at("labels").get<std::vector<int>>();
    REQUIRE(labels.size() == static_cast<std::size_t>(w * h));
    const auto raster = png_body(c.Get(preview.at("labels_url").get<std::string>()));
    for (std::size_t i = 0; i < labels.size(); ++i) CHECK(raster.data()[i] == labels[i]);
    CHECK(preview.at("regions").size() == 3);

    const auto sep = body(c.Post("/sessions/" + id + "/crops/" + cid + "/separate", R"({"method": 2})",
                                 "application/json"));
    REQUIRE(sep.at("chromosomes").size() == 2);
    for (const auto& ch : sep.at("chromosomes")) {
        CHECK(ch.at("shared") == json::array({3}));
        const auto img = png_body(c.Get(ch.at("image_url").get<std::string>()));
        CHECK(img.width() == w);
    }
    const auto after = body(c.Get("/sessions/" + id));
    CHECK(after.at("units").size() == 46);
    for (const auto& e : after.at("crops"))
        if (e.at("id") == cid) CHECK(e.at("status") == "separated");

    const auto scored = body(c.Post("/sessions/" + id + "/scores", R"({"provider": "toy"})", "application/json"));
    CHECK(scored.at("assignment").size() == 46);

    const auto dist = body(c.Post("/sessions/" + id + "/distribute", "", "application/json"));
    CHECK(dist.at("report").at("exact") == true);
    CHECK(dist.at("counts") == json(std::vector<int>(23, 2)));

    const auto k = body(c.Get("/sessions/" + id + "/karyogram"));
    REQUIRE(k.at("rows").size() == 23);
    for (int cls = 1; cls <= 23; ++cls) {
        const auto& row = k.at("rows")[static_cast<std::size_t>(cls - 1)];
        CHECK(row.at("class") == cls);
        CHECK(row.at("units").size() == 2);
    }
    const auto grid = png_body(c.Get(k.at("image_url").get<std::string>()));
    CHECK(grid.width() > 0);

    // Every crop is classified now and can no longer be re-seeded.
    check_error(c.Post("/sessions/" + id + "/crops/" + cid + "/seeds", json(seeds).dump(), "application/json"), 409,
                "conflict");
}

TEST_CASE("state survives a server restart") {
    TempDir tmp;
    const auto& f = overlap_fixture();
    std::string id;
    json before;
    {
        TestServer server(tmp.path());
        auto c = server.client();
        id = post_session(c, f.png);
        before = body(c.Post("/sessions/" + id + "/scores", R"({"provider": "toy"})", "application/json"));
    }
    TestServer server(tmp.path());
    auto c = server.client();
    const auto summary = body(c.Get("/sessions/" + id));
    CHECK(summary.at("scored") == true);
    const auto dist = body(c.Post("/sessions/" + id + "/distribute", "", "application/json"));
    CHECK(dist.at("assignment").size() == before.at("assignment").size());
}

TEST_CASE("scores file upload, missing rows and raw-body sessions") {
    TempDir tmp;
    TestServer server(tmp.path());
    auto c = server.client();
    const auto png = encode_png(synth::generate(synth::isolated_metaphase(46, 4)).metaphase);
    const auto r = c.Post("/sessions", std::string(png.begin(), png.end()), "image/png");
    REQUIRE(r);
    REQUIRE(r->status == 201);
    const auto id = json::parse(r->body).at("id").get<std::string>();
    const auto summary = body(c.Get("/sessions/" + id));

    ScoreMatrix m;
    for (const auto& crop : summary.at("crops")) {
        m.ids.push_back(crop.at("id"));
        std::vector<double> row(23, 0.01);
        row[0] = 1.0;  // everything argmaxes to class 1
        m.rows.push_back(row);
    }
    auto partial = m;
    partial.ids.pop_back();
    partial.rows.pop_back();
    check_error(c.Post("/sessions/" + id + "/scores", json(partial).dump(), "application/json"), 422, "missing-score");

    const auto scored = body(c.Post("/sessions/" + id + "/scores", json(m).dump(), "application/json"));
    CHECK(scored.at("counts")[0] == 46);
    const auto dist = body(c.Post("/sessions/" + id + "/distribute", "", "application/json"));
    CHECK(dist.at("counts") == json(std::vector<int>(23, 2)));
    CHECK(dist.at("report").at("moves").size() == 44);
}

TEST_CASE("structured errors") {
    TempDir tmp;
    TestServer server(tmp.path());
    auto c = server.client();
    const auto& f = overlap_fixture();

    check_error(c.Get("/sessions/nope"), 404, "not-found");
    check_error(c.Post("/sessions", "definitely not an image", "application/octet-stream"), 400, "decode-error");
    CHECK(body(c.Get("/sessions")).at("sessions").empty());
    check_error(c.Post("/sessions", httplib::MultipartFormDataItems{{"other", "x", "", ""}}), 400,
                "invalid-argument");
    const httplib::MultipartFormDataItems bad_config{{"image", f.png, "m.png", "image/png"},
                                                     {"config", R"({"canny_aperture": 4})", "", "application/json"}};
    check_error(c.Post("/sessions", bad_config), 400, "invalid-argument");

    const auto id = post_session(c, f.png);
    check_error(c.Get("/sessions/" + id + "/crops/crop_999/image"), 404, "not-found");
    check_error(c.Get("/sessions/" + id + "/crops/crop_000/labels"), 404, "not-found");
    check_error(c.Get("/sessions/" + id + "/separated/crop_000_1/image"), 404, "not-found");
    check_error(c.Post("/sessions/" + id + "/crops/crop_000/seeds", "{", "application/json"), 400, "invalid-argument");

    // Seed validation messages come through verbatim.
    SeedSet one;
    one.seeds = {{{1, 1}, 1, SeedRole::Chromosome}};
    try {
        one.validate(1000, 1000);
        FAIL("expected validation failure");
    } catch (const Error& e) {
        const auto r = c.Post("/sessions/" + id + "/crops/crop_000/seeds", json(one).dump(), "application/json");
        check_error(r, 400, "invalid-argument");
        CHECK(json::parse(r->body).at("message") == e.what());
    }
    check_error(c.Post("/sessions/" + id + "/crops/crop_000/separate", R"({"method": 2, "bogus": 1})",
                       "application/json"),
                400, "invalid-argument");
    check_error(c.Post("/sessions/" + id + "/scores", R"({"provider": "oracle"})", "application/json"), 400,
                "invalid-argument");
}

TEST_CASE("concurrent mutations of one session are serialized") {
    TempDir tmp;
    TestServer server(tmp.path());
    auto c = server.client();
    const auto png = encode_png(synth::generate(synth::isolated_metaphase(46, 8)).metaphase);
    const auto id = post_session(c, std::string(png.begin(), png.end()));
    const auto crops = body(c.Get("/sessions/" + id)).at("crops");

    // Two seeds at opposite ends of each crop's mask.
    std::vector<std::thread> threads;
    std::vector<int> statuses(16, 0);
    for (int t = 0; t < 16; ++t)
        threads.emplace_back([&, t] {
            auto cc = server.client();
            const auto cid = crops[static_cast<std::size_t>(t)].at("id").get<std::string>();
            const auto img = png_body(cc.Get("/sessions/" + id + "/crops/" + cid + "/image"));
            std::vector<Point> pts;
            for (int y = 0; y < img.height(); ++y)
                for (int x = 0; x < img.width(); ++x)
                    if (img.at(x, y) != 255) pts.push_back({x, y});
            SeedSet s;
            s.seeds = {{pts.front(), 1, SeedRole::Chromosome}, {pts.back(), 2, SeedRole::Chromosome}};
            const auto r = cc.Post("/sessions/" + id + "/crops/" + cid + "/seeds", json(s).dump(), "application/json");
            statuses[static_cast<std::size_t>(t)] = r ? r->status : -1;
        });
    for (auto& t : threads) t.join();
    CHECK(statuses == std::vector<int>(16, 200));
    const auto after = body(c.Get("/sessions/" + id)).at("crops");
    for (int t = 0; t < 16; ++t) CHECK(after[static_cast<std::size_t>(t)].at("status") == "seeded");
    for (std::size_t t = 16; t < after.size(); ++t) CHECK(after[t].at("status") == "pending");
}
