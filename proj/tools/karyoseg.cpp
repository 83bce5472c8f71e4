// karyoseg command-line interface.

#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "karyoseg/classify.h"
#include "karyoseg/error.h"
#include "karyoseg/image_io.h"
#include "karyoseg/overlap.h"
#include "karyoseg/service.h"
#include "karyoseg/session.h"
#include "karyoseg/synth.h"
#include "karyoseg/watershed.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace karyoseg;

namespace {

json load_json(const fs::path& p) {
    const auto bytes = read_file(p);
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        fail(ErrorCode::InvalidArgument, p.string() + " is not JSON: " + e.what());
    }
}

PipelineConfig load_config(const std::string& path) {
    if (path.empty()) return {};
    return load_json(path).get<PipelineConfig>();
}

void print(const json& j) { std::cout << j.dump(2) << "\n"; }

/// A crop file: intensities on white; the mask is a companion file or every non-white pixel.
CropRecord load_crop(const fs::path& image, const std::string& mask_path) {
    CropRecord c;
    c.id = image.stem().string();
    c.image = read_image(image);
    if (!mask_path.empty()) {
        const auto m = read_image(mask_path);
        require(m.width() == c.image.width() && m.height() == c.image.height(), "mask and crop differ in size");
        c.mask = BinaryMask(m.width(), m.height());
        for (std::size_t i = 0; i < m.size(); ++i) c.mask.data()[i] = m.data()[i] >= 128;
    } else {
        c.mask = BinaryMask(c.image.width(), c.image.height());
        for (std::size_t i = 0; i < c.image.size(); ++i) c.mask.data()[i] = c.image.data()[i] != 255;
    }
    return c;
}

void write_separated(const fs::path& out, const std::string& stem, const std::vector<SeparatedChromosome>& seps,
                     int method) {
    fs::create_directories(out);
    json list = json::array();
    for (const auto& s : seps) {
        const auto name = stem + "_" + std::to_string(s.label);
        write_png(out / (name + ".png"), s.image);
        write_png(out / (name + "_mask.png"), mask_to_gray(s.mask));
        auto prov = provenance_json(s);
        prov["method"] = method;
        write_text(out / (name + ".json"), prov.dump(2) + "\n");
        prov["id"] = name;
        list.push_back(prov);
    }
    print({{"chromosomes", list}});
}

int cmd_segment(const std::string& image, const std::string& out, const std::string& config_path) {
    const auto config = load_config(config_path);
    const auto bytes = read_file(image);
    const auto source = decode_image(bytes);
    const fs::path dir(out);
    if (fs::exists(dir)) {
        require(fs::is_regular_file(dir / "session.json") || fs::is_empty(dir),
                "output directory exists and is not a session: " + out);
        fs::remove_all(dir);
    }
    if (dir.has_parent_path()) fs::create_directories(dir.parent_path());
    const auto s = Session::create(dir, source, config, session_id_for(bytes, config));
    json crops = json::array();
    for (const auto& e : s.crops())
        crops.push_back({{"id", e.crop.id}, {"kind", to_string(e.crop.kind)}, {"branch_points", e.branch_points.size()}});
    print({{"id", s.id()}, {"dir", dir.string()}, {"crops", crops},
           {"warning", s.warning() ? json(*s.warning()) : json(nullptr)}});
    return 0;
}

int cmd_inspect(const std::string& crop_path, const std::string& mask_path, const std::string& out,
                const std::string& config_path) {
    const auto crop = load_crop(crop_path, mask_path);
    const auto analysis = analyze_crop(crop, load_config(config_path));
    RgbImage overlay(crop.image);
    for (int y = 0; y < crop.image.height(); ++y)
        for (int x = 0; x < crop.image.width(); ++x)
            if (analysis.skeleton.mask.test(x, y)) overlay.set(x, y, 220, 30, 30);
    json bps = json::array();
    for (const auto& b : analysis.branch_points) {
        const int bx = static_cast<int>(std::lround(b.position.x)), by = static_cast<int>(std::lround(b.position.y));
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
                if (crop.image.contains(bx + dx, by + dy)) overlay.set(bx + dx, by + dy, 30, 180, 30);
        bps.push_back({{"x", b.position.x}, {"y", b.position.y}, {"crossing_number", b.crossing_number}});
    }
    fs::create_directories(out);
    const auto name = crop.id + "_inspect";
    write_png(fs::path(out) / (name + ".png"), overlay);
    const json report{{"crop", crop.id}, {"kind", to_string(analysis.kind)}, {"branch_points", bps},
                      {"skeleton_pixels", analysis.skeleton.mask.count()}};
    write_text(fs::path(out) / (name + ".json"), report.dump(2) + "\n");
    print(report);
    return 0;
}

int cmd_separate(const std::string& crop, const std::string& seeds_path, std::optional<int> method,
                 std::optional<int> above, const std::string& mask_path, const std::string& session_dir,
                 const std::string& out) {
    auto seeds = load_json(seeds_path).get<SeedSet>();
    if (!session_dir.empty()) {
        auto s = Session::open(session_dir);
        s.set_seeds(crop, seeds);
        const auto seps = s.separate(crop, method, above);
        json list = json::array();
        for (const auto& sep : seps) {
            auto prov = provenance_json(sep);
            prov["id"] = crop + "_" + std::to_string(sep.label);
            list.push_back(prov);
        }
        print({{"chromosomes", list}});
        return 0;
    }
    if (method) seeds.method = *method;
    if (above) seeds.above_label = *above;
    const auto record = load_crop(crop, mask_path);
    write_separated(out, record.id, separate(record, seeds), seeds.method);
    return 0;
}

int cmd_classify(const std::string& dir, const std::string& scores_path, const std::string& provider,
                 bool distribute) {
    auto s = Session::open(dir);
    Assignment a;
    if (!scores_path.empty()) {
        a = s.set_scores(load_json(scores_path).get<ScoreMatrix>());
    } else {
        require(provider == "toy", "unknown score provider: " + provider);
        a = s.score_with(ToyScoreProvider(s.config().classes));
    }
    json out{{"assignment", assignment_json(a)}};
    if (distribute) {
        const auto d = s.distribute();
        out["assignment"] = assignment_json(d.assignment);
        out["report"] = distribution_report(d);
    }
    out["karyogram"] = s.karyogram();
    print(out);
    return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& preset, std::uint64_t seed, double angle,
              const std::string& out) {
    synth::SynthSpec spec;
    if (!spec_path.empty()) spec = load_json(spec_path).get<synth::SynthSpec>();
    else if (preset == "isolated") spec = synth::isolated_metaphase(46, seed);
    else if (preset == "overlap") spec = synth::metaphase_with_overlap(seed, angle);
    else if (preset == "pair") spec = synth::crossing_pair(angle, seed);
    else fail(ErrorCode::InvalidArgument, "unknown preset: " + preset);
    const auto gt = synth::generate(spec);
    synth::write_ground_truth(out, gt);
    write_text(fs::path(out) / "spec.json", json(spec).dump(2) + "\n");
    print({{"objects", gt.masks.size()}, {"crossings", gt.crossings.size()}, {"dir", out}});
    return 0;
}

httplib::Server* g_server = nullptr;

int cmd_serve(const std::string& host, int port, const std::string& data) {
    Service service(data.empty() ? default_data_dir() : fs::path(data));
    httplib::Server server;
    service.install(server);
    g_server = &server;
    std::signal(SIGINT, [](int) { g_server->stop(); });
    std::signal(SIGTERM, [](int) { g_server->stop(); });
    int bound = port;
    if (port == 0) bound = server.bind_to_any_port(host);
    else if (!server.bind_to_port(host, port)) bound = -1;
    if (bound < 0) fail(ErrorCode::Io, "cannot listen on " + host + ":" + std::to_string(port));
    std::cout << "listening on http://" << host << ":" << bound << " data=" << service.store().root().string()
              << std::endl;
    server.listen_after_bind();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Metaphase chromosome segmentation, separation and karyogram assembly"};
    app.require_subcommand(1);

    std::string config_path;

    auto* segment = app.add_subcommand("segment", "Extract crops from a metaphase into a session directory");
    std::string seg_image, seg_out;
    segment->add_option("image", seg_image, "Metaphase image (PNG, TIFF, BMP)")->required();
    segment->add_option("--out", seg_out, "Session directory (replaced if it already holds a session)")->required();
    segment->add_option("--config", config_path, "Pipeline config JSON");

    auto* inspect = app.add_subcommand("inspect", "Skeleton and branch-point overlay for one crop");
    std::string ins_crop, ins_mask, ins_out = ".";
    inspect->add_option("crop", ins_crop, "Crop image (object on white)")->required();
    inspect->add_option("--mask", ins_mask, "Mask image; default is every non-white pixel");
    inspect->add_option("--out", ins_out, "Output directory")->capture_default_str();
    inspect->add_option("--config", config_path, "Pipeline config JSON");

    auto* sep = app.add_subcommand("separate", "Marker-controlled watershed separation of one crop");
    std::string sep_crop, sep_seeds, sep_mask, sep_session, sep_out = ".";
    std::optional<int> sep_method, sep_above;
    sep->add_option("crop", sep_crop, "Crop image, or a crop id with --session")->required();
    sep->add_option("--seeds", sep_seeds, "SeedSet JSON")->required();
    sep->add_option("--method", sep_method, "1 (gap fill) or 2 (shared intersection); default from seeds")
        ->check(CLI::IsMember({1, 2}));
    sep->add_option("--above", sep_above, "Label of the chromosome on top");
    sep->add_option("--mask", sep_mask, "Mask image; default is every non-white pixel");
    sep->add_option("--session", sep_session, "Session directory: store seeds and results there");
    sep->add_option("--out", sep_out, "Output directory (without --session)")->capture_default_str();

    auto* cls = app.add_subcommand("classify", "Score a session, optionally redistribute, and lay out the karyogram");
    std::string cls_dir, cls_scores, cls_provider;
    bool cls_distribute = false;
    cls->add_option("dir", cls_dir, "Session directory")->required();
    auto* scores_opt = cls->add_option("--scores", cls_scores, "ScoreMatrix JSON");
    auto* provider_opt = cls->add_option("--provider", cls_provider, "Built-in provider: toy");
    scores_opt->excludes(provider_opt);
    cls->add_flag("--distribute", cls_distribute, "Apply count-constrained redistribution");

    auto* syn = app.add_subcommand("synth", "Render a synthetic metaphase with ground truth");
    std::string syn_spec, syn_preset = "isolated", syn_out;
    std::uint64_t syn_seed = 1;
    double syn_angle = 60.0;
    auto* spec_opt = syn->add_option("--spec", syn_spec, "SynthSpec JSON");
    syn->add_option("--preset", syn_preset, "isolated | overlap | pair (without --spec)")
        ->excludes(spec_opt)
        ->capture_default_str();
    syn->add_option("--seed", syn_seed, "Preset seed")->capture_default_str();
    syn->add_option("--angle", syn_angle, "Crossing angle for the overlap and pair presets")->capture_default_str();
    syn->add_option("--out", syn_out, "Output directory")->required();

    auto* serve = app.add_subcommand("serve", "Run the HTTP API");
    std::string serve_host = "127.0.0.1", serve_data;
    int serve_port = 8080;
    serve->add_option("--host", serve_host)->capture_default_str();
    serve->add_option("--port", serve_port, "0 picks a free port")->capture_default_str();
    serve->add_option("--data", serve_data, "Session root (default $KARYOSEG_DATA or ./karyoseg-data)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*segment) return cmd_segment(seg_image, seg_out, config_path);
        if (*inspect) return cmd_inspect(ins_crop, ins_mask, ins_out, config_path);
        if (*sep) return cmd_separate(sep_crop, sep_seeds, sep_method, sep_above, sep_mask, sep_session, sep_out);
        if (*cls) {
            if (cls_scores.empty() && cls_provider.empty())
                fail(ErrorCode::InvalidArgument, "classify needs --scores or --provider");
            return cmd_classify(cls_dir, cls_scores, cls_provider, cls_distribute);
        }
        if (*syn) return cmd_synth(syn_spec, syn_preset, syn_seed, syn_angle, syn_out);
        if (*serve) return cmd_serve(serve_host, serve_port, serve_data);
    } catch (const Error& e) {
        std::cerr << error_json(e.code(), e.what()).dump() << "\n";
        return 1;
    } catch (const json::exception& e) {
        std::cerr << error_json(ErrorCode::InvalidArgument, e.what()).dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << error_json(ErrorCode::Io, e.what()).dump() << "\n";
        return 1;
    }
    return 0;
}
