#include "karyoseg/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <random>

#include "karyoseg/error.h"
#include "karyoseg/image_io.h"

namespace karyoseg::synth {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Platform-independent draws on top of mt19937_64 (the standard
// distributions are implementation-defined).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int integer(int lo, int hi) { return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1)); }
    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

Point2d rotate(Point2d p, double deg) {
    const double c = std::cos(deg * kDeg), s = std::sin(deg * kDeg);
    return {p.x * c - p.y * s, p.x * s + p.y * c};
}

Point2d add(Point2d a, Point2d b) { return {a.x + b.x, a.y + b.y}; }
Point2d sub(Point2d a, Point2d b) { return {a.x - b.x, a.y - b.y}; }
Point2d scale(Point2d a, double k) { return {a.x * k, a.y * k}; }
double dot(Point2d a, Point2d b) { return a.x * b.x + a.y * b.y; }
double norm(Point2d a) { return std::hypot(a.x, a.y); }

// Centerline of an object centered at the origin, before placement.
std::vector<Point2d> local_axis(const ObjectSpec& o, double orientation) {
    const double h = o.length / 2.0;
    std::vector<Point2d> pts;
    if (o.bend == 0.0) {
        pts = {{-h, 0.0}, {h, 0.0}};
    } else {
        const double a = o.bend / 2.0 * kDeg;
        // Vertex at the origin; shift so the chord midpoint sits at the origin.
        const double sag = h * std::sin(a) / 2.0;
        pts = {{-h * std::cos(a), h * std::sin(a) - sag}, {0.0, -sag}, {h * std::cos(a), h * std::sin(a) - sag}};
    }
    for (auto& p : pts) p = rotate(p, orientation);
    return pts;
}

double axis_length(const std::vector<Point2d>& axis) {
    double len = 0;
    for (std::size_t i = 1; i < axis.size(); ++i) len += norm(sub(axis[i], axis[i - 1]));
    return len;
}

// Point and unit tangent at arclength t.
std::pair<Point2d, Point2d> point_at(const std::vector<Point2d>& axis, double t) {
    for (std::size_t i = 1; i < axis.size(); ++i) {
        const Point2d d = sub(axis[i], axis[i - 1]);
        const double len = norm(d);
        if (t <= len || i + 1 == axis.size()) {
            const Point2d u = scale(d, 1.0 / len);
            return {add(axis[i - 1], scale(u, std::clamp(t, 0.0, len))), u};
        }
        t -= len;
    }
    return {axis.front(), {1, 0}};
}

struct Projection {
    double distance;
    double t;
};

Projection project(const std::vector<Point2d>& axis, Point2d p) {
    Projection best{std::numeric_limits<double>::infinity(), 0.0};
    double base = 0;
    for (std::size_t i = 1; i < axis.size(); ++i) {
        const Point2d d = sub(axis[i], axis[i - 1]);
        const double len2 = dot(d, d);
        const double s = std::clamp(dot(sub(p, axis[i - 1]), d) / len2, 0.0, 1.0);
        const double dist = norm(sub(p, add(axis[i - 1], scale(d, s))));
        if (dist < best.distance) best = {dist, base + s * std::sqrt(len2)};
        base += std::sqrt(len2);
    }
    return best;
}

std::optional<Point2d> segment_intersection(Point2d a0, Point2d a1, Point2d b0, Point2d b1) {
    const Point2d r = sub(a1, a0), s = sub(b1, b0);
    const double den = r.x * s.y - r.y * s.x;
    if (std::abs(den) < 1e-12) return std::nullopt;
    const Point2d q = sub(b0, a0);
    const double t = (q.x * s.y - q.y * s.x) / den;
    const double u = (q.x * r.y - q.y * r.x) / den;
    if (t < 0 || t > 1 || u < 0 || u > 1) return std::nullopt;
    return add(a0, scale(r, t));
}

std::optional<Point2d> polyline_intersection(const std::vector<Point2d>& a, const std::vector<Point2d>& b) {
    for (std::size_t i = 1; i < a.size(); ++i)
        for (std::size_t j = 1; j < b.size(); ++j)
            if (auto p = segment_intersection(a[i - 1], a[i], b[j - 1], b[j])) return p;
    return std::nullopt;
}

struct Unit {
    std::vector<int> members;  // bottom first
    std::vector<std::vector<Point2d>> axes;
    int group = -1;
};

void build_group(const SynthSpec& spec, const GroupSpec& g, int gi, Rng& rng, Unit& unit) {
    require(!g.members.empty(), "synth group needs members");
    const auto& first = spec.objects[static_cast<std::size_t>(g.members[0])];
    unit.group = gi;
    unit.members = g.members;
    unit.axes.push_back(local_axis(first, first.orientation));
    const auto base = unit.axes[0];
    const double base_len = axis_length(base);

    if (g.arrangement == Arrangement::Touching) {
        require(g.members.size() == 2, "touching group needs exactly two members");
        const auto& other = spec.objects[static_cast<std::size_t>(g.members[1])];
        const auto [p, u] = point_at(base, base_len * rng.uniform(0.35, 0.65));
        Point2d n{-u.y, u.x};
        const Point2d dir = rotate(u, g.angle);
        if (dot(dir, n) < 0) n = scale(n, -1);
        const Point2d start = add(p, scale(n, first.width / 2 + other.width / 2 + 0.5));
        auto axis = local_axis(other, std::atan2(dir.y, dir.x) / kDeg);
        // The end pointing back towards the first member sits at `start`.
        const Point2d tail = dot(axis.front(), dir) <= dot(axis.back(), dir) ? axis.front() : axis.back();
        const Point2d shift = sub(start, tail);
        for (auto& q : axis) q = add(q, shift);
        unit.axes.push_back(std::move(axis));
        return;
    }

    const std::size_t m = g.members.size();
    for (std::size_t k = 1; k < m; ++k) {
        const auto& other = spec.objects[static_cast<std::size_t>(g.members[k])];
        // A pair crosses near the middle; cluster members spread along the first one.
        const double frac = m == 2 ? rng.uniform(0.4, 0.6)
                                   : 0.2 + 0.6 * static_cast<double>(k - 1) / static_cast<double>(m - 2);
        const auto [p, u] = point_at(base, base_len * frac);
        const double angle = (k % 2 == 1 ? 1.0 : -1.0) * g.angle;
        const double orient = std::atan2(u.y, u.x) / kDeg + angle;
        auto axis = local_axis(other, orient);
        // Cross at a point near, but not exactly at, the other object's middle.
        const double along = other.length * rng.uniform(-0.12, 0.12);
        const Point2d ud = rotate({1, 0}, orient);
        const Point2d shift = sub(p, scale(ud, along));
        for (auto& q : axis) q = add(q, shift);
        unit.axes.push_back(std::move(axis));
    }
}

struct Box {
    double x0, y0, x1, y1;
};

Box unit_box(const Unit& unit, const SynthSpec& spec) {
    Box b{1e18, 1e18, -1e18, -1e18};
    for (std::size_t i = 0; i < unit.axes.size(); ++i) {
        const double r = spec.objects[static_cast<std::size_t>(unit.members[i])].width / 2 + 1.0;
        for (const auto& p : unit.axes[i]) {
            b.x0 = std::min(b.x0, p.x - r);
            b.y0 = std::min(b.y0, p.y - r);
            b.x1 = std::max(b.x1, p.x + r);
            b.y1 = std::max(b.y1, p.y + r);
        }
    }
    return b;
}

// Profile cache: band boundaries and intensities for one seed.
struct Bands {
    std::vector<double> ends;
    std::vector<std::uint8_t> values;
};

Bands make_bands(std::uint64_t seed) {
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    Bands b;
    double t = rng.uniform(0.0, 4.0);
    bool dark = rng.uniform() < 0.5;
    b.ends.push_back(t);
    b.values.push_back(static_cast<std::uint8_t>(rng.integer(130, 165)));
    while (t < 400.0) {
        t += rng.uniform(3.0, 8.0);
        b.ends.push_back(t);
        b.values.push_back(static_cast<std::uint8_t>(dark ? rng.integer(45, 85) : rng.integer(115, 165)));
        dark = !dark;
    }
    return b;
}

std::uint8_t sample(const Bands& b, double t) {
    const auto it = std::lower_bound(b.ends.begin(), b.ends.end(), t);
    return b.values[std::min<std::size_t>(static_cast<std::size_t>(it - b.ends.begin()), b.values.size() - 1)];
}

}  // namespace

std::string_view to_string(Arrangement a) {
    switch (a) {
        case Arrangement::Isolated: return "isolated";
        case Arrangement::Touching: return "touching";
        case Arrangement::Overlapping: return "overlapping";
        case Arrangement::Cluster: return "cluster";
    }
    return "isolated";
}

Arrangement arrangement_from_string(std::string_view s) {
    if (s == "isolated") return Arrangement::Isolated;
    if (s == "touching") return Arrangement::Touching;
    if (s == "overlapping") return Arrangement::Overlapping;
    if (s == "cluster") return Arrangement::Cluster;
    fail(ErrorCode::InvalidArgument, "unknown arrangement: " + std::string(s));
}

double class_length(int class_index) { return 32.5 + 2.5 * (23 - std::clamp(class_index, 1, 23)); }

std::uint8_t band_intensity(std::uint64_t band_seed, double t) { return sample(make_bands(band_seed), t); }

GroundTruth generate(const SynthSpec& spec) {
    require(spec.width >= 8 && spec.height >= 8, "synth canvas too small");
    require(spec.noise >= 0 && spec.noise <= 5, "synth noise must be in [0, 5]");
    const auto n = spec.objects.size();
    for (const auto& o : spec.objects) require(o.length > 0 && o.width > 0, "synth objects need positive length and width");

    Rng rng(spec.rng_seed);
    std::vector<int> group_of(n, -1);
    for (std::size_t gi = 0; gi < spec.groups.size(); ++gi) {
        for (int m : spec.groups[gi].members) {
            require(m >= 0 && static_cast<std::size_t>(m) < n, "synth group member out of range");
            require(group_of[static_cast<std::size_t>(m)] < 0, "synth object belongs to two groups");
            group_of[static_cast<std::size_t>(m)] = static_cast<int>(gi);
        }
    }

    std::vector<Unit> units;
    for (std::size_t gi = 0; gi < spec.groups.size(); ++gi) {
        Unit u;
        if (spec.groups[gi].arrangement == Arrangement::Isolated) {
            for (int m : spec.groups[gi].members) {
                const auto& o = spec.objects[static_cast<std::size_t>(m)];
                units.push_back({{m}, {local_axis(o, o.orientation)}, static_cast<int>(gi)});
            }
            continue;
        }
        build_group(spec, spec.groups[gi], static_cast<int>(gi), rng, u);
        units.push_back(std::move(u));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (group_of[i] >= 0) continue;
        const auto& o = spec.objects[i];
        units.push_back({{static_cast<int>(i)}, {local_axis(o, o.orientation)}, -1});
    }

    // Rejection-sampled placement, largest units first.
    std::vector<std::size_t> order(units.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const Box ba = unit_box(units[a], spec), bb = unit_box(units[b], spec);
        return (ba.x1 - ba.x0) * (ba.y1 - ba.y0) > (bb.x1 - bb.x0) * (bb.y1 - bb.y0);
    });
    std::vector<Box> placed;
    for (std::size_t ui : order) {
        Unit& unit = units[ui];
        const Box b = unit_box(unit, spec);
        const double m = spec.margin;
        const double lo_x = m - b.x0, hi_x = spec.width - 1 - m - b.x1;
        const double lo_y = m - b.y0, hi_y = spec.height - 1 - m - b.y1;
        if (lo_x > hi_x || lo_y > hi_y) fail(ErrorCode::LayoutFailure, "synth object does not fit the canvas");
        bool ok = false;
        Point2d shift{};
        for (int attempt = 0; attempt < 5000 && !ok; ++attempt) {
            shift = {std::round(rng.uniform(lo_x, hi_x)), std::round(rng.uniform(lo_y, hi_y))};
            const Box c{b.x0 + shift.x, b.y0 + shift.y, b.x1 + shift.x, b.y1 + shift.y};
            ok = std::none_of(placed.begin(), placed.end(), [&](const Box& p) {
                return c.x0 < p.x1 + m && p.x0 < c.x1 + m && c.y0 < p.y1 + m && p.y0 < c.y1 + m;
            });
            if (ok) placed.push_back(c);
        }
        if (!ok) fail(ErrorCode::LayoutFailure, "synth layout failed: canvas too crowded");
        for (auto& axis : unit.axes)
            for (auto& p : axis) p = add(p, shift);
    }

    GroundTruth gt;
    gt.metaphase = GrayImage(spec.width, spec.height, 255);
    gt.masks.assign(n, BinaryMask(spec.width, spec.height));
    gt.axes.assign(n, {});
    gt.group_of = group_of;
    for (const auto& o : spec.objects) gt.classes.push_back(o.class_index);

    std::vector<double> canvas(static_cast<std::size_t>(spec.width) * spec.height, 255.0);
    for (std::size_t ui : order) {
        const Unit& unit = units[ui];
        for (std::size_t k = 0; k < unit.members.size(); ++k) {
            const int idx = unit.members[k];
            const auto& o = spec.objects[static_cast<std::size_t>(idx)];
            const auto& axis = unit.axes[k];
            gt.axes[static_cast<std::size_t>(idx)] = axis;
            gt.draw_order.push_back(idx);
            const Bands bands = make_bands(o.band_seed);
            const double len = axis_length(axis);
            const double r = o.width / 2.0;
            double x0 = 1e18, y0 = 1e18, x1 = -1e18, y1 = -1e18;
            for (const auto& p : axis) {
                x0 = std::min(x0, p.x);
                y0 = std::min(y0, p.y);
                x1 = std::max(x1, p.x);
                y1 = std::max(y1, p.y);
            }
            const int px0 = std::max(0, static_cast<int>(std::floor(x0 - r - 2)));
            const int py0 = std::max(0, static_cast<int>(std::floor(y0 - r - 2)));
            const int px1 = std::min(spec.width - 1, static_cast<int>(std::ceil(x1 + r + 2)));
            const int py1 = std::min(spec.height - 1, static_cast<int>(std::ceil(y1 + r + 2)));
            auto& mask = gt.masks[static_cast<std::size_t>(idx)];
            for (int y = py0; y <= py1; ++y) {
                for (int x = px0; x <= px1; ++x) {
                    const auto pr = project(axis, {static_cast<double>(x), static_cast<double>(y)});
                    const double cov = std::clamp(r + 0.5 - pr.distance, 0.0, 1.0);
                    if (pr.distance <= r) mask.set(x, y);
                    if (cov <= 0.0) continue;
                    const double v = sample(bands, std::clamp(pr.t, 0.0, len));
                    auto& c = canvas[static_cast<std::size_t>(y) * spec.width + x];
                    c = c * (1.0 - cov) + v * cov;
                }
            }
        }
        // Crossings between members of overlapping units.
        if (unit.group >= 0) {
            const auto arr = spec.groups[static_cast<std::size_t>(unit.group)].arrangement;
            if (arr == Arrangement::Overlapping || arr == Arrangement::Cluster) {
                for (std::size_t a = 0; a < unit.members.size(); ++a)
                    for (std::size_t b = a + 1; b < unit.members.size(); ++b)
                        if (auto p = polyline_intersection(unit.axes[a], unit.axes[b]))
                            gt.crossings.push_back({*p, unit.members[a], unit.members[b]});
            }
        }
    }

    auto dst = gt.metaphase.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        double v = canvas[i];
        if (spec.noise > 0) v += rng.integer(-spec.noise, spec.noise);
        dst[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    return gt;
}

// ---------------------------------------------------------------------------
// Canned specs
// ---------------------------------------------------------------------------

SynthSpec isolated_metaphase(int count, std::uint64_t seed, int classes) {
    Rng rng(seed * 7919 + 17);
    SynthSpec s;
    s.width = s.height = 768;
    s.rng_seed = seed;
    s.noise = 3;
    for (int i = 0; i < count; ++i) {
        ObjectSpec o;
        o.class_index = std::min(classes, i / 2 + 1);
        o.length = class_length(o.class_index) + rng.uniform(-0.3, 0.3);
        o.width = kNominalWidth;
        o.bend = rng.uniform() < 0.3 ? rng.uniform(10.0, 40.0) : 0.0;
        o.orientation = rng.uniform(0.0, 180.0);
        o.band_seed = rng.next();
        s.objects.push_back(o);
    }
    return s;
}

SynthSpec crossing_pair(double angle, std::uint64_t seed) {
    Rng rng(seed * 104729 + 3);
    SynthSpec s;
    s.width = s.height = 240;
    s.rng_seed = seed;
    s.noise = 2;
    for (int i = 0; i < 2; ++i) {
        ObjectSpec o;
        o.class_index = i + 1;
        o.length = rng.uniform(62.5, 87.5);
        o.width = kNominalWidth;
        o.orientation = rng.uniform(0.0, 180.0);
        o.band_seed = rng.next();
        s.objects.push_back(o);
    }
    s.groups.push_back({Arrangement::Overlapping, {0, 1}, angle});
    return s;
}

SynthSpec singleton(double bend, std::uint64_t seed) {
    Rng rng(seed * 15485863 + 5);
    SynthSpec s;
    s.width = s.height = 200;
    s.rng_seed = seed;
    s.noise = 2;
    ObjectSpec o;
    o.length = rng.uniform(44.0, 87.5);
    o.width = kNominalWidth;
    o.bend = bend;
    o.orientation = rng.uniform(0.0, 180.0);
    o.band_seed = rng.next();
    s.objects.push_back(o);
    return s;
}

SynthSpec metaphase_with_overlap(std::uint64_t seed, double angle) {
    SynthSpec s = isolated_metaphase(46, seed);
    s.objects[0].bend = 0.0;
    s.objects[2].bend = 0.0;
    s.groups.push_back({Arrangement::Overlapping, {0, 2}, angle});
    return s;
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const ObjectSpec& o) {
    j = {{"class", o.class_index}, {"length", o.length}, {"width", o.width},   {"bend", o.bend},
         {"orientation", o.orientation}, {"band_seed", o.band_seed}};
}

void from_json(const nlohmann::json& j, ObjectSpec& o) {
    o.class_index = j.value("class", 1);
    o.length = j.at("length").get<double>();
    o.width = j.value("width", kNominalWidth);
    o.bend = j.value("bend", 0.0);
    o.orientation = j.value("orientation", 0.0);
    o.band_seed = j.value("band_seed", std::uint64_t{0});
}

void to_json(nlohmann::json& j, const GroupSpec& g) {
    j = {{"arrangement", to_string(g.arrangement)}, {"members", g.members}, {"angle", g.angle}};
}

void from_json(const nlohmann::json& j, GroupSpec& g) {
    g.arrangement = arrangement_from_string(j.at("arrangement").get<std::string>());
    g.members = j.at("members").get<std::vector<int>>();
    g.angle = j.value("angle", 60.0);
}

void to_json(nlohmann::json& j, const SynthSpec& s) {
    j = {{"width", s.width},   {"height", s.height}, {"objects", s.objects}, {"groups", s.groups},
         {"rng_seed", s.rng_seed}, {"noise", s.noise}, {"margin", s.margin}};
}

void from_json(const nlohmann::json& j, SynthSpec& s) {
    // Shorthand forms for the canned layouts.
    if (j.contains("preset")) {
        const auto preset = j.at("preset").get<std::string>();
        const auto seed = j.value("rng_seed", std::uint64_t{1});
        if (preset == "isolated") s = isolated_metaphase(j.value("count", 46), seed, j.value("classes", 23));
        else if (preset == "crossing_pair") s = crossing_pair(j.value("angle", 60.0), seed);
        else if (preset == "singleton") s = singleton(j.value("bend", 0.0), seed);
        else if (preset == "overlap_metaphase") s = metaphase_with_overlap(seed, j.value("angle", 60.0));
        else fail(ErrorCode::InvalidArgument, "unknown synth preset: " + preset);
        return;
    }
    s.width = j.value("width", 512);
    s.height = j.value("height", 512);
    s.objects = j.at("objects").get<std::vector<ObjectSpec>>();
    s.groups = j.value("groups", std::vector<GroupSpec>{});
    s.rng_seed = j.value("rng_seed", std::uint64_t{1});
    s.noise = j.value("noise", 0);
    s.margin = j.value("margin", 6);
}

static std::string mask_file(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "masks/obj_%03zu.png", index);
    return buf;
}

nlohmann::json truth_json(const GroundTruth& gt) {
    nlohmann::json objects = nlohmann::json::array();
    for (std::size_t i = 0; i < gt.masks.size(); ++i) {
        nlohmann::json axis = nlohmann::json::array();
        for (const auto& p : gt.axes[i]) axis.push_back({p.x, p.y});
        objects.push_back({{"index", i}, {"class", gt.classes[i]}, {"group", gt.group_of[i]},
                           {"axis", axis}, {"mask", mask_file(i)}});
    }
    nlohmann::json crossings = nlohmann::json::array();
    for (const auto& c : gt.crossings)
        crossings.push_back({{"x", c.position.x}, {"y", c.position.y}, {"first", c.first}, {"second", c.second}});
    return {{"width", gt.metaphase.width()}, {"height", gt.metaphase.height()}, {"objects", objects},
            {"crossings", crossings}, {"draw_order", gt.draw_order}};
}

void write_ground_truth(const std::filesystem::path& dir, const GroundTruth& gt) {
    std::filesystem::create_directories(dir / "masks");
    write_png(dir / "metaphase.png", gt.metaphase);
    write_text(dir / "truth.json", truth_json(gt).dump(2) + "\n");
    for (std::size_t i = 0; i < gt.masks.size(); ++i) write_png(dir / mask_file(i), mask_to_gray(gt.masks[i]));
}

}  // namespace karyoseg::synth
