#include <doctest.h>

#include <cmath>

#include "karyoseg/imgcore.h"
#include "karyoseg/synth.h"

using namespace karyoseg;
using namespace karyoseg::synth;

namespace {

double point_segment_distance(Point2d p, Point2d a, Point2d b) {
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    const double t = len2 > 0 ? std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0) : 0.0;
    return std::hypot(p.x - (a.x + t * dx), p.y - (a.y + t * dy));
}

double polyline_distance(Point2d p, const std::vector<Point2d>& axis) {
    double best = 1e300;
    for (std::size_t i = 1; i < axis.size(); ++i) best = std::min(best, point_segment_distance(p, axis[i - 1], axis[i]));
    return best;
}

double polyline_length(const std::vector<Point2d>& axis) {
    double len = 0;
    for (std::size_t i = 1; i < axis.size(); ++i) len += std::hypot(axis[i].x - axis[i - 1].x, axis[i].y - axis[i - 1].y);
    return len;
}

}  // namespace

TEST_CASE("46 isolated objects: disjoint masks, no crossings") {
    const auto spec = isolated_metaphase(46, 3);
    const auto gt = generate(spec);
    REQUIRE(gt.masks.size() == 46);
    CHECK(gt.crossings.empty());
    CHECK(gt.classes.size() == 46);
    CHECK(gt.classes[0] == 1);
    CHECK(gt.classes[1] == 1);
    CHECK(gt.classes[45] == 23);
    for (std::size_t i = 0; i < gt.masks.size(); ++i) {
        CHECK(gt.masks[i].count() > 0);
        for (std::size_t j = i + 1; j < gt.masks.size(); ++j) CHECK(intersection_count(gt.masks[i], gt.masks[j]) == 0);
    }
}

TEST_CASE("ground-truth masks are the capsules around the recorded axes") {
    const auto spec = isolated_metaphase(10, 8);
    const auto gt = generate(spec);
    for (std::size_t i = 0; i < gt.masks.size(); ++i) {
        const double r = spec.objects[i].width / 2;
        CHECK(polyline_length(gt.axes[i]) == doctest::Approx(spec.objects[i].length).epsilon(1e-9));
        const auto& m = gt.masks[i];
        for (int y = 0; y < m.height(); ++y)
            for (int x = 0; x < m.width(); ++x) {
                const double d = polyline_distance({double(x), double(y)}, gt.axes[i]);
                if (std::abs(d - r) > 1e-9) CHECK(m.test(x, y) == (d < r));
            }
    }
}

TEST_CASE("rendered foreground equals the mask union within one pixel") {
    for (std::uint64_t seed : {1u, 2u}) {
        const auto gt = generate(metaphase_with_overlap(seed));
        BinaryMask uni(gt.metaphase.width(), gt.metaphase.height());
        for (const auto& m : gt.masks) uni = mask_union(uni, m);
        const auto grown = morphology(uni, Kernel::centered_box(3, 3), MorphMode::Dilate);
        for (int y = 0; y < uni.height(); ++y)
            for (int x = 0; x < uni.width(); ++x) {
                const bool dark = gt.metaphase.at(x, y) < 250;
                if (uni.test(x, y)) CHECK(dark);
                if (dark) CHECK(grown.test(x, y));
            }
    }
}

TEST_CASE("overlapping pair at 60 degrees records exactly one crossing") {
    const auto gt = generate(crossing_pair(60.0, 5));
    REQUIRE(gt.crossings.size() == 1);
    const auto& c = gt.crossings[0];
    CHECK(c.first == 0);
    CHECK(c.second == 1);
    CHECK(polyline_distance(c.position, gt.axes[0]) < 1e-9);
    CHECK(polyline_distance(c.position, gt.axes[1]) < 1e-9);
    // The crossing angle between the two straight axes.
    auto dir = [](const std::vector<Point2d>& a) { return std::atan2(a.back().y - a.front().y, a.back().x - a.front().x); };
    double diff = std::abs(dir(gt.axes[0]) - dir(gt.axes[1])) * 180.0 / M_PI;
    diff = std::fmod(diff, 180.0);
    CHECK(std::min(diff, 180.0 - diff) == doctest::Approx(60.0).epsilon(1e-6));
    // The masks intersect around the crossing.
    const auto inter = mask_intersection(gt.masks[0], gt.masks[1]);
    CHECK(inter.count() > 0);
    CHECK(inter.test(static_cast<int>(std::lround(c.position.x)), static_cast<int>(std::lround(c.position.y))));
    // The top object's intensities win inside the intersection.
    CHECK(gt.draw_order == std::vector<int>{0, 1});
}

TEST_CASE("top object covers the intersection") {
    SynthSpec spec;
    spec.width = spec.height = 120;
    ObjectSpec a;
    a.length = 80;
    a.width = 10;
    a.band_seed = 1;
    ObjectSpec b = a;
    b.band_seed = 2;
    spec.objects = {a, b};
    spec.groups = {{Arrangement::Overlapping, {0, 1}, 90.0}};
    const auto gt = generate(spec);
    const auto inter = mask_intersection(gt.masks[0], gt.masks[1]);
    const auto core = morphology(inter, Kernel::centered_box(3, 3), MorphMode::Erode);
    REQUIRE(core.count() > 0);
    for (int y = 0; y < core.height(); ++y)
        for (int x = 0; x < core.width(); ++x) {
            if (!core.test(x, y)) continue;
            // Noise-free render: the pixel is exactly the top band value at its arclength.
            const auto& axis = gt.axes[1];
            const double dx = axis[1].x - axis[0].x, dy = axis[1].y - axis[0].y, len = std::hypot(dx, dy);
            const double t = ((x - axis[0].x) * dx + (y - axis[0].y) * dy) / len;
            CHECK(gt.metaphase.at(x, y) == band_intensity(2, t));
        }
}

TEST_CASE("cluster and touching arrangements") {
    SynthSpec spec;
    spec.width = spec.height = 300;
    for (int i = 0; i < 4; ++i) {
        ObjectSpec o;
        o.length = i == 0 ? 120 : 60;
        o.width = 10;
        o.band_seed = static_cast<std::uint64_t>(i);
        o.orientation = 20;
        spec.objects.push_back(o);
    }
    spec.groups = {{Arrangement::Cluster, {0, 1, 2}, 70.0}, {Arrangement::Touching, {3}, 90.0}};
    CHECK_THROWS_AS(generate(spec), Error);  // touching needs two members

    spec.groups = {{Arrangement::Cluster, {0, 1, 2}, 70.0}};
    const auto gt = generate(spec);
    CHECK(gt.crossings.size() == 2);
    CHECK(gt.group_of == std::vector<int>{0, 0, 0, -1});

    SynthSpec touch = spec;
    touch.objects.resize(2);
    touch.groups = {{Arrangement::Touching, {0, 1}, 90.0}};
    const auto t = generate(touch);
    CHECK(t.crossings.empty());
    CHECK(intersection_count(t.masks[0], t.masks[1]) == 0);
    const auto grown = morphology(t.masks[0], Kernel::centered_box(5, 5), MorphMode::Dilate);
    CHECK(intersection_count(grown, t.masks[1]) > 0);
}

TEST_CASE("generation is deterministic per seed") {
    const auto a = generate(metaphase_with_overlap(9));
    const auto b = generate(metaphase_with_overlap(9));
    CHECK(a.metaphase == b.metaphase);
    CHECK(a.masks == b.masks);
    const auto c = generate(metaphase_with_overlap(10));
    CHECK_FALSE(a.metaphase == c.metaphase);
}

TEST_CASE("layout failure and invalid specs") {
    auto crowded = isolated_metaphase(46, 1);
    crowded.width = crowded.height = 150;
    try {
        generate(crowded);
        FAIL("expected a layout failure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::LayoutFailure);
    }
    SynthSpec bad;
    bad.objects.push_back({});
    bad.objects[0].length = 0;
    CHECK_THROWS_AS(generate(bad), Error);
    SynthSpec noisy = isolated_metaphase(2, 1);
    noisy.noise = 6;
    CHECK_THROWS_AS(generate(noisy), Error);
    SynthSpec twice = isolated_metaphase(3, 1);
    twice.groups = {{Arrangement::Overlapping, {0, 1}, 45}, {Arrangement::Overlapping, {1, 2}, 45}};
    CHECK_THROWS_AS(generate(twice), Error);
}

TEST_CASE("class lengths and band profile") {
    CHECK(class_length(1) > class_length(2));
    CHECK(class_length(22) > class_length(23));
    CHECK(class_length(23) > 2 * kNominalWidth);
    for (double t = 0; t < 100; t += 0.7) {
        const auto v = band_intensity(42, t);
        CHECK(v >= 45);
        CHECK(v <= 165);
        CHECK(v == band_intensity(42, t));
    }
}

TEST_CASE("spec JSON round trip and presets") {
    const auto spec = metaphase_with_overlap(4, 35.0);
    const nlohmann::json j = spec;
    const auto back = j.get<SynthSpec>();
    CHECK(nlohmann::json(back) == j);
    CHECK(generate(back).metaphase == generate(spec).metaphase);

    const auto preset = nlohmann::json{{"preset", "crossing_pair"}, {"angle", 45.0}, {"rng_seed", 7}}.get<SynthSpec>();
    CHECK(nlohmann::json(preset) == nlohmann::json(crossing_pair(45.0, 7)));
    CHECK_THROWS_AS((nlohmann::json{{"preset", "nope"}}.get<SynthSpec>()), Error);
    CHECK(arrangement_from_string(to_string(Arrangement::Cluster)) == Arrangement::Cluster);
    CHECK_THROWS_AS(arrangement_from_string("stacked"), Error);
}
