#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <functional>
#include <random>

#include "karyoseg/classify.h"
#include "karyoseg/synth.h"
#include "support.h"

using namespace karyoseg;
using namespace karyoseg::testing;

namespace {

std::vector<int> classes_of(const Assignment& a, const ScoreMatrix& m) {
    std::vector<int> out;
    for (const auto& id : m.ids) out.push_back(a.at(id).cls);
    return out;
}

}  // namespace

TEST_CASE("score matrix validation and JSON") {
    auto m = matrix({{0.1, 0.9}, {0.5, 0.5}});
    CHECK_NOTHROW(m.validate());
    const nlohmann::json j = m;
    CHECK(j.at("classes") == 2);
    CHECK(j.at("rows")[0].at("id") == "crop_000");
    CHECK(j.get<ScoreMatrix>().rows == m.rows);

    auto bad = m;
    bad.rows[1] = {0.0, 0.0};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = m;
    bad.rows[0] = {-0.1, 1.0};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad.rows[0] = {std::nan(""), 1.0};
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = m;
    bad.ids[1] = bad.ids[0];
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = m;
    bad.rows[0].push_back(1.0);
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK_THROWS_AS(ScoreMatrix{}.validate(), Error);
    try {
        m.row_of("crop_099");
        FAIL("expected a missing score");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingScore);
    }
}

TEST_CASE("argmax assignment") {
    const auto a = argmax_assign(matrix({{0.1, 0.9}, {0.5, 0.5}}));
    CHECK(a.at("crop_000").cls == 2);
    CHECK(a.at("crop_001").cls == 1);
    CHECK(a.at("crop_001").provenance == Provenance::Argmax);

    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 46; ++i) {
        std::vector<double> r(23, 0.01);
        r[static_cast<std::size_t>(i / 2)] = 0.9;
        rows.push_back(r);
    }
    const auto peaked = argmax_assign(matrix(rows));
    CHECK(class_counts(peaked, 23) == std::vector<int>(23, 2));

    std::mt19937 rng(3);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    for (int t = 0; t < 100; ++t) {
        auto m = random_matrix(rng, 10, 5);
        const auto before = argmax_assign(m);
        for (auto& r : m.rows) {
            const double s = scale(rng);
            for (auto& v : r) v *= s;
        }
        // Rescaling may break exact ties differently only through rounding; the
        // random rows carry no exact ties.
        CHECK(argmax_assign(m) == before);
    }
}

TEST_CASE("expected counts") {
    const auto e46 = expected_counts(46, 23);
    CHECK(e46.per_class == std::vector<int>(23, 2));
    CHECK(e46.residual == 0);
    CHECK(e46.total() == 46);
    const auto e47 = expected_counts(47, 23);
    CHECK(e47.per_class == std::vector<int>(23, 2));
    CHECK(e47.residual == 1);
    CHECK(expected_counts(45, 23).residual == -1);
    CHECK(expected_counts(48, 24).residual == 0);
    CHECK_THROWS_AS(expected_counts(40, 23), Error);
}

TEST_CASE("distribute hand-traced examples") {
    // Already exact: nothing moves.
    const auto exact = matrix({{0.9, 0.1}, {0.8, 0.2}, {0.1, 0.9}, {0.3, 0.7}});
    const auto d0 = distribute(exact, argmax_assign(exact), expected_counts(4, 2));
    CHECK(d0.moves.empty());
    CHECK(d0.assignment == argmax_assign(exact));

    // argmax = {A, A, A, B}; crop_001 has the highest B score and moves.
    const auto m = matrix({{0.9, 0.1}, {0.6, 0.4}, {0.8, 0.3}, {0.2, 0.8}});
    const auto a = argmax_assign(m);
    CHECK(class_counts(a, 2) == std::vector<int>{3, 1});
    const auto d = distribute(m, a, expected_counts(4, 2));
    REQUIRE(d.moves.size() == 1);
    CHECK(d.moves[0].crop == "crop_001");
    CHECK(d.moves[0].from == 1);
    CHECK(d.moves[0].to == 2);
    CHECK(d.assignment.at("crop_001") == AssignedClass{2, Provenance::Redistributed});
    CHECK(class_counts(d.assignment, 2) == std::vector<int>{2, 2});
    CHECK(d.exact());

    const auto report = distribution_report(d);
    CHECK(report.at("moves").size() == 1);
    CHECK(report.at("exact") == true);
    CHECK(assignment_json(d.assignment).at("crop_001") ==
          nlohmann::json{{"class", 2}, {"provenance", "redistributed"}});
    CHECK(assignment_from_json(assignment_json(d.assignment)) == d.assignment);
}

TEST_CASE("distribute tie rules") {
    // Equal B scores: the larger margin over the current class wins.
    const auto m = matrix({{0.9, 0.5}, {0.6, 0.5}, {0.7, 0.1}, {0.1, 0.8}});
    const auto d = distribute(m, argmax_assign(m), expected_counts(4, 2));
    REQUIRE(d.moves.size() == 1);
    CHECK(d.moves[0].crop == "crop_001");
    // Equal score and margin: the smaller crop id wins.
    const auto same = matrix({{0.6, 0.5}, {0.6, 0.5}, {0.7, 0.1}, {0.1, 0.8}});
    CHECK(distribute(same, argmax_assign(same), expected_counts(4, 2)).moves[0].crop == "crop_000");
    // A deficit of three is filled from the crowded class one move at a time.
    const auto three = matrix({{0.9, 0.2, 0.3}, {0.9, 0.3, 0.2}, {0.9, 0.1, 0.1}, {0.9, 0.1, 0.1},
                               {0.9, 0.1, 0.1}, {0.1, 0.1, 0.9}});
    ExpectedCounts e{{2, 3, 1}, 0};
    const auto d3 = distribute(three, argmax_assign(three), e);
    REQUIRE(d3.moves.size() == 3);
    CHECK(d3.moves[0].to == 2);
    CHECK(d3.moves[1].to == 2);
    CHECK(d3.moves[2].to == 2);
    CHECK(d3.exact());
    // Largest deficit first, equal deficits by smaller class index.
    const auto four = matrix({{0.9, 0.2, 0.3}, {0.9, 0.3, 0.2}, {0.9, 0.1, 0.4}, {0.9, 0.5, 0.1}});
    const auto d4 = distribute(four, argmax_assign(four), ExpectedCounts{{1, 2, 1}, 0});
    REQUIRE(d4.moves.size() == 3);
    CHECK(d4.moves[0].to == 2);
    CHECK(d4.moves[0].crop == "crop_003");
    CHECK(d4.moves[1].to == 2);
    CHECK(d4.moves[1].crop == "crop_001");
    CHECK(d4.moves[2].to == 3);
    CHECK(d4.moves[2].crop == "crop_002");
}

TEST_CASE("distribute with abnormal totals reports residuals") {
    // 45 crops over 23 classes: class 7 has one, nothing is crowded.
    std::vector<std::vector<double>> rows;
    for (int c = 1; c <= 23; ++c)
        for (int k = 0; k < (c == 7 ? 1 : 2); ++k) {
            std::vector<double> r(23, 0.01);
            r[static_cast<std::size_t>(c - 1)] = 1.0;
            rows.push_back(r);
        }
    const auto m = matrix(rows);
    const auto d = distribute(m, argmax_assign(m), expected_counts(45, 23));
    CHECK(d.moves.empty());
    CHECK_FALSE(d.exact());
    CHECK(d.residual[6] == -1);
    CHECK(distribution_report(d).at("deficits") == nlohmann::json{{"7", 1}});

    // 47: one surplus remains after every deficit is met.
    rows.push_back(rows[0]);
    rows.push_back(rows[0]);
    const auto m47 = matrix(rows);
    const auto d47 = distribute(m47, argmax_assign(m47), expected_counts(47, 23));
    CHECK(d47.moves.size() == 1);
    CHECK(d47.residual[0] == 1);
    CHECK(distribution_report(d47).at("surpluses") == nlohmann::json{{"1", 1}});
}

TEST_CASE("distribute property: exact counts, bounded moves, crowded sources only") {
    std::mt19937 rng(46);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = trial % 2 == 0 ? 46 : 2 + static_cast<int>(rng() % 45);
        const int classes = trial % 2 == 0 ? 23 : 1 + static_cast<int>(rng() % 23);
        const auto m = random_matrix(rng, n, classes);
        // Random expected counts summing to n.
        std::vector<int> expected(static_cast<std::size_t>(classes), 0);
        if (n == 2 * classes) expected.assign(static_cast<std::size_t>(classes), 2);
        else
            for (int i = 0; i < n; ++i) ++expected[rng() % static_cast<unsigned>(classes)];
        const auto start = argmax_assign(m);
        const auto d = distribute(m, start, ExpectedCounts{expected, 0});
        CHECK(class_counts(d.assignment, classes) == expected);
        CHECK(static_cast<int>(d.moves.size()) <= n);
        auto counts = class_counts(start, classes);
        for (const auto& mv : d.moves) {
            CHECK(counts[static_cast<std::size_t>(mv.from - 1)] > expected[static_cast<std::size_t>(mv.from - 1)]);
            CHECK(counts[static_cast<std::size_t>(mv.to - 1)] < expected[static_cast<std::size_t>(mv.to - 1)]);
            --counts[static_cast<std::size_t>(mv.from - 1)];
            ++counts[static_cast<std::size_t>(mv.to - 1)];
        }
        for (const auto& [id, c] : d.assignment)
            CHECK((c.provenance == Provenance::Redistributed) == (start.at(id).cls != c.cls));
    }
}

TEST_CASE("one-swap errors are repaired to the brute-force optimum") {
    std::mt19937 rng(8);
    int instances = 0;
    for (int n = 4; n <= 8; n += 2) {
        const int classes = n / 2;
        for (int t = 0; t < 40; ++t) {
            const auto [m, truth] = one_swap_instance(rng, n);
            const auto start = argmax_assign(m);
            REQUIRE(class_counts(start, classes) != std::vector<int>(static_cast<std::size_t>(classes), 2));

            int optima = 0;
            const auto best = brute_force(m, std::vector<int>(static_cast<std::size_t>(classes), 2), &optima);
            REQUIRE(optima == 1);
            REQUIRE(best == truth);
            const auto d = distribute(m, start, expected_counts(n, classes));
            CHECK(classes_of(d.assignment, m) == best);
            CHECK(d.moves.size() == 1);
            ++instances;
        }
    }
    CHECK(instances == 120);
}

TEST_CASE("file score provider replays rows") {
    const auto m = matrix({{0.1, 0.9}, {0.5, 0.5}, {0.3, 0.4}});
    FileScoreProvider p(m);
    CropRecord c;
    c.id = "crop_002";
    CHECK(p.score(c) == std::vector<double>{0.3, 0.4});
    c.id = "crop_007";
    try {
        p.score(c);
        FAIL("expected a missing score");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingScore);
    }
}

TEST_CASE("toy provider recognises synthetic class templates") {
    for (int cls : {1, 12, 23}) {
        synth::SynthSpec spec;
        spec.width = spec.height = 160;
        synth::ObjectSpec o;
        o.class_index = cls;
        o.length = synth::class_length(cls);
        o.width = synth::kNominalWidth;
        o.orientation = 30;
        o.band_seed = 4;
        spec.objects.push_back(o);
        const auto gt = synth::generate(spec);
        const auto ex = extract_objects(gt.metaphase, PipelineConfig{});
        REQUIRE(ex.crops.size() == 1);
        const ToyScoreProvider toy;
        const auto scores = score_crops(ex.crops, toy);
        CHECK(scores.classes == 23);
        CHECK(argmax_assign(scores).at("crop_000").cls == cls);
    }
}
