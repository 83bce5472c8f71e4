#include "karyoseg/classify.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "karyoseg/synth.h"

namespace karyoseg {

std::size_t ScoreMatrix::row_of(const std::string& id) const {
    const auto it = std::find(ids.begin(), ids.end(), id);
    if (it == ids.end()) fail(ErrorCode::MissingScore, "no score row for crop " + id);
    return static_cast<std::size_t>(it - ids.begin());
}

void ScoreMatrix::validate() const {
    require(classes >= 1, "score matrix needs at least one class");
    require(!ids.empty(), "score matrix needs at least one row");
    require(ids.size() == rows.size(), "score matrix ids and rows differ in length");
    std::set<std::string> seen;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        require(seen.insert(ids[r]).second, "duplicate score row for crop " + ids[r]);
        require(rows[r].size() == static_cast<std::size_t>(classes),
                "score row for " + ids[r] + " has " + std::to_string(rows[r].size()) + " values, expected " +
                    std::to_string(classes));
        bool positive = false;
        for (double v : rows[r]) {
            require(std::isfinite(v) && v >= 0.0, "scores must be finite and non-negative (crop " + ids[r] + ")");
            positive = positive || v > 0.0;
        }
        require(positive, "score row for " + ids[r] + " has no positive value");
    }
}

void to_json(nlohmann::json& j, const ScoreMatrix& m) {
    j = nlohmann::json{{"classes", m.classes}, {"rows", nlohmann::json::array()}};
    for (std::size_t r = 0; r < m.size(); ++r) j["rows"].push_back({{"id", m.ids[r]}, {"scores", m.rows[r]}});
}

void from_json(const nlohmann::json& j, ScoreMatrix& m) {
    require(j.is_object() && j.contains("rows"), "scores must be an object with a rows array");
    m = ScoreMatrix{};
    m.classes = j.value("classes", 23);
    for (const auto& row : j.at("rows")) {
        m.ids.push_back(row.at("id").get<std::string>());
        m.rows.push_back(row.at("scores").get<std::vector<double>>());
    }
    m.validate();
}

std::string_view to_string(Provenance p) { return p == Provenance::Argmax ? "argmax" : "redistributed"; }

Provenance provenance_from_string(std::string_view s) {
    if (s == "argmax") return Provenance::Argmax;
    if (s == "redistributed") return Provenance::Redistributed;
    fail(ErrorCode::InvalidArgument, "unknown provenance: " + std::string(s));
}

nlohmann::json assignment_json(const Assignment& a) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [id, c] : a) j[id] = {{"class", c.cls}, {"provenance", to_string(c.provenance)}};
    return j;
}

Assignment assignment_from_json(const nlohmann::json& j) {
    require(j.is_object(), "assignment must be a JSON object");
    Assignment a;
    for (const auto& [id, v] : j.items())
        a[id] = {v.at("class").get<int>(), provenance_from_string(v.at("provenance").get<std::string>())};
    return a;
}

std::vector<int> class_counts(const Assignment& a, int classes) {
    std::vector<int> counts(static_cast<std::size_t>(classes), 0);
    for (const auto& [id, c] : a) {
        require(c.cls >= 1 && c.cls <= classes, "crop " + id + " has class " + std::to_string(c.cls) + " outside 1.." +
                                                    std::to_string(classes));
        ++counts[static_cast<std::size_t>(c.cls - 1)];
    }
    return counts;
}

int ExpectedCounts::total() const {
    int sum = residual;
    for (int c : per_class) sum += c;
    return sum;
}

ExpectedCounts expected_counts(int total, int classes) {
    require(classes >= 1, "classes must be positive");
    const int base = 2 * classes;
    require(std::abs(total - base) <= 1, "expected total " + std::to_string(total) + " is inconsistent with " +
                                             std::to_string(classes) + " classes (allowed " +
                                             std::to_string(base - 1) + ".." + std::to_string(base + 1) + ")");
    return {std::vector<int>(static_cast<std::size_t>(classes), 2), total - base};
}

Assignment argmax_assign(const ScoreMatrix& scores) {
    scores.validate();
    Assignment out;
    for (std::size_t r = 0; r < scores.size(); ++r) {
        const auto& row = scores.rows[r];
        const auto best = std::max_element(row.begin(), row.end());  // first maximum
        out[scores.ids[r]] = {static_cast<int>(best - row.begin()) + 1, Provenance::Argmax};
    }
    return out;
}

bool Distribution::exact() const {
    return std::all_of(residual.begin(), residual.end(), [](int r) { return r == 0; });
}

nlohmann::json distribution_report(const Distribution& d) {
    nlohmann::json moves = nlohmann::json::array();
    for (const auto& m : d.moves) moves.push_back({{"crop", m.crop}, {"from", m.from}, {"to", m.to}});
    nlohmann::json deficits = nlohmann::json::object(), surpluses = nlohmann::json::object();
    for (std::size_t c = 0; c < d.residual.size(); ++c) {
        if (d.residual[c] < 0) deficits[std::to_string(c + 1)] = -d.residual[c];
        if (d.residual[c] > 0) surpluses[std::to_string(c + 1)] = d.residual[c];
    }
    return {{"moves", moves}, {"exact", d.exact()}, {"deficits", deficits}, {"surpluses", surpluses}};
}

Distribution distribute(const ScoreMatrix& scores, const Assignment& assignment, const ExpectedCounts& expected) {
    scores.validate();
    const int C = scores.classes;
    require(static_cast<int>(expected.per_class.size()) == C, "expected counts must cover every class");
    for (int e : expected.per_class) require(e >= 0, "expected counts must be non-negative");
    require(assignment.size() == scores.size(), "assignment and score matrix cover different crops");
    for (const auto& [id, c] : assignment) scores.row_of(id);

    Distribution d{assignment, {}, {}};
    auto counts = class_counts(d.assignment, C);
    auto need = [&](int cls) { return expected.per_class[static_cast<std::size_t>(cls - 1)]; };
    auto count = [&](int cls) -> int& { return counts[static_cast<std::size_t>(cls - 1)]; };

    for (;;) {
        int lacking = 0;
        for (int c = 1; c <= C; ++c)
            if (count(c) < need(c) && (lacking == 0 || need(c) - count(c) > need(lacking) - count(lacking)))
                lacking = c;
        if (lacking == 0) break;

        const std::string* pick = nullptr;
        double pick_score = 0, pick_margin = 0;
        for (const auto& [id, a] : d.assignment) {  // ascending id
            if (count(a.cls) <= need(a.cls)) continue;
            const auto r = scores.row_of(id);
            const double s = scores.score(r, lacking);
            const double margin = s - scores.score(r, a.cls);
            if (pick == nullptr || s > pick_score || (s == pick_score && margin > pick_margin)) {
                pick = &id;
                pick_score = s;
                pick_margin = margin;
            }
        }
        if (pick == nullptr) break;

        auto& a = d.assignment.at(*pick);
        d.moves.push_back({*pick, a.cls, lacking});
        --count(a.cls);
        ++count(lacking);
        a = {lacking, Provenance::Redistributed};
    }
    for (int c = 1; c <= C; ++c) d.residual.push_back(count(c) - need(c));
    return d;
}

FileScoreProvider::FileScoreProvider(ScoreMatrix matrix) : matrix_(std::move(matrix)) { matrix_.validate(); }

std::vector<double> FileScoreProvider::score(const CropRecord& crop) const {
    return matrix_.rows[matrix_.row_of(crop.id)];
}

ToyScoreProvider::ToyScoreProvider(int classes) : classes_(classes) {
    require(classes >= 1, "classes must be positive");
}

std::vector<double> ToyScoreProvider::score(const CropRecord& crop) const {
    require(crop.mask.count() > 0, "cannot score an empty crop");
    const double w = synth::kNominalWidth;
    const double area = static_cast<double>(crop.mask.count());
    const double extent = std::max(crop.bbox.width, crop.bbox.height);
    // Adjacent classes differ by 2.5 px of length: 2.5 px of extent, 2.5 w px of area.
    const double step = synth::class_length(1) - synth::class_length(2);
    std::vector<double> out;
    for (int c = 1; c <= classes_; ++c) {
        const double len = synth::class_length(c);
        const double da = (area - (len * w + std::numbers::pi * w * w / 4)) / (step * w);
        // Bends shorten the extent, so it only weakly informs the score.
        const double de = (extent - (len + w + 1)) / step;
        out.push_back(1.0 / (1.0 + da * da + 0.1 * de * de));
    }
    return out;
}

ScoreMatrix score_crops(const std::vector<CropRecord>& crops, const ScoreProvider& provider) {
    ScoreMatrix m;
    m.classes = provider.classes();
    for (const auto& c : crops) {
        auto row = provider.score(c);
        require(row.size() == static_cast<std::size_t>(m.classes), "provider returned a row of the wrong length");
        m.ids.push_back(c.id);
        m.rows.push_back(std::move(row));
    }
    return m;
}

}  // namespace karyoseg
