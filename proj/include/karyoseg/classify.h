#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "karyoseg/segmentation.h"

namespace karyoseg {

/// Per-crop class scores. Class k (1-based) is column k - 1.
struct ScoreMatrix {
    int classes = 23;
    std::vector<std::string> ids;
    std::vector<std::vector<double>> rows;

    std::size_t size() const { return ids.size(); }
    /// Row index of a crop id; throws MissingScore when absent.
    std::size_t row_of(const std::string& id) const;
    double score(std::size_t row, int cls) const { return rows[row][static_cast<std::size_t>(cls - 1)]; }

    /// At least one row and class, unique ids, rows of length `classes`,
    /// finite non-negative values with at least one strictly positive per row.
    void validate() const;
};

void to_json(nlohmann::json& j, const ScoreMatrix& m);
void from_json(const nlohmann::json& j, ScoreMatrix& m);

enum class Provenance { Argmax, Redistributed };

std::string_view to_string(Provenance p);
Provenance provenance_from_string(std::string_view s);

struct AssignedClass {
    int cls = 1;
    Provenance provenance = Provenance::Argmax;

    friend bool operator==(const AssignedClass&, const AssignedClass&) = default;
};

/// Crop id -> class, ordered by id.
using Assignment = std::map<std::string, AssignedClass>;

nlohmann::json assignment_json(const Assignment& a);
Assignment assignment_from_json(const nlohmann::json& j);

/// Per-class counts of an assignment over `classes` classes (index 0 = class 1).
std::vector<int> class_counts(const Assignment& a, int classes);

struct ExpectedCounts {
    std::vector<int> per_class;
    /// Declared total minus the per-class sum: -1 for 45, +1 for 47.
    int residual = 0;

    int total() const;
};

/// Two per class, plus a declared residual when `total` is 2C - 1 or 2C + 1.
/// Any other total throws InvalidArgument.
ExpectedCounts expected_counts(int total, int classes);

/// Each crop goes to its highest-scoring class, ties to the smallest class.
Assignment argmax_assign(const ScoreMatrix& scores);

struct Move {
    std::string crop;
    int from = 0;
    int to = 0;
};

struct Distribution {
    Assignment assignment;
    std::vector<Move> moves;
    /// Per class (index 0 = class 1): final count minus expected count.
    /// Negative entries are unresolved deficits, positive ones surpluses.
    std::vector<int> residual;

    bool exact() const;
};

nlohmann::json distribution_report(const Distribution& d);

/// Count-constrained redistribution. While some class is lacking and some is
/// crowded: take the lacking class L with the largest deficit (ties: smallest
/// index); among crops in crowded classes take the one scoring highest for L
/// (ties: larger margin of that score over its current class's score, then
/// smallest crop id); move it to L. A crop is never taken from a class at or
/// below its expected count.
Distribution distribute(const ScoreMatrix& scores, const Assignment& assignment, const ExpectedCounts& expected);

/// Source of class scores for a crop.
class ScoreProvider {
public:
    virtual ~ScoreProvider() = default;
    virtual int classes() const = 0;
    virtual std::vector<double> score(const CropRecord& crop) const = 0;
};

/// Replays externally computed rows by crop id.
class FileScoreProvider final : public ScoreProvider {
public:
    explicit FileScoreProvider(ScoreMatrix matrix);
    int classes() const override { return matrix_.classes; }
    std::vector<double> score(const CropRecord& crop) const override;

private:
    ScoreMatrix matrix_;
};

/// Nearest-centroid scoring on (extent along the long axis, mask area), with
/// centroids taken from the synthetic generator's nominal class geometry.
/// Only meaningful on synthetic metaphases.
class ToyScoreProvider final : public ScoreProvider {
public:
    explicit ToyScoreProvider(int classes = 23);
    int classes() const override { return classes_; }
    std::vector<double> score(const CropRecord& crop) const override;

private:
    int classes_;
};

/// One row per crop, in crop order.
ScoreMatrix score_crops(const std::vector<CropRecord>& crops, const ScoreProvider& provider);

}  // namespace karyoseg
