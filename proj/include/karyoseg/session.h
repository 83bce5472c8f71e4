#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "karyoseg/classify.h"
#include "karyoseg/config.h"
#include "karyoseg/overlap.h"
#include "karyoseg/segmentation.h"
#include "karyoseg/watershed.h"

namespace karyoseg {

/// Per-crop progress. Seeding and separation only ever move a crop forward;
/// classification marks every unit once an assignment exists.
enum class CropStatus { Pending, Seeded, Separated, Classified };

std::string_view to_string(CropStatus s);
CropStatus crop_status_from_string(std::string_view s);

struct CropEntry {
    CropRecord crop;
    CropStatus status = CropStatus::Pending;
    std::vector<BranchPoint> branch_points;  ///< crop coordinates
    std::vector<int> separated_labels;       ///< labels of the current separation outputs
};

struct SegmentPreview {
    SegmentMap map;
    nlohmann::json stats;  ///< per-label pixel counts and bounding boxes, line pixel count
};

/// Deterministic session id from the source bytes and the configuration.
std::string session_id_for(std::span<const std::uint8_t> image_bytes, const PipelineConfig& config);

/// One metaphase worked on end to end. The directory is the only state: every
/// mutation is written through before it returns, and `open` restores a
/// session completely.
///
/// Layout:
///   session.json                 id, config, per-crop status and geometry
///   source.png, edges.png        input and its Canny edge map
///   crops/{cid}.png|.json        crop image and {offset, bbox, kind}
///   crops/{cid}_mask.png         crop mask (0/255)
///   seeds/{cid}.json             operator seeds
///   seeds/{cid}_labels.png       watershed label raster of the last preview
///   separated/{cid}_{k}.png|.json separated chromosome and its provenance
///   scores.json, assignment.json, distribution.json
///   karyogram.json, karyogram.png
class Session {
public:
    /// Runs extraction and overlap analysis, then writes a fresh session into
    /// `dir` (which must not exist). On failure nothing is left behind. A
    /// constant image still yields a session, with zero crops and a warning.
    static Session create(const std::filesystem::path& dir, const GrayImage& source, const PipelineConfig& config,
                          const std::string& id);
    /// Throws NotFound when `dir` holds no session.
    static Session open(const std::filesystem::path& dir);

    const std::string& id() const { return id_; }
    const std::filesystem::path& dir() const { return dir_; }
    const PipelineConfig& config() const { return config_; }
    const std::vector<CropEntry>& crops() const { return crops_; }
    const std::optional<std::string>& warning() const { return warning_; }

    /// Throws NotFound for an unknown crop id.
    const CropEntry& crop(const std::string& cid) const;

    nlohmann::json summary() const;

    /// Stores the seeds and returns the raw watershed over the crop (chromosome
    /// and intersection labels confined to the crop mask). Any crop may be
    /// seeded, including ones not flagged as suspect.
    SegmentPreview set_seeds(const std::string& cid, const SeedSet& seeds);
    std::optional<SeedSet> seeds(const std::string& cid) const;

    /// Separates a seeded crop with its stored seeds; `method` and
    /// `above_label` override the stored values when given. Conflict when the
    /// crop has no seeds.
    std::vector<SeparatedChromosome> separate(const std::string& cid, std::optional<int> method = std::nullopt,
                                              std::optional<int> above_label = std::nullopt);

    /// Classification units: every separated chromosome (id "{cid}_{label}")
    /// in place of its parent crop, and every other crop as extracted.
    std::vector<CropRecord> units() const;

    /// Stores scores (one row per unit, extra rows ignored) and the argmax
    /// assignment. MissingScore when a unit has no row.
    Assignment set_scores(const ScoreMatrix& scores);
    Assignment score_with(const ScoreProvider& provider);
    std::optional<ScoreMatrix> scores() const;
    std::optional<Assignment> assignment() const;

    /// Redistributes the argmax assignment of the stored scores against
    /// expected_counts(config.expected_total, config.classes). Conflict before
    /// scores exist.
    Distribution distribute();

    /// {"classes": C, "rows": [{"class": k, "expected": e, "units": [ids]}...]}.
    /// Conflict before an assignment exists. Also written to karyogram.json/png.
    nlohmann::json karyogram();
    GrayImage karyogram_image() const;

private:
    Session() = default;
    void save() const;
    std::filesystem::path path(const std::string& rel) const { return dir_ / rel; }

    std::filesystem::path dir_;
    std::string id_;
    PipelineConfig config_;
    int threshold_ = -1;
    std::optional<std::string> warning_;
    std::vector<CropEntry> crops_;
};

/// A directory of sessions keyed by id.
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path root);

    const std::filesystem::path& root() const { return root_; }
    /// Decodes the image (Decode error, nothing written), then creates the
    /// session under its content id; "-2", "-3", ... are appended when that
    /// id is already taken.
    Session create(std::span<const std::uint8_t> image_bytes, const PipelineConfig& config);
    /// NotFound for unknown or malformed ids.
    Session open(const std::string& id) const;
    std::vector<std::string> list() const;

private:
    std::filesystem::path root_;
};

}  // namespace karyoseg
