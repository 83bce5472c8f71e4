#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "karyoseg/image.h"

namespace karyoseg::synth {

enum class Arrangement { Isolated, Touching, Overlapping, Cluster };

std::string_view to_string(Arrangement a);
Arrangement arrangement_from_string(std::string_view s);

/// One banded capsule. `length` is the centerline length; `bend` splits it into
/// two equal straight halves meeting at that angle (0 = straight).
struct ObjectSpec {
    int class_index = 1;
    double length = 40.0;
    double width = 8.0;
    double bend = 0.0;         ///< degrees
    double orientation = 0.0;  ///< degrees
    std::uint64_t band_seed = 0;
};

/// Objects laid out as one unit. For Overlapping/Cluster, members after the
/// first cross the first one; later members are drawn on top. For Touching,
/// the second member's end abuts the first member's side.
struct GroupSpec {
    Arrangement arrangement = Arrangement::Overlapping;
    std::vector<int> members;
    double angle = 60.0;  ///< crossing/contact angle in degrees
};

struct SynthSpec {
    int width = 512;
    int height = 512;
    std::vector<ObjectSpec> objects;
    std::vector<GroupSpec> groups;  ///< objects not in a group are isolated
    std::uint64_t rng_seed = 1;
    int noise = 0;                  ///< uniform +-noise added to every pixel
    int margin = 6;                 ///< minimum gap between layout units
};

struct Crossing {
    Point2d position;
    int first = 0;   ///< object indices
    int second = 0;
};

struct GroundTruth {
    GrayImage metaphase;
    std::vector<BinaryMask> masks;       ///< canvas-sized, one per object
    std::vector<int> classes;
    std::vector<std::vector<Point2d>> axes;  ///< centerline polylines
    std::vector<Crossing> crossings;
    std::vector<int> group_of;           ///< group index or -1
    std::vector<int> draw_order;         ///< object indices, bottom first
};

/// Deterministic for a fixed spec. Throws LayoutFailure if a unit cannot be
/// placed without touching the canvas border or another unit.
GroundTruth generate(const SynthSpec& spec);

/// Nominal centerline length for a class: chromosome 1 longest.
double class_length(int class_index);
inline constexpr double kNominalWidth = 10.0;

/// Banded intensity profile along a capsule, sampled at arclength `t`.
std::uint8_t band_intensity(std::uint64_t band_seed, double t);

// Canned specs used by tests, the acceptance suite and `karyoseg synth`.

/// `count` isolated objects, classes assigned in pairs (1,1,2,2,...).
SynthSpec isolated_metaphase(int count, std::uint64_t seed, int classes = 23);
/// Two straight objects crossing at `angle` degrees, alone on a small canvas.
SynthSpec crossing_pair(double angle, std::uint64_t seed);
/// A single object with the given bend, alone on a small canvas.
SynthSpec singleton(double bend, std::uint64_t seed);
/// A 46-object metaphase where two objects form one overlapping pair.
SynthSpec metaphase_with_overlap(std::uint64_t seed, double angle = 60.0);

void to_json(nlohmann::json& j, const ObjectSpec& o);
void from_json(const nlohmann::json& j, ObjectSpec& o);
void to_json(nlohmann::json& j, const GroupSpec& g);
void from_json(const nlohmann::json& j, GroupSpec& g);
void to_json(nlohmann::json& j, const SynthSpec& s);
void from_json(const nlohmann::json& j, SynthSpec& s);

/// Per-object class, group, axis and mask file name, plus crossings and draw order.
nlohmann::json truth_json(const GroundTruth& gt);
/// Writes metaphase.png, truth.json and masks/obj_NNN.png into `dir`.
void write_ground_truth(const std::filesystem::path& dir, const GroundTruth& gt);

}  // namespace karyoseg::synth
