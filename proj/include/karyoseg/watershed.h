#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "karyoseg/image.h"
#include "karyoseg/segmentation.h"

namespace karyoseg {

enum class SeedRole { Chromosome, Intersection, Background };

std::string_view to_string(SeedRole role);
SeedRole seed_role_from_string(std::string_view s);

struct Seed {
    Point position;
    int label = 1;
    SeedRole role = SeedRole::Chromosome;
};

/// Operator-placed markers. Several seeds may share a label; their regions are
/// unioned. A label carries one role.
struct SeedSet {
    std::vector<Seed> seeds;
    int method = 2;
    /// Method 1: the chromosome drawn on top, which keeps the intersection.
    std::optional<int> above_label;

    /// Distinct labels in ascending order, optionally restricted to one role.
    std::vector<int> labels() const;
    std::vector<int> labels(SeedRole role) const;
    /// Role of a label present in the set.
    SeedRole role_of(int label) const;
    /// Mean seed position of a label.
    Point2d centroid(int label) const;

    /// Marker checks shared by every consumer: positions inside a width x height
    /// raster, positive labels, one role per label, no pixel claimed by two
    /// labels, method 1 or 2, and at least two distinct labels.
    void validate(int width, int height) const;
    /// Separation checks on top of validate(): at least two chromosome labels,
    /// above_label among them when set, and required when method 1 has an
    /// intersection seed.
    void validate_for_separation(int width, int height) const;
};

void to_json(nlohmann::json& j, const SeedSet& s);
void from_json(const nlohmann::json& j, SeedSet& s);

struct SegmentMap {
    LabelImage labels;  ///< 0 = watershed line or unreached, k > 0 = region of seed label k

    BinaryMask region(int label) const;
};

/// The flooding surface: gradient magnitude (aperture 3) of the 3x3 median of `gray`.
Raster<double> flooding_surface(const GrayImage& gray);

/// Marker-controlled flooding of flooding_surface(gray) over 4-neighbours.
/// Pixels are processed in ascending (surface value, plateau depth, linear
/// index) order, where plateau depth counts steps from the labeled pixel that
/// queued it while the surface value stays equal. A pixel reached by two
/// labels becomes a line pixel (0) and does not propagate.
SegmentMap watershed(const GrayImage& gray, const SeedSet& seeds);

/// As above, but chromosome and intersection labels may only grow inside
/// `domain`; background labels flood everywhere.
SegmentMap watershed(const GrayImage& gray, const SeedSet& seeds, const BinaryMask& domain);

/// Maps (image, object_mask, gap_mask) to an image in which gap pixels are
/// synthesized. Only gap pixels of the result are used.
using GapFiller = std::function<GrayImage(const GrayImage&, const BinaryMask&, const BinaryMask&)>;

/// Each gap pixel is an inverse-distance blend of the first object pixels met
/// walking both ways along the object's principal axis. Pixels whose walks
/// miss the object fall back to the nearest object boundary pixels. Object
/// pixels at 255 (background inside the mask) are never used as sources, so
/// every filled pixel is below 255. An empty gap returns the image unchanged;
/// a gap component with no 8-adjacent object pixel throws UnfillableGap.
GrayImage baseline_gap_fill(const GrayImage& image, const BinaryMask& object_mask, const BinaryMask& gap_mask);

struct SeparatedChromosome {
    std::string parent_crop;
    int label = 0;
    GrayImage image;  ///< crop-sized, white outside `mask`
    BinaryMask mask;
    std::vector<int> shared;  ///< intersection labels merged in as observed pixels
    std::vector<int> filled;  ///< intersection labels whose footprint was synthesized
    BinaryMask gap;           ///< synthesized pixels (all clear when none)
};

nlohmann::json provenance_json(const SeparatedChromosome& s);

/// Watershed restricted to the crop mask, then line pixels inside the mask
/// handed to the neighbouring seeded region whose seed centroid is closest.
SegmentMap reconstruct_regions(const CropRecord& crop, const SeedSet& seeds);

/// Every chromosome keeps its region plus every intersection region adjacent to it.
/// Throws DanglingIntersection when an intersection region touches no chromosome.
std::vector<SeparatedChromosome> separate_method2(const CropRecord& crop, const SeedSet& seeds);

/// The above chromosome keeps the intersection regions; each other chromosome
/// gets the adjacent intersection footprint as a gap synthesized by `filler`.
std::vector<SeparatedChromosome> separate_method1(const CropRecord& crop, const SeedSet& seeds,
                                                  const GapFiller& filler = baseline_gap_fill);

/// Dispatches on seeds.method.
std::vector<SeparatedChromosome> separate(const CropRecord& crop, const SeedSet& seeds,
                                          const GapFiller& filler = baseline_gap_fill);

}  // namespace karyoseg
