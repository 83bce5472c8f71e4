#pragma once

#include <string>
#include <vector>

#include "karyoseg/config.h"
#include "karyoseg/image.h"
#include "karyoseg/segmentation.h"

namespace karyoseg {

struct Skeleton {
    BinaryMask mask;
    std::string source_id;
};

struct BranchPoint {
    Point2d position;
    int crossing_number = 0;
};

/// Zhang-Suen thinning iterated to a fixpoint, with the Lu-Wang candidate
/// rule (3 to 6 neighbors) so that two-pixel diagonal strokes are not eroded
/// away. Each subiteration marks candidates in parallel, then commits them in
/// raster order, skipping any pixel that is no longer a simple non-end point;
/// topology (component count, holes) is preserved. A final sequential pass
/// removes the remaining simple pixels so that lines are 8-thin.
Skeleton skeletonize(const BinaryMask& mask, std::string source_id = {});

/// Number of 0->1 transitions around p's 8-neighborhood, traversed
/// N, NE, E, SE, S, SW, W, NW and back to N. Out-of-bounds is background.
int crossing_number(const BinaryMask& skeleton, Point p);
inline int crossing_number(const Skeleton& skel, Point p) { return crossing_number(skel.mask, p); }

/// True when p is foreground and deleting it changes neither the number of
/// 8-connected foreground components nor 4-connected background components
/// in its 3x3 neighborhood.
bool is_simple_point(const BinaryMask& mask, Point p);

/// Removes skeleton branches of at most `max_length` pixels that end in a free
/// tip and attach to a junction. Isolated arcs are never shortened.
Skeleton prune_spurs(const Skeleton& skel, int max_length);

/// Same, but a branch is removed when the straight-line distance from its
/// junction to its tip is at most the junction's distance to the background
/// of `shape` plus `max_excess`.
Skeleton prune_spurs(const Skeleton& skel, const BinaryMask& shape, double max_excess);

/// Every skeleton pixel with crossing number >= 3. Pixels within
/// `merge_radius` of each other (single linkage) are reported once, at the
/// cluster centroid with the cluster's largest crossing number.
///
/// With bridge_length > 0, clusters joined by a run of at most bridge_length
/// non-junction skeleton pixels are further merged into one point, placed at
/// the skeleton pixel nearest the mean of their centroids. Its crossing number
/// is the branch count of the merged junction (sum minus 2 per bridge).
///
/// Output is ordered by each group's first pixel in raster order.
std::vector<BranchPoint> detect_intersections(const Skeleton& skel, double merge_radius, int bridge_length = 0);

struct OverlapAnalysis {
    Skeleton skeleton;
    std::vector<BranchPoint> branch_points;  ///< crop coordinates
    CropKind kind = CropKind::Unknown;
};

/// Open then close with a 3x3 cross, skeletonize, prune spurs against the
/// cleaned mask with config.spur_excess, detect intersections with config.merge_radius and
/// config.bridge_length.
OverlapAnalysis analyze_crop(const CropRecord& crop, const PipelineConfig& config);

/// kind = suspect-multi iff analyze_crop finds a branch point. Updates `crop.kind`.
CropKind classify_crop(CropRecord& crop, const PipelineConfig& config);

}  // namespace karyoseg
