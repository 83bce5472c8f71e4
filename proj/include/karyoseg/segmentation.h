#pragma once

#include <optional>
#include <string>
#include <vector>

#include "karyoseg/config.h"
#include "karyoseg/geometry.h"
#include "karyoseg/image.h"

namespace karyoseg {

/// Outer boundary of one 8-connected component, traced clockwise (on screen)
/// from its topmost-leftmost pixel.
struct Contour {
    std::vector<Point> points;
    /// Shoelace area of the boundary polygon through pixel centers.
    double area = 0.0;
    /// Pixels in the traced component.
    std::size_t pixel_count = 0;
    /// Component label in the labeling that produced this contour (1-based).
    int component = 0;
};

struct ComponentLabels {
    LabelImage labels;  ///< 0 = background, components numbered 1..count in scan order
    int count = 0;
};

/// Connected-component labeling; `connectivity` is 4 or 8. Components are
/// numbered in raster order of their first pixel.
ComponentLabels label_components(const BinaryMask& mask, int connectivity = 8);

/// One outer contour per 8-connected component, ordered by each component's
/// topmost-leftmost pixel.
std::vector<Contour> find_contours(const BinaryMask& mask);

std::vector<Contour> filter_contours(std::vector<Contour> contours, double min_area);

enum class CropKind { Unknown, Single, SuspectMulti };

std::string_view to_string(CropKind kind);
CropKind crop_kind_from_string(std::string_view s);

struct CropRecord {
    std::string id;
    GrayImage image;  ///< object intensities on white (255)
    BinaryMask mask;  ///< object pixels, same size as `image`
    Point offset;     ///< crop origin in metaphase coordinates
    RotatedRect bbox; ///< in metaphase coordinates
    CropKind kind = CropKind::Unknown;
};

struct Extraction {
    std::vector<CropRecord> crops;
    /// Set when the image could not be binarized (constant intensity).
    std::optional<std::string> warning;
    int threshold = -1;
};

/// Crop ids are "crop_000", "crop_001", ... in contour order.
std::string crop_id(std::size_t index);

/// median blur -> Otsu (dark foreground) -> morphological gradient of the
/// binarized image -> contours of the gradient ring -> area filter -> one crop
/// per surviving contour. A crop's mask is the union of the Otsu foreground
/// components enclosed by that ring; its image keeps the source (unblurred)
/// intensities inside the mask and white elsewhere.
Extraction extract_objects(const GrayImage& metaphase, const PipelineConfig& config);

/// Padding, in pixels, around each crop's mask bounding box.
inline constexpr int kCropPadding = 2;

}  // namespace karyoseg
