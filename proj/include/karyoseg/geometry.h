#pragma once

#include <span>
#include <vector>

#include "karyoseg/image.h"

namespace karyoseg {

struct RotatedRect {
    Point2d center;
    double width = 0.0;   ///< extent along `angle`
    double height = 0.0;  ///< extent perpendicular to `angle`
    double angle = 0.0;   ///< degrees in [-90, 90)

    double area() const { return width * height; }
    /// Corners in order around the rectangle.
    std::vector<Point2d> corners() const;
};

/// Convex hull (monotone chain), counterclockwise in the cross-product sense,
/// collinear points dropped. Duplicates are removed first.
std::vector<Point> convex_hull(std::span<const Point> points);

/// Minimum-area enclosing rectangle by rotating calipers over the convex hull.
/// Non-degenerate results are canonicalized so that angle lies in [-45, 45).
/// Collinear input yields width = span (at least 1) and height = 1.
RotatedRect min_area_rect(std::span<const Point> points);

/// Shoelace area of a closed polygon.
double polygon_area(std::span<const Point> points);

}  // namespace karyoseg
