#include "karyoseg/geometry.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace karyoseg {

namespace {

long long cross(Point o, Point a, Point b) {
    return static_cast<long long>(a.x - o.x) * (b.y - o.y) -
           static_cast<long long>(a.y - o.y) * (b.x - o.x);
}

double normalize_angle(double deg) {
    while (deg >= 90.0) deg -= 180.0;
    while (deg < -90.0) deg += 180.0;
    return deg;
}

}  // namespace

std::vector<Point2d> RotatedRect::corners() const {
    const double rad = angle * std::numbers::pi / 180.0;
    const double ux = std::cos(rad), uy = std::sin(rad);
    const double vx = -uy, vy = ux;
    const double hw = width / 2.0, hh = height / 2.0;
    return {{center.x - ux * hw - vx * hh, center.y - uy * hw - vy * hh},
            {center.x + ux * hw - vx * hh, center.y + uy * hw - vy * hh},
            {center.x + ux * hw + vx * hh, center.y + uy * hw + vy * hh},
            {center.x - ux * hw + vx * hh, center.y - uy * hw + vy * hh}};
}

std::vector<Point> convex_hull(std::span<const Point> points) {
    std::vector<Point> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](Point a, Point b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;

    std::vector<Point> hull(2 * pts.size());
    std::size_t k = 0;
    for (const Point& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

double polygon_area(std::span<const Point> points) {
    if (points.size() < 3) return 0.0;
    long long twice = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Point a = points[i];
        const Point b = points[(i + 1) % points.size()];
        twice += static_cast<long long>(a.x) * b.y - static_cast<long long>(b.x) * a.y;
    }
    return std::abs(static_cast<double>(twice)) / 2.0;
}

RotatedRect min_area_rect(std::span<const Point> points) {
    require(!points.empty(), "min_area_rect needs at least one point");
    const auto hull = convex_hull(points);

    if (hull.size() < 3) {
        // Single point or collinear set: a length-by-1 strip along the span.
        const Point a = hull.front();
        const Point b = hull.back();
        const double dx = b.x - a.x, dy = b.y - a.y;
        const double span = std::hypot(dx, dy);
        RotatedRect r;
        r.center = {(a.x + b.x) / 2.0, (a.y + b.y) / 2.0};
        r.width = std::max(span, 1.0);
        r.height = 1.0;
        r.angle = span > 0 ? normalize_angle(std::atan2(dy, dx) * 180.0 / std::numbers::pi) : 0.0;
        return r;
    }

    const std::size_t n = hull.size();
    auto at = [&](std::size_t i) { return hull[i % n]; };
    auto proj = [](Point p, Point o, double ux, double uy) { return (p.x - o.x) * ux + (p.y - o.y) * uy; };

    double best_area = std::numeric_limits<double>::infinity();
    RotatedRect best;
    std::size_t right = 0, far = 0, left = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point o = at(i);
        const Point e = at(i + 1);
        const double len = std::hypot(e.x - o.x, e.y - o.y);
        const double ux = (e.x - o.x) / len, uy = (e.y - o.y) / len;
        // Interior lies on the positive side of the left normal.
        const double vx = -uy, vy = ux;

        if (i == 0) {
            right = far = left = 1;
            for (std::size_t j = 0; j < n; ++j) {
                if (proj(at(j), o, ux, uy) > proj(at(right), o, ux, uy)) right = j;
                if (proj(at(j), o, vx, vy) > proj(at(far), o, vx, vy)) far = j;
                if (proj(at(j), o, ux, uy) < proj(at(left), o, ux, uy)) left = j;
            }
        } else {
            while (proj(at(right + 1), o, ux, uy) > proj(at(right), o, ux, uy)) right = (right + 1) % n;
            while (proj(at(far + 1), o, vx, vy) > proj(at(far), o, vx, vy)) far = (far + 1) % n;
            while (proj(at(left + 1), o, ux, uy) < proj(at(left), o, ux, uy)) left = (left + 1) % n;
        }

        const double max_u = proj(at(right), o, ux, uy);
        const double min_u = proj(at(left), o, ux, uy);
        const double max_v = proj(at(far), o, vx, vy);
        const double area = (max_u - min_u) * max_v;
        if (area < best_area) {
            best_area = area;
            const double cu = (max_u + min_u) / 2.0, cv = max_v / 2.0;
            best.center = {o.x + ux * cu + vx * cv, o.y + uy * cu + vy * cv};
            best.width = max_u - min_u;
            best.height = max_v;
            best.angle = std::atan2(uy, ux) * 180.0 / std::numbers::pi;
        }
    }

    // Canonical form: angle in [-45, 45), swapping sides on quarter turns.
    double a = best.angle;
    while (a >= 45.0) {
        a -= 90.0;
        std::swap(best.width, best.height);
    }
    while (a < -45.0) {
        a += 90.0;
        std::swap(best.width, best.height);
    }
    if (std::abs(a) < 1e-9) a = 0.0;
    best.angle = a;
    return best;
}

}  // namespace karyoseg
