#include "karyoseg/segmentation.h"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <limits>
#include <optional>

#include "karyoseg/imgcore.h"

namespace karyoseg {

ComponentLabels label_components(const BinaryMask& mask, int connectivity) {
    require(connectivity == 4 || connectivity == 8, "connectivity must be 4 or 8");
    ComponentLabels out{LabelImage(mask.width(), mask.height(), 0), 0};
    std::deque<Point> queue;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask.test(x, y) || out.labels.at(x, y) != 0) continue;
            const int label = ++out.count;
            out.labels.at(x, y) = label;
            queue.push_back({x, y});
            while (!queue.empty()) {
                const Point p = queue.front();
                queue.pop_front();
                for (int k = 0; k < 8; ++k) {
                    // Even entries of kNeighbors8 are the 4-neighbors.
                    if (connectivity == 4 && k % 2 == 1) continue;
                    const int nx = p.x + kNeighbors8[k][0], ny = p.y + kNeighbors8[k][1];
                    if (mask.test_or_false(nx, ny) && out.labels.at(nx, ny) == 0) {
                        out.labels.at(nx, ny) = label;
                        queue.push_back({nx, ny});
                    }
                }
            }
        }
    }
    return out;
}

namespace {

int direction_of(Point from, Point to) {
    for (int k = 0; k < 8; ++k)
        if (from.x + kNeighbors8[k][0] == to.x && from.y + kNeighbors8[k][1] == to.y) return k;
    return -1;
}

// Moore-neighbor tracing of the component containing `start`, which must be
// the component's first pixel in raster order. Stops on re-entering the start
// pixel towards the same second pixel (Jacob's criterion).
std::vector<Point> trace_boundary(const LabelImage& labels, int label, Point start) {
    auto inside = [&](int x, int y) { return labels.contains(x, y) && labels.at(x, y) == label; };
    std::vector<Point> points{start};

    // The west neighbor of the first raster pixel is always outside the component.
    Point current = start;
    Point backtrack{start.x - 1, start.y};
    std::optional<Point> second;
    const std::size_t limit = 4 * labels.size() + 16;
    for (std::size_t step = 0; step < limit; ++step) {
        const int from = direction_of(current, backtrack);
        Point next{-1, -1};
        Point next_backtrack = backtrack;
        for (int i = 1; i <= 8; ++i) {
            const int k = (from + i) % 8;
            const Point cand{current.x + kNeighbors8[k][0], current.y + kNeighbors8[k][1]};
            if (inside(cand.x, cand.y)) {
                next = cand;
                const int prev = (k + 7) % 8;
                next_backtrack = {current.x + kNeighbors8[prev][0], current.y + kNeighbors8[prev][1]};
                break;
            }
        }
        if (next.x < 0) break;  // isolated pixel
        if (current == start) {
            if (!second) {
                second = next;
            } else if (next == *second) {
                break;
            }
        }
        points.push_back(next);
        backtrack = next_backtrack;
        current = next;
    }
    // The walk ends standing on the start pixel, which is already the first point.
    if (points.size() > 1 && points.back() == start) points.pop_back();
    return points;
}

}  // namespace

std::vector<Contour> find_contours(const BinaryMask& mask) {
    const auto comps = label_components(mask, 8);
    std::vector<Contour> contours(static_cast<std::size_t>(comps.count));
    std::vector<Point> first(static_cast<std::size_t>(comps.count), Point{-1, -1});
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            const int l = comps.labels.at(x, y);
            if (l == 0) continue;
            auto& c = contours[static_cast<std::size_t>(l - 1)];
            ++c.pixel_count;
            if (first[static_cast<std::size_t>(l - 1)].x < 0) first[static_cast<std::size_t>(l - 1)] = {x, y};
        }
    }
    for (int l = 1; l <= comps.count; ++l) {
        auto& c = contours[static_cast<std::size_t>(l - 1)];
        c.component = l;
        c.points = trace_boundary(comps.labels, l, first[static_cast<std::size_t>(l - 1)]);
        c.area = polygon_area(c.points);
    }
    return contours;
}

std::vector<Contour> filter_contours(std::vector<Contour> contours, double min_area) {
    require(min_area >= 0.0, "min_area must be non-negative");
    std::erase_if(contours, [&](const Contour& c) { return c.area < min_area; });
    return contours;
}

std::string_view to_string(CropKind kind) {
    switch (kind) {
        case CropKind::Single: return "single";
        case CropKind::SuspectMulti: return "suspect-multi";
        case CropKind::Unknown: break;
    }
    return "unknown";
}

CropKind crop_kind_from_string(std::string_view s) {
    if (s == "single") return CropKind::Single;
    if (s == "suspect-multi") return CropKind::SuspectMulti;
    if (s == "unknown") return CropKind::Unknown;
    fail(ErrorCode::InvalidArgument, "unknown crop kind: " + std::string(s));
}

std::string crop_id(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "crop_%03zu", index);
    return buf;
}

Extraction extract_objects(const GrayImage& metaphase, const PipelineConfig& config) {
    config.validate();
    Extraction result;

    // Images smaller than the median window are binarized unblurred.
    const GrayImage blurred = config.median_window <= std::min(metaphase.width(), metaphase.height())
                                  ? median_blur(metaphase, config.median_window)
                                  : metaphase;

    BinaryMask foreground;
    try {
        auto otsu = otsu_threshold(blurred, Polarity::DarkForeground);
        result.threshold = otsu.threshold;
        foreground = std::move(otsu.mask);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateHistogram) throw;
        result.warning = std::string(to_string(e.code())) + ": " + e.what();
        return result;
    }

    const Kernel kernel = Kernel::box(config.gradient_kernel_width, config.gradient_kernel_height);
    const GrayImage ring_gray = morphological_gradient(mask_to_gray(foreground), kernel);
    BinaryMask ring(metaphase.width(), metaphase.height());
    for (std::size_t i = 0; i < ring.size(); ++i) ring.data()[i] = ring_gray.data()[i] > 0 ? 1 : 0;

    const auto ring_contours = find_contours(ring);
    const auto ring_labels = label_components(ring, 8);
    const auto fg_labels = label_components(foreground, 8);

    // Each foreground component joins the lowest-numbered ring component that
    // touches it (own pixels first, then 8-neighbors).
    std::vector<int> owner(static_cast<std::size_t>(fg_labels.count) + 1, 0);
    auto claim = [&](int fg, int ring_label) {
        auto& o = owner[static_cast<std::size_t>(fg)];
        if (ring_label > 0 && (o == 0 || ring_label < o)) o = ring_label;
    };
    for (int y = 0; y < metaphase.height(); ++y)
        for (int x = 0; x < metaphase.width(); ++x)
            if (const int f = fg_labels.labels.at(x, y)) claim(f, ring_labels.labels.at(x, y));
    for (int y = 0; y < metaphase.height(); ++y) {
        for (int x = 0; x < metaphase.width(); ++x) {
            const int f = fg_labels.labels.at(x, y);
            if (f == 0 || owner[static_cast<std::size_t>(f)] != 0) continue;
            for (const auto& d : kNeighbors8) {
                const int nx = x + d[0], ny = y + d[1];
                if (ring_labels.labels.contains(nx, ny)) claim(f, ring_labels.labels.at(nx, ny));
            }
        }
    }

    std::vector<char> keep(static_cast<std::size_t>(ring_labels.count) + 1, 0);
    for (const auto& c : filter_contours(ring_contours, config.min_contour_area))
        keep[static_cast<std::size_t>(c.component)] = 1;

    for (const auto& contour : ring_contours) {
        const int r = contour.component;
        if (!keep[static_cast<std::size_t>(r)]) continue;

        int x0 = std::numeric_limits<int>::max(), y0 = x0, x1 = -1, y1 = -1;
        for (int y = 0; y < metaphase.height(); ++y) {
            for (int x = 0; x < metaphase.width(); ++x) {
                const int f = fg_labels.labels.at(x, y);
                if (f == 0 || owner[static_cast<std::size_t>(f)] != r) continue;
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
        }
        if (x1 < 0) continue;  // ring around nothing, e.g. a hole's rim

        x0 = std::max(0, x0 - kCropPadding);
        y0 = std::max(0, y0 - kCropPadding);
        x1 = std::min(metaphase.width() - 1, x1 + kCropPadding);
        y1 = std::min(metaphase.height() - 1, y1 + kCropPadding);

        CropRecord crop;
        crop.id = crop_id(result.crops.size());
        crop.offset = {x0, y0};
        crop.image = GrayImage(x1 - x0 + 1, y1 - y0 + 1, 255);
        crop.mask = BinaryMask(x1 - x0 + 1, y1 - y0 + 1);
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const int f = fg_labels.labels.at(x, y);
                if (f == 0 || owner[static_cast<std::size_t>(f)] != r) continue;
                crop.mask.set(x - x0, y - y0);
                crop.image.at(x - x0, y - y0) = metaphase.at(x, y);
            }
        }
        crop.bbox = min_area_rect(contour.points);
        result.crops.push_back(std::move(crop));
    }
    return result;
}

}  // namespace karyoseg
