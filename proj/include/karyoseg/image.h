#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "karyoseg/error.h"

namespace karyoseg {

struct Point {
    int x = 0;
    int y = 0;

    friend bool operator==(const Point&, const Point&) = default;
};

struct Point2d {
    double x = 0.0;
    double y = 0.0;
};

/// Row-major raster with value semantics. Dimensions are fixed at construction.
template <typename T>
class Raster {
public:
    using value_type = T;

    Raster() = default;
    Raster(int width, int height, T fill = T{}) : width_(width), height_(height) {
        require(width >= 1 && height >= 1, "raster dimensions must be positive");
        data_.assign(static_cast<std::size_t>(width) * height, fill);
    }
    Raster(int width, int height, std::vector<T> data)
        : width_(width), height_(height), data_(std::move(data)) {
        require(width >= 1 && height >= 1, "raster dimensions must be positive");
        require(data_.size() == static_cast<std::size_t>(width) * height,
                "raster data length must equal width*height");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    bool contains(int x, int y) const noexcept {
        return x >= 0 && y >= 0 && x < width_ && y < height_;
    }
    bool contains(Point p) const noexcept { return contains(p.x, p.y); }

    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * width_ + x;
    }

    T& at(int x, int y) { return data_[index(x, y)]; }
    const T& at(int x, int y) const { return data_[index(x, y)]; }
    T& at(Point p) { return at(p.x, p.y); }
    const T& at(Point p) const { return at(p.x, p.y); }

    /// Edge-replicating read.
    const T& clamped(int x, int y) const {
        return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
    }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    std::span<const T> row(int y) const {
        return std::span<const T>(data_).subspan(static_cast<std::size_t>(y) * width_, width_);
    }

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

/// 8-bit single-channel intensity image, 0 = black, 255 = white.
class GrayImage : public Raster<std::uint8_t> {
public:
    using Raster::Raster;
};

/// Boolean foreground mask. Stored as bytes (0/1) to keep spans contiguous.
class BinaryMask : public Raster<std::uint8_t> {
public:
    using Raster::Raster;

    bool test(int x, int y) const { return at(x, y) != 0; }
    bool test(Point p) const { return at(p) != 0; }
    /// Out-of-bounds reads are background.
    bool test_or_false(int x, int y) const { return contains(x, y) && at(x, y) != 0; }
    void set(int x, int y, bool v = true) { at(x, y) = v ? 1 : 0; }
    void set(Point p, bool v = true) { at(p) = v ? 1 : 0; }

    std::size_t count() const {
        return static_cast<std::size_t>(std::count_if(data().begin(), data().end(),
                                                      [](std::uint8_t v) { return v != 0; }));
    }
};

/// Integer label raster (watershed output, component labels).
using LabelImage = Raster<std::int32_t>;

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_intersection(const BinaryMask& a, const BinaryMask& b);
BinaryMask mask_difference(const BinaryMask& a, const BinaryMask& b);
std::size_t intersection_count(const BinaryMask& a, const BinaryMask& b);
/// Intersection-over-union; two empty masks give 1.
double iou(const BinaryMask& a, const BinaryMask& b);

/// 255 where the mask is set, 0 elsewhere.
GrayImage mask_to_gray(const BinaryMask& mask);

inline constexpr int kNeighbors8[8][2] = {{0, -1}, {1, -1}, {1, 0},  {1, 1},
                                          {0, 1},  {-1, 1}, {-1, 0}, {-1, -1}};
inline constexpr int kNeighbors4[4][2] = {{0, -1}, {1, 0}, {0, 1}, {-1, 0}};

}  // namespace karyoseg
