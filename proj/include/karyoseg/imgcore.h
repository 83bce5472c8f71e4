#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "karyoseg/image.h"

namespace karyoseg {

/// Flat structuring element. `origin` is the anchor, in kernel coordinates.
class Kernel {
public:
    Kernel(int width, int height, Point origin, std::vector<std::uint8_t> data);

    /// All-true rectangle anchored at (0,0), the convention of the 2x2 gradient kernel.
    static Kernel box(int width, int height);
    /// All-true rectangle anchored at its center; width and height must be odd.
    static Kernel centered_box(int width, int height);
    /// 3x3 plus-shaped kernel anchored at its center.
    static Kernel cross3();

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    Point origin() const noexcept { return origin_; }
    bool test(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x] != 0; }

    /// Offsets (k - origin) of every true element, in row-major order.
    const std::vector<Point>& offsets() const noexcept { return offsets_; }

private:
    int width_;
    int height_;
    Point origin_;
    std::vector<std::uint8_t> data_;
    std::vector<Point> offsets_;
};

/// Window-by-window median with edge replication. `window` must be odd, >= 3
/// and no larger than the smaller image side.
GrayImage median_blur(const GrayImage& img, int window);

enum class Polarity {
    DarkForeground,   ///< foreground = intensity <= t (gray objects on white)
    LightForeground,  ///< foreground = intensity >  t (fluorescent images)
};

struct OtsuResult {
    int threshold = 0;
    BinaryMask mask;
};

/// Otsu threshold over t in [0,255] maximizing between-class variance, with
/// class 0 = {v <= t}. The comparison is exact (integer arithmetic); ties go to
/// the smallest t. Throws DegenerateHistogram on a constant image.
OtsuResult otsu_threshold(const GrayImage& img, Polarity polarity = Polarity::DarkForeground);

/// Histogram of an image, 256 bins.
std::array<std::uint64_t, 256> histogram(const GrayImage& img);

enum class MorphMode { Dilate, Erode };

/// Binary morphology over the kernel window {p + (k - origin)}: dilation sets p
/// when any window pixel is foreground, erosion when all of them are.
/// Out-of-bounds is background. Both operators share one window, so a 2x2
/// gradient marks left/top and right/bottom boundaries alike.
BinaryMask morphology(const BinaryMask& mask, const Kernel& kernel, MorphMode mode);

BinaryMask open(const BinaryMask& mask, const Kernel& kernel);
BinaryMask close(const BinaryMask& mask, const Kernel& kernel);

/// Flat grayscale max/min over the same window as `morphology`,
/// edge-replicated at borders.
GrayImage gray_dilate(const GrayImage& img, const Kernel& kernel);
GrayImage gray_erode(const GrayImage& img, const Kernel& kernel);

/// gray_dilate - gray_erode.
GrayImage morphological_gradient(const GrayImage& img, const Kernel& kernel);

/// Smoothing and derivative taps used by the Canny front end.
///
/// aperture 3: smooth {1,2,1},             deriv {-1,0,1}
/// aperture 5: smooth {1,4,6,4,1},         deriv {-1,-2,0,2,1}
/// aperture 7: smooth {1,6,15,20,15,6,1},  deriv {-1,-4,-5,0,5,4,1}
///
/// Gx = smooth(y) * deriv(x), Gy = smooth(x) * deriv(y), both unnormalized,
/// computed on the edge-replicated image. Magnitude is the L2 norm.
struct DerivativeTaps {
    std::vector<int> smooth;
    std::vector<int> deriv;
};
DerivativeTaps derivative_taps(int aperture);

struct GradientField {
    Raster<double> gx;
    Raster<double> gy;
    Raster<double> magnitude;
};
GradientField sobel_gradient(const GrayImage& img, int aperture);

/// Four-stage Canny: derivative filter, magnitude, non-maximum suppression
/// over four direction sectors, 8-connected double-threshold hysteresis.
/// Thresholds are in the magnitude units of the chosen aperture.
BinaryMask canny_edges(const GrayImage& img, int aperture, double low, double high);

}  // namespace karyoseg
