#include "karyoseg/imgcore.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

namespace karyoseg {

// ---------------------------------------------------------------------------
// Kernel
// ---------------------------------------------------------------------------

Kernel::Kernel(int width, int height, Point origin, std::vector<std::uint8_t> data)
    : width_(width), height_(height), origin_(origin), data_(std::move(data)) {
    require(width >= 1 && height >= 1, "kernel dimensions must be positive");
    require(data_.size() == static_cast<std::size_t>(width) * height,
            "kernel data length must equal width*height");
    require(origin.x >= 0 && origin.y >= 0 && origin.x < width && origin.y < height,
            "kernel origin must lie inside the kernel");
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (test(x, y)) offsets_.push_back({x - origin.x, y - origin.y});
    require(!offsets_.empty(), "kernel must contain at least one true element");
}

Kernel Kernel::box(int width, int height) {
    return Kernel(width, height, {0, 0},
                  std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 1));
}

Kernel Kernel::centered_box(int width, int height) {
    require(width % 2 == 1 && height % 2 == 1, "centered box needs odd dimensions");
    return Kernel(width, height, {width / 2, height / 2},
                  std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height, 1));
}

Kernel Kernel::cross3() {
    return Kernel(3, 3, {1, 1}, {0, 1, 0, 1, 1, 1, 0, 1, 0});
}

// ---------------------------------------------------------------------------
// Median
// ---------------------------------------------------------------------------

GrayImage median_blur(const GrayImage& img, int window) {
    require(window >= 3 && window % 2 == 1, "median window must be odd and >= 3");
    require(window <= std::min(img.width(), img.height()),
            "median window must not exceed the smaller image side");
    const int r = window / 2;
    const std::size_t mid = static_cast<std::size_t>(window) * window / 2;
    GrayImage out(img.width(), img.height());
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(window) * window);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            std::size_t k = 0;
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) buf[k++] = img.clamped(x + dx, y + dy);
            std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid), buf.end());
            out.at(x, y) = buf[mid];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Otsu
// ---------------------------------------------------------------------------

std::array<std::uint64_t, 256> histogram(const GrayImage& img) {
    std::array<std::uint64_t, 256> hist{};
    for (auto v : img.data()) ++hist[v];
    return hist;
}

namespace {

using u128 = unsigned __int128;
using i128 = __int128;

// Between-class variance up to the positive constant 1/N^2, as the exact
// fraction (N*S0 - n0*S)^2 / (n0*n1).
struct Fraction {
    u128 num = 0;
    u128 den = 1;
};

// a > b, exactly. Safe while num < 2^128 and den^2 < 2^128.
bool greater(const Fraction& a, const Fraction& b) {
    const u128 qa = a.num / a.den;
    const u128 qb = b.num / b.den;
    if (qa != qb) return qa > qb;
    const u128 ra = a.num % a.den;
    const u128 rb = b.num % b.den;
    return ra * b.den > rb * a.den;
}

}  // namespace

OtsuResult otsu_threshold(const GrayImage& img, Polarity polarity) {
    const auto hist = histogram(img);
    const auto total = static_cast<std::uint64_t>(img.size());
    require(total <= 100'000'000ULL, "otsu_threshold supports at most 1e8 pixels");
    const auto nonzero_bins = std::count_if(hist.begin(), hist.end(), [](auto c) { return c > 0; });
    if (nonzero_bins < 2)
        fail(ErrorCode::DegenerateHistogram, "constant image has no between-class variance");

    std::uint64_t sum_all = 0;
    for (int v = 0; v < 256; ++v) sum_all += hist[v] * static_cast<std::uint64_t>(v);

    Fraction best;
    int best_t = -1;
    std::uint64_t n0 = 0;
    std::uint64_t s0 = 0;
    for (int t = 0; t < 256; ++t) {
        n0 += hist[t];
        s0 += hist[t] * static_cast<std::uint64_t>(t);
        const std::uint64_t n1 = total - n0;
        Fraction f;
        if (n0 != 0 && n1 != 0) {
            const i128 d = static_cast<i128>(total) * s0 - static_cast<i128>(n0) * sum_all;
            const u128 ad = static_cast<u128>(d < 0 ? -d : d);
            f.num = ad * ad;
            f.den = static_cast<u128>(n0) * n1;
        }
        if (best_t < 0 || greater(f, best)) {
            best = f;
            best_t = t;
        }
    }

    OtsuResult result{best_t, BinaryMask(img.width(), img.height())};
    auto src = img.data();
    auto dst = result.mask.data();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const bool low = src[i] <= best_t;
        dst[i] = (polarity == Polarity::DarkForeground ? low : !low) ? 1 : 0;
    }
    return result;
}

// ---------------------------------------------------------------------------
// Morphology
// ---------------------------------------------------------------------------

BinaryMask morphology(const BinaryMask& mask, const Kernel& kernel, MorphMode mode) {
    BinaryMask out(mask.width(), mask.height());
    const auto& offs = kernel.offsets();
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            bool v;
            if (mode == MorphMode::Dilate) {
                v = std::any_of(offs.begin(), offs.end(), [&](Point b) {
                    return mask.test_or_false(x + b.x, y + b.y);
                });
            } else {
                v = std::all_of(offs.begin(), offs.end(), [&](Point b) {
                    return mask.test_or_false(x + b.x, y + b.y);
                });
            }
            out.set(x, y, v);
        }
    }
    return out;
}

BinaryMask open(const BinaryMask& mask, const Kernel& kernel) {
    return morphology(morphology(mask, kernel, MorphMode::Erode), kernel, MorphMode::Dilate);
}

BinaryMask close(const BinaryMask& mask, const Kernel& kernel) {
    return morphology(morphology(mask, kernel, MorphMode::Dilate), kernel, MorphMode::Erode);
}

GrayImage gray_dilate(const GrayImage& img, const Kernel& kernel) {
    GrayImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            std::uint8_t m = 0;
            for (Point b : kernel.offsets()) m = std::max(m, img.clamped(x + b.x, y + b.y));
            out.at(x, y) = m;
        }
    }
    return out;
}

GrayImage gray_erode(const GrayImage& img, const Kernel& kernel) {
    GrayImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            std::uint8_t m = 255;
            for (Point b : kernel.offsets()) m = std::min(m, img.clamped(x + b.x, y + b.y));
            out.at(x, y) = m;
        }
    }
    return out;
}

GrayImage morphological_gradient(const GrayImage& img, const Kernel& kernel) {
    const GrayImage dil = gray_dilate(img, kernel);
    const GrayImage ero = gray_erode(img, kernel);
    GrayImage out(img.width(), img.height());
    auto d = dil.data();
    auto e = ero.data();
    auto o = out.data();
    // With the origin inside the kernel, dilation >= f >= erosion pointwise.
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = static_cast<std::uint8_t>(d[i] - e[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Canny
// ---------------------------------------------------------------------------

DerivativeTaps derivative_taps(int aperture) {
    switch (aperture) {
        case 3: return {{1, 2, 1}, {-1, 0, 1}};
        case 5: return {{1, 4, 6, 4, 1}, {-1, -2, 0, 2, 1}};
        case 7: return {{1, 6, 15, 20, 15, 6, 1}, {-1, -4, -5, 0, 5, 4, 1}};
        default: fail(ErrorCode::InvalidArgument, "aperture must be 3, 5 or 7");
    }
}

GradientField sobel_gradient(const GrayImage& img, int aperture) {
    const auto taps = derivative_taps(aperture);
    const int r = aperture / 2;
    const int w = img.width();
    const int h = img.height();

    // Separable passes: horizontal smooth/deriv, then vertical deriv/smooth.
    Raster<double> hs(w, h), hd(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            long s = 0, d = 0;
            for (int k = -r; k <= r; ++k) {
                const int v = img.clamped(x + k, y);
                s += taps.smooth[k + r] * v;
                d += taps.deriv[k + r] * v;
            }
            hs.at(x, y) = static_cast<double>(s);
            hd.at(x, y) = static_cast<double>(d);
        }
    }
    GradientField g{Raster<double>(w, h), Raster<double>(w, h), Raster<double>(w, h)};
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double gx = 0.0, gy = 0.0;
            for (int k = -r; k <= r; ++k) {
                const int yy = std::clamp(y + k, 0, h - 1);
                gx += taps.smooth[k + r] * hd.at(x, yy);
                gy += taps.deriv[k + r] * hs.at(x, yy);
            }
            g.gx.at(x, y) = gx;
            g.gy.at(x, y) = gy;
            g.magnitude.at(x, y) = std::hypot(gx, gy);
        }
    }
    return g;
}

BinaryMask canny_edges(const GrayImage& img, int aperture, double low, double high) {
    require(aperture == 3 || aperture == 5 || aperture == 7, "aperture must be 3, 5 or 7");
    require(low >= 0.0 && low <= high, "canny thresholds must satisfy 0 <= low <= high");
    const auto g = sobel_gradient(img, aperture);
    const int w = img.width();
    const int h = img.height();
    const auto mag = [&](int x, int y) {
        return (x < 0 || y < 0 || x >= w || y >= h) ? 0.0 : g.magnitude.at(x, y);
    };

    constexpr double kTan22 = 0.41421356237309503;  // tan(22.5 deg)
    constexpr double kTan67 = 2.414213562373095;    // tan(67.5 deg)

    // Survivors of non-maximum suppression with magnitude >= low.
    BinaryMask candidate(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double m = g.magnitude.at(x, y);
            if (m < low || m == 0.0) continue;
            const double ax = std::abs(g.gx.at(x, y));
            const double ay = std::abs(g.gy.at(x, y));
            double before, after;
            if (ay <= kTan22 * ax) {
                before = mag(x - 1, y);
                after = mag(x + 1, y);
            } else if (ay > kTan67 * ax) {
                before = mag(x, y - 1);
                after = mag(x, y + 1);
            } else if ((g.gx.at(x, y) > 0) == (g.gy.at(x, y) > 0)) {
                before = mag(x - 1, y - 1);
                after = mag(x + 1, y + 1);
            } else {
                before = mag(x + 1, y - 1);
                after = mag(x - 1, y + 1);
            }
            // Strict on one side so flat-topped ridges keep a single pixel.
            if (m > before && m >= after) candidate.set(x, y);
        }
    }

    BinaryMask edges(w, h);
    std::deque<Point> queue;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (candidate.test(x, y) && g.magnitude.at(x, y) >= high) {
                edges.set(x, y);
                queue.push_back({x, y});
            }
        }
    }
    while (!queue.empty()) {
        const Point p = queue.front();
        queue.pop_front();
        for (const auto& d : kNeighbors8) {
            const int nx = p.x + d[0], ny = p.y + d[1];
            if (candidate.test_or_false(nx, ny) && !edges.test(nx, ny)) {
                edges.set(nx, ny);
                queue.push_back({nx, ny});
            }
        }
    }
    return edges;
}

}  // namespace karyoseg
