#pragma once

// Helpers shared by the unit tests and the acceptance suite.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "karyoseg/classify.h"
#include "karyoseg/image.h"
#include "karyoseg/image_io.h"
#include "karyoseg/segmentation.h"
#include "karyoseg/synth.h"
#include "karyoseg/watershed.h"

namespace karyoseg::testing {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "karyoseg-XXXXXX").string();
        if (mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

// Exhaustive Otsu oracle: exact rational between-class variance
// w0*w1*(mu0-mu1)^2 computed from the two pixel lists at every threshold.
inline int brute_force_otsu(const GrayImage& img) {
    using boost::multiprecision::cpp_rational;
    cpp_rational best = -1;
    int best_t = -1;
    const auto n = static_cast<long>(img.size());
    for (int t = 0; t < 256; ++t) {
        long n0 = 0, n1 = 0, s0 = 0, s1 = 0;
        for (auto v : img.data()) {
            if (v <= t) {
                ++n0;
                s0 += v;
            } else {
                ++n1;
                s1 += v;
            }
        }
        cpp_rational var = 0;
        if (n0 > 0 && n1 > 0) {
            const cpp_rational mu0(s0, n0), mu1(s1, n1);
            var = cpp_rational(n0, n) * cpp_rational(n1, n) * (mu0 - mu1) * (mu0 - mu1);
        }
        if (var > best) {
            best = var;
            best_t = t;
        }
    }
    return best_t;
}

inline ScoreMatrix matrix(std::vector<std::vector<double>> rows) {
    ScoreMatrix m;
    m.classes = static_cast<int>(rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) m.ids.push_back(crop_id(i));
    m.rows = std::move(rows);
    return m;
}

inline ScoreMatrix random_matrix(std::mt19937& rng, int n, int classes) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) {
        for (int c = 0; c < classes; ++c) r.push_back(u(rng) < 0.2 ? 0.0 : u(rng));
        r[static_cast<std::size_t>(rng() % static_cast<unsigned>(classes))] += 0.01;
    }
    return matrix(std::move(rows));
}

// All assignments with exactly `expected` members per class; returns the
// highest total score, first found in lexicographic order on ties.
inline std::vector<int> brute_force(const ScoreMatrix& m, const std::vector<int>& expected, int* optima = nullptr) {
    const std::size_t n = m.size();
    std::vector<int> cur(n), best;
    std::vector<int> left = expected;
    double best_total = -1;
    int count = 0;
    std::function<void(std::size_t, double)> rec = [&](std::size_t i, double total) {
        if (i == n) {
            if (total > best_total + 1e-12) {
                best_total = total;
                best = cur;
                count = 1;
            } else if (std::abs(total - best_total) <= 1e-12) {
                ++count;
            }
            return;
        }
        for (int c = 1; c <= m.classes; ++c) {
            if (left[static_cast<std::size_t>(c - 1)] == 0) continue;
            --left[static_cast<std::size_t>(c - 1)];
            cur[i] = c;
            rec(i + 1, total + m.score(i, c));
            ++left[static_cast<std::size_t>(c - 1)];
        }
    };
    rec(0, 0.0);
    if (optima) *optima = count;
    return best;
}

/// A count-feasible truth (two crops per class, N = 2C) scored high on its
/// class, except one crop that prefers a neighbouring class by a small margin.
struct OneSwapInstance {
    ScoreMatrix scores;
    std::vector<int> truth;
};

inline OneSwapInstance one_swap_instance(std::mt19937& rng, int n) {
    std::uniform_real_distribution<double> high(0.6, 1.0), low(0.0, 0.2), mid(0.45, 0.6), delta(0.005, 0.1);
    const int classes = n / 2;
    std::vector<int> truth;
    for (int c = 1; c <= classes; ++c) truth.insert(truth.end(), {c, c});
    std::shuffle(truth.begin(), truth.end(), rng);
    std::vector<std::vector<double>> rows;
    for (int c : truth) {
        std::vector<double> r;
        for (int k = 1; k <= classes; ++k) r.push_back(k == c ? high(rng) : low(rng));
        rows.push_back(r);
    }
    const auto wrong = rng() % static_cast<unsigned>(n);
    const int a = truth[wrong];
    const int b = a == classes ? a - 1 : a + 1;
    rows[wrong][static_cast<std::size_t>(a - 1)] = mid(rng);
    rows[wrong][static_cast<std::size_t>(b - 1)] = rows[wrong][static_cast<std::size_t>(a - 1)] + delta(rng);
    return {matrix(std::move(rows)), truth};
}

/// Every regular file under `root`, keyed by relative path.
inline std::map<std::string, std::vector<std::uint8_t>> tree_bytes(const std::filesystem::path& root) {
    std::map<std::string, std::vector<std::uint8_t>> out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = read_file(e.path());
    return out;
}

inline BinaryMask mask_from_rows(const std::vector<std::string>& rows) {
    BinaryMask m(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) m.set(x, y, rows[y][x] == '#');
    return m;
}

inline BinaryMask filled_rect(int w, int h, int x0, int y0, int rw, int rh) {
    BinaryMask m(w, h);
    for (int y = y0; y < y0 + rh; ++y)
        for (int x = x0; x < x0 + rw; ++x) m.set(x, y);
    return m;
}

/// Crop mask re-projected onto a canvas of the given size.
inline BinaryMask to_canvas(const CropRecord& c, int w, int h) {
    BinaryMask full(w, h);
    for (int y = 0; y < c.mask.height(); ++y)
        for (int x = 0; x < c.mask.width(); ++x)
            if (c.mask.test(x, y)) full.set(x + c.offset.x, y + c.offset.y);
    return full;
}

/// Largest IoU between `truth` and any crop.
inline double best_iou(const BinaryMask& truth, const std::vector<CropRecord>& crops) {
    double best = 0.0;
    for (const auto& c : crops) best = std::max(best, iou(truth, to_canvas(c, truth.width(), truth.height())));
    return best;
}

inline double segment_distance(Point2d p, Point2d a, Point2d b) {
    const double dx = b.x - a.x, dy = b.y - a.y, len2 = dx * dx + dy * dy;
    const double t = len2 > 0 ? std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0) : 0.0;
    return std::hypot(p.x - a.x - t * dx, p.y - a.y - t * dy);
}

inline double polyline_distance(Point2d p, const std::vector<Point2d>& axis) {
    double best = 1e300;
    for (std::size_t i = 1; i < axis.size(); ++i) best = std::min(best, segment_distance(p, axis[i - 1], axis[i]));
    return best;
}

/// Operator-style strokes for a two-object overlap: chromosome seeds (labels 1
/// and 2) every 2 px along each axis once clear of the other capsule by 1 px,
/// intersection seeds (label 3) along both axes where they lie at least 1 px
/// inside the other capsule. Coordinates are shifted into the crop. `pair`
/// names the two objects; the second one is drawn on top.
inline SeedSet scripted_seeds(const synth::SynthSpec& spec, const synth::GroundTruth& gt, const CropRecord& crop,
                              int method = 2, std::array<int, 2> pair = {0, 1}) {
    SeedSet seeds;
    seeds.method = method;
    if (method == 1) seeds.above_label = 2;  // the later object is drawn on top
    auto add = [&](Point2d p, int label, SeedRole role) {
        const Point q{static_cast<int>(std::lround(p.x)) - crop.offset.x,
                      static_cast<int>(std::lround(p.y)) - crop.offset.y};
        if (!crop.mask.contains(q) || !crop.mask.test(q)) return;
        for (const auto& s : seeds.seeds)
            if (s.position == q) return;
        seeds.seeds.push_back({q, label, role});
    };
    for (int i = 0; i < 2; ++i) {
        const auto self = static_cast<std::size_t>(pair[static_cast<std::size_t>(i)]);
        const auto peer = static_cast<std::size_t>(pair[static_cast<std::size_t>(1 - i)]);
        const auto& axis = gt.axes[self];
        const auto& other = gt.axes[peer];
        const double r = spec.objects[peer].width / 2;
        for (std::size_t j = 1; j < axis.size(); ++j) {
            const Point2d a = axis[j - 1], b = axis[j];
            const double len = std::hypot(b.x - a.x, b.y - a.y);
            for (double t = 0; t < len; t += 2.0) {
                const Point2d p{a.x + (b.x - a.x) * t / len, a.y + (b.y - a.y) * t / len};
                const double d = polyline_distance(p, other);
                if (d >= r + 1.0) add(p, i + 1, SeedRole::Chromosome);
                else if (d < r - 1.0) add(p, 3, SeedRole::Intersection);
            }
        }
    }
    return seeds;
}

/// Agreement between separated masks (by label 1..n, crop coordinates) and
/// ground-truth masks (canvas coordinates), counted over every (pixel,
/// object) pair with the pixel inside both the crop mask and the truth union.
struct Attribution {
    long agree = 0;
    long total = 0;
    double rate() const { return total ? static_cast<double>(agree) / total : 1.0; }
};

inline Attribution attribution(const std::vector<SeparatedChromosome>& out, const std::vector<BinaryMask>& truth,
                               const CropRecord& crop) {
    Attribution a;
    for (int y = 0; y < crop.mask.height(); ++y)
        for (int x = 0; x < crop.mask.width(); ++x) {
            if (!crop.mask.test(x, y)) continue;
            const int gx = x + crop.offset.x, gy = y + crop.offset.y;
            bool any = false;
            for (const auto& t : truth) any = any || t.test(gx, gy);
            if (!any) continue;
            for (std::size_t i = 0; i < truth.size(); ++i) {
                bool predicted = false;
                for (const auto& o : out)
                    if (o.label == static_cast<int>(i) + 1) predicted = o.mask.test(x, y);
                a.agree += predicted == truth[i].test(gx, gy);
                ++a.total;
            }
        }
    return a;
}

}  // namespace karyoseg::testing
