#include "karyoseg/overlap.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <queue>

#include "karyoseg/imgcore.h"

namespace karyoseg {

namespace {

// Ring values N, NE, E, SE, S, SW, W, NW.
std::array<int, 8> ring(const BinaryMask& m, Point p) {
    std::array<int, 8> v{};
    for (int k = 0; k < 8; ++k) v[k] = m.test_or_false(p.x + kNeighbors8[k][0], p.y + kNeighbors8[k][1]) ? 1 : 0;
    return v;
}

int transitions(const std::array<int, 8>& v) {
    int a = 0;
    for (int k = 0; k < 8; ++k) a += (v[k] == 0 && v[(k + 1) % 8] == 1) ? 1 : 0;
    return a;
}

struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t i) {
        while (parent[i] != i) i = parent[i] = parent[parent[i]];
        return i;
    }
    // The smaller index stays root so roots follow input order.
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

int neighbor_count(const std::array<int, 8>& v) { return std::accumulate(v.begin(), v.end(), 0); }

// Yokoi connectivity number for 8-connected foreground.
int connectivity_number(const std::array<int, 8>& v) {
    int n = 0;
    for (int k = 0; k < 8; k += 2) {
        const int a = 1 - v[k], b = 1 - v[(k + 1) % 8], c = 1 - v[(k + 2) % 8];
        n += a - a * b * c;
    }
    return n;
}

bool deletable(const BinaryMask& m, Point p) {
    const auto v = ring(m, p);
    return neighbor_count(v) >= 2 && connectivity_number(v) == 1;
}

// One Zhang-Suen subiteration; returns the number of deleted pixels.
std::size_t zhang_suen_pass(BinaryMask& m, bool first) {
    std::vector<Point> marked;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m.test(x, y)) continue;
            const auto v = ring(m, {x, y});
            const int b = neighbor_count(v);
            if (b < 3 || b > 6 || transitions(v) != 1) continue;
            // v: 0=N(P2) 1=NE 2=E(P4) 3=SE 4=S(P6) 5=SW 6=W(P8) 7=NW
            const bool ok = first ? (v[0] * v[2] * v[4] == 0 && v[2] * v[4] * v[6] == 0)
                                  : (v[0] * v[2] * v[6] == 0 && v[0] * v[4] * v[6] == 0);
            if (ok) marked.push_back({x, y});
        }
    }
    std::size_t deleted = 0;
    for (Point p : marked) {
        if (deletable(m, p)) {
            m.set(p, false);
            ++deleted;
        }
    }
    return deleted;
}

// Sequential removal of simple pixels with at least two neighbors. Pixels
// with three or more neighbors go first, to a fixpoint, so that a two-pixel
// staircase collapses onto a line before its tip (two neighbors) is
// considered; otherwise a raster sweep can eat the stroke from its end.
void make_thin(BinaryMask& m) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (const int min_neighbors : {3, 2}) {
            bool swept = true;
            while (swept) {
                swept = false;
                for (int y = 0; y < m.height(); ++y) {
                    for (int x = 0; x < m.width(); ++x) {
                        if (!m.test(x, y)) continue;
                        const auto v = ring(m, {x, y});
                        if (neighbor_count(v) >= min_neighbors && connectivity_number(v) == 1) {
                            m.set(x, y, false);
                            swept = changed = true;
                        }
                    }
                }
                if (min_neighbors == 2) break;
            }
        }
    }
}

// Transitions around the 12 pixels bordering the 2x2 block at `tl`, clockwise
// from the pixel diagonally above-left.
int block_crossing_number(const BinaryMask& m, Point tl) {
    static constexpr int kRing[12][2] = {{-1, -1}, {0, -1}, {1, -1}, {2, -1}, {2, 0}, {2, 1},
                                         {2, 2},   {1, 2},  {0, 2},  {-1, 2}, {-1, 1}, {-1, 0}};
    int v[12];
    for (int k = 0; k < 12; ++k) v[k] = m.test_or_false(tl.x + kRing[k][0], tl.y + kRing[k][1]) ? 1 : 0;
    int a = 0;
    for (int k = 0; k < 12; ++k) a += (v[k] == 0 && v[(k + 1) % 12] == 1) ? 1 : 0;
    return a;
}

// Per pixel, the larger of its crossing number and that of any fully set
// 2x2 block containing it; 0 off the skeleton.
LabelImage branch_numbers(const BinaryMask& m) {
    LabelImage out(m.width(), m.height(), 0);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (m.test(x, y)) out.at(x, y) = transitions(ring(m, {x, y}));
    // A 2x2 block survives thinning only where every pixel carries a branch;
    // its 12-pixel ring stands in for the single pixel's 8-ring.
    for (int y = 0; y + 1 < m.height(); ++y) {
        for (int x = 0; x + 1 < m.width(); ++x) {
            if (!(m.test(x, y) && m.test(x + 1, y) && m.test(x, y + 1) && m.test(x + 1, y + 1))) continue;
            const int c = block_crossing_number(m, {x, y});
            for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) out.at(x + dx, y + dy) = std::max(out.at(x + dx, y + dy), c);
        }
    }
    return out;
}

}  // namespace

bool is_simple_point(const BinaryMask& mask, Point p) {
    return mask.test_or_false(p.x, p.y) && connectivity_number(ring(mask, p)) == 1;
}

int crossing_number(const BinaryMask& skeleton, Point p) {
    require(skeleton.contains(p), "crossing_number: point out of bounds");
    return transitions(ring(skeleton, p));
}

Skeleton skeletonize(const BinaryMask& mask, std::string source_id) {
    BinaryMask m = mask;
    while (true) {
        const std::size_t a = zhang_suen_pass(m, true);
        const std::size_t b = zhang_suen_pass(m, false);
        if (a + b == 0) break;
    }
    make_thin(m);
    return {std::move(m), std::move(source_id)};
}

namespace {

struct Spur {
    std::vector<Point> path;  ///< tip first, junction excluded
    Point junction;
};

// Every free-tip branch that reaches a branch pixel. Branches that end in
// another tip are not spurs.
std::vector<Spur> find_spurs(const BinaryMask& src) {
    const LabelImage branch = branch_numbers(src);
    std::vector<Spur> spurs;
    for (int y = 0; y < src.height(); ++y) {
        for (int x = 0; x < src.width(); ++x) {
            if (!src.test(x, y) || neighbor_count(ring(src, {x, y})) != 1) continue;
            std::vector<Point> path{{x, y}};
            Point cur{x, y};
            while (true) {
                std::vector<Point> next;
                Point junction{-1, -1};
                for (const auto& d : kNeighbors8) {
                    const Point q{cur.x + d[0], cur.y + d[1]};
                    if (!src.test_or_false(q.x, q.y)) continue;
                    if (std::find(path.begin(), path.end(), q) != path.end()) continue;
                    if (branch.at(q) >= 3 && junction.x < 0) junction = q;
                    next.push_back(q);
                }
                if (junction.x >= 0) {
                    spurs.push_back({std::move(path), junction});
                    break;
                }
                if (next.size() != 1) break;  // another tip, or a fork of non-branch pixels
                cur = next[0];
                path.push_back(cur);
            }
        }
    }
    return spurs;
}

template <typename Keep>
Skeleton remove_spurs(const Skeleton& skel, Keep keep) {
    Skeleton out = skel;
    for (const Spur& spur : find_spurs(skel.mask))
        if (!keep(spur))
            for (Point p : spur.path) out.mask.set(p, false);
    make_thin(out.mask);
    return out;
}

// Euclidean distance from p to the nearest background pixel of `shape`;
// outside the raster counts as background.
double distance_to_background(const BinaryMask& shape, Point p) {
    double best = std::min({p.x + 1, p.y + 1, shape.width() - p.x, shape.height() - p.y});
    for (int y = 0; y < shape.height(); ++y) {
        const double dy = y - p.y;
        if (std::abs(dy) >= best) continue;
        for (int x = 0; x < shape.width(); ++x) {
            if (shape.test(x, y)) continue;
            best = std::min(best, std::hypot(x - p.x, dy));
        }
    }
    return best;
}

}  // namespace

Skeleton prune_spurs(const Skeleton& skel, int max_length) {
    require(max_length >= 0, "spur length must be non-negative");
    if (max_length == 0) return skel;
    return remove_spurs(skel, [&](const Spur& s) { return static_cast<int>(s.path.size()) > max_length; });
}

Skeleton prune_spurs(const Skeleton& skel, const BinaryMask& shape, double max_excess) {
    require(max_excess >= 0.0, "spur excess must be non-negative");
    require(shape.width() == skel.mask.width() && shape.height() == skel.mask.height(),
            "prune_spurs: shape and skeleton sizes differ");
    return remove_spurs(skel, [&](const Spur& s) {
        const Point tip = s.path.front();
        const double reach = std::hypot(tip.x - s.junction.x, tip.y - s.junction.y);
        return reach > distance_to_background(shape, s.junction) + max_excess;
    });
}

std::vector<BranchPoint> detect_intersections(const Skeleton& skel, double merge_radius, int bridge_length) {
    require(merge_radius >= 0.0, "merge_radius must be non-negative");
    require(bridge_length >= 0, "bridge_length must be non-negative");
    const BinaryMask& m = skel.mask;
    const LabelImage branch = branch_numbers(m);
    std::vector<Point> pixels;
    std::vector<int> cn;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (branch.at(x, y) >= 3) {
                pixels.push_back({x, y});
                cn.push_back(branch.at(x, y));
            }
        }
    }

    DisjointSets pix(pixels.size());
    const double r2 = merge_radius * merge_radius;
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        for (std::size_t j = i + 1; j < pixels.size(); ++j) {
            const double dx = pixels[i].x - pixels[j].x, dy = pixels[i].y - pixels[j].y;
            if (dx * dx + dy * dy <= r2) pix.unite(i, j);
        }
    }

    // Radius clusters, numbered by their first pixel in raster order.
    std::vector<int> cluster_of(pixels.size());
    std::vector<Point2d> centroid;
    std::vector<int> cluster_cn;
    {
        std::vector<int> index_of_root(pixels.size(), -1);
        std::vector<int> size;
        for (std::size_t i = 0; i < pixels.size(); ++i) {
            auto& id = index_of_root[pix.find(i)];
            if (id < 0) {
                id = static_cast<int>(centroid.size());
                centroid.push_back({0.0, 0.0});
                cluster_cn.push_back(0);
                size.push_back(0);
            }
            cluster_of[i] = id;
            centroid[id].x += pixels[i].x;
            centroid[id].y += pixels[i].y;
            cluster_cn[id] = std::max(cluster_cn[id], cn[i]);
            ++size[id];
        }
        for (std::size_t c = 0; c < centroid.size(); ++c) {
            centroid[c].x /= size[c];
            centroid[c].y /= size[c];
        }
    }
    const std::size_t nclusters = centroid.size();

    // Bridging: walk from each cluster along non-junction skeleton pixels.
    DisjointSets groups(nclusters);
    if (bridge_length > 0 && nclusters > 1) {
        LabelImage junction(m.width(), m.height(), -1);
        for (std::size_t i = 0; i < pixels.size(); ++i) junction.at(pixels[i]) = cluster_of[i];
        LabelImage dist(m.width(), m.height(), -1);
        std::vector<Point> touched;
        for (std::size_t c = 0; c < nclusters; ++c) {
            std::queue<Point> queue;
            for (std::size_t i = 0; i < pixels.size(); ++i) {
                if (cluster_of[i] != static_cast<int>(c)) continue;
                dist.at(pixels[i]) = 0;
                touched.push_back(pixels[i]);
                queue.push(pixels[i]);
            }
            while (!queue.empty()) {
                const Point p = queue.front();
                queue.pop();
                const int d = dist.at(p);
                for (const auto& k : kNeighbors8) {
                    const Point q{p.x + k[0], p.y + k[1]};
                    if (!m.test_or_false(q.x, q.y) || dist.at(q) >= 0) continue;
                    const int other = junction.at(q);
                    if (other >= 0) {
                        if (other != static_cast<int>(c)) groups.unite(c, static_cast<std::size_t>(other));
                        continue;
                    }
                    if (d + 1 > bridge_length) continue;
                    dist.at(q) = d + 1;
                    touched.push_back(q);
                    queue.push(q);
                }
            }
            for (Point p : touched) dist.at(p) = -1;
            touched.clear();
        }
    }

    std::vector<BranchPoint> out;
    for (std::size_t root = 0; root < nclusters; ++root) {
        if (groups.find(root) != root) continue;
        std::vector<std::size_t> members;
        for (std::size_t c = root; c < nclusters; ++c)
            if (groups.find(c) == root) members.push_back(c);
        if (members.size() == 1) {
            out.push_back({centroid[root], cluster_cn[root]});
            continue;
        }
        // Bridged junctions: each internal bridge accounts for two of the
        // branches counted at its ends. Report at the skeleton pixel closest
        // to the mean of the junction centroids.
        Point2d mean{0.0, 0.0};
        int branches = 0, best = 0;
        for (std::size_t c : members) {
            mean.x += centroid[c].x / static_cast<double>(members.size());
            mean.y += centroid[c].y / static_cast<double>(members.size());
            branches += cluster_cn[c];
            best = std::max(best, cluster_cn[c]);
        }
        branches -= 2 * static_cast<int>(members.size() - 1);
        Point snap{-1, -1};
        double snap_d2 = 0.0;
        for (int y = 0; y < m.height(); ++y) {
            for (int x = 0; x < m.width(); ++x) {
                if (!m.test(x, y)) continue;
                const double d2 = (x - mean.x) * (x - mean.x) + (y - mean.y) * (y - mean.y);
                if (snap.x < 0 || d2 < snap_d2) {
                    snap = {x, y};
                    snap_d2 = d2;
                }
            }
        }
        out.push_back({{static_cast<double>(snap.x), static_cast<double>(snap.y)}, std::max(best, branches)});
    }
    return out;
}

OverlapAnalysis analyze_crop(const CropRecord& crop, const PipelineConfig& config) {
    require(!crop.mask.empty() && crop.mask.count() > 0, "classify_crop: crop mask is empty");
    const Kernel cross = Kernel::cross3();
    BinaryMask cleaned = close(open(crop.mask, cross), cross);
    // Objects thinner than the cross vanish under opening; keep them as-is.
    if (cleaned.count() == 0) cleaned = crop.mask;

    OverlapAnalysis a;
    a.skeleton = prune_spurs(skeletonize(cleaned, crop.id), cleaned, config.spur_excess);
    a.branch_points = detect_intersections(a.skeleton, config.merge_radius, config.bridge_length);
    a.kind = a.branch_points.empty() ? CropKind::Single : CropKind::SuspectMulti;
    return a;
}

CropKind classify_crop(CropRecord& crop, const PipelineConfig& config) {
    crop.kind = analyze_crop(crop, config).kind;
    return crop.kind;
}

}  // namespace karyoseg
