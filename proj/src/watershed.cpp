#include "karyoseg/watershed.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <set>
#include <tuple>

#include "karyoseg/imgcore.h"

namespace karyoseg {

std::string_view to_string(SeedRole role) {
    switch (role) {
        case SeedRole::Chromosome: return "chromosome";
        case SeedRole::Intersection: return "intersection";
        case SeedRole::Background: return "background";
    }
    return "chromosome";
}

SeedRole seed_role_from_string(std::string_view s) {
    if (s == "chromosome") return SeedRole::Chromosome;
    if (s == "intersection") return SeedRole::Intersection;
    if (s == "background") return SeedRole::Background;
    fail(ErrorCode::InvalidArgument, "unknown seed role: " + std::string(s));
}

std::vector<int> SeedSet::labels() const {
    std::set<int> out;
    for (const auto& s : seeds) out.insert(s.label);
    return {out.begin(), out.end()};
}

std::vector<int> SeedSet::labels(SeedRole role) const {
    std::set<int> out;
    for (const auto& s : seeds)
        if (s.role == role) out.insert(s.label);
    return {out.begin(), out.end()};
}

SeedRole SeedSet::role_of(int label) const {
    for (const auto& s : seeds)
        if (s.label == label) return s.role;
    fail(ErrorCode::InvalidArgument, "no seed carries label " + std::to_string(label));
}

Point2d SeedSet::centroid(int label) const {
    Point2d sum;
    int n = 0;
    for (const auto& s : seeds) {
        if (s.label != label) continue;
        sum.x += s.position.x;
        sum.y += s.position.y;
        ++n;
    }
    require(n > 0, "no seed carries label " + std::to_string(label));
    return {sum.x / n, sum.y / n};
}

void SeedSet::validate(int width, int height) const {
    require(method == 1 || method == 2, "method must be 1 or 2");
    std::map<int, SeedRole> roles;
    std::map<std::pair<int, int>, int> owner;
    for (const auto& s : seeds) {
        require(s.position.x >= 0 && s.position.y >= 0 && s.position.x < width && s.position.y < height,
                "seed (" + std::to_string(s.position.x) + "," + std::to_string(s.position.y) + ") lies outside the " +
                    std::to_string(width) + "x" + std::to_string(height) + " crop");
        require(s.label > 0, "seed labels must be positive");
        const auto [it, fresh] = roles.emplace(s.label, s.role);
        require(fresh || it->second == s.role, "label " + std::to_string(s.label) + " is used with two roles");
        const auto [pos, first] = owner.emplace(std::pair{s.position.x, s.position.y}, s.label);
        require(first || pos->second == s.label, "two labels share one seed pixel");
    }
    require(roles.size() >= 2, "watershed needs at least two distinct seed labels");
}

void SeedSet::validate_for_separation(int width, int height) const {
    validate(width, height);
    const auto chromosomes = labels(SeedRole::Chromosome);
    require(chromosomes.size() >= 2, "separation needs at least two chromosome labels");
    if (above_label) {
        require(std::binary_search(chromosomes.begin(), chromosomes.end(), *above_label),
                "above_label " + std::to_string(*above_label) + " is not a chromosome seed label");
    }
    if (method == 1 && !labels(SeedRole::Intersection).empty())
        require(above_label.has_value(), "method 1 with an intersection seed needs above_label");
}

void to_json(nlohmann::json& j, const SeedSet& s) {
    j = nlohmann::json::object();
    j["method"] = s.method;
    j["above_label"] = s.above_label ? nlohmann::json(*s.above_label) : nlohmann::json(nullptr);
    auto& arr = j["seeds"] = nlohmann::json::array();
    for (const auto& seed : s.seeds)
        arr.push_back({{"x", seed.position.x}, {"y", seed.position.y}, {"label", seed.label},
                       {"role", to_string(seed.role)}});
}

void from_json(const nlohmann::json& j, SeedSet& s) {
    require(j.is_object(), "seed set must be a JSON object");
    s = SeedSet{};
    for (const auto& [key, value] : j.items()) {
        if (key == "method") s.method = value.get<int>();
        else if (key == "above_label") s.above_label = value.is_null() ? std::nullopt : std::optional(value.get<int>());
        else if (key == "seeds") {
            require(value.is_array(), "seeds must be an array");
            for (const auto& e : value) {
                Seed seed;
                seed.position = {e.at("x").get<int>(), e.at("y").get<int>()};
                seed.label = e.at("label").get<int>();
                seed.role = seed_role_from_string(e.value("role", std::string("chromosome")));
                s.seeds.push_back(seed);
            }
        } else {
            fail(ErrorCode::InvalidArgument, "unknown seed set key: " + key);
        }
    }
}

BinaryMask SegmentMap::region(int label) const {
    BinaryMask out(labels.width(), labels.height());
    for (std::size_t i = 0; i < labels.size(); ++i) out.data()[i] = labels.data()[i] == label ? 1 : 0;
    return out;
}

Raster<double> flooding_surface(const GrayImage& gray) {
    return sobel_gradient(median_blur(gray, 3), 3).magnitude;
}

namespace {

SegmentMap flood(const GrayImage& gray, const SeedSet& seeds, const BinaryMask* domain) {
    seeds.validate(gray.width(), gray.height());
    const int w = gray.width(), h = gray.height();
    const auto surface = flooding_surface(gray);

    std::map<int, bool> free_roaming;  // background labels ignore the domain
    for (const auto& s : seeds.seeds) free_roaming[s.label] = s.role == SeedRole::Background;
    auto allowed = [&](int label, std::size_t i) {
        return domain == nullptr || domain->data()[i] != 0 || free_roaming.at(label);
    };

    SegmentMap out{LabelImage(w, h, 0)};
    auto& labels = out.labels;
    std::vector<std::uint8_t> done(labels.size(), 0), queued(labels.size(), 0);
    std::vector<std::uint32_t> depth(labels.size(), 0);
    for (const auto& s : seeds.seeds) {
        labels.at(s.position) = s.label;
        done[labels.index(s.position.x, s.position.y)] = 1;
    }

    // (surface, steps across the current plateau, index): plateaus flood
    // breadth-first, remaining ties go to the lower index.
    using Entry = std::tuple<double, std::uint32_t, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
    auto push_neighbours = [&](int x, int y, int label) {
        const auto i = labels.index(x, y);
        for (const auto& d : kNeighbors4) {
            const int nx = x + d[0], ny = y + d[1];
            if (!labels.contains(nx, ny)) continue;
            const auto j = labels.index(nx, ny);
            if (done[j] || queued[j] || !allowed(label, j)) continue;
            queued[j] = 1;
            depth[j] = surface.data()[j] == surface.data()[i] ? depth[i] + 1 : 0;
            queue.emplace(surface.data()[j], depth[j], j);
        }
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (done[labels.index(x, y)]) push_neighbours(x, y, labels.at(x, y));

    while (!queue.empty()) {
        const auto i = std::get<2>(queue.top());
        queue.pop();
        const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
        done[i] = 1;
        int label = 0;
        bool conflict = false;
        for (const auto& d : kNeighbors4) {
            const int nx = x + d[0], ny = y + d[1];
            if (!labels.contains(nx, ny)) continue;
            const int l = labels.at(nx, ny);
            if (l == 0 || !allowed(l, i)) continue;
            if (label == 0) label = l;
            else if (l != label) conflict = true;
        }
        if (conflict || label == 0) continue;
        labels.data()[i] = label;
        push_neighbours(x, y, label);
    }
    return out;
}

struct Geometry {
    SegmentMap map;
    std::vector<int> chromosomes;
    std::vector<int> intersections;
    std::map<int, std::set<int>> touching;  // intersection label -> adjacent chromosome labels
};

Geometry analyse(const CropRecord& crop, const SeedSet& seeds) {
    Geometry g{reconstruct_regions(crop, seeds), seeds.labels(SeedRole::Chromosome),
               seeds.labels(SeedRole::Intersection), {}};
    const auto& labels = g.map.labels;
    std::set<int> inter(g.intersections.begin(), g.intersections.end());
    std::set<int> chrom(g.chromosomes.begin(), g.chromosomes.end());
    for (int i : g.intersections) g.touching[i];
    for (int y = 0; y < labels.height(); ++y)
        for (int x = 0; x < labels.width(); ++x) {
            const int a = labels.at(x, y);
            if (!inter.count(a)) continue;
            for (const auto& d : kNeighbors8) {
                const int nx = x + d[0], ny = y + d[1];
                if (labels.contains(nx, ny) && chrom.count(labels.at(nx, ny))) g.touching[a].insert(labels.at(nx, ny));
            }
        }
    for (const auto& [i, adj] : g.touching)
        if (adj.empty())
            fail(ErrorCode::DanglingIntersection,
                 "intersection region " + std::to_string(i) + " touches no chromosome region");
    return g;
}

SeparatedChromosome make_output(const CropRecord& crop, int label, BinaryMask mask) {
    SeparatedChromosome out;
    out.parent_crop = crop.id;
    out.label = label;
    out.image = GrayImage(crop.image.width(), crop.image.height(), 255);
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask.data()[i]) out.image.data()[i] = crop.image.data()[i];
    out.gap = BinaryMask(mask.width(), mask.height());
    out.mask = std::move(mask);
    return out;
}

}  // namespace

SegmentMap watershed(const GrayImage& gray, const SeedSet& seeds) { return flood(gray, seeds, nullptr); }

SegmentMap watershed(const GrayImage& gray, const SeedSet& seeds, const BinaryMask& domain) {
    require(domain.width() == gray.width() && domain.height() == gray.height(), "domain must match the image size");
    return flood(gray, seeds, &domain);
}

SegmentMap reconstruct_regions(const CropRecord& crop, const SeedSet& seeds) {
    seeds.validate_for_separation(crop.image.width(), crop.image.height());
    auto map = watershed(crop.image, seeds, crop.mask);
    std::map<int, Point2d> centroids;
    for (int l : seeds.labels())
        if (seeds.role_of(l) != SeedRole::Background) centroids[l] = seeds.centroid(l);

    // Hand line pixels to a neighbouring region, one ring per pass.
    auto& labels = map.labels;
    for (bool changed = true; changed;) {
        changed = false;
        const auto before = labels;
        for (int y = 0; y < labels.height(); ++y)
            for (int x = 0; x < labels.width(); ++x) {
                if (before.at(x, y) != 0 || !crop.mask.test(x, y)) continue;
                int best = 0;
                double best_d = 0;
                for (const auto& d : kNeighbors8) {
                    const int nx = x + d[0], ny = y + d[1];
                    if (!before.contains(nx, ny)) continue;
                    const auto it = centroids.find(before.at(nx, ny));
                    if (it == centroids.end()) continue;
                    const double dist = std::hypot(it->second.x - x, it->second.y - y);
                    if (best == 0 || dist < best_d || (dist == best_d && it->first < best)) {
                        best = it->first;
                        best_d = dist;
                    }
                }
                if (best != 0) {
                    labels.at(x, y) = best;
                    changed = true;
                }
            }
    }
    return map;
}

std::vector<SeparatedChromosome> separate_method2(const CropRecord& crop, const SeedSet& seeds) {
    const auto g = analyse(crop, seeds);
    std::vector<SeparatedChromosome> out;
    for (int k : g.chromosomes) {
        auto mask = g.map.region(k);
        std::vector<int> shared;
        for (const auto& [i, adj] : g.touching) {
            if (!adj.count(k)) continue;
            mask = mask_union(mask, g.map.region(i));
            shared.push_back(i);
        }
        auto sep = make_output(crop, k, std::move(mask));
        sep.shared = std::move(shared);
        out.push_back(std::move(sep));
    }
    return out;
}

std::vector<SeparatedChromosome> separate_method1(const CropRecord& crop, const SeedSet& seeds,
                                                  const GapFiller& filler) {
    require(static_cast<bool>(filler), "a gap filler is required");
    const auto g = analyse(crop, seeds);
    std::vector<SeparatedChromosome> out;
    for (int k : g.chromosomes) {
        auto mask = g.map.region(k);
        if (g.intersections.empty()) {
            out.push_back(make_output(crop, k, std::move(mask)));
        } else if (k == *seeds.above_label) {
            for (int i : g.intersections) mask = mask_union(mask, g.map.region(i));
            auto sep = make_output(crop, k, std::move(mask));
            sep.shared = g.intersections;
            out.push_back(std::move(sep));
        } else {
            BinaryMask gap(mask.width(), mask.height());
            std::vector<int> filled;
            for (const auto& [i, adj] : g.touching) {
                if (!adj.count(k)) continue;
                gap = mask_union(gap, g.map.region(i));
                filled.push_back(i);
            }
            auto sep = make_output(crop, k, mask);
            if (!filled.empty()) {
                const auto synthesized = filler(sep.image, mask, gap);
                require(synthesized.width() == gap.width() && synthesized.height() == gap.height(),
                        "gap filler changed the image size");
                for (std::size_t i = 0; i < gap.size(); ++i)
                    if (gap.data()[i]) sep.image.data()[i] = synthesized.data()[i];
                sep.mask = mask_union(mask, gap);
                sep.gap = std::move(gap);
                sep.filled = std::move(filled);
            }
            out.push_back(std::move(sep));
        }
    }
    return out;
}

std::vector<SeparatedChromosome> separate(const CropRecord& crop, const SeedSet& seeds, const GapFiller& filler) {
    if (seeds.method == 1) return separate_method1(crop, seeds, filler);
    require(seeds.method == 2, "method must be 1 or 2");
    return separate_method2(crop, seeds);
}

nlohmann::json provenance_json(const SeparatedChromosome& s) {
    return {{"parent_crop", s.parent_crop},
            {"label", s.label},
            {"shared", s.shared},
            {"filled", s.filled},
            {"pixels", s.mask.count()},
            {"gap_pixels", s.gap.count()}};
}

GrayImage baseline_gap_fill(const GrayImage& image, const BinaryMask& object_mask, const BinaryMask& gap_mask) {
    require(object_mask.width() == image.width() && object_mask.height() == image.height() &&
                gap_mask.width() == image.width() && gap_mask.height() == image.height(),
            "gap fill masks must match the image size");
    GrayImage out = image;
    if (gap_mask.count() == 0) return out;
    // White pixels inside the mask are background showing through the contour and carry no stain.
    auto is_source = [&](int x, int y) {
        return object_mask.test_or_false(x, y) && !gap_mask.test(x, y) && image.at(x, y) < 255;
    };

    // Principal axis of the observed object pixels.
    double sx = 0, sy = 0, n = 0;
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            if (is_source(x, y)) sx += x, sy += y, n += 1;
    require(n > 0, "gap fill needs object pixels");
    const double mx = sx / n, my = sy / n;
    double cxx = 0, cyy = 0, cxy = 0;
    for (int y = 0; y < image.height(); ++y)
        for (int x = 0; x < image.width(); ++x)
            if (is_source(x, y)) {
                cxx += (x - mx) * (x - mx);
                cyy += (y - my) * (y - my);
                cxy += (x - mx) * (y - my);
            }
    const double theta = 0.5 * std::atan2(2 * cxy, cxx - cyy);
    const double ux = std::cos(theta), uy = std::sin(theta);

    const auto comps = label_components(gap_mask, 8);
    for (int c = 1; c <= comps.count; ++c) {
        std::vector<Point> pixels, rim;
        int x0 = image.width(), y0 = image.height(), x1 = 0, y1 = 0;
        for (int y = 0; y < image.height(); ++y)
            for (int x = 0; x < image.width(); ++x) {
                if (comps.labels.at(x, y) != c) continue;
                pixels.push_back({x, y});
                x0 = std::min(x0, x), y0 = std::min(y0, y), x1 = std::max(x1, x), y1 = std::max(y1, y);
                for (const auto& d : kNeighbors8)
                    if (is_source(x + d[0], y + d[1])) rim.push_back({x + d[0], y + d[1]});
            }
        if (rim.empty())
            fail(ErrorCode::UnfillableGap, "gap region at (" + std::to_string(pixels[0].x) + "," +
                                               std::to_string(pixels[0].y) + ") touches no object pixel");
        std::sort(rim.begin(), rim.end(), [](Point a, Point b) { return std::pair(a.y, a.x) < std::pair(b.y, b.x); });
        rim.erase(std::unique(rim.begin(), rim.end()), rim.end());
        const int reach = static_cast<int>(std::ceil(std::hypot(x1 - x0 + 1, y1 - y0 + 1))) + 2;

        for (const Point p : pixels) {
            double num = 0, den = 0;
            for (const double sign : {1.0, -1.0}) {
                for (int s = 1; s <= reach; ++s) {
                    const int qx = static_cast<int>(std::lround(p.x + sign * s * ux));
                    const int qy = static_cast<int>(std::lround(p.y + sign * s * uy));
                    if (!image.contains(qx, qy)) break;
                    if (is_source(qx, qy)) {
                        const double d = std::hypot(qx - p.x, qy - p.y);
                        num += image.at(qx, qy) / d;
                        den += 1 / d;
                        break;
                    }
                }
            }
            if (den == 0) {
                for (const Point q : rim) {
                    const double d = std::hypot(q.x - p.x, q.y - p.y);
                    num += image.at(q) / (d * d);
                    den += 1 / (d * d);
                }
            }
            out.at(p) = static_cast<std::uint8_t>(std::clamp(std::lround(num / den), 0L, 255L));
        }
    }
    return out;
}

}  // namespace karyoseg
