#include "traffic/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace traffic {

std::pair<std::size_t, std::size_t> blob_count_range(DensityClass cls, const BlobSceneConfig& cfg) {
    std::optional<std::size_t> lo;
    std::size_t hi = 0;
    for (std::size_t n = 0; n <= cfg.max_blobs; ++n) {
        if (classify_count(static_cast<double>(n) * cfg.cars_per_blob) == cls) {
            if (!lo) lo = n;
            hi = n;
        }
    }
    if (!lo) {
        throw std::invalid_argument("no disc count up to " + std::to_string(cfg.max_blobs) + " maps to class " +
                                    std::string(to_string(cls)));
    }
    return {*lo, hi};
}

namespace {

struct Disc {
    double x, y;
};

// All sample points of a disc (centre plus rim) on the requested side of the region.
bool disc_within(const std::vector<Point>& region, const Disc& d, double r, bool inside) {
    for (int k = 0; k < 16; ++k) {
        const double a = 2.0 * M_PI * k / 16.0;
        if (point_in_polygon(region, d.x + r * std::cos(a), d.y + r * std::sin(a)) != inside) return false;
    }
    return point_in_polygon(region, d.x, d.y) == inside;
}

void place_discs(std::size_t count, bool counted, std::vector<Disc>& placed, Rng& rng, const BlobSceneConfig& cfg) {
    const double r = cfg.blob_radius;
    const double min_dist = 2.0 * r + cfg.min_gap;
    const double mx = std::max(cfg.margin_fraction * static_cast<double>(cfg.width), r + 0.5);
    const double my = std::max(cfg.margin_fraction * static_cast<double>(cfg.height), r + 0.5);
    for (std::size_t n = 0; n < count; ++n) {
        bool ok = false;
        for (int attempt = 0; attempt < 10000 && !ok; ++attempt) {
            const Disc d{rng.uniform(mx, static_cast<double>(cfg.width) - mx),
                         rng.uniform(my, static_cast<double>(cfg.height) - my)};
            if (cfg.region && !disc_within(cfg.region->vertices, d, r + 0.75, counted)) continue;
            ok = std::none_of(placed.begin(), placed.end(), [&](const Disc& o) {
                return std::hypot(o.x - d.x, o.y - d.y) < min_dist;
            });
            if (ok) placed.push_back(d);
        }
        if (!ok) throw std::runtime_error("cannot place " + std::to_string(count) + " discs in the frame");
    }
}

}  // namespace

BlobScene render_blob_scene(std::size_t blobs, Rng& rng, const BlobSceneConfig& cfg) {
    BlobScene scene;
    scene.blobs = blobs;
    scene.label = classify_count(static_cast<double>(blobs) * cfg.cars_per_blob);
    scene.distractors = cfg.region && cfg.max_distractors > 0
                            ? static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(cfg.max_distractors)))
                            : 0;

    std::vector<Disc> discs;
    place_discs(blobs, true, discs, rng, cfg);
    place_discs(scene.distractors, false, discs, rng, cfg);

    scene.image = Tensor({1, cfg.height, cfg.width}, cfg.background);
    const double r = cfg.blob_radius;
    for (const auto& d : discs) {
        const double intensity = rng.uniform(cfg.intensity_min, cfg.intensity_max);
        const auto y0 = static_cast<std::size_t>(std::max(0.0, std::floor(d.y - r)));
        const auto y1 = std::min(cfg.height - 1, static_cast<std::size_t>(std::ceil(d.y + r)));
        const auto x0 = static_cast<std::size_t>(std::max(0.0, std::floor(d.x - r)));
        const auto x1 = std::min(cfg.width - 1, static_cast<std::size_t>(std::ceil(d.x + r)));
        for (std::size_t y = y0; y <= y1; ++y)
            for (std::size_t x = x0; x <= x1; ++x) {
                if (std::hypot(static_cast<double>(x) + 0.5 - d.x, static_cast<double>(y) + 0.5 - d.y) <= r) {
                    scene.image.at(0, y, x) = intensity;
                }
            }
    }
    if (cfg.noise_stddev > 0.0) {
        for (double& v : scene.image.values()) v = std::clamp(v + rng.normal(0.0, cfg.noise_stddev), 0.0, 1.0);
    }
    return scene;
}

BlobScene render_blob_scene_for_class(DensityClass cls, Rng& rng, const BlobSceneConfig& cfg) {
    const auto [lo, hi] = blob_count_range(cls, cfg);
    const auto n = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
    return render_blob_scene(n, rng, cfg);
}

std::vector<Sample> generate_blob_dataset(const std::array<std::size_t, kDensityClassCount>& per_class,
                                          const BlobSceneConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Sample> samples;
    samples.reserve(std::accumulate(per_class.begin(), per_class.end(), std::size_t{0}));
    for (std::size_t c = 0; c < kDensityClassCount; ++c) {
        for (std::size_t i = 0; i < per_class[c]; ++i) {
            auto scene = render_blob_scene_for_class(density_class_from_index(c), rng, cfg);
            samples.push_back({std::move(scene.image), c});
        }
    }
    rng.shuffle(samples);
    return samples;
}

std::array<std::size_t, kDensityClassCount> apportion(std::size_t total,
                                                     const std::array<double, kDensityClassCount>& ratio) {
    const double sum = std::accumulate(ratio.begin(), ratio.end(), 0.0);
    if (!(sum > 0.0)) throw std::invalid_argument("apportion: ratio must have a positive sum");
    std::array<std::size_t, kDensityClassCount> out{};
    std::array<double, kDensityClassCount> remainder{};
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < kDensityClassCount; ++c) {
        const double exact = static_cast<double>(total) * ratio[c] / sum;
        out[c] = static_cast<std::size_t>(std::floor(exact));
        remainder[c] = exact - static_cast<double>(out[c]);
        assigned += out[c];
    }
    std::array<std::size_t, kDensityClassCount> order{0, 1, 2, 3, 4};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < total; ++k, ++assigned) ++out[order[k % kDensityClassCount]];
    return out;
}

}  // namespace traffic
