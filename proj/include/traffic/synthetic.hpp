#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "traffic/density.hpp"
#include "traffic/image.hpp"
#include "traffic/random.hpp"
#include "traffic/training.hpp"

namespace traffic {

/// Generator for stand-in traffic frames: bright discs ("cars") on a noisy
/// dark background. The class of a frame is the density class of its disc
/// count scaled by `cars_per_blob`, so the class boundaries follow the same
/// breakpoints as real car counts.
struct BlobSceneConfig {
    std::size_t height = 64;
    std::size_t width = 64;
    double blob_radius = 2.0;
    double min_gap = 1.0;         // free pixels between neighbouring discs
    double cars_per_blob = 4.0;
    std::size_t max_blobs = 35;   // upper end of the TrafficJam range
    double margin_fraction = 0.1; // discs keep clear of the frame border
    double background = 0.1;
    double intensity_min = 1.0;
    double intensity_max = 1.0;
    double noise_stddev = 0.02;
    /// When set, counted discs lie inside this polygon and distractor discs outside it.
    std::optional<MaskPolygon> region;
    std::size_t max_distractors = 0;
};

/// Inclusive disc-count range whose scaled count falls in `cls`.
std::pair<std::size_t, std::size_t> blob_count_range(DensityClass cls, const BlobSceneConfig& cfg);

struct BlobScene {
    Tensor image;  // [1,H,W]
    std::size_t blobs = 0;
    std::size_t distractors = 0;
    DensityClass label = DensityClass::Empty;
};

BlobScene render_blob_scene(std::size_t blobs, Rng& rng, const BlobSceneConfig& cfg);
/// Draws the disc count uniformly from the class range, then renders.
BlobScene render_blob_scene_for_class(DensityClass cls, Rng& rng, const BlobSceneConfig& cfg);

/// `per_class[c]` frames of class c, in a seeded shuffled order.
std::vector<Sample> generate_blob_dataset(const std::array<std::size_t, kDensityClassCount>& per_class,
                                          const BlobSceneConfig& cfg, std::uint64_t seed);

/// Largest-remainder apportionment of `total` frames by the given class ratio.
std::array<std::size_t, kDensityClassCount> apportion(std::size_t total,
                                                     const std::array<double, kDensityClassCount>& ratio);

}  // namespace traffic
