#pragma once

#include "traffic/random.hpp"
#include "traffic/tensor.hpp"

namespace traffic {

/// On-the-fly training transforms. Each one fires independently with its own probability.
struct AugmentConfig {
    double flip_probability = 0.5;
    double translate_probability = 0.5;
    double max_shift_fraction = 0.1;  // of width / height, zero-filled
    double brightness_probability = 0.5;
    double brightness_min = 0.8;
    double brightness_max = 1.2;

    static AugmentConfig disabled() { return {0.0, 0.0, 0.1, 0.0, 0.8, 1.2}; }
};

Tensor flip_horizontal(const Tensor& image);
/// Shifts content by (dx, dy) pixels; vacated pixels become 0.
Tensor translate(const Tensor& image, long dx, long dy);

/// Output keeps the input shape and, for inputs in [0,1], stays in [0,1].
Tensor augment(const Tensor& image, Rng& rng, const AugmentConfig& cfg);

}  // namespace traffic
