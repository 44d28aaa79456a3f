#include "traffic/augment.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace traffic {

Tensor flip_horizontal(const Tensor& image) {
    if (image.rank() != 3) throw std::invalid_argument("flip expects [C,H,W], got " + image.shape_string());
    Tensor out(image.shape());
    const std::size_t width = image.dim(2);
    for (std::size_t c = 0; c < image.dim(0); ++c)
        for (std::size_t y = 0; y < image.dim(1); ++y)
            for (std::size_t x = 0; x < width; ++x) out.at(c, y, x) = image.at(c, y, width - 1 - x);
    return out;
}

Tensor translate(const Tensor& image, long dx, long dy) {
    if (image.rank() != 3) throw std::invalid_argument("translate expects [C,H,W], got " + image.shape_string());
    const auto height = static_cast<long>(image.dim(1)), width = static_cast<long>(image.dim(2));
    Tensor out(image.shape());
    for (std::size_t c = 0; c < image.dim(0); ++c)
        for (long y = 0; y < height; ++y) {
            const long sy = y - dy;
            if (sy < 0 || sy >= height) continue;
            for (long x = 0; x < width; ++x) {
                const long sx = x - dx;
                if (sx < 0 || sx >= width) continue;
                out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
                    image.at(c, static_cast<std::size_t>(sy), static_cast<std::size_t>(sx));
            }
        }
    return out;
}

Tensor augment(const Tensor& image, Rng& rng, const AugmentConfig& cfg) {
    Tensor out = image;
    if (rng.bernoulli(cfg.flip_probability)) out = flip_horizontal(out);
    if (rng.bernoulli(cfg.translate_probability)) {
        const auto max_dx = static_cast<long>(std::lround(cfg.max_shift_fraction * static_cast<double>(image.dim(2))));
        const auto max_dy = static_cast<long>(std::lround(cfg.max_shift_fraction * static_cast<double>(image.dim(1))));
        const long dx = rng.uniform_int(-max_dx, max_dx);
        const long dy = rng.uniform_int(-max_dy, max_dy);
        out = translate(out, dx, dy);
    }
    if (rng.bernoulli(cfg.brightness_probability)) {
        const double scale = rng.uniform(cfg.brightness_min, cfg.brightness_max);
        for (double& v : out.values()) v = std::clamp(v * scale, 0.0, 1.0);
    }
    return out;
}

}  // namespace traffic
