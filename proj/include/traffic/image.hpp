#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "traffic/tensor.hpp"

namespace traffic {

/// 8-bit image with interleaved channels (1 = gray, 3 = RGB).
struct RawImage {
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * channels + c]; }
    std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const { return pixels[(y * width + x) * channels + c]; }
};

/// Decodes PNG/JPEG (anything the codec backend supports) into RGB or gray.
RawImage read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const RawImage& image);

/// [C,H,W] tensor in [0,1] back to 8-bit pixels (values clamped, rounded).
RawImage tensor_to_image(const Tensor& image);

/// Native-resolution [C,H,W] tensor in [0,1]; `grayscale` collapses RGB with the weights below.
Tensor to_tensor(const RawImage& raw, bool grayscale);

/// Grayscale conversion 0.299 R + 0.587 G + 0.114 B, bilinear resize with
/// half-pixel centres, scaling to [0,1]. Returns [1,H,W] or [3,H,W].
Tensor preprocess(const RawImage& raw, std::size_t target_height, std::size_t target_width, bool grayscale);

/// Bilinear resample of every channel of a [C,H,W] tensor.
Tensor resize_bilinear(const Tensor& image, std::size_t target_height, std::size_t target_width);

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Region of interest for one camera, in pixel-edge coordinates
/// ((0,0) is the top-left corner of the frame, (W,H) the bottom-right).
struct MaskPolygon {
    std::string camera_id;
    std::vector<Point> vertices;
};

double polygon_area(const std::vector<Point>& vertices);

/// Throws unless the polygon has >= 3 vertices inside [0,W]x[0,H], non-zero
/// area, and no two non-adjacent edges intersect.
void validate_polygon(const MaskPolygon& polygon, std::size_t width, std::size_t height);

/// Even-odd rule.
bool point_in_polygon(const std::vector<Point>& vertices, double x, double y);

/// Zeroes every pixel whose centre lies outside the polygon; pixels inside are unchanged.
Tensor apply_mask(const Tensor& image, const MaskPolygon& polygon);

}  // namespace traffic
