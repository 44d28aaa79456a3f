#include "traffic/image.hpp"

#include <filesystem>

#include <algorithm>
#include <cmath>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <stdexcept>

namespace traffic {

RawImage read_image(const std::filesystem::path& path) {
    const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (mat.empty()) throw std::runtime_error("cannot read image " + path.string());
    if (mat.depth() != CV_8U) throw std::runtime_error("unsupported bit depth in " + path.string());

    RawImage img;
    img.height = static_cast<std::size_t>(mat.rows);
    img.width = static_cast<std::size_t>(mat.cols);
    const int source_channels = mat.channels();
    img.channels = source_channels == 1 ? 1 : 3;
    img.pixels.resize(img.height * img.width * img.channels);
    for (int y = 0; y < mat.rows; ++y) {
        const std::uint8_t* row = mat.ptr<std::uint8_t>(y);
        for (int x = 0; x < mat.cols; ++x) {
            const std::uint8_t* px = row + x * source_channels;
            if (img.channels == 1) {
                img.at(y, x, 0) = px[0];
            } else {
                // OpenCV stores BGR(A)
                img.at(y, x, 0) = px[2];
                img.at(y, x, 1) = px[1];
                img.at(y, x, 2) = px[0];
            }
        }
    }
    return img;
}

void write_image(const std::filesystem::path& path, const RawImage& image) {
    if (image.channels != 1 && image.channels != 3) throw std::invalid_argument("write_image: need 1 or 3 channels");
    cv::Mat mat(static_cast<int>(image.height), static_cast<int>(image.width), image.channels == 1 ? CV_8UC1 : CV_8UC3);
    for (std::size_t y = 0; y < image.height; ++y) {
        auto* row = mat.ptr<std::uint8_t>(static_cast<int>(y));
        for (std::size_t x = 0; x < image.width; ++x) {
            if (image.channels == 1) {
                row[x] = image.at(y, x, 0);
            } else {
                row[3 * x + 0] = image.at(y, x, 2);
                row[3 * x + 1] = image.at(y, x, 1);
                row[3 * x + 2] = image.at(y, x, 0);
            }
        }
    }
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), mat)) throw std::runtime_error("cannot write image " + path.string());
}

RawImage tensor_to_image(const Tensor& image) {
    if (image.rank() != 3 || (image.dim(0) != 1 && image.dim(0) != 3)) {
        throw std::invalid_argument("tensor_to_image expects [1|3,H,W], got " + image.shape_string());
    }
    RawImage img{image.dim(1), image.dim(2), image.dim(0), {}};
    img.pixels.resize(img.height * img.width * img.channels);
    for (std::size_t c = 0; c < img.channels; ++c)
        for (std::size_t y = 0; y < img.height; ++y)
            for (std::size_t x = 0; x < img.width; ++x) {
                const double v = std::clamp(image.at(c, y, x), 0.0, 1.0);
                img.at(y, x, c) = static_cast<std::uint8_t>(std::lround(v * 255.0));
            }
    return img;
}

Tensor resize_bilinear(const Tensor& image, std::size_t target_height, std::size_t target_width) {
    if (image.rank() != 3) throw std::invalid_argument("resize expects [C,H,W], got " + image.shape_string());
    if (target_height == 0 || target_width == 0) throw std::invalid_argument("resize target must be non-empty");
    const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
    if (height == target_height && width == target_width) return image;

    struct Tap {
        std::size_t lo, hi;
        double frac;
    };
    auto taps = [](std::size_t src, std::size_t dst) {
        std::vector<Tap> t(dst);
        const double scale = static_cast<double>(src) / static_cast<double>(dst);
        for (std::size_t i = 0; i < dst; ++i) {
            const double pos = std::clamp((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0, static_cast<double>(src - 1));
            const auto lo = static_cast<std::size_t>(std::floor(pos));
            t[i] = {lo, std::min(lo + 1, src - 1), pos - static_cast<double>(lo)};
        }
        return t;
    };
    const auto ys = taps(height, target_height);
    const auto xs = taps(width, target_width);

    Tensor out({channels, target_height, target_width});
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < target_height; ++i) {
            const auto& ty = ys[i];
            for (std::size_t j = 0; j < target_width; ++j) {
                const auto& tx = xs[j];
                const double top = image.at(c, ty.lo, tx.lo) * (1.0 - tx.frac) + image.at(c, ty.lo, tx.hi) * tx.frac;
                const double bottom = image.at(c, ty.hi, tx.lo) * (1.0 - tx.frac) + image.at(c, ty.hi, tx.hi) * tx.frac;
                out.at(c, i, j) = top * (1.0 - ty.frac) + bottom * ty.frac;
            }
        }
    return out;
}

Tensor to_tensor(const RawImage& raw, bool grayscale) {
    if (raw.height == 0 || raw.width == 0 || raw.channels == 0) throw std::invalid_argument("preprocess: zero-sized image");
    if (raw.pixels.size() != raw.height * raw.width * raw.channels) {
        throw std::invalid_argument("preprocess: pixel buffer does not match image extents");
    }
    const std::size_t out_channels = (grayscale || raw.channels == 1) ? 1 : 3;
    Tensor planes({out_channels, raw.height, raw.width});
    for (std::size_t y = 0; y < raw.height; ++y)
        for (std::size_t x = 0; x < raw.width; ++x) {
            if (raw.channels == 1) {
                planes.at(0, y, x) = raw.at(y, x, 0) / 255.0;
            } else if (out_channels == 1) {
                planes.at(0, y, x) =
                    (0.299 * raw.at(y, x, 0) + 0.587 * raw.at(y, x, 1) + 0.114 * raw.at(y, x, 2)) / 255.0;
            } else {
                for (std::size_t c = 0; c < 3; ++c) planes.at(c, y, x) = raw.at(y, x, c) / 255.0;
            }
        }
    return planes;
}

Tensor preprocess(const RawImage& raw, std::size_t target_height, std::size_t target_width, bool grayscale) {
    return resize_bilinear(to_tensor(raw, grayscale), target_height, target_width);
}

double polygon_area(const std::vector<Point>& v) {
    double twice = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const auto& a = v[i];
        const auto& b = v[(i + 1) % v.size()];
        twice += a.x * b.y - b.x * a.y;
    }
    return 0.5 * std::abs(twice);
}

namespace {

double cross(const Point& o, const Point& a, const Point& b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

bool on_segment(const Point& p, const Point& a, const Point& b) {
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
           p.y <= std::max(a.y, b.y);
}

bool segments_intersect(const Point& p1, const Point& p2, const Point& q1, const Point& q2) {
    const double d1 = cross(q1, q2, p1), d2 = cross(q1, q2, p2);
    const double d3 = cross(p1, p2, q1), d4 = cross(p1, p2, q2);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
    if (d1 == 0 && on_segment(p1, q1, q2)) return true;
    if (d2 == 0 && on_segment(p2, q1, q2)) return true;
    if (d3 == 0 && on_segment(q1, p1, p2)) return true;
    if (d4 == 0 && on_segment(q2, p1, p2)) return true;
    return false;
}

}  // namespace

void validate_polygon(const MaskPolygon& polygon, std::size_t width, std::size_t height) {
    const auto& v = polygon.vertices;
    const std::string who = "mask polygon for camera '" + polygon.camera_id + "'";
    if (v.size() < 3) throw std::invalid_argument(who + " needs at least 3 vertices");
    for (const auto& p : v) {
        if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0 || p.x > static_cast<double>(width) ||
            p.y > static_cast<double>(height)) {
            throw std::invalid_argument(who + " has vertex (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                                        ") outside the " + std::to_string(width) + "x" + std::to_string(height) +
                                        " frame");
        }
    }
    if (polygon_area(v) <= 0.0) throw std::invalid_argument(who + " has zero area");
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if (adjacent) continue;
            if (segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n])) {
                throw std::invalid_argument(who + " is self-intersecting (edges " + std::to_string(i) + " and " +
                                            std::to_string(j) + ")");
            }
        }
    }
}

bool point_in_polygon(const std::vector<Point>& v, double x, double y) {
    bool inside = false;
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
        if ((v[i].y > y) != (v[j].y > y)) {
            const double cross_x = v[j].x + (y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
            if (x < cross_x) inside = !inside;
        }
    }
    return inside;
}

Tensor apply_mask(const Tensor& image, const MaskPolygon& polygon) {
    if (image.rank() != 3) throw std::invalid_argument("apply_mask expects [C,H,W], got " + image.shape_string());
    const std::size_t channels = image.dim(0), height = image.dim(1), width = image.dim(2);
    validate_polygon(polygon, width, height);
    Tensor out = image;
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            if (point_in_polygon(polygon.vertices, static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) continue;
            for (std::size_t c = 0; c < channels; ++c) out.at(c, y, x) = 0.0;
        }
    return out;
}

}  // namespace traffic
