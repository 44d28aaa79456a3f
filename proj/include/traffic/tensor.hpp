#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace traffic {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);
std::size_t shape_volume(const Shape& shape);

/// Dense row-major array of doubles. Extents are always positive and the
/// element count always equals the product of the extents.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor vector(std::vector<double> values);
    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    const std::vector<double>& storage() const { return values_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    // Channel-major image indexing for rank-3 tensors [C, H, W].
    double& at(std::size_t c, std::size_t y, std::size_t x) { return values_[(c * shape_[1] + y) * shape_[2] + x]; }
    double at(std::size_t c, std::size_t y, std::size_t x) const { return values_[(c * shape_[1] + y) * shape_[2] + x]; }

    /// Same values under a new shape of equal volume.
    Tensor reshaped(Shape shape) const;

    bool all_finite() const;
    void fill(double value);
    std::string shape_string() const { return shape_to_string(shape_); }

    friend bool operator==(const Tensor& a, const Tensor& b) = default;

private:
    Shape shape_;
    std::vector<double> values_;
};

struct NonFiniteError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Throws NonFiniteError naming `what` when any element is NaN or infinite.
void require_finite(const Tensor& t, const char* what);

/// Throws std::invalid_argument naming both shapes when they differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace traffic
