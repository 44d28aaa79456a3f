#include "traffic/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace traffic {

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_volume(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

namespace {
void check_extents(const Shape& shape) {
    if (shape.empty()) throw std::invalid_argument("tensor shape must have at least one axis");
    for (auto d : shape) {
        if (d == 0) throw std::invalid_argument("tensor extents must be positive, got " + shape_to_string(shape));
    }
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    check_extents(shape_);
    values_.assign(shape_volume(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
    check_extents(shape_);
    if (values_.size() != shape_volume(shape_)) {
        throw std::invalid_argument("tensor of shape " + shape_to_string(shape_) + " needs " +
                                    std::to_string(shape_volume(shape_)) + " values, got " +
                                    std::to_string(values_.size()));
    }
}

Tensor Tensor::vector(std::vector<double> values) {
    Shape shape{values.size()};
    return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_volume(shape) != size()) {
        throw std::invalid_argument("cannot reshape " + shape_string() + " to " + shape_to_string(shape));
    }
    return Tensor(std::move(shape), values_);
}

bool Tensor::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(double value) {
    for (double& v : values_) v = value;
}

void require_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) throw NonFiniteError(std::string(what) + " contains non-finite values");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw std::invalid_argument(std::string(what) + ": shape " + a.shape_string() + " does not match " +
                                    b.shape_string());
    }
}

}  // namespace traffic
