#include "traffic/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace traffic {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

[[noreturn]] void shape_error(const std::string& what, const Shape& got, const Shape& expected) {
    throw std::invalid_argument(what + ": got shape " + shape_to_string(got) + ", expected " +
                                shape_to_string(expected));
}

void require_rank3(const Tensor& t, const char* what) {
    if (t.rank() != 3) throw std::invalid_argument(std::string(what) + " must be [C,H,W], got " + t.shape_string());
}

// Unfolds the (virtually zero-padded) input into a [C*kh*kw, H'*W'] matrix.
RowMatrix im2col(const Tensor& input, const ConvSpec& spec, const ConvGeometry& g) {
    const std::size_t height = input.dim(1), width = input.dim(2);
    const std::size_t positions = g.out_height * g.out_width;
    RowMatrix cols(spec.in_channels * spec.kernel_height * spec.kernel_width, positions);
    for (std::size_t c = 0; c < spec.in_channels; ++c) {
        for (std::size_t u = 0; u < spec.kernel_height; ++u) {
            for (std::size_t v = 0; v < spec.kernel_width; ++v) {
                double* row = cols.row((c * spec.kernel_height + u) * spec.kernel_width + v).data();
                for (std::size_t i = 0; i < g.out_height; ++i) {
                    const auto y = static_cast<std::ptrdiff_t>(i * spec.stride + u) - static_cast<std::ptrdiff_t>(g.pad_top);
                    double* dst = row + i * g.out_width;
                    if (y < 0 || y >= static_cast<std::ptrdiff_t>(height)) {
                        std::fill(dst, dst + g.out_width, 0.0);
                        continue;
                    }
                    for (std::size_t j = 0; j < g.out_width; ++j) {
                        const auto x = static_cast<std::ptrdiff_t>(j * spec.stride + v) - static_cast<std::ptrdiff_t>(g.pad_left);
                        dst[j] = (x < 0 || x >= static_cast<std::ptrdiff_t>(width))
                                     ? 0.0
                                     : input.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
                    }
                }
            }
        }
    }
    return cols;
}

void col2im_accumulate(const RowMatrix& cols, const ConvSpec& spec, const ConvGeometry& g, Tensor& grad_input) {
    const std::size_t height = grad_input.dim(1), width = grad_input.dim(2);
    for (std::size_t c = 0; c < spec.in_channels; ++c) {
        for (std::size_t u = 0; u < spec.kernel_height; ++u) {
            for (std::size_t v = 0; v < spec.kernel_width; ++v) {
                const double* row = cols.row((c * spec.kernel_height + u) * spec.kernel_width + v).data();
                for (std::size_t i = 0; i < g.out_height; ++i) {
                    const auto y = static_cast<std::ptrdiff_t>(i * spec.stride + u) - static_cast<std::ptrdiff_t>(g.pad_top);
                    if (y < 0 || y >= static_cast<std::ptrdiff_t>(height)) continue;
                    const double* src = row + i * g.out_width;
                    for (std::size_t j = 0; j < g.out_width; ++j) {
                        const auto x = static_cast<std::ptrdiff_t>(j * spec.stride + v) - static_cast<std::ptrdiff_t>(g.pad_left);
                        if (x < 0 || x >= static_cast<std::ptrdiff_t>(width)) continue;
                        grad_input.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) += src[j];
                    }
                }
            }
        }
    }
}

void check_conv_operands(const Tensor& input, const Tensor& kernels, const ConvSpec& spec) {
    require_rank3(input, "conv input");
    if (input.dim(0) != spec.in_channels) {
        throw std::invalid_argument("conv input " + input.shape_string() + " has " + std::to_string(input.dim(0)) +
                                    " channels but kernels " + kernels.shape_string() + " expect " +
                                    std::to_string(spec.in_channels));
    }
    const Shape kshape{spec.out_channels, spec.in_channels, spec.kernel_height, spec.kernel_width};
    if (kernels.shape() != kshape) shape_error("conv kernels", kernels.shape(), kshape);
}

}  // namespace

ConvGeometry conv_geometry(const ConvSpec& spec, std::size_t height, std::size_t width) {
    if (spec.kernel_height == 0 || spec.kernel_width == 0 || spec.stride == 0 || spec.in_channels == 0 ||
        spec.out_channels == 0) {
        throw std::invalid_argument("conv spec extents and stride must be positive");
    }
    ConvGeometry g;
    if (spec.padding == Padding::Same) {
        g.pad_top = (spec.kernel_height - 1) / 2;
        g.pad_left = (spec.kernel_width - 1) / 2;
        g.padded_height = height + spec.kernel_height - 1;
        g.padded_width = width + spec.kernel_width - 1;
    } else {
        g.padded_height = height;
        g.padded_width = width;
    }
    if (spec.kernel_height > g.padded_height || spec.kernel_width > g.padded_width) {
        throw std::invalid_argument("conv kernel " + std::to_string(spec.kernel_height) + "x" +
                                    std::to_string(spec.kernel_width) + " does not fit padded input " +
                                    std::to_string(g.padded_height) + "x" + std::to_string(g.padded_width));
    }
    g.out_height = (g.padded_height - spec.kernel_height) / spec.stride + 1;
    g.out_width = (g.padded_width - spec.kernel_width) / spec.stride + 1;
    return g;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias, const ConvSpec& spec) {
    check_conv_operands(input, kernels, spec);
    if (bias.shape() != Shape{spec.out_channels}) shape_error("conv bias", bias.shape(), {spec.out_channels});
    require_finite(input, "conv input");

    const auto g = conv_geometry(spec, input.dim(1), input.dim(2));
    const RowMatrix cols = im2col(input, spec, g);
    Tensor out({spec.out_channels, g.out_height, g.out_width});
    MatrixMap out_mat(out.data(), static_cast<Eigen::Index>(spec.out_channels), cols.cols());
    ConstMatrixMap k_mat(kernels.data(), static_cast<Eigen::Index>(spec.out_channels), cols.rows());
    out_mat.noalias() = k_mat * cols;
    for (std::size_t o = 0; o < spec.out_channels; ++o) out_mat.row(static_cast<Eigen::Index>(o)).array() += bias[o];
    return out;
}

ConvGradients conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& kernels,
                              const ConvSpec& spec, bool input_gradient) {
    check_conv_operands(input, kernels, spec);
    const auto g = conv_geometry(spec, input.dim(1), input.dim(2));
    const Shape out_shape{spec.out_channels, g.out_height, g.out_width};
    if (grad_out.shape() != out_shape) shape_error("conv grad_out", grad_out.shape(), out_shape);

    const RowMatrix cols = im2col(input, spec, g);
    ConstMatrixMap go(grad_out.data(), static_cast<Eigen::Index>(spec.out_channels), cols.cols());
    ConstMatrixMap k_mat(kernels.data(), static_cast<Eigen::Index>(spec.out_channels), cols.rows());

    ConvGradients grads{Tensor{}, Tensor(kernels.shape()), Tensor({spec.out_channels})};
    MatrixMap gk(grads.kernels.data(), k_mat.rows(), k_mat.cols());
    gk.noalias() = go * cols.transpose();
    for (std::size_t o = 0; o < spec.out_channels; ++o) grads.bias[o] = go.row(static_cast<Eigen::Index>(o)).sum();

    if (input_gradient) {
        grads.input = Tensor(input.shape());
        const RowMatrix grad_cols = k_mat.transpose() * go;
        col2im_accumulate(grad_cols, spec, g, grads.input);
    }
    return grads;
}

std::size_t pool_extent(std::size_t input, const PoolSpec& spec) {
    if (spec.window == 0 || spec.stride == 0) throw std::invalid_argument("pool window and stride must be positive");
    if (spec.window > input) {
        throw std::invalid_argument("pool window " + std::to_string(spec.window) + " larger than input extent " +
                                    std::to_string(input));
    }
    return (input - spec.window) / spec.stride + 1;
}

MaxPoolResult maxpool2d(const Tensor& input, const PoolSpec& spec) {
    require_rank3(input, "pool input");
    require_finite(input, "pool input");
    const std::size_t channels = input.dim(0), height = input.dim(1), width = input.dim(2);
    const std::size_t oh = pool_extent(height, spec), ow = pool_extent(width, spec);

    MaxPoolResult r{Tensor({channels, oh, ow}), std::vector<std::size_t>(channels * oh * ow)};
    std::size_t cell = 0;
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j, ++cell) {
                std::size_t best = (c * height + i * spec.stride) * width + j * spec.stride;
                for (std::size_t u = 0; u < spec.window; ++u) {
                    const std::size_t base = (c * height + i * spec.stride + u) * width + j * spec.stride;
                    for (std::size_t v = 0; v < spec.window; ++v) {
                        if (input[base + v] > input[best]) best = base + v;
                    }
                }
                r.output[cell] = input[best];
                r.argmax[cell] = best;
            }
        }
    }
    return r;
}

Tensor maxpool2d_backward(const Tensor& grad_out, const std::vector<std::size_t>& argmax, const Shape& input_shape) {
    if (argmax.size() != grad_out.size()) {
        throw std::invalid_argument("maxpool backward: argmax map has " + std::to_string(argmax.size()) +
                                    " entries but grad_out has shape " + grad_out.shape_string());
    }
    Tensor grad_input(input_shape);
    for (std::size_t k = 0; k < argmax.size(); ++k) {
        if (argmax[k] >= grad_input.size()) {
            throw std::invalid_argument("maxpool backward: argmax index outside input shape " +
                                        shape_to_string(input_shape));
        }
        grad_input[argmax[k]] += grad_out[k];
    }
    return grad_input;
}

Tensor avgpool2d(const Tensor& input, const PoolSpec& spec) {
    require_rank3(input, "pool input");
    require_finite(input, "pool input");
    const std::size_t channels = input.dim(0);
    const std::size_t oh = pool_extent(input.dim(1), spec), ow = pool_extent(input.dim(2), spec);
    const double scale = 1.0 / static_cast<double>(spec.window * spec.window);
    Tensor out({channels, oh, ow});
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < oh; ++i)
            for (std::size_t j = 0; j < ow; ++j) {
                double sum = 0.0;
                for (std::size_t u = 0; u < spec.window; ++u)
                    for (std::size_t v = 0; v < spec.window; ++v) sum += input.at(c, i * spec.stride + u, j * spec.stride + v);
                out.at(c, i, j) = sum * scale;
            }
    return out;
}

Tensor avgpool2d_backward(const Tensor& grad_out, const Shape& input_shape, const PoolSpec& spec) {
    if (input_shape.size() != 3) throw std::invalid_argument("avgpool backward: input shape must be [C,H,W]");
    const Shape expected{input_shape[0], pool_extent(input_shape[1], spec), pool_extent(input_shape[2], spec)};
    if (grad_out.shape() != expected) shape_error("avgpool grad_out", grad_out.shape(), expected);
    const double scale = 1.0 / static_cast<double>(spec.window * spec.window);
    Tensor grad_input(input_shape);
    for (std::size_t c = 0; c < expected[0]; ++c)
        for (std::size_t i = 0; i < expected[1]; ++i)
            for (std::size_t j = 0; j < expected[2]; ++j) {
                const double share = grad_out.at(c, i, j) * scale;
                for (std::size_t u = 0; u < spec.window; ++u)
                    for (std::size_t v = 0; v < spec.window; ++v) grad_input.at(c, i * spec.stride + u, j * spec.stride + v) += share;
            }
    return grad_input;
}

Tensor relu(const Tensor& input) {
    require_finite(input, "relu input");
    Tensor out = input;
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& grad_out, const Tensor& input) {
    require_same_shape(grad_out, input, "relu backward");
    Tensor grad = grad_out;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!(input[i] > 0.0)) grad[i] = 0.0;
    }
    return grad;
}

Tensor dense_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (weights.rank() != 2) throw std::invalid_argument("dense weights must be [m,n], got " + weights.shape_string());
    const std::size_t m = weights.dim(0), n = weights.dim(1);
    if (input.size() != n) shape_error("dense input", input.shape(), {n});
    if (bias.shape() != Shape{m}) shape_error("dense bias", bias.shape(), {m});
    require_finite(input, "dense input");

    Tensor out({m});
    ConstMatrixMap w(weights.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    Eigen::Map<const Eigen::VectorXd> x(input.data(), static_cast<Eigen::Index>(n));
    Eigen::Map<const Eigen::VectorXd> b(bias.data(), static_cast<Eigen::Index>(m));
    Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(m)).noalias() = w * x + b;
    return out;
}

DenseGradients dense_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weights) {
    if (weights.rank() != 2) throw std::invalid_argument("dense weights must be [m,n], got " + weights.shape_string());
    const std::size_t m = weights.dim(0), n = weights.dim(1);
    if (grad_out.size() != m) shape_error("dense grad_out", grad_out.shape(), {m});
    if (input.size() != n) shape_error("dense input", input.shape(), {n});

    DenseGradients grads{Tensor(input.shape()), Tensor(weights.shape()), Tensor({m})};
    ConstMatrixMap w(weights.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    Eigen::Map<const Eigen::VectorXd> go(grad_out.data(), static_cast<Eigen::Index>(m));
    Eigen::Map<const Eigen::VectorXd> x(input.data(), static_cast<Eigen::Index>(n));
    Eigen::Map<Eigen::VectorXd>(grads.input.data(), static_cast<Eigen::Index>(n)).noalias() = w.transpose() * go;
    MatrixMap(grads.weights.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)).noalias() =
        go * x.transpose();
    std::copy(grad_out.values().begin(), grad_out.values().end(), grads.bias.values().begin());
    return grads;
}

Tensor softmax(const Tensor& logits) {
    if (logits.empty()) throw std::invalid_argument("softmax of an empty vector");
    if (logits.rank() != 1) throw std::invalid_argument("softmax expects a vector, got " + logits.shape_string());
    require_finite(logits, "softmax logits");
    const double peak = *std::max_element(logits.values().begin(), logits.values().end());
    Tensor probs = logits;
    double total = 0.0;
    for (double& v : probs.values()) {
        v = std::exp(v - peak);
        total += v;
    }
    for (double& v : probs.values()) v /= total;
    return probs;
}

Tensor softmax_backward(const Tensor& grad_probs, const Tensor& probs) {
    require_same_shape(grad_probs, probs, "softmax backward");
    double dot = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) dot += grad_probs[i] * probs[i];
    Tensor grad(probs.shape());
    for (std::size_t i = 0; i < probs.size(); ++i) grad[i] = probs[i] * (grad_probs[i] - dot);
    return grad;
}

}  // namespace traffic
