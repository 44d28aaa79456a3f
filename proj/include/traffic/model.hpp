#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "traffic/kernels.hpp"
#include "traffic/tensor.hpp"

namespace traffic {

struct ConvLayer {
    std::size_t kernel_height = 3;
    std::size_t kernel_width = 3;
    std::size_t out_channels = 1;
    std::size_t stride = 1;
    Padding padding = Padding::Same;
};

struct PoolLayer {
    PoolSpec pool;
};

struct ReluLayer {};
struct FlattenLayer {};

struct DenseLayer {
    std::size_t units = 1;
};

struct SoftmaxLayer {};

using LayerSpec = std::variant<ConvLayer, PoolLayer, ReluLayer, FlattenLayer, DenseLayer, SoftmaxLayer>;

/// Layer topology. The last layer must be a softmax over `class_count` outputs.
struct ModelConfig {
    Shape input_shape{1, 128, 128};
    std::vector<LayerSpec> layers;
    std::size_t class_count = 5;
};

/// Default classifier: three conv(3x3, same)/relu/maxpool(2) stages with 16, 32
/// and 64 channels, then dense 128, relu, dense `classes`, softmax.
ModelConfig basic_cnn_config(std::size_t height = 128, std::size_t width = 128, std::size_t channels = 1,
                             std::size_t classes = 5);

std::string to_json(const ModelConfig& config);
ModelConfig model_config_from_json(std::string_view text);

/// Trainable tensors of one layer; both empty for parameter-free layers.
struct LayerParameters {
    Tensor weights;
    Tensor bias;

    bool trainable() const { return !weights.empty(); }
    friend bool operator==(const LayerParameters&, const LayerParameters&) = default;
};

struct ModelParameters {
    std::vector<LayerParameters> layers;
    std::uint64_t seed = 0;

    std::size_t count() const;
    friend bool operator==(const ModelParameters&, const ModelParameters&) = default;
};

using ParameterGradients = std::vector<LayerParameters>;

/// A layer after shape resolution against its input.
struct ResolvedLayer {
    LayerSpec spec;
    Shape input_shape;
    Shape output_shape;
    ConvSpec conv;  // meaningful for conv layers only
};

/// Validated model topology with the per-layer forward and backward passes.
/// Stateless with respect to parameters, so one Network can serve concurrent
/// predictions over shared read-only parameters.
class Network {
public:
    explicit Network(ModelConfig config);

    const ModelConfig& config() const { return config_; }
    const std::vector<ResolvedLayer>& layers() const { return layers_; }

    ModelParameters init_parameters(std::uint64_t seed) const;
    void check_parameters(const ModelParameters& params) const;

    /// Intermediate values kept for the backward pass.
    struct Trace {
        std::vector<Tensor> inputs;  // input of each layer
        std::vector<std::vector<std::size_t>> argmax;
    };

    /// Returns class probabilities; fills `trace` when non-null.
    Tensor forward(const ModelParameters& params, const Tensor& image, Trace* trace = nullptr) const;

    /// Back-propagates the gradient with respect to the softmax input (the logits).
    ParameterGradients backward(const ModelParameters& params, const Trace& trace, const Tensor& grad_logits) const;

    Tensor predict(const ModelParameters& params, const Tensor& image) const;

private:
    ModelConfig config_;
    std::vector<ResolvedLayer> layers_;
};

ModelParameters init_parameters(const ModelConfig& config, std::uint64_t seed);
Tensor predict(const ModelConfig& config, const ModelParameters& params, const Tensor& image);

/// Glorot-uniform bound sqrt(6 / (fan_in + fan_out)).
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

}  // namespace traffic
