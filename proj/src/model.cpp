#include "traffic/model.hpp"

#include <cmath>
#include <json.hpp>
#include <stdexcept>

#include "traffic/random.hpp"

namespace traffic {

using nlohmann::json;

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::string padding_name(Padding p) { return p == Padding::Same ? "same" : "valid"; }

Padding padding_from_name(const std::string& name) {
    if (name == "same") return Padding::Same;
    if (name == "valid") return Padding::Valid;
    throw std::invalid_argument("unknown padding mode '" + name + "' (expected valid or same)");
}

}  // namespace

ModelConfig basic_cnn_config(std::size_t height, std::size_t width, std::size_t channels, std::size_t classes) {
    ModelConfig c;
    c.input_shape = {channels, height, width};
    c.class_count = classes;
    for (std::size_t filters : {16u, 32u, 64u}) {
        c.layers.emplace_back(ConvLayer{3, 3, filters, 1, Padding::Same});
        c.layers.emplace_back(ReluLayer{});
        c.layers.emplace_back(PoolLayer{PoolSpec{2, 2, PoolStatistic::Max}});
    }
    c.layers.emplace_back(FlattenLayer{});
    c.layers.emplace_back(DenseLayer{128});
    c.layers.emplace_back(ReluLayer{});
    c.layers.emplace_back(DenseLayer{classes});
    c.layers.emplace_back(SoftmaxLayer{});
    return c;
}

std::string to_json(const ModelConfig& config) {
    json layers = json::array();
    for (const auto& layer : config.layers) {
        layers.push_back(std::visit(
            overloaded{
                [](const ConvLayer& l) {
                    return json{{"type", "conv"},
                                {"kernel", {l.kernel_height, l.kernel_width}},
                                {"out_channels", l.out_channels},
                                {"stride", l.stride},
                                {"padding", padding_name(l.padding)}};
                },
                [](const PoolLayer& l) {
                    return json{{"type", l.pool.statistic == PoolStatistic::Max ? "maxpool" : "avgpool"},
                                {"window", l.pool.window},
                                {"stride", l.pool.stride}};
                },
                [](const ReluLayer&) { return json{{"type", "relu"}}; },
                [](const FlattenLayer&) { return json{{"type", "flatten"}}; },
                [](const DenseLayer& l) { return json{{"type", "dense"}, {"units", l.units}}; },
                [](const SoftmaxLayer&) { return json{{"type", "softmax"}}; },
            },
            layer));
    }
    json doc{{"input_shape", config.input_shape}, {"class_count", config.class_count}, {"layers", layers}};
    return doc.dump();
}

ModelConfig model_config_from_json(std::string_view text) {
    ModelConfig c;
    try {
        const json doc = json::parse(text);
        c.input_shape = doc.at("input_shape").get<Shape>();
        c.class_count = doc.value("class_count", std::size_t{5});
        for (const auto& l : doc.at("layers")) {
            const auto type = l.at("type").get<std::string>();
            if (type == "conv") {
                const auto kernel = l.at("kernel").get<std::vector<std::size_t>>();
                if (kernel.size() != 2) throw std::invalid_argument("conv kernel must be [kh, kw]");
                c.layers.emplace_back(ConvLayer{kernel[0], kernel[1], l.at("out_channels").get<std::size_t>(),
                                                l.value("stride", std::size_t{1}),
                                                padding_from_name(l.value("padding", std::string("same")))});
            } else if (type == "maxpool" || type == "avgpool") {
                c.layers.emplace_back(PoolLayer{PoolSpec{l.at("window").get<std::size_t>(),
                                                         l.value("stride", l.at("window").get<std::size_t>()),
                                                         type == "maxpool" ? PoolStatistic::Max
                                                                           : PoolStatistic::Average}});
            } else if (type == "relu") {
                c.layers.emplace_back(ReluLayer{});
            } else if (type == "flatten") {
                c.layers.emplace_back(FlattenLayer{});
            } else if (type == "dense") {
                c.layers.emplace_back(DenseLayer{l.at("units").get<std::size_t>()});
            } else if (type == "softmax") {
                c.layers.emplace_back(SoftmaxLayer{});
            } else {
                throw std::invalid_argument("unknown layer type '" + type + "'");
            }
        }
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed model config: ") + e.what());
    }
    return c;
}

std::size_t ModelParameters::count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    return n;
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

Network::Network(ModelConfig config) : config_(std::move(config)) {
    if (config_.input_shape.size() != 3) {
        throw std::invalid_argument("model input shape must be [C,H,W], got " + shape_to_string(config_.input_shape));
    }
    if (config_.layers.empty()) throw std::invalid_argument("model has no layers");
    if (config_.class_count == 0) throw std::invalid_argument("class_count must be positive");

    Shape shape = config_.input_shape;
    for (std::size_t i = 0; i < config_.layers.size(); ++i) {
        ResolvedLayer r{config_.layers[i], shape, {}, {}};
        const auto where = "layer " + std::to_string(i) + ": ";
        std::visit(
            overloaded{
                [&](const ConvLayer& l) {
                    if (shape.size() != 3) throw std::invalid_argument(where + "conv needs a [C,H,W] input");
                    r.conv = ConvSpec{l.kernel_height, l.kernel_width, shape[0], l.out_channels, l.stride, l.padding};
                    const auto g = conv_geometry(r.conv, shape[1], shape[2]);
                    r.output_shape = {l.out_channels, g.out_height, g.out_width};
                },
                [&](const PoolLayer& l) {
                    if (shape.size() != 3) throw std::invalid_argument(where + "pool needs a [C,H,W] input");
                    r.output_shape = {shape[0], pool_extent(shape[1], l.pool), pool_extent(shape[2], l.pool)};
                },
                [&](const ReluLayer&) { r.output_shape = shape; },
                [&](const FlattenLayer&) { r.output_shape = {shape_volume(shape)}; },
                [&](const DenseLayer& l) {
                    if (shape.size() != 1) throw std::invalid_argument(where + "dense needs a flat input; add flatten");
                    if (l.units == 0) throw std::invalid_argument(where + "dense units must be positive");
                    r.output_shape = {l.units};
                },
                [&](const SoftmaxLayer&) {
                    if (shape.size() != 1) throw std::invalid_argument(where + "softmax needs a flat input");
                    if (i + 1 != config_.layers.size()) throw std::invalid_argument(where + "softmax must be last");
                    r.output_shape = shape;
                },
            },
            config_.layers[i]);
        shape = r.output_shape;
        layers_.push_back(std::move(r));
    }
    if (!std::holds_alternative<SoftmaxLayer>(config_.layers.back())) {
        throw std::invalid_argument("final layer must be softmax");
    }
    if (shape != Shape{config_.class_count}) {
        throw std::invalid_argument("model outputs " + shape_to_string(shape) + " but class_count is " +
                                    std::to_string(config_.class_count));
    }
}

ModelParameters Network::init_parameters(std::uint64_t seed) const {
    Rng rng(seed);
    ModelParameters params;
    params.seed = seed;
    for (const auto& layer : layers_) {
        LayerParameters lp;
        if (const auto* conv = std::get_if<ConvLayer>(&layer.spec)) {
            const auto& spec = layer.conv;
            const std::size_t area = spec.kernel_height * spec.kernel_width;
            const double b = glorot_bound(spec.in_channels * area, spec.out_channels * area);
            lp.weights = Tensor({spec.out_channels, spec.in_channels, spec.kernel_height, spec.kernel_width});
            for (double& w : lp.weights.values()) w = rng.uniform(-b, b);
            lp.bias = Tensor({conv->out_channels});
        } else if (const auto* dense = std::get_if<DenseLayer>(&layer.spec)) {
            const std::size_t fan_in = layer.input_shape[0];
            const double b = glorot_bound(fan_in, dense->units);
            lp.weights = Tensor({dense->units, fan_in});
            for (double& w : lp.weights.values()) w = rng.uniform(-b, b);
            lp.bias = Tensor({dense->units});
        }
        params.layers.push_back(std::move(lp));
    }
    return params;
}

void Network::check_parameters(const ModelParameters& params) const {
    if (params.layers.size() != layers_.size()) {
        throw std::invalid_argument("parameter set has " + std::to_string(params.layers.size()) +
                                    " layers, model has " + std::to_string(layers_.size()));
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& layer = layers_[i];
        const auto& lp = params.layers[i];
        Shape w, b;
        if (std::holds_alternative<ConvLayer>(layer.spec)) {
            w = {layer.conv.out_channels, layer.conv.in_channels, layer.conv.kernel_height, layer.conv.kernel_width};
            b = {layer.conv.out_channels};
        } else if (const auto* dense = std::get_if<DenseLayer>(&layer.spec)) {
            w = {dense->units, layer.input_shape[0]};
            b = {dense->units};
        }
        if (lp.weights.shape() != w || lp.bias.shape() != b) {
            throw std::invalid_argument("layer " + std::to_string(i) + " parameters " + lp.weights.shape_string() +
                                        "/" + lp.bias.shape_string() + " do not match expected " +
                                        shape_to_string(w) + "/" + shape_to_string(b));
        }
    }
}

Tensor Network::forward(const ModelParameters& params, const Tensor& image, Trace* trace) const {
    if (image.shape() != config_.input_shape) {
        throw std::invalid_argument("image shape " + image.shape_string() + " does not match model input " +
                                    shape_to_string(config_.input_shape));
    }
    if (params.layers.size() != layers_.size()) check_parameters(params);
    if (trace) {
        trace->inputs.assign(layers_.size(), Tensor{});
        trace->argmax.assign(layers_.size(), {});
    }
    Tensor x = image;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& layer = layers_[i];
        const auto& lp = params.layers[i];
        Tensor y;
        std::visit(overloaded{
                       [&](const ConvLayer&) { y = conv2d_forward(x, lp.weights, lp.bias, layer.conv); },
                       [&](const PoolLayer& l) {
                           if (l.pool.statistic == PoolStatistic::Max) {
                               auto r = maxpool2d(x, l.pool);
                               y = std::move(r.output);
                               if (trace) trace->argmax[i] = std::move(r.argmax);
                           } else {
                               y = avgpool2d(x, l.pool);
                           }
                       },
                       [&](const ReluLayer&) { y = relu(x); },
                       [&](const FlattenLayer&) { y = x.reshaped(layer.output_shape); },
                       [&](const DenseLayer&) { y = dense_forward(x, lp.weights, lp.bias); },
                       [&](const SoftmaxLayer&) { y = softmax(x); },
                   },
                   layer.spec);
        if (trace) trace->inputs[i] = std::move(x);
        x = std::move(y);
    }
    return x;
}

ParameterGradients Network::backward(const ModelParameters& params, const Trace& trace,
                                     const Tensor& grad_logits) const {
    if (trace.inputs.size() != layers_.size()) throw std::invalid_argument("backward: trace does not match model");
    ParameterGradients grads(layers_.size());
    Tensor g = grad_logits;
    // The softmax layer is folded into the loss gradient, so start below it.
    for (std::size_t i = layers_.size() - 1; i-- > 0;) {
        const auto& layer = layers_[i];
        const Tensor& input = trace.inputs[i];
        std::visit(overloaded{
                       [&](const ConvLayer&) {
                           auto cg = conv2d_backward(g, input, params.layers[i].weights, layer.conv, i > 0);
                           grads[i] = {std::move(cg.kernels), std::move(cg.bias)};
                           g = std::move(cg.input);
                       },
                       [&](const PoolLayer& l) {
                           g = l.pool.statistic == PoolStatistic::Max
                                   ? maxpool2d_backward(g, trace.argmax[i], input.shape())
                                   : avgpool2d_backward(g, input.shape(), l.pool);
                       },
                       [&](const ReluLayer&) { g = relu_backward(g, input); },
                       [&](const FlattenLayer&) { g = g.reshaped(input.shape()); },
                       [&](const DenseLayer&) {
                           auto dg = dense_backward(g, input, params.layers[i].weights);
                           grads[i] = {std::move(dg.weights), std::move(dg.bias)};
                           g = std::move(dg.input);
                       },
                       [&](const SoftmaxLayer&) {},
                   },
                   layer.spec);
    }
    return grads;
}

Tensor Network::predict(const ModelParameters& params, const Tensor& image) const { return forward(params, image); }

ModelParameters init_parameters(const ModelConfig& config, std::uint64_t seed) {
    return Network(config).init_parameters(seed);
}

Tensor predict(const ModelConfig& config, const ModelParameters& params, const Tensor& image) {
    const Network net(config);
    net.check_parameters(params);
    return net.predict(params, image);
}

}  // namespace traffic
