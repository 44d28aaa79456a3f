#include "traffic/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "traffic/random.hpp"

namespace traffic {

std::vector<std::size_t> class_counts(std::span<const Sample> samples, std::size_t classes) {
    std::vector<std::size_t> counts(classes, 0);
    for (const auto& s : samples) {
        if (s.label >= classes) throw std::invalid_argument("sample label " + std::to_string(s.label) + " out of range");
        ++counts[s.label];
    }
    return counts;
}

ExampleGradient example_gradient(const Network& net, const ModelParameters& params, const Sample& sample,
                                 const ClassWeights& weights) {
    Network::Trace trace;
    const Tensor probs = net.forward(params, sample.image, &trace);
    auto loss = weighted_cross_entropy(probs, sample.label, weights);
    return {loss.loss, net.backward(params, trace, loss.grad_logits)};
}

MetricsReport evaluate_model(const Network& net, const ModelParameters& params, std::span<const Sample> samples) {
    std::vector<std::vector<double>> predictions;
    std::vector<std::size_t> truths;
    predictions.reserve(samples.size());
    for (const auto& s : samples) {
        predictions.push_back(net.predict(params, s.image).storage());
        truths.push_back(s.label);
    }
    return evaluate(predictions, truths);
}

namespace {

void accumulate(ParameterGradients& total, const ParameterGradients& g) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!g[i].trainable()) continue;
        if (!total[i].trainable()) {
            total[i] = g[i];
            continue;
        }
        auto tw = total[i].weights.values();
        auto gw = g[i].weights.values();
        for (std::size_t k = 0; k < tw.size(); ++k) tw[k] += gw[k];
        auto tb = total[i].bias.values();
        auto gb = g[i].bias.values();
        for (std::size_t k = 0; k < tb.size(); ++k) tb[k] += gb[k];
    }
}

void momentum_step(ModelParameters& params, ParameterGradients& velocity, const ParameterGradients& grads,
                   double scale, const TrainConfig& cfg) {
    auto update = [&](Tensor& p, Tensor& v, const Tensor& g) {
        auto pv = p.values();
        auto vv = v.values();
        auto gv = g.values();
        for (std::size_t k = 0; k < pv.size(); ++k) {
            vv[k] = cfg.momentum * vv[k] - cfg.learning_rate * (gv[k] * scale);
            pv[k] += vv[k];
        }
    };
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        if (!params.layers[i].trainable() || !grads[i].trainable()) continue;
        update(params.layers[i].weights, velocity[i].weights, grads[i].weights);
        update(params.layers[i].bias, velocity[i].bias, grads[i].bias);
    }
}

}  // namespace

TrainResult train(const Network& net, ModelParameters params, std::span<const Sample> train_set,
                  std::span<const Sample> validation_set, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    if (train_set.empty()) throw std::invalid_argument("training set is empty");
    if (cfg.epochs == 0) throw std::invalid_argument("epochs must be at least 1");
    if (cfg.batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
    if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
        throw std::invalid_argument("learning rate must be a finite non-negative number");
    }
    net.check_parameters(params);

    const std::size_t classes = net.config().class_count;
    const ClassWeights weights = cfg.class_weighting ? compute_class_weights(class_counts(train_set, classes))
                                                     : ClassWeights::uniform(classes);

    Rng rng(cfg.seed);
    ParameterGradients velocity(params.layers.size());
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        if (params.layers[i].trainable()) {
            velocity[i] = {Tensor::zeros_like(params.layers[i].weights), Tensor::zeros_like(params.layers[i].bias)};
        }
    }

    TrainResult result;
    ModelParameters last_good = params;
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        bool diverged = false;
        for (std::size_t start = 0; start < order.size() && !diverged; start += cfg.batch_size) {
            const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
            ParameterGradients batch(params.layers.size());
            double batch_loss = 0.0;
            for (std::size_t k = start; k < stop; ++k) {
                const Sample& s = train_set[order[k]];
                ExampleGradient eg;
                try {
                    if (cfg.augment) {
                        const Sample augmented{augment(s.image, rng, cfg.augmentation), s.label};
                        eg = example_gradient(net, params, augmented, weights);
                    } else {
                        eg = example_gradient(net, params, s, weights);
                    }
                } catch (const NonFiniteError&) {
                    eg.loss = std::numeric_limits<double>::infinity();
                }
                batch_loss += eg.loss;
                accumulate(batch, eg.gradients);
            }
            if (!std::isfinite(batch_loss)) {
                diverged = true;
                break;
            }
            epoch_loss += batch_loss;
            momentum_step(params, velocity, batch, 1.0 / static_cast<double>(stop - start), cfg);
            for (const auto& layer : params.layers) {
                if (layer.trainable() && (!layer.weights.all_finite() || !layer.bias.all_finite())) diverged = true;
            }
        }
        EpochRecord record{epoch, epoch_loss / static_cast<double>(train_set.size()), std::nullopt};
        if (!diverged && !validation_set.empty()) {
            try {
                record.validation = evaluate_model(net, params, validation_set);
            } catch (const NonFiniteError&) {
                diverged = true;
            }
        }
        if (diverged) {
            result.diverged = true;
            params = last_good;
            break;
        }
        result.history.push_back(record);
        last_good = params;
        if (on_epoch && !on_epoch(record, params)) break;
    }
    result.params = std::move(params);
    return result;
}

bool EarlyStopping::operator()(const EpochRecord& record, const ModelParameters& params) {
    if (!record.validation) return true;
    // accuracy first, macro-F1 breaks ties
    const double score = record.validation->accuracy + 1e-6 * record.validation->macro_f1;
    if (best_epoch_ == 0 || score > best_score_ + min_delta_) {
        best_score_ = score;
        best_epoch_ = record.epoch;
        best_ = params;
    }
    return record.epoch - best_epoch_ < patience_;
}

void write_history_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
    out << "epoch,train_loss,val_accuracy,val_macro_f1,val_top2\n";
    const auto old_precision = out.precision(10);
    for (const auto& r : history) {
        out << r.epoch << ',' << r.train_loss << ',';
        if (r.validation) {
            out << r.validation->accuracy << ',' << r.validation->macro_f1 << ',' << r.validation->top2_accuracy;
        } else {
            out << ",,";
        }
        out << '\n';
    }
    out.precision(old_precision);
}

}  // namespace traffic
