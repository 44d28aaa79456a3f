#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "traffic/tensor.hpp"

namespace traffic {

/// Per-class multipliers on the cross-entropy term.
struct ClassWeights {
    std::vector<double> alpha;

    static ClassWeights uniform(std::size_t classes) { return {std::vector<double>(classes, 1.0)}; }
    std::size_t size() const { return alpha.size(); }
    double operator[](std::size_t c) const { return alpha[c]; }
};

/// Exact weight as a reduced fraction.
struct Ratio {
    std::uint64_t numerator = 0;
    std::uint64_t denominator = 1;
    friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// alpha_c = median(counts) / count_c as reduced fractions. The median of an
/// even number of classes is the mean of the two central counts.
std::vector<Ratio> class_weight_ratios(std::span<const std::size_t> counts);

/// Same weights as doubles (each the correctly rounded quotient).
ClassWeights compute_class_weights(std::span<const std::size_t> counts);

struct LossResult {
    double loss = 0.0;
    Tensor grad_logits;
};

inline constexpr double kLogEpsilon = 1e-12;

/// loss = -alpha[t] * log(probs[t] + 1e-12); the gradient is taken with respect
/// to the logits that produced `probs` through softmax: alpha[t] * (probs - onehot(t)).
LossResult weighted_cross_entropy(const Tensor& probs, std::size_t true_class, const ClassWeights& weights);

}  // namespace traffic
