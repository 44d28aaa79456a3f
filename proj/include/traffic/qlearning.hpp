#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "traffic/simulator.hpp"

namespace traffic {

struct QConfig {
    std::size_t episodes = 150;
    double alpha = 0.1;
    double gamma = 0.95;
    double epsilon_start = 0.5;
    double epsilon_end = 0.05;
    double time_bin = 5.0;        // seconds per time-in-phase bin
    std::size_t time_bins = 4;    // the last bin is open-ended
    std::size_t state_cap = 1'000'000;
    double max_red = 0.0;         // > 0 wraps every decision in the max-red rule
    std::uint64_t seed = 0;
};

enum class QAction : std::size_t { Keep = 0, SwitchNext = 1 };

/// Discretizes the junction: density class per lane, active phase, binned green time.
struct StateCoder {
    std::size_t lanes = 0;
    std::size_t phases = 0;
    double time_bin = 5.0;
    std::size_t time_bins = 4;

    std::size_t size() const;
    std::size_t encode(const JunctionState& state, const Scenario& scenario) const;
    friend bool operator==(const StateCoder&, const StateCoder&) = default;
};

struct QPolicy {
    StateCoder coder;
    std::vector<std::array<double, 2>> table;

    QAction best(std::size_t s) const;
    friend bool operator==(const QPolicy&, const QPolicy&) = default;
};

/// Keep ties go to keeping the current phase.
class QPolicyController : public Controller {
public:
    explicit QPolicyController(QPolicy policy) : policy_(std::move(policy)) {}
    std::string name() const override { return "QLearning"; }
    std::size_t decide(const JunctionState& state, const Scenario& scenario) const override;
    const QPolicy& policy() const { return policy_; }

private:
    QPolicy policy_;
};

struct QTrainResult {
    QPolicy policy;
    std::vector<double> episode_reward;
};

/// Tabular Q-learning over `episodes` runs of the scenario, each with its own
/// arrival seed derived from `cfg.seed`. The reward is minus the queued
/// vehicle-seconds between decisions; epsilon decays linearly per episode.
QTrainResult q_train(const Scenario& scenario, const QConfig& cfg);

}  // namespace traffic
