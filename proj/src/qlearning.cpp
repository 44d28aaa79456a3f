#include "traffic/qlearning.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "traffic/controllers.hpp"
#include "traffic/random.hpp"

namespace traffic {

std::size_t StateCoder::size() const {
    double n = static_cast<double>(phases) * static_cast<double>(time_bins);
    n *= std::pow(static_cast<double>(kDensityClassCount), static_cast<double>(lanes));
    return n > 1e18 ? static_cast<std::size_t>(-1) : static_cast<std::size_t>(n);
}

std::size_t StateCoder::encode(const JunctionState& state, const Scenario& scenario) const {
    std::size_t s = 0;
    for (std::size_t l = 0; l < lanes; ++l) {
        s = s * kDensityClassCount + index_of(queue_density_class(state.queued(l), scenario.lanes[l].capacity));
    }
    const auto bin = std::min(time_bins - 1, static_cast<std::size_t>(state.time_in_phase / time_bin));
    return (s * phases + state.phase) * time_bins + bin;
}

QAction QPolicy::best(std::size_t s) const {
    return table.at(s)[1] > table.at(s)[0] ? QAction::SwitchNext : QAction::Keep;
}

std::size_t QPolicyController::decide(const JunctionState& state, const Scenario& scenario) const {
    const auto s = policy_.coder.encode(state, scenario);
    return policy_.best(s) == QAction::Keep ? state.phase : (state.phase + 1) % scenario.phases.size();
}

namespace {

// Acts epsilon-greedily and applies the update for the previous decision
// whenever a new one is due.
class Learner : public Controller {
public:
    Learner(QPolicy& policy, const QConfig& cfg, Rng& rng) : policy_(policy), cfg_(cfg), rng_(rng) {}

    std::string name() const override { return "QLearning"; }
    void begin_episode(double epsilon) {
        epsilon_ = epsilon;
        have_previous_ = false;
        pending_reward_ = 0.0;
    }
    void add_reward(double r) { pending_reward_ += r; }

    std::size_t decide(const JunctionState& state, const Scenario& scenario) const override {
        const auto s = policy_.coder.encode(state, scenario);
        update(policy_.table[s][0] > policy_.table[s][1] ? policy_.table[s][0] : policy_.table[s][1]);
        QAction a = policy_.best(s);
        if (rng_.bernoulli(epsilon_)) a = rng_.bernoulli(0.5) ? QAction::SwitchNext : QAction::Keep;
        std::size_t target = a == QAction::Keep ? state.phase : (state.phase + 1) % scenario.phases.size();
        if (cfg_.max_red > 0.0) target = enforce_max_red(state, scenario, target, cfg_.max_red);
        previous_state_ = s;
        previous_action_ = target == state.phase ? QAction::Keep : QAction::SwitchNext;
        have_previous_ = true;
        return target;
    }

    std::size_t redirect(const JunctionState& state, const Scenario& scenario) const override {
        return cfg_.max_red > 0.0 ? enforce_max_red(state, scenario, state.phase, cfg_.max_red) : state.phase;
    }

    void finish(const JunctionState& state, const Scenario& scenario) {
        const auto s = policy_.coder.encode(state, scenario);
        update(std::max(policy_.table[s][0], policy_.table[s][1]));
        have_previous_ = false;
    }

private:
    void update(double next_value) const {
        if (!have_previous_) return;
        double& q = policy_.table[previous_state_][static_cast<std::size_t>(previous_action_)];
        q += cfg_.alpha * (pending_reward_ + cfg_.gamma * next_value - q);
        pending_reward_ = 0.0;
    }

    QPolicy& policy_;
    const QConfig& cfg_;
    Rng& rng_;
    double epsilon_ = 0.0;
    mutable bool have_previous_ = false;
    mutable std::size_t previous_state_ = 0;
    mutable QAction previous_action_ = QAction::Keep;
    mutable double pending_reward_ = 0.0;
};

}  // namespace

QTrainResult q_train(const Scenario& scenario, const QConfig& cfg) {
    scenario.validate();
    if (cfg.episodes == 0) throw std::invalid_argument("Q-learning needs at least one episode");
    if (!(cfg.alpha > 0.0 && cfg.alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
    if (!(cfg.gamma >= 0.0 && cfg.gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
    if (cfg.time_bins == 0 || !(cfg.time_bin > 0.0)) throw std::invalid_argument("time bins must be positive");
    if (cfg.max_red > 0.0 && cfg.max_red < minimum_max_red(scenario)) {
        throw std::invalid_argument("max red is below the minimum this scenario needs");
    }

    QTrainResult result;
    result.policy.coder = {scenario.lanes.size(), scenario.phases.size(), cfg.time_bin, cfg.time_bins};
    const std::size_t states = result.policy.coder.size();
    if (states > cfg.state_cap) {
        throw std::invalid_argument("Q table would need " + std::to_string(states) + " states (" +
                                    std::to_string(scenario.lanes.size()) + " lanes x " +
                                    std::to_string(scenario.phases.size()) + " phases x " +
                                    std::to_string(cfg.time_bins) + " bins), over the cap of " +
                                    std::to_string(cfg.state_cap));
    }
    result.policy.table.assign(states, {0.0, 0.0});

    Rng explore(mix_seed(cfg.seed, 0xE5));
    Learner learner(result.policy, cfg, explore);
    for (std::size_t ep = 0; ep < cfg.episodes; ++ep) {
        const double frac = cfg.episodes > 1 ? static_cast<double>(ep) / static_cast<double>(cfg.episodes - 1) : 1.0;
        learner.begin_episode(cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac);
        JunctionState state = JunctionState::initial(scenario);
        ArrivalStreams arrivals(scenario, mix_seed(cfg.seed, ep + 1));
        double total = 0.0;
        for (std::size_t t = 0; t < scenario.steps(); ++t) {
            step(state, scenario, learner, arrivals);
            double queued = 0.0;
            for (const auto& q : state.queues) queued += static_cast<double>(q.size());
            learner.add_reward(-queued * scenario.dt);
            total -= queued * scenario.dt;
        }
        learner.finish(state, scenario);
        result.episode_reward.push_back(total);
    }
    return result;
}

}  // namespace traffic
