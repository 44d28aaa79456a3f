#include "traffic/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace traffic {

namespace {

double green_for(const std::vector<double>& greens, std::size_t phase) {
    return greens.size() == 1 ? greens[0] : greens.at(phase);
}

void check_phase_values(const std::vector<double>& values, const Scenario& scenario, const char* what) {
    if (values.size() != 1 && values.size() != scenario.phases.size()) {
        throw std::invalid_argument(std::string(what) + " lists " + std::to_string(values.size()) +
                                    " values for " + std::to_string(scenario.phases.size()) + " phases");
    }
}

}  // namespace

FixedTimeController::FixedTimeController(std::vector<double> greens, std::string label)
    : greens_(std::move(greens)), label_(std::move(label)) {
    if (greens_.empty()) throw std::invalid_argument("fixed-time plan needs at least one green time");
    for (double g : greens_) {
        if (!(g > 0.0)) throw std::invalid_argument("fixed-time green times must be positive");
    }
}

std::size_t FixedTimeController::decide(const JunctionState& state, const Scenario& scenario) const {
    check_phase_values(greens_, scenario, "fixed-time plan");
    if (state.time_in_phase >= green_for(greens_, state.phase) - 1e-9) {
        return (state.phase + 1) % scenario.phases.size();
    }
    return state.phase;
}

LqfController::LqfController(LqfParams params) : params_(params) {
    if (params_.min_green < 0.0 || params_.max_green < params_.min_green) {
        throw std::invalid_argument("LQF needs 0 <= min green <= max green");
    }
}

std::size_t lqf_decide(const JunctionState& state, const Scenario& scenario, const LqfParams& params) {
    if (state.time_in_phase < params.min_green - 1e-9) return state.phase;
    const std::size_t current = state.phase;
    std::size_t best = current;
    std::size_t best_queue = state.phase_queue(scenario, current);
    std::size_t best_other = current;
    std::size_t best_other_queue = 0;
    for (std::size_t p = 0; p < scenario.phases.size(); ++p) {
        if (p == current) continue;
        const std::size_t q = state.phase_queue(scenario, p);
        if (q > best_queue) best = p, best_queue = q;
        if (q > best_other_queue) best_other = p, best_other_queue = q;
    }
    if (best == current && state.time_in_phase >= params.max_green - 1e-9 && best_other_queue > 0) {
        return best_other;
    }
    return best;
}

DensityClass queue_density_class(std::size_t queued, double capacity) {
    if (!(capacity > 0.0)) throw std::invalid_argument("lane capacity must be positive");
    return classify_count(100.0 * static_cast<double>(queued) / capacity);
}

DensityParams DensityParams::defaults() {
    DensityParams p;
    p.base_green = {6.0};
    p.extension = {0.0, 4.0, 10.0, 20.0, 35.0};
    p.max_green = 60.0;
    return p;
}

DensityParams DensityParams::from_map(const std::map<DensityClass, double>& class_map, std::vector<double> base_green,
                                      double max_green) {
    DensityParams p;
    for (auto cls : kDensityClasses) {
        const auto it = class_map.find(cls);
        if (it == class_map.end()) {
            throw std::invalid_argument("green extension map is missing class " + std::string(to_string(cls)));
        }
        if (!(it->second >= 0.0)) throw std::invalid_argument("green extensions must be >= 0");
        p.extension[index_of(cls)] = it->second;
    }
    p.base_green = std::move(base_green);
    p.max_green = max_green;
    return p;
}

DensityAdaptiveController::DensityAdaptiveController(DensityParams params) : params_(std::move(params)) {
    if (params_.base_green.empty()) throw std::invalid_argument("density-adaptive control needs base green times");
    for (double g : params_.base_green) {
        if (!(g > 0.0)) throw std::invalid_argument("base green times must be positive");
        if (g > params_.max_green) throw std::invalid_argument("base green exceeds max green");
    }
}

DensityDecision density_adaptive_decide(const JunctionState& state, const Scenario& scenario,
                                        const DensityParams& params) {
    check_phase_values(params.base_green, scenario, "base green");
    DensityDecision d;
    for (auto l : scenario.phases[state.phase]) {
        d.busiest = std::max(d.busiest, queue_density_class(state.queued(l), scenario.lanes[l].capacity));
    }
    d.extension = params.extension[index_of(d.busiest)];
    d.green_target = std::min(params.max_green, green_for(params.base_green, state.phase) + d.extension);
    d.phase = state.time_in_phase >= d.green_target - 1e-9 ? (state.phase + 1) % scenario.phases.size()
                                                            : state.phase;
    return d;
}

std::size_t enforce_max_red(const JunctionState& state, const Scenario& scenario, std::size_t proposed,
                            double max_red) {
    struct Waiting {
        double budget;  // red seconds left before the bound max_red + L + dt is broken
        std::size_t lane;
    };
    const double dt = scenario.dt;
    const double per_switch = scenario.lost_time + dt;
    // Red time only clears after a green step, so a lane of the green phase
    // that has not discharged since the switch is still waiting.
    std::vector<Waiting> waiting;
    for (std::size_t l = 0; l < scenario.lanes.size(); ++l) {
        if (state.queues[l].empty()) continue;
        if (state.lane_green(scenario, l) && state.red_time[l] <= 0.0) continue;
        waiting.push_back({max_red + per_switch - state.red_time[l], l});
    }
    if (waiting.empty()) return proposed;
    std::sort(waiting.begin(), waiting.end(), [](const Waiting& a, const Waiting& b) {
        return a.budget != b.budget ? a.budget < b.budget : a.lane < b.lane;
    });

    // Go to `first` now, then after each green step switch to the phase of the
    // earliest-due lane still waiting. A lane served by the green step ending
    // at time T has been red for T - dt more seconds by then.
    const bool green_now = !state.in_lost_time();
    auto feasible = [&](std::size_t first) {
        std::vector<bool> served(waiting.size(), false);
        auto serve = [&](std::size_t phase, double t) {
            for (std::size_t i = 0; i < waiting.size(); ++i) {
                if (served[i] || !scenario.lane_in_phase(waiting[i].lane, phase)) continue;
                if (t - dt > waiting[i].budget + 1e-9) return false;
                served[i] = true;
            }
            return true;
        };
        double t = green_now ? (first == state.phase ? dt : per_switch)
                             : static_cast<double>(state.lost_remaining + 1) * dt;
        if (!serve(first, t)) return false;
        for (std::size_t i = 0; i < waiting.size(); ++i) {
            if (served[i]) continue;
            t += per_switch;
            if (!serve(scenario.phase_of(waiting[i].lane), t)) return false;
        }
        return true;
    };
    if (feasible(proposed)) return proposed;

    // Otherwise prefer the most urgent lane's phases, then anything that keeps every lane on time.
    const std::size_t urgent = waiting.front().lane;
    std::vector<std::size_t> options;
    if (scenario.lane_in_phase(urgent, state.phase)) options.push_back(state.phase);
    options.push_back(scenario.phase_of(urgent));
    for (std::size_t p = 0; p < scenario.phases.size(); ++p) {
        if (scenario.lane_in_phase(urgent, p)) options.push_back(p);
    }
    // a green step is cheaper than a switch, so holding can rescue the plan
    options.push_back(state.phase);
    for (std::size_t p = 0; p < scenario.phases.size(); ++p) options.push_back(p);
    for (auto p : options) {
        if (feasible(p)) return p;
    }
    return options.front();
}

double minimum_max_red(const Scenario& scenario) {
    return static_cast<double>(scenario.phases.size()) * (scenario.lost_time + scenario.dt);
}

MaxRedGuard::MaxRedGuard(std::shared_ptr<const Controller> inner, double max_red)
    : inner_(std::move(inner)), max_red_(max_red) {
    if (!inner_) throw std::invalid_argument("max-red guard needs a controller to wrap");
    if (!(max_red_ > 0.0)) throw std::invalid_argument("max red must be positive");
}

std::size_t MaxRedGuard::decide(const JunctionState& state, const Scenario& scenario) const {
    if (max_red_ < minimum_max_red(scenario)) {
        throw std::invalid_argument("max red " + std::to_string(max_red_) + " s is below the " +
                                    std::to_string(minimum_max_red(scenario)) + " s this scenario needs");
    }
    return enforce_max_red(state, scenario, inner_->decide(state, scenario), max_red_);
}

std::size_t MaxRedGuard::redirect(const JunctionState& state, const Scenario& scenario) const {
    return enforce_max_red(state, scenario, inner_->redirect(state, scenario), max_red_);
}

std::vector<double> default_fixed_greens(const Scenario& scenario, double green) {
    return std::vector<double>(scenario.phases.size(), green);
}

}  // namespace traffic
