#include "traffic/simulator.hpp"

#include <algorithm>
#include <stdexcept>

namespace traffic {

JunctionState JunctionState::initial(const Scenario& scenario) {
    scenario.validate();
    JunctionState s;
    s.queues.resize(scenario.lanes.size());
    s.red_time.assign(scenario.lanes.size(), 0.0);
    s.credit.assign(scenario.lanes.size(), 0.0);
    return s;
}

bool JunctionState::lane_green(const Scenario& scenario, std::size_t lane) const {
    return !in_lost_time() && scenario.lane_in_phase(lane, phase);
}

std::size_t JunctionState::phase_queue(const Scenario& scenario, std::size_t p) const {
    std::size_t total = 0;
    for (auto l : scenario.phases[p]) total += queues[l].size();
    return total;
}

ArrivalStreams::ArrivalStreams(const Scenario& scenario, std::uint64_t seed) {
    for (std::size_t l = 0; l < scenario.lanes.size(); ++l) {
        rngs_.emplace_back(mix_seed(seed, l));
        means_.push_back(scenario.lanes[l].arrival_rate * scenario.dt);
    }
}

std::size_t ArrivalStreams::draw(std::size_t lane) {
    // Always consume the stream, so a lane's arrivals never depend on the others.
    return means_[lane] > 0.0 ? rngs_[lane].poisson(means_[lane]) : 0;
}

StepEvents step(JunctionState& state, const Scenario& scenario, const Controller& controller,
                ArrivalStreams& arrivals) {
    const std::size_t lanes = scenario.lanes.size();
    StepEvents ev;
    ev.arrivals.resize(lanes);
    for (std::size_t l = 0; l < lanes; ++l) {
        ev.arrivals[l] = arrivals.draw(l);
        for (std::size_t k = 0; k < ev.arrivals[l]; ++k) state.queues[l].push_back(state.clock);
    }

    if (!state.in_lost_time()) {
        const std::size_t target = controller.decide(state, scenario);
        if (target >= scenario.phases.size()) throw std::logic_error(controller.name() + " chose an unknown phase");
        if (target != state.phase) {
            state.phase = target;
            state.time_in_phase = 0.0;
            state.lost_remaining = scenario.lost_steps();
            std::fill(state.credit.begin(), state.credit.end(), 0.0);
            ev.switched = true;
        }
    } else {
        const std::size_t target = controller.redirect(state, scenario);
        if (target >= scenario.phases.size()) throw std::logic_error(controller.name() + " chose an unknown phase");
        state.phase = target;
    }

    const bool green_step = !state.in_lost_time();
    if (green_step) {
        for (std::size_t l = 0; l < lanes; ++l) {
            if (!scenario.lane_in_phase(l, state.phase)) {
                state.credit[l] = 0.0;
                continue;
            }
            auto& q = state.queues[l];
            state.credit[l] += scenario.lanes[l].saturation_rate * scenario.dt;
            while (state.credit[l] >= 1.0 && !q.empty()) {
                ev.departures.push_back({l, q.front(), state.clock + scenario.dt});
                q.pop_front();
                state.credit[l] -= 1.0;
            }
            if (q.empty()) state.credit[l] = 0.0;
        }
    } else {
        --state.lost_remaining;
    }

    for (std::size_t l = 0; l < lanes; ++l) {
        const bool green = green_step && scenario.lane_in_phase(l, state.phase);
        if (green || state.queues[l].empty()) {
            state.red_time[l] = 0.0;
        } else {
            state.red_time[l] += scenario.dt;
        }
    }
    state.clock += scenario.dt;
    if (green_step) state.time_in_phase += scenario.dt;
    return ev;
}

DelayStats run_scenario(const Scenario& scenario, const Controller& controller, std::uint64_t seed, RunTrace* trace) {
    JunctionState state = JunctionState::initial(scenario);
    ArrivalStreams arrivals(scenario, seed);
    const std::size_t lanes = scenario.lanes.size();

    DelayStats stats;
    stats.lanes.resize(lanes);
    std::vector<double> lane_total(lanes, 0.0);
    if (trace) {
        *trace = {};
        trace->arrival_times.resize(lanes);
    }

    auto record = [&](std::size_t lane, double delay) {
        auto& ld = stats.lanes[lane];
        lane_total[lane] += delay;
        ld.max_delay = std::max(ld.max_delay, delay);
        stats.max_delay = std::max(stats.max_delay, delay);
    };

    const std::size_t steps = scenario.steps();
    for (std::size_t t = 0; t < steps; ++t) {
        const double now = state.clock;
        const auto ev = step(state, scenario, controller, arrivals);
        if (ev.switched) ++stats.switches;
        for (std::size_t l = 0; l < lanes; ++l) {
            stats.lanes[l].vehicles += ev.arrivals[l];
            stats.arrivals += ev.arrivals[l];
            if (trace) trace->arrival_times[l].insert(trace->arrival_times[l].end(), ev.arrivals[l], now);
        }
        for (const auto& d : ev.departures) {
            ++stats.lanes[d.lane].departed;
            ++stats.throughput;
            record(d.lane, d.departure - d.arrival);
            if (trace) trace->departures.push_back(d);
        }
        for (std::size_t l = 0; l < lanes; ++l) {
            if (!state.queues[l].empty()) stats.max_red_observed = std::max(stats.max_red_observed, state.red_time[l]);
        }
        if (trace) trace->phase_per_step.push_back(state.in_lost_time() ? scenario.phases.size() : state.phase);
    }

    for (std::size_t l = 0; l < lanes; ++l) {
        for (double arrival : state.queues[l]) record(l, scenario.horizon - arrival);
        stats.still_queued += state.queues[l].size();
    }
    double total = 0.0;
    for (std::size_t l = 0; l < lanes; ++l) {
        auto& ld = stats.lanes[l];
        total += lane_total[l];
        ld.mean_delay = ld.vehicles ? lane_total[l] / static_cast<double>(ld.vehicles) : 0.0;
    }
    stats.mean_delay = stats.arrivals ? total / static_cast<double>(stats.arrivals) : 0.0;
    return stats;
}

DelayStats run_scenario(const Scenario& scenario, const Controller& controller) {
    return run_scenario(scenario, controller, scenario.seed);
}

}  // namespace traffic
