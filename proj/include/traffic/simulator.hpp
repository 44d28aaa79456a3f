#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "traffic/random.hpp"
#include "traffic/scenario.hpp"

namespace traffic {

struct JunctionState {
    std::vector<std::deque<double>> queues;  // arrival times, oldest first
    std::size_t phase = 0;                   // green phase, or the one being switched to
    double time_in_phase = 0.0;              // green seconds of the current phase
    double clock = 0.0;
    std::size_t lost_remaining = 0;          // all-red steps left before `phase` turns green
    std::vector<double> red_time;            // continuous red while non-empty, per lane
    std::vector<double> credit;              // fractional discharge carried between steps

    static JunctionState initial(const Scenario& scenario);
    bool in_lost_time() const { return lost_remaining > 0; }
    bool lane_green(const Scenario& scenario, std::size_t lane) const;
    std::size_t queued(std::size_t lane) const { return queues[lane].size(); }
    std::size_t phase_queue(const Scenario& scenario, std::size_t phase) const;
};

/// Decides the phase that should be green. Controllers are stateless with
/// respect to the simulation; everything they need is in the state.
class Controller {
public:
    virtual ~Controller() = default;
    virtual std::string name() const = 0;
    /// Called every step outside lost time. Returning another phase starts a switch.
    virtual std::size_t decide(const JunctionState& state, const Scenario& scenario) const = 0;
    /// Called every step during lost time; may redirect the pending switch.
    virtual std::size_t redirect(const JunctionState& state, const Scenario&) const { return state.phase; }
};

/// Independent Poisson arrival streams, one per lane, seeded from (seed, lane).
class ArrivalStreams {
public:
    ArrivalStreams(const Scenario& scenario, std::uint64_t seed);
    std::size_t draw(std::size_t lane);

private:
    std::vector<Rng> rngs_;
    std::vector<double> means_;
};

struct Departure {
    std::size_t lane = 0;
    double arrival = 0.0;
    double departure = 0.0;
};

struct StepEvents {
    std::vector<std::size_t> arrivals;  // per lane
    std::vector<Departure> departures;
    bool switched = false;
};

/// One dt: arrivals stamped at the current clock, controller decision, discharge
/// of green lanes (departures stamped clock + dt), red timers, clock advance.
/// A switch costs `lost_steps()` steps of all-red with no discharge.
StepEvents step(JunctionState& state, const Scenario& scenario, const Controller& controller,
                ArrivalStreams& arrivals);

struct LaneDelay {
    std::size_t vehicles = 0;  // arrivals within the horizon
    std::size_t departed = 0;
    double mean_delay = 0.0;
    double max_delay = 0.0;
    friend bool operator==(const LaneDelay&, const LaneDelay&) = default;
};

struct DelayStats {
    double mean_delay = 0.0;  // over every arrival; queued vehicles count horizon - arrival
    double max_delay = 0.0;
    std::size_t throughput = 0;
    std::size_t arrivals = 0;
    std::size_t still_queued = 0;
    std::vector<LaneDelay> lanes;
    /// Largest continuous red seen by any non-empty lane.
    double max_red_observed = 0.0;
    std::size_t switches = 0;

    friend bool operator==(const DelayStats&, const DelayStats&) = default;
};

struct RunTrace {
    std::vector<Departure> departures;                // in departure order
    std::vector<std::vector<double>> arrival_times;   // per lane, in arrival order
    std::vector<std::size_t> phase_per_step;
};

/// Simulates the whole horizon with arrivals drawn from `seed`.
DelayStats run_scenario(const Scenario& scenario, const Controller& controller, std::uint64_t seed,
                        RunTrace* trace = nullptr);
/// Uses `scenario.seed`.
DelayStats run_scenario(const Scenario& scenario, const Controller& controller);

}  // namespace traffic
