#include "traffic/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace traffic {

namespace {

bool is_step_multiple(double value, double dt) {
    const double k = value / dt;
    return std::abs(k - std::round(k)) < 1e-9;
}

}  // namespace

void Scenario::validate() const {
    if (lanes.empty()) throw std::invalid_argument("scenario has no lanes");
    if (phases.empty()) throw std::invalid_argument("scenario has no phases");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("dt must be positive");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be positive");
    if (!is_step_multiple(horizon, dt)) throw std::invalid_argument("horizon must be a whole number of steps");
    if (!(lost_time >= 0.0) || !is_step_multiple(lost_time, dt)) {
        throw std::invalid_argument("lost time must be a non-negative whole number of steps");
    }
    for (std::size_t l = 0; l < lanes.size(); ++l) {
        const auto& lane = lanes[l];
        const std::string name = "lane " + std::to_string(l);
        if (!(lane.arrival_rate >= 0.0) || !std::isfinite(lane.arrival_rate)) {
            throw std::invalid_argument(name + ": arrival rate must be >= 0");
        }
        if (!(lane.saturation_rate > 0.0) || !std::isfinite(lane.saturation_rate)) {
            throw std::invalid_argument(name + ": saturation rate must be > 0");
        }
        if (!(lane.capacity > 0.0)) throw std::invalid_argument(name + ": capacity must be > 0");
        if (!(lane.weight >= 0.0)) throw std::invalid_argument(name + ": weight must be >= 0");
    }
    std::vector<bool> served(lanes.size(), false);
    for (std::size_t p = 0; p < phases.size(); ++p) {
        if (phases[p].empty()) throw std::invalid_argument("phase " + std::to_string(p) + " serves no lanes");
        for (auto l : phases[p]) {
            if (l >= lanes.size()) {
                throw std::invalid_argument("phase " + std::to_string(p) + " names unknown lane " + std::to_string(l));
            }
            served[l] = true;
        }
    }
    for (std::size_t l = 0; l < lanes.size(); ++l) {
        if (!served[l]) throw std::invalid_argument("lane " + std::to_string(l) + " is not served by any phase");
    }
}

std::size_t Scenario::steps() const { return static_cast<std::size_t>(std::llround(horizon / dt)); }
std::size_t Scenario::lost_steps() const { return static_cast<std::size_t>(std::llround(lost_time / dt)); }

std::size_t Scenario::phase_of(std::size_t lane) const {
    for (std::size_t p = 0; p < phases.size(); ++p)
        if (lane_in_phase(lane, p)) return p;
    throw std::invalid_argument("lane " + std::to_string(lane) + " is not served by any phase");
}

bool Scenario::lane_in_phase(std::size_t lane, std::size_t phase) const {
    for (auto l : phases[phase])
        if (l == lane) return true;
    return false;
}

std::string scenario_to_json(const Scenario& s) {
    nlohmann::ordered_json j;
    j["format_version"] = kScenarioFormatVersion;
    j["lanes"] = nlohmann::ordered_json::array();
    for (const auto& lane : s.lanes) {
        j["lanes"].push_back({{"approach", lane.approach},
                              {"arrival_rate", lane.arrival_rate},
                              {"saturation_rate", lane.saturation_rate},
                              {"capacity", lane.capacity},
                              {"weight", lane.weight}});
    }
    j["phases"] = s.phases;
    j["lost_time"] = s.lost_time;
    j["horizon"] = s.horizon;
    j["dt"] = s.dt;
    j["seed"] = s.seed;
    return j.dump(2);
}

Scenario scenario_from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("scenario is not valid JSON: ") + e.what());
    }
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kScenarioFormatVersion) {
            throw std::invalid_argument("unsupported scenario format_version " + std::to_string(version));
        }
        Scenario s;
        for (const auto& lj : j.at("lanes")) {
            Lane lane;
            lane.approach = lj.value("approach", std::string());
            lane.arrival_rate = lj.at("arrival_rate").get<double>();
            lane.saturation_rate = lj.value("saturation_rate", lane.saturation_rate);
            lane.capacity = lj.value("capacity", lane.capacity);
            lane.weight = lj.value("weight", lane.weight);
            s.lanes.push_back(lane);
        }
        s.phases = j.at("phases").get<std::vector<std::vector<std::size_t>>>();
        s.lost_time = j.value("lost_time", s.lost_time);
        s.horizon = j.value("horizon", s.horizon);
        s.dt = j.value("dt", s.dt);
        s.seed = j.value("seed", s.seed);
        s.validate();
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed scenario: ") + e.what());
    }
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return scenario_from_json(buf.str());
}

void save_scenario(const std::filesystem::path& path, const Scenario& scenario) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scenario " + path.string());
    out << scenario_to_json(scenario) << '\n';
}

Scenario reference_scenario() {
    Scenario s;
    s.lanes = {{"north", 0.20, 1.0, 20.0, 1.0},
               {"south", 0.12, 1.0, 20.0, 1.0},
               {"east", 0.05, 1.0, 20.0, 1.0},
               {"west", 0.02, 1.0, 20.0, 1.0}};
    s.phases = {{0}, {1}, {2}, {3}};
    s.lost_time = 3.0;
    s.horizon = 3600.0;
    s.seed = 1;
    return s;
}

Scenario asymmetric_two_lane_scenario() {
    Scenario s;
    s.lanes = {{"main", 0.30, 1.0, 20.0, 1.0}, {"side", 0.05, 1.0, 20.0, 1.0}};
    s.phases = {{0}, {1}};
    s.lost_time = 2.0;
    s.horizon = 1800.0;
    s.seed = 1;
    return s;
}

}  // namespace traffic
