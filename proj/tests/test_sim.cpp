#include <doctest.h>

#include <map>

#include "sim_fuzz.hpp"
#include "test_util.hpp"
#include "traffic/controllers.hpp"
#include "traffic/ga.hpp"
#include "traffic/qlearning.hpp"
#include "traffic/scenario.hpp"
#include "traffic/simulator.hpp"

using namespace traffic;

namespace {

Scenario single_lane(double rate, double horizon) {
    Scenario s;
    s.lanes = {Lane{"N", rate, 1.0, 20.0, 1.0}};
    s.phases = {{0}};
    s.lost_time = 0.0;
    s.horizon = horizon;
    return s;
}

Scenario two_lanes(double cap = 20.0) {
    Scenario s;
    s.lanes = {Lane{"N", 0.0, 1.0, cap, 1.0}, Lane{"E", 0.0, 1.0, cap, 1.0}};
    s.phases = {{0}, {1}};
    s.lost_time = 2.0;
    s.horizon = 100.0;
    return s;
}

JunctionState with_queues(const Scenario& s, std::vector<std::size_t> counts, std::size_t phase, double green) {
    auto st = JunctionState::initial(s);
    for (std::size_t l = 0; l < counts.size(); ++l) st.queues[l].assign(counts[l], 0.0);
    st.phase = phase;
    st.time_in_phase = green;
    st.clock = green;
    return st;
}

double mean_delay(const Scenario& s, const Controller& c, std::uint64_t first_seed, int seeds) {
    double total = 0.0;
    for (int i = 0; i < seeds; ++i) total += run_scenario(s, c, first_seed + i).mean_delay;
    return total / seeds;
}

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("scenario validation and file round trip") {
    auto s = reference_scenario();
    CHECK_NOTHROW(s.validate());
    CHECK(s.lanes.size() == 4);
    auto bad = s;
    bad.lanes[0].arrival_rate = -0.1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = s;
    bad.phases = {{0, 1, 2}};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = s;
    bad.horizon = 0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = s;
    bad.phases[0].push_back(9);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    testutil::TempDir dir("scn");
    save_scenario(dir / "s.json", s);
    const auto back = load_scenario(dir / "s.json");
    CHECK(scenario_to_json(back) == scenario_to_json(s));
    CHECK_THROWS(scenario_from_json(R"({"format_version": 7})"));
    CHECK_THROWS(scenario_from_json("not json"));
}

TEST_CASE("no arrivals, no queues, no delay") {
    auto s = reference_scenario();
    for (auto& l : s.lanes) l.arrival_rate = 0.0;
    s.horizon = 300;
    const auto stats = run_scenario(s, LqfController{});
    CHECK(stats.arrivals == 0);
    CHECK(stats.mean_delay == 0.0);
    CHECK(stats.still_queued == 0);
}

TEST_CASE("three queued vehicles leave one per second") {
    const auto s = single_lane(0.0, 10);
    auto st = JunctionState::initial(s);
    st.queues[0] = {0.0, 0.0, 0.0};
    ArrivalStreams arrivals(s, 1);
    const FixedTimeController always({1e9});
    std::vector<double> delays;
    for (int t = 0; t < 4; ++t) {
        for (const auto& d : step(st, s, always, arrivals).departures) delays.push_back(d.departure - d.arrival);
    }
    CHECK(delays == std::vector<double>{1.0, 2.0, 3.0});
    CHECK(st.queues[0].empty());
    CHECK(st.clock == 4.0);
}

TEST_CASE("always-green single lane follows a hand-rolled queue recursion") {
    for (std::uint64_t seed : {3u, 17u, 2024u}) {
        const auto s = single_lane(0.8, 20);
        // Same seeding contract, independent bookkeeping.
        ArrivalStreams draws(s, seed);
        std::deque<double> queue;
        std::vector<double> delays;
        for (int t = 0; t < 20; ++t) {
            for (std::size_t k = draws.draw(0); k > 0; --k) queue.push_back(t);
            if (!queue.empty()) {
                delays.push_back(t + 1 - queue.front());
                queue.pop_front();
            }
        }
        std::size_t departed = delays.size();
        for (double a : queue) delays.push_back(20 - a);
        double sum = 0.0, worst = 0.0;
        for (double d : delays) sum += d, worst = std::max(worst, d);

        const auto stats = run_scenario(s, FixedTimeController({1e9}), seed);
        CHECK(stats.arrivals == delays.size());
        CHECK(stats.throughput == departed);
        CHECK(stats.mean_delay == doctest::Approx(delays.empty() ? 0.0 : sum / delays.size()).epsilon(1e-12));
        CHECK(stats.max_delay == worst);
    }
}

TEST_CASE("fractional saturation carries credit between steps") {
    auto s = single_lane(0.0, 10);
    s.lanes[0].saturation_rate = 0.5;
    auto st = JunctionState::initial(s);
    st.queues[0] = {0.0, 0.0};
    ArrivalStreams arrivals(s, 1);
    const FixedTimeController always({1e9});
    std::vector<double> times;
    for (int t = 0; t < 5; ++t)
        for (const auto& d : step(st, s, always, arrivals).departures) times.push_back(d.departure);
    CHECK(times == std::vector<double>{2.0, 4.0});
}

TEST_CASE("a switch costs the lost time with no discharge") {
    auto s = two_lanes();
    s.lost_time = 3.0;
    auto st = with_queues(s, {0, 5}, 0, 10);
    ArrivalStreams arrivals(s, 1);
    const FixedTimeController ft({10.0, 10.0});
    std::vector<double> times;
    for (int t = 0; t < 6; ++t) {
        const auto ev = step(st, s, ft, arrivals);
        if (t == 0) CHECK(ev.switched);
        for (const auto& d : ev.departures) times.push_back(d.departure - st.clock + 0.0);
        if (t < 3) CHECK(ev.departures.empty());
    }
    CHECK(times.size() == 3);
    CHECK(st.phase == 1);
}

TEST_CASE("arrival streams do not depend on the controller") {
    const auto s = reference_scenario();
    RunTrace a, b;
    run_scenario(s, FixedTimeController(default_fixed_greens(s)), 9, &a);
    run_scenario(s, LqfController{}, 9, &b);
    CHECK(a.arrival_times == b.arrival_times);
    RunTrace c;
    run_scenario(s, LqfController{}, 10, &c);
    CHECK(c.arrival_times != a.arrival_times);
}

TEST_CASE("runs are bit-identical per seed") {
    const auto s = reference_scenario();
    const DensityAdaptiveController da;
    CHECK(run_scenario(s, da, 5) == run_scenario(s, da, 5));
}

TEST_CASE("longest queue first") {
    const auto s = two_lanes();
    const LqfParams p{5, 60};
    CHECK(lqf_decide(with_queues(s, {5, 2}, 1, 10), s, p) == 0);
    CHECK(lqf_decide(with_queues(s, {0, 0}, 1, 10), s, p) == 1);
    CHECK(lqf_decide(with_queues(s, {3, 3}, 1, 10), s, p) == 1);
    CHECK(lqf_decide(with_queues(s, {3, 3}, 0, 10), s, p) == 0);
    CHECK(lqf_decide(with_queues(s, {5, 2}, 1, 3), s, p) == 1);  // min green holds
    CHECK(lqf_decide(with_queues(s, {5, 2}, 0, 60), s, p) == 1);  // max green forces a change

    Scenario three = s;
    three.lanes.push_back(Lane{"S", 0.0, 1.0, 20.0, 1.0});
    three.phases = {{0}, {1}, {2}};
    CHECK(lqf_decide(with_queues(three, {0, 4, 4}, 0, 10), three, p) == 1);
}

TEST_CASE("density classes of queues scale with capacity") {
    CHECK(queue_density_class(0, 20) == DensityClass::Empty);
    CHECK(queue_density_class(1, 20) == DensityClass::Empty);
    CHECK(queue_density_class(2, 20) == DensityClass::Low);
    CHECK(queue_density_class(4, 20) == DensityClass::Low);
    CHECK(queue_density_class(5, 20) == DensityClass::Medium);
    CHECK(queue_density_class(10, 20) == DensityClass::High);
    CHECK(queue_density_class(20, 20) == DensityClass::High);
    CHECK(queue_density_class(21, 20) == DensityClass::TrafficJam);
    CHECK(queue_density_class(10, 10) == DensityClass::High);
}

TEST_CASE("density-adaptive decisions over every two-lane class pair") {
    const auto s = two_lanes(20);
    const auto params = DensityParams::defaults();
    const std::map<DensityClass, std::size_t> queue_for{{DensityClass::Empty, 0},
                                                        {DensityClass::Low, 3},
                                                        {DensityClass::Medium, 8},
                                                        {DensityClass::High, 15},
                                                        {DensityClass::TrafficJam, 25}};
    const double ext[5] = {0, 4, 10, 20, 35};
    for (std::size_t a = 0; a < 5; ++a)
        for (std::size_t b = 0; b < 5; ++b)
            for (double green : {3.0, 6.0, 9.0, 15.0, 25.0, 40.0, 41.0, 60.0}) {
                const auto ca = kDensityClasses[a], cb = kDensityClasses[b];
                const auto st = with_queues(s, {queue_for.at(ca), queue_for.at(cb)}, 0, green);
                const auto d = density_adaptive_decide(st, s, params);
                const double target = std::min(60.0, 6.0 + ext[a]);
                CAPTURE(a);
                CAPTURE(b);
                CAPTURE(green);
                CHECK(d.busiest == ca);
                CHECK(d.extension == ext[a]);
                CHECK(d.green_target == target);
                CHECK(d.phase == (green >= target ? 1u : 0u));
            }
}

TEST_CASE("density map must cover every class") {
    std::map<DensityClass, double> partial{{DensityClass::Empty, 0}, {DensityClass::Low, 5}};
    CHECK_THROWS_AS(DensityParams::from_map(partial, {6}, 60), std::invalid_argument);
    partial[DensityClass::Medium] = 10;
    partial[DensityClass::High] = 15;
    partial[DensityClass::TrafficJam] = 30;
    CHECK(DensityParams::from_map(partial, {6}, 60).extension[4] == 30);
}

TEST_CASE("max-red override") {
    Scenario s;
    s.lanes = {Lane{"A"}, Lane{"B"}, Lane{"C"}};
    s.phases = {{0}, {1}, {2}};
    s.lost_time = 2;
    auto st = with_queues(s, {1, 1, 1}, 0, 10);
    st.red_time = {0, 10, 20};
    CHECK(enforce_max_red(st, s, 0, 90) == 0);
    st.red_time = {0, 95, 20};
    CHECK(enforce_max_red(st, s, 0, 90) == 1);
    st.red_time = {0, 95, 100};
    CHECK(enforce_max_red(st, s, 0, 90) == 2);
    st.red_time = {0, 100, 100};
    CHECK(enforce_max_red(st, s, 0, 90) == 1);
    // Empty lanes never count as starved.
    st.queues[1].clear();
    st.queues[2].clear();
    CHECK(enforce_max_red(st, s, 0, 90) == 0);
    // Two lanes due almost together: the second forces the first early.
    st = with_queues(s, {1, 1, 1}, 0, 10);
    st.red_time = {0, 88, 88};
    CHECK(enforce_max_red(st, s, 0, 90) == 1);

    CHECK(minimum_max_red(s) == 9.0);
    const MaxRedGuard weak(std::make_shared<LqfController>(), 5.0);
    CHECK_THROWS_AS(weak.decide(st, s), std::invalid_argument);

    // Overdue lane of the phase that just turned green: hold it for one step.
    st = with_queues(s, {1, 1, 1}, 1, 0);
    st.red_time = {0, 95, 20};
    CHECK(enforce_max_red(st, s, 2, 90) == 1);
    st.red_time = {0, 0, 20};
    CHECK(enforce_max_red(st, s, 2, 90) == 2);
}

namespace {
// Switches at every decision, including the first green step of a phase.
struct Flipper : Controller {
    std::string name() const override { return "Flipper"; }
    std::size_t decide(const JunctionState& st, const Scenario& s) const override {
        return (st.phase + 1) % s.phases.size();
    }
};
}  // namespace

TEST_CASE("max-red guard holds against a controller that never stays") {
    const auto s = reference_scenario();
    const double max_red = 60.0;
    const MaxRedGuard guarded(std::make_shared<Flipper>(), max_red);
    const auto stats = run_scenario(s, guarded, 5);
    CHECK(stats.max_red_observed <= max_red + s.lost_time + s.dt);
    CHECK(stats.throughput > 0);
}

TEST_CASE("trajectory invariants on fuzzed scenarios") {
    Rng rng(4242);
    for (int i = 0; i < 150; ++i) {
        const auto s = simfuzz::random_scenario(rng);
        const auto c = simfuzz::random_controller(s, rng);
        const auto v = simfuzz::check_trajectory(s, c, rng.uniform_int(0, 1 << 20));
        CAPTURE(i);
        CAPTURE(v.detail);
        CAPTURE(scenario_to_json(s));
        CHECK(v.ok());
    }
}

TEST_CASE("adaptive controllers beat fixed time on the reference junction") {
    const auto s = reference_scenario();
    const double fixed = mean_delay(s, FixedTimeController(default_fixed_greens(s)), 100, 10);
    CHECK(mean_delay(s, LqfController{}, 100, 10) < 0.85 * fixed);
    CHECK(mean_delay(s, DensityAdaptiveController{}, 100, 10) < 0.85 * fixed);
}

TEST_CASE("GA: heavy lane gets the longest green and the search agrees with brute force") {
    auto s = two_lanes();
    s.lanes[0].arrival_rate = 0.4;
    s.horizon = 3600;
    GaConfig cfg;
    cfg.min_green = 10;
    cfg.max_green = 40;
    cfg.green_step = 10;
    cfg.generations = 8;
    cfg.population = 6;
    cfg.eval_seeds = {1, 2, 3, 4};
    cfg.seed = 3;
    const auto ga = ga_optimize(s, cfg);
    const auto ex = exhaustive_timings(s, cfg);
    CHECK(ex.points == 16);
    CHECK(ga.greens == ex.best_greens);
    CHECK(ga.greens[0] == 40.0);
    CHECK(ga.greens[1] == 10.0);
    CHECK(ga.fitness == ex.best_fitness);
    CHECK(ga.fitness <= ex.worst_fitness);
    CHECK(ga.fitness == timing_fitness(s, ga.greens, cfg.eval_seeds));
    for (std::size_t g = 1; g < ga.best_per_generation.size(); ++g)
        CHECK(ga.best_per_generation[g] <= ga.best_per_generation[g - 1]);
    CHECK(ga.fitness <= ga.initial_best);
    CHECK(ga_optimize(s, cfg).greens == ga.greens);
}

TEST_CASE("GA edge cases") {
    const auto s = reference_scenario();
    GaConfig cfg;
    cfg.generations = 1;
    cfg.population = 2;
    cfg.eval_seeds = {1};
    const auto r = ga_optimize(s, cfg);
    CHECK(r.best_per_generation.size() == 1);
    CHECK(r.fitness == r.initial_best);
    CHECK(r.evaluations <= 2);
    cfg.population = 1;
    CHECK_THROWS_AS(ga_optimize(s, cfg), std::invalid_argument);
    cfg.population = 4;
    cfg.min_green = 50;
    cfg.max_green = 10;
    CHECK_THROWS_AS(ga_optimize(s, cfg), std::invalid_argument);
    GaConfig big;
    big.min_green = 1;
    big.green_step = 1;
    CHECK_THROWS_AS(exhaustive_timings(s, big, 1000), std::invalid_argument);
}

TEST_CASE("Q-learning") {
    auto quiet = asymmetric_two_lane_scenario();
    for (auto& l : quiet.lanes) l.arrival_rate = 0.0;
    quiet.horizon = 200;
    QConfig cfg;
    cfg.episodes = 5;
    const auto idle = q_train(quiet, cfg);
    for (double r : idle.episode_reward) CHECK(r == 0.0);
    for (const auto& row : idle.policy.table) CHECK((row[0] == 0.0 && row[1] == 0.0));

    const auto s = asymmetric_two_lane_scenario();
    cfg = QConfig{};
    cfg.seed = 1;
    const auto a = q_train(s, cfg);
    CHECK(a.policy == q_train(s, cfg).policy);
    CHECK(a.episode_reward.size() == cfg.episodes);
    const QPolicyController q(a.policy);
    const double fixed = mean_delay(s, FixedTimeController(default_fixed_greens(s)), 5000, 10);
    CHECK(mean_delay(s, q, 5000, 10) < fixed);

    QConfig huge;
    huge.time_bins = 1000000;
    try {
        q_train(reference_scenario(), huge);
        FAIL("expected state cap error");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("state") != std::string::npos);
    }
}

}  // TEST_SUITE
