#include <cmath>
#include <iostream>
#include <numeric>

#include "cli.hpp"
#include "traffic/controllers.hpp"
#include "traffic/ga.hpp"
#include "traffic/qlearning.hpp"
#include "traffic/scenario.hpp"
#include "traffic/simulator.hpp"

namespace cli {
namespace {

using namespace traffic;

struct SimArgs {
    std::string scenario = "reference";
    std::string controller = "fixed";
    std::vector<double> green;
    double max_red = 0.0;
    std::size_t seeds = 1;
    std::uint64_t seed = 1;
    std::size_t ga_population = 12;
    std::size_t ga_generations = 20;
    std::size_t q_episodes = 600;  // 150 leaves the four-phase reference junction undertrained
    std::string csv;
    std::string out;
};

Scenario resolve_scenario(const std::string& name) {
    if (name == "reference") return reference_scenario();
    if (name == "asymmetric") return asymmetric_two_lane_scenario();
    return load_scenario(name);
}

std::vector<std::uint64_t> eval_seeds(const SimArgs& a) {
    std::vector<std::uint64_t> s(a.seeds);
    std::iota(s.begin(), s.end(), a.seed);
    return s;
}

// Training seeds for GA and Q-learning come from a separate stream so they
// never coincide with the evaluation seeds by construction.
std::vector<std::uint64_t> training_seeds(std::uint64_t seed, std::size_t n) {
    std::vector<std::uint64_t> s;
    for (std::size_t i = 0; i < n; ++i) s.push_back(mix_seed(seed, 1000 + i));
    return s;
}

std::shared_ptr<const Controller> guard(std::shared_ptr<const Controller> c, double max_red) {
    if (max_red <= 0.0) return c;
    return std::make_shared<MaxRedGuard>(std::move(c), max_red);
}

std::shared_ptr<const Controller> build(const std::string& kind, const Scenario& scn, const SimArgs& a,
                                        nlohmann::json& notes) {
    if (kind == "fixed") {
        auto greens = a.green.empty() ? default_fixed_greens(scn) : a.green;
        if (greens.size() == 1 && scn.phases.size() > 1) greens.assign(scn.phases.size(), greens.front());
        return guard(std::make_shared<FixedTimeController>(greens), a.max_red);
    }
    if (kind == "lqf") return guard(std::make_shared<LqfController>(), a.max_red);
    if (kind == "density") return guard(std::make_shared<DensityAdaptiveController>(), a.max_red);
    if (kind == "ga") {
        GaConfig cfg;
        cfg.population = a.ga_population;
        cfg.generations = a.ga_generations;
        cfg.eval_seeds = training_seeds(a.seed, 3);
        cfg.seed = a.seed;
        const GaResult r = ga_optimize(scn, cfg);
        notes["ga"] = {{"greens", r.greens}, {"fitness", r.fitness}, {"evaluations", r.evaluations}};
        std::cerr << "GA greens";
        for (double g : r.greens) std::cerr << " " << g;
        std::cerr << " (fitness " << fixed(r.fitness, 3) << ")\n";
        return guard(std::make_shared<FixedTimeController>(r.greens, "GA"), a.max_red);
    }
    if (kind == "q") {
        QConfig cfg;
        cfg.episodes = a.q_episodes;
        cfg.seed = mix_seed(a.seed, 2000);
        cfg.max_red = a.max_red;
        QTrainResult r = q_train(scn, cfg);
        notes["q"] = {{"episodes", cfg.episodes}, {"states", r.policy.table.size()}};
        return guard(std::make_shared<QPolicyController>(std::move(r.policy)), a.max_red);
    }
    throw UsageError("unknown controller '" + kind + "' (fixed, lqf, density, ga, q)");
}

struct Summary {
    std::string name;
    double mean = 0.0, sd = 0.0, max = 0.0, throughput = 0.0, queued = 0.0, max_red = 0.0;
};

Summary summarize(const std::string& name, const std::vector<DelayStats>& runs) {
    Summary s{name};
    const double n = static_cast<double>(runs.size());
    for (const auto& r : runs) {
        s.mean += r.mean_delay / n;
        s.max = std::max(s.max, r.max_delay);
        s.throughput += static_cast<double>(r.throughput) / n;
        s.queued += static_cast<double>(r.still_queued) / n;
        s.max_red = std::max(s.max_red, r.max_red_observed);
    }
    if (runs.size() > 1) {
        double ss = 0.0;
        for (const auto& r : runs) ss += (r.mean_delay - s.mean) * (r.mean_delay - s.mean);
        s.sd = std::sqrt(ss / (n - 1.0));
    }
    return s;
}

void emit(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows,
          const std::string& csv, RunRecord& record) {
    std::cout << render_table(header, rows);
    if (!csv.empty()) {
        write_text(csv, render_csv(header, rows));
        record.artifact(csv);
    }
}

int run_simulate(const SimArgs& a, const CLI::App& sub) {
    RunRecord record("simulate", sub);
    const Scenario scn = resolve_scenario(a.scenario);
    nlohmann::json notes = nlohmann::json::object();
    const auto controller = build(a.controller, scn, a, notes);

    std::vector<DelayStats> runs;
    std::vector<std::vector<std::string>> rows;
    for (auto s : eval_seeds(a)) {
        record.seed(s);
        runs.push_back(run_scenario(scn, *controller, s));
        const auto& r = runs.back();
        rows.push_back({std::to_string(s), fixed(r.mean_delay, 3), fixed(r.max_delay, 1), std::to_string(r.throughput),
                        std::to_string(r.still_queued), fixed(r.max_red_observed, 1), std::to_string(r.switches)});
    }
    const Summary m = summarize(controller->name(), runs);
    if (runs.size() > 1) {
        rows.push_back({"mean", fixed(m.mean, 3), fixed(m.max, 1), fixed(m.throughput, 1), fixed(m.queued, 1),
                        fixed(m.max_red, 1), ""});
    }
    std::cout << controller->name() << " on " << scn.lanes.size() << " lanes, " << scn.phases.size() << " phases, "
              << scn.horizon << " s\n";
    emit({"seed", "mean_delay_s", "max_delay_s", "throughput", "still_queued", "max_red_s", "switches"}, rows, a.csv,
         record);
    for (auto& [k, v] : notes.items()) record.note(k, v);
    record.note("mean_delay", m.mean);
    record.write(a.out);
    return 0;
}

int run_compare(const SimArgs& a, const CLI::App& sub) {
    RunRecord record("compare", sub);
    const Scenario scn = resolve_scenario(a.scenario);
    nlohmann::json notes = nlohmann::json::object();
    const auto seeds = eval_seeds(a);
    for (auto s : seeds) record.seed(s);

    std::vector<Summary> table;
    for (const char* kind : {"fixed", "lqf", "density", "ga", "q"}) {
        const auto controller = build(kind, scn, a, notes);
        std::vector<DelayStats> runs;
        for (auto s : seeds) runs.push_back(run_scenario(scn, *controller, s));
        table.push_back(summarize(controller->name(), runs));
    }
    const double base = table.front().mean;
    std::vector<std::vector<std::string>> rows;
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : table) {
        const double change = base > 0.0 ? 100.0 * (s.mean - base) / base : 0.0;
        rows.push_back({s.name, fixed(s.mean, 3), fixed(s.sd, 3), fixed(s.max, 1), fixed(s.throughput, 1),
                        fixed(s.max_red, 1), fixed(change, 1)});
        j.push_back({{"controller", s.name}, {"mean_delay", s.mean}, {"sd", s.sd}, {"max_delay", s.max},
                     {"throughput", s.throughput}, {"max_red", s.max_red}, {"change_vs_fixed_pct", change}});
    }
    emit({"controller", "mean_delay_s", "sd", "max_delay_s", "throughput", "max_red_s", "vs_fixed_%"}, rows, a.csv,
         record);
    for (auto& [k, v] : notes.items()) record.note(k, v);
    record.note("results", j);
    record.write(a.out);
    return 0;
}

void add_common(CLI::App* sub, SimArgs& a) {
    sub->add_option("--scenario", a.scenario, "Scenario JSON, or 'reference' / 'asymmetric'");
    sub->add_option("--green", a.green, "Fixed-time greens per phase (one value applies to all)")->delimiter(',');
    sub->add_option("--max-red", a.max_red, "Longest red a queued lane may wait; 0 = no guard")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", a.seed, "First arrival seed; also seeds GA and Q-learning");
    sub->add_option("--ga-population", a.ga_population, "GA population")->check(CLI::PositiveNumber);
    sub->add_option("--ga-generations", a.ga_generations, "GA generations")->check(CLI::PositiveNumber);
    sub->add_option("--q-episodes", a.q_episodes, "Q-learning training episodes")->check(CLI::PositiveNumber);
    sub->add_option("--csv", a.csv, "Also write the table as CSV");
}

}  // namespace

void register_sim_commands(CLI::App& app, Registry& registry) {
    {
        auto a = std::make_shared<SimArgs>();
        auto* sub = app.add_subcommand("simulate", "Run one controller on a scenario");
        add_common(sub, *a);
        sub->add_option("--controller", a->controller, "fixed, lqf, density, ga or q");
        sub->add_option("--seeds", a->seeds, "Number of arrival seeds")->check(CLI::PositiveNumber);
        a->out = "runs/simulate";
        sub->add_option("--out", a->out, "Output directory");
        registry.push_back({sub, [a, sub] { return run_simulate(*a, *sub); }});
    }
    {
        auto a = std::make_shared<SimArgs>();
        a->seeds = 10;
        auto* sub = app.add_subcommand("compare", "Benchmark every controller on the same arrivals");
        add_common(sub, *a);
        sub->add_option("--seeds", a->seeds, "Number of arrival seeds")->check(CLI::PositiveNumber);
        a->out = "runs/compare";
        sub->add_option("--out", a->out, "Output directory");
        registry.push_back({sub, [a, sub] { return run_compare(*a, *sub); }});
    }
}

}  // namespace cli
