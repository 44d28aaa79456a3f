// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance                      run everything
//   acceptance --only a,b           run the named criteria
//   acceptance --known-failure a    still report a as FAIL, but exit 77 (skip) rather than 1 when only known
//                                   failures failed
//   acceptance --list               print criterion names

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <functional>
#include <iostream>
#include <memory>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "oracles.hpp"
#include "sim_fuzz.hpp"
#include "test_util.hpp"
#include "traffic/controllers.hpp"
#include "traffic/dataset.hpp"
#include "traffic/feed.hpp"
#include "traffic/ga.hpp"
#include "traffic/image.hpp"
#include "traffic/ingest.hpp"
#include "traffic/kernels.hpp"
#include "traffic/loss.hpp"
#include "traffic/metrics.hpp"
#include "traffic/model.hpp"
#include "traffic/qlearning.hpp"
#include "traffic/synthetic.hpp"
#include "traffic/training.hpp"
#include "traffic/transfer.hpp"

using namespace traffic;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and thresholds.
constexpr double kLayerGradTol = 1e-4;
constexpr double kModelGradTol = 1e-3;
constexpr double kGradSuiteSeconds = 30.0;
constexpr double kKernelTol = 1e-12;
constexpr int kKernelCases = 200;
constexpr double kEndToEndAccuracy = 0.90;
constexpr double kEndToEndMacroF1 = 0.88;
constexpr double kEndToEndMinutes = 15.0;
constexpr std::size_t kEndToEndEpochs = 50;
constexpr double kImbalanceF1Gain = 0.05;
constexpr double kImbalanceTop2Drift = 0.02;
constexpr double kMaskingAccuracyGain = 0.01;
constexpr int kAbSeeds = 10;
constexpr int kKnownFailureExit = 77;  // ctest reports it as skipped
constexpr double kTransferSpeedup = 10.0;
constexpr double kInferenceMs = 100.0;
constexpr int kFuzzScenarios = 1000;
constexpr double kDelayReduction = 0.15;
constexpr int kMetricSets = 100;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

// ---------------------------------------------------------------- gradients

Outcome gradient_checks() {
    const auto t0 = Clock::now();
    Rng rng(101);
    double worst_layer = 0.0;

    for (int trial = 0; trial < 15; ++trial) {
        const std::size_t C = 1 + rng.index(3), O = 1 + rng.index(3);
        const std::size_t kh = 1 + rng.index(3), kw = 1 + rng.index(3);
        const std::size_t H = kh + rng.index(6), W = kw + rng.index(6);
        const ConvSpec spec{kh, kw, C, O, 1 + rng.index(2), rng.bernoulli(0.5) ? Padding::Same : Padding::Valid};
        const auto in = oracle::random_tensor({C, H, W}, rng);
        const auto k = oracle::random_tensor({O, C, kh, kw}, rng);
        const auto b = oracle::random_tensor({O}, rng);
        const auto r = oracle::random_tensor(conv2d_forward(in, k, b, spec).shape(), rng);
        const auto g = conv2d_backward(r, in, k, spec);
        worst_layer = std::max({worst_layer,
            oracle::relative_error(g.input, oracle::numeric_gradient([&](const Tensor& x) { return oracle::dot(r, conv2d_forward(x, k, b, spec)); }, in)),
            oracle::relative_error(g.kernels, oracle::numeric_gradient([&](const Tensor& x) { return oracle::dot(r, conv2d_forward(in, x, b, spec)); }, k)),
            oracle::relative_error(g.bias, oracle::numeric_gradient([&](const Tensor& x) { return oracle::dot(r, conv2d_forward(in, k, x, spec)); }, b))});

        const PoolSpec ps{2 + rng.index(2), 1 + rng.index(2)};
        const auto pin = oracle::random_tensor({C, 3 + rng.index(5), 3 + rng.index(5)}, rng);
        const auto fwd = maxpool2d(pin, ps);
        const auto pr = oracle::random_tensor(fwd.output.shape(), rng);
        worst_layer = std::max(worst_layer, oracle::relative_error(
            maxpool2d_backward(pr, fwd.argmax, pin.shape()),
            oracle::numeric_gradient([&](const Tensor& x) { return oracle::dot(pr, maxpool2d(x, ps).output); }, pin, 1e-6)));
        const PoolSpec as{ps.window, ps.stride, PoolStatistic::Average};
        worst_layer = std::max(worst_layer, oracle::relative_error(
            avgpool2d_backward(pr, pin.shape(), as),
            oracle::numeric_gradient([&](const Tensor& x) { return oracle::dot(pr, avgpool2d(x, as)); }, pin)));

        auto rin = oracle::random_tensor({12}, rng);
        for (double& v : rin.values())
            if (std::abs(v) < 0.05) v = 0.3;
        const auto rr = oracle::random_tensor({12}, rng);
        worst_layer = std::max(worst_layer, oracle::relative_error(
            relu_backward(rr, rin), oracle::numeric_gradient([&](const Tensor& x) { return oracle::dot(rr, relu(x)); }, rin)));

        const auto w = oracle::random_tensor({4, 7}, rng), din = oracle::random_tensor({7}, rng), db = oracle::random_tensor({4}, rng);
        const auto dr = oracle::random_tensor({4}, rng);
        const auto dg = dense_backward(dr, din, w);
        worst_layer = std::max({worst_layer,
            oracle::relative_error(dg.input, oracle::numeric_gradient([&](const Tensor& x) { return oracle::dot(dr, dense_forward(x, w, db)); }, din)),
            oracle::relative_error(dg.weights, oracle::numeric_gradient([&](const Tensor& x) { return oracle::dot(dr, dense_forward(din, x, db)); }, w)),
            oracle::relative_error(dg.bias, oracle::numeric_gradient([&](const Tensor& x) { return oracle::dot(dr, dense_forward(din, w, x)); }, db))});

        const auto z = oracle::random_tensor({5}, rng, -2, 2);
        const auto sr = oracle::random_tensor({5}, rng);
        worst_layer = std::max(worst_layer, oracle::relative_error(
            softmax_backward(sr, softmax(z)), oracle::numeric_gradient([&](const Tensor& x) { return oracle::dot(sr, softmax(x)); }, z)));
    }

    // Whole model, weighted loss.
    double worst_model = 0.0;
    ModelConfig cfg;
    cfg.input_shape = {2, 8, 8};
    cfg.class_count = 3;
    cfg.layers = {ConvLayer{3, 3, 3}, ReluLayer{}, PoolLayer{}, ConvLayer{3, 3, 4, 1, Padding::Valid}, ReluLayer{},
                  PoolLayer{{2, 1, PoolStatistic::Average}}, FlattenLayer{}, DenseLayer{5}, ReluLayer{},
                  DenseLayer{3}, SoftmaxLayer{}};
    const Network net(cfg);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        auto params = net.init_parameters(seed);
        for (auto& l : params.layers)
            if (l.trainable())
                for (double& v : l.bias.values()) v = rng.uniform(-0.1, 0.1);
        const Sample s{oracle::random_tensor({2, 8, 8}, rng, 0, 1), seed % 3};
        const auto weights = compute_class_weights(std::vector<std::size_t>{3, 5, 9});
        const auto analytic = example_gradient(net, params, s, weights);
        for (std::size_t i = 0; i < params.layers.size(); ++i) {
            if (!params.layers[i].trainable()) continue;
            for (int which = 0; which < 2; ++which) {
                auto loss_at = [&](const Tensor& t) {
                    auto p = params;
                    (which == 0 ? p.layers[i].weights : p.layers[i].bias) = t;
                    return weighted_cross_entropy(net.forward(p, s.image), s.label, weights).loss;
                };
                const Tensor& x = which == 0 ? params.layers[i].weights : params.layers[i].bias;
                const Tensor& g = which == 0 ? analytic.gradients[i].weights : analytic.gradients[i].bias;
                worst_model = std::max(worst_model, oracle::relative_error(g, oracle::numeric_gradient(loss_at, x, 1e-5)));
            }
        }
    }
    const double secs = seconds_since(t0);
    return {worst_layer < kLayerGradTol && worst_model < kModelGradTol && secs < kGradSuiteSeconds,
            "layer rel err " + fmt("%.2e", worst_layer) + " (<1e-4), model " + fmt("%.2e", worst_model) +
                " (<1e-3), " + fmt("%.1f", secs) + " s (<30)"};
}

// ---------------------------------------------------------------- kernels

Outcome kernel_oracles() {
    Rng rng(202);
    double worst = 0.0;
    std::size_t argmax_mismatch = 0;
    for (int trial = 0; trial < kKernelCases; ++trial) {
        const std::size_t C = 1 + rng.index(3), O = 1 + rng.index(4);
        const std::size_t kh = 1 + rng.index(4), kw = 1 + rng.index(4);
        const std::size_t H = kh + rng.index(9), W = kw + rng.index(9);
        const ConvSpec spec{kh, kw, C, O, 1 + rng.index(3), rng.bernoulli(0.5) ? Padding::Same : Padding::Valid};
        const auto in = oracle::random_tensor({C, H, W}, rng);
        const auto k = oracle::random_tensor({O, C, kh, kw}, rng);
        const auto b = oracle::random_tensor({O}, rng);
        worst = std::max(worst, oracle::max_abs_diff(conv2d_forward(in, k, b, spec),
                                                     oracle::conv(in, k, b, spec.stride, spec.padding == Padding::Same)));

        const std::size_t window = 1 + rng.index(3), stride = 1 + rng.index(3);
        const auto pin = oracle::random_tensor({C, window + rng.index(8), window + rng.index(8)}, rng);
        const auto mp = maxpool2d(pin, {window, stride});
        const auto ref = oracle::pool(pin, window, stride, false);
        worst = std::max(worst, oracle::max_abs_diff(mp.output, ref.output));
        if (mp.argmax != ref.argmax) ++argmax_mismatch;
        worst = std::max(worst, oracle::max_abs_diff(avgpool2d(pin, {window, stride, PoolStatistic::Average}),
                                                     oracle::pool(pin, window, stride, true).output));
    }
    return {worst <= kKernelTol && argmax_mismatch == 0,
            std::to_string(kKernelCases) + " cases, max abs diff " + fmt("%.1e", worst) + " (<=1e-12), argmax mismatches " +
                std::to_string(argmax_mismatch)};
}

// ---------------------------------------------------------------- class weights

Outcome class_weight_ratios_exact() {
    const std::vector<std::size_t> counts{1679, 1306, 556, 554, 488};
    const std::uint64_t median = 556;
    const auto ratios = class_weight_ratios(counts);
    const auto weights = compute_class_weights(counts);
    bool ok = ratios.size() == counts.size();
    std::ostringstream detail;
    for (std::size_t c = 0; ok && c < counts.size(); ++c) {
        // n/d == median/count  <=>  n * count == median * d, all integers
        ok = ok && ratios[c].numerator * counts[c] == median * ratios[c].denominator &&
             std::gcd(ratios[c].numerator, ratios[c].denominator) == 1 &&
             weights[c] == static_cast<double>(median) / static_cast<double>(counts[c]);
        detail << (c ? " " : "") << ratios[c].numerator << "/" << ratios[c].denominator;
    }
    return {ok, detail.str()};
}

// ---------------------------------------------------------------- end to end

Outcome synthetic_end_to_end() {
    const auto t0 = Clock::now();
    BlobSceneConfig scene;  // 64x64
    const auto all = generate_blob_dataset({1000, 1000, 1000, 1000, 1000}, scene, 2024);
    auto [train_all, validation] = split(all, {0.9, 2024});
    // Early stopping watches a slice of the training portion; the reported
    // metrics come from the untouched validation split.
    auto [train_set, monitor] = split(std::move(train_all), {0.9, 7});

    const Network net(basic_cnn_config(64, 64));
    TrainConfig cfg;
    cfg.epochs = kEndToEndEpochs;
    cfg.seed = 2024;
    EarlyStopping stop(5);
    const auto run = train(net, net.init_parameters(2024), train_set, monitor, cfg, stop.callback());
    const auto report = evaluate_model(net, stop.best_params(), validation);
    const double minutes = seconds_since(t0) / 60.0;
    const bool pass = !run.diverged && report.accuracy >= kEndToEndAccuracy && report.macro_f1 >= kEndToEndMacroF1 &&
                      report.top2_accuracy >= report.accuracy && minutes < kEndToEndMinutes &&
                      run.history.size() <= kEndToEndEpochs;
    return {pass, "accuracy " + fmt("%.4f", report.accuracy) + " (>=0.90), macro-F1 " + fmt("%.4f", report.macro_f1) +
                      " (>=0.88), top-2 " + fmt("%.4f", report.top2_accuracy) + ", best epoch " +
                      std::to_string(stop.best_epoch()) + "/" + std::to_string(run.history.size()) + ", " +
                      fmt("%.1f", minutes) + " min (<15)"};
}

// ---------------------------------------------------------------- A/B experiments

struct ArmScore {
    double accuracy = 0.0, macro_f1 = 0.0, top2 = 0.0;
};

/// Trains the default CNN with early stopping on `monitor`, scores on `test`.
MetricsReport train_and_score(const std::vector<Sample>& train_set, const std::vector<Sample>& monitor,
                              const std::vector<Sample>& test, TrainConfig cfg, std::size_t side) {
    const Network net(basic_cnn_config(side, side));
    EarlyStopping stop(4);
    cfg.epochs = 20;
    train(net, net.init_parameters(cfg.seed), train_set, monitor, cfg, stop.callback());
    return evaluate_model(net, stop.best_params(), test);
}

BlobSceneConfig small_scene() {
    BlobSceneConfig s;
    s.height = s.width = 32;
    s.blob_radius = 1.0;
    s.min_gap = 0.5;
    return s;
}

constexpr std::array<double, 5> kPublishedRatio{1679, 1306, 556, 554, 488};

Outcome imbalance_measures() {
    const auto scene = small_scene();
    ArmScore base, treated;
    for (int s = 0; s < kAbSeeds; ++s) {
        const std::uint64_t seed = 5000 + s;
        const auto train_set = generate_blob_dataset(apportion(1000, kPublishedRatio), scene, seed);
        const auto monitor = generate_blob_dataset(apportion(400, kPublishedRatio), scene, seed + 100);
        const auto test = generate_blob_dataset(apportion(1000, kPublishedRatio), scene, seed + 200);
        for (int arm = 0; arm < 2; ++arm) {
            TrainConfig cfg;
            cfg.seed = seed;
            cfg.class_weighting = arm == 1;
            cfg.augment = arm == 1;
            const auto r = train_and_score(train_set, monitor, test, cfg, 32);
            auto& a = arm ? treated : base;
            a.accuracy += r.accuracy / kAbSeeds;
            a.macro_f1 += r.macro_f1 / kAbSeeds;
            a.top2 += r.top2_accuracy / kAbSeeds;
        }
    }
    const double gain = treated.macro_f1 - base.macro_f1;
    const double drift = std::abs(treated.top2 - base.top2);
    return {gain >= kImbalanceF1Gain && drift < kImbalanceTop2Drift,
            "macro-F1 " + fmt("%.4f", base.macro_f1) + " -> " + fmt("%.4f", treated.macro_f1) + " (gain " +
                fmt("%+.2f", 100 * gain) + " pts, need >=5), top-2 drift " + fmt("%.2f", 100 * drift) +
                " pts (<2), accuracy " + fmt("%.4f", base.accuracy) + " -> " + fmt("%.4f", treated.accuracy)};
}

Outcome masking_gain() {
    auto scene = small_scene();
    const MaskPolygon lane{"synthetic", {{0, 0}, {24, 0}, {20, 32}, {0, 32}}};
    scene.region = lane;
    scene.max_distractors = 10;
    ArmScore plain, masked;
    for (int s = 0; s < kAbSeeds; ++s) {
        const std::uint64_t seed = 7000 + s;
        const auto train_set = generate_blob_dataset({200, 200, 200, 200, 200}, scene, seed);
        const auto monitor = generate_blob_dataset({80, 80, 80, 80, 80}, scene, seed + 100);
        const auto test = generate_blob_dataset({200, 200, 200, 200, 200}, scene, seed + 200);
        auto mask_all = [&](std::vector<Sample> v) {
            for (auto& x : v) x.image = apply_mask(x.image, lane);
            return v;
        };
        TrainConfig cfg;
        cfg.seed = seed;
        const auto a = train_and_score(train_set, monitor, test, cfg, 32);
        const auto b = train_and_score(mask_all(train_set), mask_all(monitor), mask_all(test), cfg, 32);
        plain.accuracy += a.accuracy / kAbSeeds;
        masked.accuracy += b.accuracy / kAbSeeds;
        plain.macro_f1 += a.macro_f1 / kAbSeeds;
        masked.macro_f1 += b.macro_f1 / kAbSeeds;
    }
    const double gain = masked.accuracy - plain.accuracy;
    return {gain >= kMaskingAccuracyGain,
            "accuracy " + fmt("%.4f", plain.accuracy) + " -> " + fmt("%.4f", masked.accuracy) + " (gain " +
                fmt("%+.2f", 100 * gain) + " pts, need >=1), macro-F1 " + fmt("%.4f", plain.macro_f1) + " -> " +
                fmt("%.4f", masked.macro_f1)};
}

// ---------------------------------------------------------------- speed

Outcome transfer_speed() {
    constexpr std::size_t n = 1000;
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.seed = 3;

    const auto features = synthetic_features({200, 200, 200, 200, 200}, 256, 2.0, 3);
    auto t0 = Clock::now();
    train_head(features, cfg);
    const double head_secs = seconds_since(t0);

    Rng rng(3);
    std::vector<Sample> images;
    for (std::size_t i = 0; i < n; ++i) images.push_back({oracle::random_tensor({1, 128, 128}, rng, 0, 1), i % 5});
    const Network net(basic_cnn_config());
    t0 = Clock::now();
    train(net, net.init_parameters(3), images, {}, cfg);
    const double cnn_secs = seconds_since(t0);
    const double ratio = cnn_secs / std::max(head_secs, 1e-9);
    return {ratio >= kTransferSpeedup, "head " + fmt("%.3f", head_secs) + " s vs CNN " + fmt("%.1f", cnn_secs) +
                                            " s for one epoch of 1000 examples, ratio " + fmt("%.0f", ratio) + "x (>=10)"};
}

Outcome inference_latency() {
    const Network net(basic_cnn_config());
    const auto params = net.init_parameters(1);
    Rng rng(4);
    const auto image = oracle::random_tensor({1, 128, 128}, rng, 0, 1);
    net.predict(params, image);  // warm up
    std::vector<double> ms;
    for (int i = 0; i < 50; ++i) {
        const auto t0 = Clock::now();
        net.predict(params, image);
        ms.push_back(seconds_since(t0) * 1e3);
    }
    std::sort(ms.begin(), ms.end());
    return {ms.back() < kInferenceMs,
            "128x128 prediction median " + fmt("%.2f", ms[ms.size() / 2]) + " ms, worst " + fmt("%.2f", ms.back()) + " ms (<100)"};
}

// ---------------------------------------------------------------- simulator

Outcome simulator_suite() {
    std::vector<std::string> failures;

    Rng rng(303);
    int bad = 0;
    std::string first_bad;
    for (int i = 0; i < kFuzzScenarios; ++i) {
        const auto s = simfuzz::random_scenario(rng);
        const auto c = simfuzz::random_controller(s, rng);
        const auto v = simfuzz::check_trajectory(s, c, static_cast<std::uint64_t>(rng.uniform_int(0, 1 << 30)));
        if (!v.ok()) {
            if (bad++ == 0) first_bad = v.detail;
        }
    }
    if (bad) failures.push_back(std::to_string(bad) + " fuzz failures (" + first_bad + ")");

    const auto ref = reference_scenario();
    auto mean_delay = [](const Scenario& s, const Controller& c, std::uint64_t first) {
        double t = 0.0;
        for (int i = 0; i < 10; ++i) t += run_scenario(s, c, first + i).mean_delay;
        return t / 10.0;
    };
    const double fixed = mean_delay(ref, FixedTimeController(default_fixed_greens(ref)), 900);
    const double lqf = mean_delay(ref, LqfController{}, 900);
    const double density = mean_delay(ref, DensityAdaptiveController{}, 900);
    const double lqf_cut = 1.0 - lqf / fixed, density_cut = 1.0 - density / fixed;
    if (lqf_cut < kDelayReduction) failures.push_back("LQF reduction " + fmt("%.3f", lqf_cut));
    if (density_cut < kDelayReduction) failures.push_back("density reduction " + fmt("%.3f", density_cut));

    GaConfig ga_cfg;
    ga_cfg.min_green = 10;
    ga_cfg.max_green = 50;
    ga_cfg.green_step = 20;
    ga_cfg.population = 8;
    ga_cfg.generations = 10;
    ga_cfg.eval_seeds = {1, 2, 3};
    ga_cfg.seed = 11;
    const auto ga = ga_optimize(ref, ga_cfg);
    const auto ex = exhaustive_timings(ref, ga_cfg);
    if (ex.points > 200) failures.push_back("timing grid too large");
    if (!(ga.fitness < ex.worst_fitness)) failures.push_back("GA does not beat the worst timing");
    if (ga.fitness != ex.best_fitness) failures.push_back("GA " + fmt("%.4f", ga.fitness) + " vs exhaustive " + fmt("%.4f", ex.best_fitness));

    const auto two = asymmetric_two_lane_scenario();
    QConfig q_cfg;
    q_cfg.seed = 21;
    const QPolicyController q(q_train(two, q_cfg).policy);
    const double q_delay = mean_delay(two, q, 100000);  // held out: training seeds are derived from q_cfg.seed
    const double q_fixed = mean_delay(two, FixedTimeController(default_fixed_greens(two)), 100000);
    if (!(q_delay < q_fixed)) failures.push_back("Q-learning " + fmt("%.2f", q_delay) + " vs fixed " + fmt("%.2f", q_fixed));

    std::string detail = std::to_string(kFuzzScenarios) + " fuzzed runs, " + std::to_string(bad) + " violations; LQF -" +
                         fmt("%.1f", 100 * lqf_cut) + "%, density -" + fmt("%.1f", 100 * density_cut) +
                         "% vs fixed (>=15%); GA " + fmt("%.3f", ga.fitness) + " = exhaustive " +
                         fmt("%.3f", ex.best_fitness) + " over " + std::to_string(ex.points) + " plans, worst " +
                         fmt("%.3f", ex.worst_fitness) + "; Q " + fmt("%.2f", q_delay) + " s vs fixed " + fmt("%.2f", q_fixed) + " s";
    for (const auto& f : failures) detail += "; " + f;
    return {failures.empty(), detail};
}

// ---------------------------------------------------------------- metrics

Outcome metric_oracle() {
    Rng rng(404);
    int mismatches = 0;
    for (int t = 0; t < kMetricSets; ++t) {
        const std::size_t k = 2 + rng.index(5), n = 1 + rng.index(80);
        const bool quantize = rng.bernoulli(0.5);
        std::vector<std::vector<double>> preds;
        std::vector<std::size_t> truths;
        for (std::size_t i = 0; i < n; ++i) {
            preds.push_back(oracle::random_distribution(k, rng, quantize));
            truths.push_back(rng.index(k));
        }
        const auto r = evaluate(preds, truths);
        const auto o = oracle::brute_metrics(preds, truths);
        bool same = r.accuracy == o.accuracy && r.top2_accuracy == o.top2 && r.macro_f1 == o.macro_f1;
        for (std::size_t c = 0; c < k; ++c) same = same && r.per_class[c].f1 == o.f1[c];
        if (!same) ++mismatches;
    }
    return {mismatches == 0, std::to_string(kMetricSets) + " random sets, " + std::to_string(mismatches) + " mismatches"};
}

// ---------------------------------------------------------------- ingest

Outcome ingest_fixture() {
    const fs::path feed = testutil::fixtures() / "feed";
    std::vector<std::string> failures;
    IngestOptions opt;
    opt.base_delay = std::chrono::milliseconds(1);

    testutil::TempDir root("acc_ingest");
    FixtureFeedSource a({feed / "payload_a.json"}, feed / "images");
    const auto first = poll_once(a, root.path(), opt);
    if (first.saved.size() != 3 || read_manifest(root / "labels.csv").rows.size() != 3) failures.push_back("first poll");
    const auto snapshot = testutil::slurp(root / "labels.csv");
    const auto replay = poll_once(a, root.path(), opt);
    if (!replay.saved.empty() || testutil::slurp(root / "labels.csv") != snapshot) failures.push_back("replay not idempotent");

    // Kill a writer repeatedly; the manifest must always parse to one of the two versions.
    std::vector<ManifestRow> big;
    for (int i = 0; i < 20000; ++i) big.push_back({"x" + std::to_string(i), "9", "t", std::nullopt, std::nullopt, 0});
    const auto small = read_manifest(root / "labels.csv").rows;
    for (int round = 0; round < 5; ++round) {
        const pid_t pid = fork();
        if (pid == 0) {
            for (;;) {
                write_manifest_atomic(root / "labels.csv", big);
                write_manifest_atomic(root / "labels.csv", small);
            }
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(25 + 13 * round));
        kill(pid, SIGKILL);
        waitpid(pid, nullptr, 0);
        const auto m = read_manifest(root / "labels.csv");
        if (!m.problems.empty() || (m.rows.size() != small.size() && m.rows.size() != big.size()))
            failures.push_back("manifest damaged after kill");
    }
    write_manifest_atomic(root / "labels.csv", small);

    // Crash between downloads: manifest untouched, rerun completes.
    const pid_t pid = fork();
    if (pid == 0) {
        struct Dying : FeedSource {
            FixtureFeedSource inner;
            int n = 0;
            explicit Dying(FixtureFeedSource s) : inner(std::move(s)) {}
            std::string fetch_feed() override { return inner.fetch_feed(); }
            std::string fetch_image(const std::string& url) override {
                if (++n == 2) _exit(0);
                return inner.fetch_image(url);
            }
        } dying(FixtureFeedSource({feed / "payload_b.json"}, feed / "images"));
        poll_once(dying, root.path(), opt);
        _exit(1);
    }
    waitpid(pid, nullptr, 0);
    if (testutil::slurp(root / "labels.csv") != snapshot) failures.push_back("crash changed the manifest");
    FixtureFeedSource b({feed / "payload_b.json"}, feed / "images");
    poll_once(b, root.path(), opt);
    if (read_manifest(root / "labels.csv").rows.size() != 6) failures.push_back("resume after crash");

    std::string detail = "3 cameras -> 3 files and rows, replay idempotent, 5 kills mid-write, crash then resume; no network";
    for (const auto& f : failures) detail += "; " + f;
    return {failures.empty(), detail};
}

struct Criterion {
    std::string name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {"gradient_checks", gradient_checks},
        {"kernel_oracles", kernel_oracles},
        {"class_weight_ratios", class_weight_ratios_exact},
        {"synthetic_end_to_end", synthetic_end_to_end},
        {"imbalance_measures", imbalance_measures},
        {"masking_gain", masking_gain},
        {"transfer_speed", transfer_speed},
        {"inference_latency", inference_latency},
        {"simulator_suite", simulator_suite},
        {"metric_oracle", metric_oracle},
        {"ingest_fixture", ingest_fixture},
    };

    CLI::App app{"Acceptance criteria"};
    std::vector<std::string> only, known;
    bool list = false;
    app.add_option("--only", only, "Criteria to run")->delimiter(',');
    app.add_option("--known-failure", known, "Criteria whose failure is documented and not counted")->delimiter(',');
    app.add_flag("--list", list, "List criteria");
    CLI11_PARSE(app, argc, argv);

    std::set<std::string> names;
    for (const auto& c : criteria) names.insert(c.name);
    for (const auto& n : only)
        if (!names.count(n)) {
            std::cerr << "unknown criterion: " << n << "\n";
            return 2;
        }
    if (list) {
        for (const auto& c : criteria) std::cout << c.name << "\n";
        return 0;
    }

    int counted_failures = 0, excused_failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.name) == only.end()) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const bool excused = !o.pass && std::find(known.begin(), known.end(), c.name) != known.end();
        if (!o.pass) ++(excused ? excused_failures : counted_failures);
        std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.name << "  " << o.detail << "  ["
                  << fmt("%.1f", seconds_since(t0)) << " s]" << (excused ? "  (known failure, not counted)" : "") << std::endl;
    }
    if (counted_failures > 0) return 1;
    return excused_failures > 0 ? kKnownFailureExit : 0;
}
