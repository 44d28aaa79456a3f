#include <fstream>
#include <iostream>

#include "cli.hpp"
#include "traffic/checkpoint.hpp"
#include "traffic/dataset.hpp"
#include "traffic/image.hpp"
#include "traffic/training.hpp"
#include "traffic/transfer.hpp"
#include "traffic/tuning.hpp"

namespace cli {
namespace {

using namespace traffic;
using Clock = std::chrono::steady_clock;

struct DataArgs {
    std::string data;
    std::string features;
    std::size_t size = 128;
    bool color = false;
    bool mask = false;
    double split = 0.9;
};

struct FitArgs {
    std::size_t epochs = 50;
    double lr = 0.01;
    std::size_t batch = 32;
    double momentum = 0.9;
    bool augment = false;
    bool class_weighting = false;
    std::size_t patience = 0;
};

void add_data_options(CLI::App* sub, DataArgs& d, bool with_features) {
    sub->add_option("--data", d.data, "Dataset root (labels.csv, images/, masks.json)");
    if (with_features) sub->add_option("--features", d.features, "Feature CSV instead of images");
    sub->add_option("--size", d.size, "Square input side in pixels")->check(CLI::PositiveNumber);
    sub->add_flag("--color", d.color, "RGB input instead of grayscale");
    sub->add_flag("--mask", d.mask, "Apply masks.json polygons while loading");
    sub->add_option("--split", d.split, "Training fraction of the random split")->check(CLI::Range(0.0, 1.0));
}

void add_fit_options(CLI::App* sub, FitArgs& f) {
    sub->add_option("--epochs", f.epochs, "Training epochs")->check(CLI::PositiveNumber);
    sub->add_option("--lr", f.lr, "Learning rate")->check(CLI::NonNegativeNumber);
    sub->add_option("--batch", f.batch, "Minibatch size")->check(CLI::PositiveNumber);
    sub->add_option("--momentum", f.momentum, "SGD momentum")->check(CLI::Range(0.0, 1.0));
    sub->add_flag("--augment", f.augment, "Random flips, shifts and brightness during training");
    sub->add_flag("--class-weighting", f.class_weighting, "Weight the loss by inverse class frequency");
    sub->add_option("--patience", f.patience, "Stop after this many epochs without validation gain; 0 = off");
}

TrainConfig train_config(const FitArgs& f, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.epochs = f.epochs;
    cfg.learning_rate = f.lr;
    cfg.batch_size = f.batch;
    cfg.momentum = f.momentum;
    cfg.augment = f.augment;
    cfg.class_weighting = f.class_weighting;
    cfg.seed = seed;
    return cfg;
}

std::vector<Sample> load_images(const DataArgs& d, std::size_t height, std::size_t width, bool grayscale) {
    LoadOptions opt;
    opt.height = height;
    opt.width = width;
    opt.grayscale = grayscale;
    opt.apply_masks = d.mask;
    DatasetLoad load = load_dataset(d.data, opt);
    for (const auto& e : load.errors) {
        std::cerr << "skipped line " << e.line << (e.image_id.empty() ? "" : " " + e.image_id) << ": " << e.message
                  << "\n";
    }
    std::vector<Sample> out;
    out.reserve(load.examples.size());
    for (auto& ex : load.examples) out.push_back({std::move(ex.image), index_of(ex.label)});
    if (out.empty()) throw std::runtime_error("no usable examples under " + d.data);
    return out;
}

std::vector<Sample> load_samples(const DataArgs& d) {
    if (d.data.empty() == d.features.empty()) throw UsageError("give exactly one of --data or --features");
    if (!d.features.empty()) return feature_samples(load_features(d.features));
    return load_images(d, d.size, d.size, !d.color);
}

void print_report(const std::string& name, const MetricsReport& r) {
    const std::vector<TableRow> rows{{name, r.accuracy, r.macro_f1, r.top2_accuracy}};
    std::cout << render_metrics_table(rows);
}

void write_report(const fs::path& path, const MetricsReport& r) { write_text(path, report_to_json(r) + "\n"); }

struct TrainArgs {
    DataArgs data;
    FitArgs fit;
    std::uint64_t seed = 0;
    std::string out;
};

struct Fitted {
    ModelParameters params;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    bool diverged = false;
};

Fitted fit(const Network& net, const std::vector<Sample>& train_set, const std::vector<Sample>& val,
           const TrainConfig& cfg, std::size_t patience) {
    auto progress = [](const EpochRecord& r) {
        std::cerr << "epoch " << r.epoch << " loss " << fixed(r.train_loss, 4);
        if (r.validation) std::cerr << " val acc " << fixed(r.validation->accuracy, 4);
        std::cerr << "\n";
    };
    if (patience == 0) {
        auto run = train(net, net.init_parameters(cfg.seed), train_set, val, cfg,
                         [&](const EpochRecord& r, const ModelParameters&) {
                             progress(r);
                             return true;
                         });
        const std::size_t last = run.history.size();
        return {std::move(run.params), std::move(run.history), last, run.diverged};
    }
    EarlyStopping stopper(patience);
    auto run = train(net, net.init_parameters(cfg.seed), train_set, val, cfg,
                     [&](const EpochRecord& r, const ModelParameters& p) {
                         progress(r);
                         return stopper(r, p);
                     });
    if (stopper.has_best()) return {stopper.best_params(), std::move(run.history), stopper.best_epoch(), run.diverged};
    const std::size_t last = run.history.size();
    return {std::move(run.params), std::move(run.history), last, run.diverged};
}

int finish_training(RunRecord& record, const fs::path& out, const Network& net, const Fitted& fitted,
                    const std::vector<Sample>& val, std::uint64_t seed, const char* model_name) {
    record.seed(seed);
    if (fitted.diverged) std::cerr << "warning: training diverged; keeping the last finite parameters\n";
    const fs::path model = out / model_name;
    fs::create_directories(out);
    save_checkpoint(model, net.config(), fitted.params);
    {
        std::ofstream hist(out / "history.csv");
        write_history_csv(hist, fitted.history);
    }
    const MetricsReport report = evaluate_model(net, fitted.params, val);
    write_report(out / "metrics.json", report);
    print_report("validation", report);
    std::cout << "kept epoch " << fitted.best_epoch << " of " << fitted.history.size() << ", wrote " << model.string()
              << "\n";
    for (const char* name : {model_name, "history.csv", "metrics.json"}) record.artifact(out / name);
    record.note("best_epoch", fitted.best_epoch);
    record.note("diverged", fitted.diverged);
    record.write(out);
    return 0;
}

int run_train(const TrainArgs& a, const CLI::App& sub) {
    if (a.data.data.empty()) throw UsageError("--data is required");
    RunRecord record("train", sub);
    auto samples = load_samples(a.data);
    auto [train_set, val] = split(std::move(samples), {a.data.split, a.seed});
    const std::size_t channels = a.data.color ? 3 : 1;
    const Network net(basic_cnn_config(a.data.size, a.data.size, channels, kDensityClassCount));
    const auto fitted = fit(net, train_set, val, train_config(a.fit, a.seed), a.fit.patience);
    return finish_training(record, a.out, net, fitted, val, a.seed, "model.ckpt");
}

int run_train_head(const TrainArgs& a, const CLI::App& sub) {
    if (a.data.features.empty()) throw UsageError("--features is required");
    RunRecord record("train-head", sub);
    const FeatureSet set = load_features(a.data.features);
    auto [train_set, val] = split(feature_samples(set), {a.data.split, a.seed});
    const Network net(head_config(set.feature_dim, kDensityClassCount));
    const auto fitted = fit(net, train_set, val, train_config(a.fit, a.seed), a.fit.patience);
    return finish_training(record, a.out, net, fitted, val, a.seed, "head.ckpt");
}

struct EvalArgs {
    std::string model;
    DataArgs data;
    bool all = false;
    std::string csv;
    std::uint64_t seed = 0;
    std::string out;
};

bool is_head(const ModelConfig& cfg) { return cfg.input_shape.size() == 3 && cfg.input_shape[1] == 1 && cfg.input_shape[2] == 1; }

int run_eval(const EvalArgs& a, const CLI::App& sub) {
    RunRecord record("eval", sub);
    record.seed(a.seed);
    const Checkpoint ckpt = load_checkpoint(a.model);
    const Network net(ckpt.config);
    std::vector<Sample> samples;
    if (!a.data.features.empty() && a.data.data.empty()) {
        if (!is_head(ckpt.config)) throw UsageError("--features needs a head checkpoint");
        samples = feature_samples(load_features(a.data.features));
    } else if (!a.data.data.empty() && a.data.features.empty()) {
        if (is_head(ckpt.config)) throw UsageError("a head checkpoint evaluates --features, not --data");
        const auto& s = ckpt.config.input_shape;
        samples = load_images(a.data, s[1], s[2], s[0] == 1);
    } else {
        throw UsageError("give exactly one of --data or --features");
    }
    if (!a.all) samples = split(std::move(samples), {a.data.split, a.seed}).second;
    const MetricsReport report = evaluate_model(net, ckpt.params, samples);
    const std::string name = a.all ? "all" : "held-out";
    print_report(name, report);
    const std::vector<TableRow> rows{{name, report.accuracy, report.macro_f1, report.top2_accuracy}};
    if (!a.csv.empty()) {
        write_text(a.csv, render_metrics_csv(rows));
        record.artifact(a.csv);
    }
    write_report(fs::path(a.out) / "metrics.json", report);
    record.artifact(fs::path(a.out) / "metrics.json");
    record.note("examples", samples.size());
    record.write(a.out);
    return 0;
}

struct TuneArgs {
    DataArgs data;
    FitArgs fit;
    std::vector<double> lr, batch, momentum, epochs, augment, class_weighting;
    std::string metric = "accuracy";
    std::size_t seeds = 3;
    std::size_t cap = 1000;
    std::uint64_t seed = 0;
    std::string out;
};

int run_tune(const TuneArgs& a, const CLI::App& sub) {
    RunRecord record("tune", sub);
    Grid grid;
    grid.cap = a.cap;
    auto axis = [&](const char* name, const std::vector<double>& values) {
        if (!values.empty()) grid.axes.push_back({name, values});
    };
    axis("learning_rate", a.lr);
    axis("batch_size", a.batch);
    axis("momentum", a.momentum);
    axis("epochs", a.epochs);
    axis("augment", a.augment);
    axis("class_weighting", a.class_weighting);
    if (grid.axes.empty()) throw UsageError("give at least one axis (--lr, --batch, --momentum, ...)");
    grid.validate();
    const SelectionMetric metric = parse_selection_metric(a.metric);

    const auto samples = load_samples(a.data);
    const bool head = !a.data.features.empty();
    const std::size_t dim = head ? samples.front().image.size() : 0;
    const ModelConfig config = head ? head_config(dim, kDensityClassCount)
                                    : basic_cnn_config(a.data.size, a.data.size, a.data.color ? 3 : 1, kDensityClassCount);
    const Network net(config);
    const TrainConfig base = train_config(a.fit, 0);

    std::vector<std::uint64_t> seeds;
    for (std::size_t i = 0; i < a.seeds; ++i) seeds.push_back(a.seed + i);
    // each seed is its own random split; the same splits serve every grid point
    GridProcedure procedure = [&](const GridPoint& point, std::uint64_t seed) {
        auto [train_set, val] = split(samples, {a.data.split, seed});
        TrainConfig cfg = apply_point(base, point);
        cfg.seed = seed;
        const auto run = train(net, net.init_parameters(seed), train_set, {}, cfg);
        std::cerr << point.label() << " seed " << seed << " done\n";
        return evaluate_model(net, run.params, val);
    };
    const auto result = grid_search(grid, procedure, metric, seeds);

    const fs::path csv = fs::path(a.out) / "grid.csv";
    fs::create_directories(a.out);
    {
        std::ofstream out(csv);
        write_grid_csv(out, grid, result);
    }
    std::vector<TableRow> rows;
    for (const auto& p : result.points) {
        rows.push_back({p.point.label(), p.aggregate.accuracy.mean, p.aggregate.macro_f1.mean,
                        p.aggregate.top2_accuracy.mean});
    }
    std::cout << render_metrics_table(rows);
    const auto& best = result.points[result.best];
    std::cout << "best: " << best.point.label() << " (" << a.metric << " " << fixed(best.score, 4) << ")\n";
    for (auto s : seeds) record.seed(s);
    record.artifact(csv);
    record.note("best", best.point.label());
    record.write(a.out);
    return 0;
}

struct InferArgs {
    std::string image;
    std::string model;
    std::string masks;
    std::string camera;
    std::size_t repeats = 1;
    std::uint64_t seed = 0;
    std::string out;
};

int run_infer(const InferArgs& a, const CLI::App& sub) {
    RunRecord record("infer", sub);
    const Checkpoint ckpt = load_checkpoint(a.model);
    if (is_head(ckpt.config)) throw UsageError("infer needs an image model, not a head checkpoint");
    const Network net(ckpt.config);
    const auto& s = ckpt.config.input_shape;

    const auto t0 = Clock::now();
    Tensor planes = to_tensor(read_image(a.image), s[0] == 1);
    if (!a.masks.empty()) {
        for (const auto& m : read_masks(a.masks)) {
            if (m.camera_id == a.camera) planes = apply_mask(planes, m);
        }
    }
    const Tensor input = resize_bilinear(planes, s[1], s[2]);
    const auto t1 = Clock::now();
    Tensor probs;
    double best_ms = 1e300;
    for (std::size_t i = 0; i < a.repeats; ++i) {
        const auto p0 = Clock::now();
        probs = net.predict(ckpt.params, input);
        best_ms = std::min(best_ms, std::chrono::duration<double, std::milli>(Clock::now() - p0).count());
    }
    const double prep_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

    std::vector<double> p(probs.data(), probs.data() + probs.size());
    const std::size_t top = argmax(p);
    std::vector<std::vector<std::string>> rows;
    nlohmann::json dist;
    for (std::size_t c = 0; c < p.size(); ++c) {
        const std::string name(to_string(density_class_from_index(c)));
        rows.push_back({name, fixed(p[c], 4)});
        dist[name] = p[c];
    }
    std::cout << "class " << to_string(density_class_from_index(top)) << "\n";
    std::cout << render_table({"Class", "Probability"}, rows);
    std::cout << "latency " << fixed(best_ms, 2) << " ms predict, " << fixed(prep_ms, 2) << " ms load+preprocess\n";
    record.note("prediction", {{"class", std::string(to_string(density_class_from_index(top)))},
                               {"probabilities", dist},
                               {"predict_ms", best_ms},
                               {"preprocess_ms", prep_ms}});
    record.write(a.out);
    return 0;
}

}  // namespace

void register_model_commands(CLI::App& app, Registry& registry) {
    {
        auto a = std::make_shared<TrainArgs>();
        auto* sub = app.add_subcommand("train", "Train the basic CNN on a labeled dataset");
        add_data_options(sub, a->data, false);
        add_fit_options(sub, a->fit);
        sub->add_option("--seed", a->seed, "Seed for the split, initialization and batching");
        a->out = "runs/train";
        sub->add_option("--out", a->out, "Output directory");
        registry.push_back({sub, [a, sub] { return run_train(*a, *sub); }});
    }
    {
        auto a = std::make_shared<TrainArgs>();
        a->fit.epochs = 20;
        auto* sub = app.add_subcommand("train-head", "Train a softmax head on precomputed features");
        sub->add_option("--features", a->data.features, "Feature CSV")->required();
        sub->add_option("--split", a->data.split, "Training fraction of the random split")
            ->check(CLI::Range(0.0, 1.0));
        add_fit_options(sub, a->fit);
        sub->add_option("--seed", a->seed, "Seed for the split, initialization and batching");
        a->out = "runs/train-head";
        sub->add_option("--out", a->out, "Output directory");
        registry.push_back({sub, [a, sub] { return run_train_head(*a, *sub); }});
    }
    {
        auto a = std::make_shared<EvalArgs>();
        auto* sub = app.add_subcommand("eval", "Score a checkpoint on the held-out split (or everything)");
        sub->add_option("--model", a->model, "Checkpoint file")->required()->check(CLI::ExistingFile);
        sub->add_option("--data", a->data.data, "Dataset root");
        sub->add_option("--features", a->data.features, "Feature CSV (head checkpoints)");
        sub->add_flag("--mask", a->data.mask, "Apply masks.json polygons while loading");
        sub->add_option("--split", a->data.split, "Training fraction used when the model was trained")
            ->check(CLI::Range(0.0, 1.0));
        sub->add_flag("--all", a->all, "Score every example instead of the held-out side");
        sub->add_option("--csv", a->csv, "Also write the table as CSV");
        sub->add_option("--seed", a->seed, "Split seed; match the training run");
        a->out = "runs/eval";
        sub->add_option("--out", a->out, "Output directory");
        registry.push_back({sub, [a, sub] { return run_eval(*a, *sub); }});
    }
    {
        auto a = std::make_shared<TuneArgs>();
        a->fit.epochs = 10;
        auto* sub = app.add_subcommand("tune", "Grid search over training settings");
        add_data_options(sub, a->data, true);
        sub->add_option("--epochs", a->fit.epochs, "Epochs when not searched")->check(CLI::PositiveNumber);
        sub->add_option("--lr", a->lr, "Learning rates to try")->delimiter(',');
        sub->add_option("--batch", a->batch, "Batch sizes to try")->delimiter(',');
        sub->add_option("--momentum", a->momentum, "Momentum values to try")->delimiter(',');
        sub->add_option("--epoch-grid", a->epochs, "Epoch counts to try")->delimiter(',');
        sub->add_option("--augment", a->augment, "0/1 values to try")->delimiter(',');
        sub->add_option("--class-weighting", a->class_weighting, "0/1 values to try")->delimiter(',');
        sub->add_option("--metric", a->metric, "accuracy, macro_f1 or top2");
        sub->add_option("--seeds", a->seeds, "Runs per grid point")->check(CLI::PositiveNumber);
        sub->add_option("--cap", a->cap, "Refuse grids with more points than this");
        sub->add_option("--seed", a->seed, "First seed; runs use seed, seed+1, ...");
        a->out = "runs/tune";
        sub->add_option("--out", a->out, "Output directory");
        registry.push_back({sub, [a, sub] { return run_tune(*a, *sub); }});
    }
    {
        auto a = std::make_shared<InferArgs>();
        auto* sub = app.add_subcommand("infer", "Classify one image and time the prediction");
        sub->add_option("image,--image", a->image, "Input image")->required()->check(CLI::ExistingFile);
        sub->add_option("--model", a->model, "Checkpoint file")->required()->check(CLI::ExistingFile);
        sub->add_option("--masks", a->masks, "masks.json to apply")->check(CLI::ExistingFile);
        sub->add_option("--camera", a->camera, "Camera id for --masks");
        sub->add_option("--repeats", a->repeats, "Time this many predictions, report the fastest")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", a->seed, "Unused; accepted for uniformity");
        a->out = "runs/infer";
        sub->add_option("--out", a->out, "Output directory");
        registry.push_back({sub, [a, sub] { return run_infer(*a, *sub); }});
    }
}

}  // namespace cli
