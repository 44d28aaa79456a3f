#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "cli.hpp"
#include "traffic/dataset.hpp"
#include "traffic/feed.hpp"
#include "traffic/image.hpp"
#include "traffic/ingest.hpp"
#include "traffic/synthetic.hpp"
#include "traffic/transfer.hpp"

namespace cli {
namespace {

using namespace traffic;

std::atomic<bool> g_interrupted{false};

extern "C" void on_interrupt(int) { g_interrupted.store(true); }

void add_out(CLI::App* app, std::string& out, const std::string& fallback) {
    out = fallback;
    app->add_option("--out", out, "Output directory (run_manifest.json and artifacts go here)");
}

// "x,y;x,y;..." into a polygon
std::vector<Point> parse_vertices(const std::string& text) {
    std::vector<Point> pts;
    std::stringstream ss(text);
    std::string pair;
    while (std::getline(ss, pair, ';')) {
        if (pair.empty()) continue;
        const auto comma = pair.find(',');
        if (comma == std::string::npos) throw UsageError("polygon vertex '" + pair + "' is not x,y");
        try {
            pts.push_back({std::stod(pair.substr(0, comma)), std::stod(pair.substr(comma + 1))});
        } catch (const std::logic_error&) {
            throw UsageError("polygon vertex '" + pair + "' is not numeric");
        }
    }
    return pts;
}

struct IngestArgs {
    std::string out;
    std::vector<std::string> fixture;
    std::string fixture_images;
    bool live = false;
    std::string feed_url;
    std::vector<std::string> cameras;
    double interval = 20.0;
    std::size_t ticks = 1;
    std::size_t attempts = 3;
    std::size_t max_failures = 5;
    std::uint64_t seed = 0;
};

int run_ingest(const IngestArgs& a, const CLI::App& sub) {
    if (a.live == !a.fixture.empty()) throw UsageError("choose exactly one of --live or --fixture");
    if (!a.fixture.empty() && a.fixture_images.empty()) throw UsageError("--fixture needs --fixture-images");
    if (a.interval < 0.0) throw UsageError("--interval must be >= 0");

    RunRecord record("ingest", sub);
    std::unique_ptr<FeedSource> source;
    std::string url;
    if (a.live) {
        url = a.feed_url.empty() ? feed_url_from_env() : a.feed_url;
        source = std::make_unique<HttpFeedSource>(url);
    } else {
        std::vector<fs::path> payloads(a.fixture.begin(), a.fixture.end());
        source = std::make_unique<FixtureFeedSource>(payloads, a.fixture_images);
    }
    IngestOptions opt;
    opt.cameras.insert(a.cameras.begin(), a.cameras.end());
    opt.attempts = a.attempts;
    Ingester ingester(*source, a.out, opt);

    std::stop_source stop;
    g_interrupted.store(false);
    auto previous = std::signal(SIGINT, on_interrupt);
    std::jthread watcher([&stop](std::stop_token done) {
        while (!done.stop_requested()) {
            if (g_interrupted.load()) {
                stop.request_stop();
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
    });
    const auto interval = std::chrono::milliseconds(static_cast<long>(a.interval * 1000.0));
    const LoopSummary summary = poll_loop(ingester, interval, stop.get_token(), a.max_failures, a.ticks);
    watcher.request_stop();
    watcher.join();
    std::signal(SIGINT, previous);

    std::cout << "ticks " << summary.ticks << ", fetched " << summary.fetched << ", duplicates " << summary.duplicates
              << ", failed " << summary.failed << (g_interrupted.load() ? " (interrupted)" : "") << "\n";
    record.note("feed", a.live ? url : "fixture");
    record.note("summary", {{"ticks", summary.ticks},
                            {"fetched", summary.fetched},
                            {"duplicates", summary.duplicates},
                            {"failed", summary.failed},
                            {"gave_up", summary.gave_up}});
    record.artifact(fs::path(a.out) / "labels.csv");
    record.write(a.out);
    if (summary.gave_up) {
        std::cerr << "error: giving up after " << a.max_failures << " consecutive failed polls\n";
        return 2;
    }
    return 0;
}

struct StatsArgs {
    std::string data;
    std::string csv;
    std::string out;
    std::uint64_t seed = 0;
};

int run_stats(const StatsArgs& a, const CLI::App& sub) {
    RunRecord record("stats", sub);
    LoadOptions opt;
    opt.height = opt.width = 8;  // only labels matter; keep decoding cheap
    const DatasetLoad load = load_dataset(a.data, opt);
    const auto hist = class_histogram(load.examples);

    std::vector<std::vector<std::string>> rows;
    std::size_t total = 0;
    for (auto c : kDensityClasses) {
        rows.push_back({std::string(to_string(c)), std::to_string(hist[index_of(c)])});
        total += hist[index_of(c)];
    }
    std::cout << render_table({"Class", "Count"}, rows);
    std::cout << "total " << total << " of " << load.manifest_rows << " manifest rows";
    if (!load.errors.empty()) std::cout << ", " << load.errors.size() << " skipped";
    std::cout << "\n";
    for (const auto& e : load.errors) {
        std::cerr << "  line " << e.line << (e.image_id.empty() ? "" : " " + e.image_id) << ": " << e.message << "\n";
    }
    if (!a.csv.empty()) {
        write_text(a.csv, render_csv({"class", "count"}, rows));
        record.artifact(a.csv);
    }
    nlohmann::json counts;
    for (std::size_t i = 0; i < rows.size(); ++i) counts[rows[i][0]] = hist[i];
    record.note("histogram", counts);
    record.note("skipped", load.errors.size());
    record.write(a.out);
    return 0;
}

struct ImageArgs {
    std::string image;
    std::size_t size = 128;
    bool color = false;
    std::string masks;
    std::string camera;
    std::string polygon;
    std::string out;
    std::uint64_t seed = 0;
};

int run_preprocess(const ImageArgs& a, const CLI::App& sub) {
    RunRecord record("preprocess", sub);
    const RawImage raw = read_image(a.image);
    const Tensor t = preprocess(raw, a.size, a.size, !a.color);
    const fs::path dest = fs::path(a.out) / "preprocessed.png";
    write_image(dest, tensor_to_image(t));
    std::cout << a.image << ": " << raw.width << "x" << raw.height << "x" << raw.channels << " -> "
              << shape_to_string(t.shape()) << ", wrote " << dest.string() << "\n";
    record.artifact(dest);
    record.write(a.out);
    return 0;
}

int run_mask_preview(const ImageArgs& a, const CLI::App& sub) {
    if (a.polygon.empty() == a.masks.empty()) throw UsageError("give exactly one of --polygon or --masks");
    RunRecord record("mask-preview", sub);
    MaskPolygon mask;
    if (!a.polygon.empty()) {
        mask.camera_id = a.camera;
        mask.vertices = parse_vertices(a.polygon);
    } else {
        const auto all = read_masks(a.masks);
        const auto it = std::find_if(all.begin(), all.end(), [&](const MaskPolygon& m) { return m.camera_id == a.camera; });
        if (it == all.end()) throw std::runtime_error("no mask for camera '" + a.camera + "' in " + a.masks);
        mask = *it;
    }
    const RawImage raw = read_image(a.image);
    validate_polygon(mask, raw.width, raw.height);
    const Tensor masked = apply_mask(to_tensor(raw, !a.color), mask);
    const fs::path dest = fs::path(a.out) / "masked.png";
    write_image(dest, tensor_to_image(masked));
    const double share = polygon_area(mask.vertices) / static_cast<double>(raw.width * raw.height);
    std::cout << "mask keeps " << fixed(100.0 * share, 1) << "% of the frame, wrote " << dest.string() << "\n";
    record.artifact(dest);
    record.write(a.out);
    return 0;
}

struct SynthArgs {
    std::string out;
    std::size_t count = 1000;
    std::string ratio = "balanced";
    std::size_t size = 64;
    std::string camera = "9000";
    std::uint64_t seed = 0;
};

std::array<double, kDensityClassCount> class_ratio(const std::string& name) {
    if (name == "balanced") return {1, 1, 1, 1, 1};
    if (name == "published") return {1679, 1306, 556, 554, 488};
    throw UsageError("--ratio must be balanced or published");
}

std::string capture_time(std::size_t i) {
    // one image every 20 s from a fixed start, sanitized form
    const std::size_t s = i * 20;
    char buf[32];
    std::snprintf(buf, sizeof buf, "2024-01-%02zuT%02zu-%02zu-%02zu", 1 + s / 86400, (s / 3600) % 24, (s / 60) % 60,
                  s % 60);
    return buf;
}

int run_synth(const SynthArgs& a, const CLI::App& sub) {
    if (a.count > 31 * 86400 / 20) throw UsageError("--count too large for the synthetic clock");
    RunRecord record("synth", sub);
    record.seed(a.seed);
    BlobSceneConfig cfg;
    cfg.height = cfg.width = a.size;
    if (a.size < 64) {
        // a jam needs up to 35 discs; shrink them so they still fit
        cfg.blob_radius = 1.0;
        cfg.min_gap = 0.5;
    }
    const auto samples = generate_blob_dataset(apportion(a.count, class_ratio(a.ratio)), cfg, a.seed);
    std::vector<ManifestRow> rows;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::string stamp = capture_time(i);
        write_image(image_stem(a.out, a.camera, stamp).string() + ".png", tensor_to_image(samples[i].image));
        rows.push_back({a.camera + "_" + stamp, a.camera, stamp, std::nullopt,
                        density_class_from_index(samples[i].label), 0});
    }
    const fs::path manifest = fs::path(a.out) / "labels.csv";
    write_manifest_atomic(manifest, rows);
    std::cout << "wrote " << rows.size() << " images under " << a.out << "\n";
    record.artifact(manifest);
    record.write(a.out);
    return 0;
}

struct SynthFeatureArgs {
    std::string out;
    std::size_t per_class = 200;
    std::size_t dim = 256;
    double separation = 3.0;
    std::uint64_t seed = 0;
};

int run_synth_features(const SynthFeatureArgs& a, const CLI::App& sub) {
    RunRecord record("synth-features", sub);
    record.seed(a.seed);
    const auto set = synthetic_features(std::vector<std::size_t>(kDensityClassCount, a.per_class), a.dim,
                                        a.separation, a.seed);
    const fs::path dest = fs::path(a.out) / "features.csv";
    fs::create_directories(a.out);
    std::ofstream out(dest);
    write_features(out, set);
    out.close();
    std::cout << "wrote " << set.rows.size() << " rows of dimension " << set.feature_dim << " to " << dest.string()
              << "\n";
    record.artifact(dest);
    record.write(a.out);
    return 0;
}

}  // namespace

void register_data_commands(CLI::App& app, Registry& registry) {
    {
        auto a = std::make_shared<IngestArgs>();
        auto* sub = app.add_subcommand("ingest", "Poll the camera feed into a dataset directory");
        sub->add_option("--out", a->out, "Dataset root (images/ and labels.csv)")->required();
        sub->add_option("--fixture", a->fixture, "Recorded feed payloads, served in order")->delimiter(',');
        sub->add_option("--fixture-images", a->fixture_images, "Directory holding the images the fixtures reference");
        sub->add_flag("--live", a->live, "Poll the real feed over the network");
        sub->add_option("--feed-url", a->feed_url, "Feed URL (default: $TRAFFIC_FEED_URL or the public API)");
        sub->add_option("--cameras", a->cameras, "Only keep these camera ids")->delimiter(',');
        sub->add_option("--interval", a->interval, "Seconds between polls");
        sub->add_option("--ticks", a->ticks, "Number of polls; 0 runs until interrupted");
        sub->add_option("--attempts", a->attempts, "Download attempts per image")->check(CLI::PositiveNumber);
        sub->add_option("--max-failures", a->max_failures, "Consecutive failed polls before giving up")
            ->check(CLI::PositiveNumber);
        sub->add_option("--seed", a->seed, "Unused; accepted for uniformity");
        registry.push_back({sub, [a, sub] { return run_ingest(*a, *sub); }});
    }
    {
        auto a = std::make_shared<StatsArgs>();
        auto* sub = app.add_subcommand("stats", "Class histogram of a labeled dataset");
        sub->add_option("data,--data", a->data, "Dataset root")->required();
        sub->add_option("--csv", a->csv, "Also write the table as CSV");
        sub->add_option("--seed", a->seed, "Unused; accepted for uniformity");
        add_out(sub, a->out, "runs/stats");
        registry.push_back({sub, [a, sub] { return run_stats(*a, *sub); }});
    }
    {
        auto a = std::make_shared<ImageArgs>();
        auto* sub = app.add_subcommand("preprocess", "Resize and convert one image the way training sees it");
        sub->add_option("image,--image", a->image, "Input image")->required()->check(CLI::ExistingFile);
        sub->add_option("--size", a->size, "Square side in pixels")->check(CLI::PositiveNumber);
        sub->add_flag("--color", a->color, "Keep RGB instead of grayscale");
        sub->add_option("--seed", a->seed, "Unused; accepted for uniformity");
        add_out(sub, a->out, "runs/preprocess");
        registry.push_back({sub, [a, sub] { return run_preprocess(*a, *sub); }});
    }
    {
        auto a = std::make_shared<ImageArgs>();
        auto* sub = app.add_subcommand("mask-preview", "Write an image with everything outside a polygon blanked");
        sub->add_option("image,--image", a->image, "Input image")->required()->check(CLI::ExistingFile);
        sub->add_option("--polygon", a->polygon, "Vertices as 'x,y;x,y;...' in pixels");
        sub->add_option("--masks", a->masks, "masks.json to take the polygon from")->check(CLI::ExistingFile);
        sub->add_option("--camera", a->camera, "Camera id to look up in --masks");
        sub->add_flag("--color", a->color, "Keep RGB instead of grayscale");
        sub->add_option("--seed", a->seed, "Unused; accepted for uniformity");
        add_out(sub, a->out, "runs/mask-preview");
        registry.push_back({sub, [a, sub] { return run_mask_preview(*a, *sub); }});
    }
    {
        auto a = std::make_shared<SynthArgs>();
        auto* sub = app.add_subcommand("synth", "Generate a labeled blob-count dataset");
        sub->add_option("--out", a->out, "Dataset root to create")->required();
        sub->add_option("--count", a->count, "Number of images")->check(CLI::PositiveNumber);
        sub->add_option("--ratio", a->ratio, "Class mix: balanced or published");
        sub->add_option("--size", a->size, "Square side in pixels")->check(CLI::Range(16, 512));
        sub->add_option("--camera", a->camera, "Camera id written to the manifest");
        sub->add_option("--seed", a->seed, "Generator seed");
        registry.push_back({sub, [a, sub] { return run_synth(*a, *sub); }});
    }
    {
        auto a = std::make_shared<SynthFeatureArgs>();
        auto* sub = app.add_subcommand("synth-features", "Generate a separable feature file for head training");
        sub->add_option("--per-class", a->per_class, "Rows per class")->check(CLI::PositiveNumber);
        sub->add_option("--dim", a->dim, "Feature dimension")->check(CLI::PositiveNumber);
        sub->add_option("--separation", a->separation, "Distance between class centres");
        sub->add_option("--seed", a->seed, "Generator seed");
        add_out(sub, a->out, "runs/synth-features");
        registry.push_back({sub, [a, sub] { return run_synth_features(*a, *sub); }});
    }
}

}  // namespace cli
