#include "traffic/ingest.hpp"

#include <algorithm>
#include <condition_variable>
#include <fstream>
#include <mutex>

#include "traffic/dataset.hpp"

namespace traffic {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, const std::string& bytes) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw std::runtime_error("failed writing " + tmp.string());
    }
    fs::rename(tmp, path);
}

namespace {

std::string image_extension(const std::string& url) {
    auto path = url.substr(0, url.find('?'));
    auto dot = path.find_last_of('.');
    auto slash = path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash)) return ".jpg";
    std::string ext = path.substr(dot);
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpeg" || ext == ".jpg" ? ext : ".jpg";
}

}  // namespace

Ingester::Ingester(FeedSource& source, fs::path root, IngestOptions options)
    : source_(source), root_(std::move(root)), options_(std::move(options)) {}

PollResult Ingester::poll_once() {
    PollResult result;
    FeedParse feed;
    try {
        const auto payload = with_retry([&] { return source_.fetch_feed(); }, options_.attempts, options_.base_delay);
        feed = parse_feed(payload);
    } catch (const std::exception& e) {
        result.feed_failed = true;
        result.problems.push_back(std::string("feed: ") + e.what());
        return result;
    }
    result.problems = feed.problems;

    const fs::path manifest_path = root_ / "labels.csv";
    std::vector<ManifestRow> rows;
    std::set<std::string> known;
    if (fs::exists(manifest_path)) {
        rows = read_manifest(manifest_path).rows;
        for (const auto& r : rows) known.insert(r.image_id);
    }

    std::vector<ManifestRow> added;
    for (const auto& entry : feed.entries) {
        if (!options_.cameras.empty() && !options_.cameras.count(entry.camera_id)) {
            ++result.filtered;
            continue;
        }
        const std::string stamp = sanitize_timestamp(entry.timestamp);
        const std::string image_id = entry.camera_id + "_" + stamp;
        if (known.count(image_id)) {
            ++result.duplicates;
            continue;
        }
        if (find_image(root_, entry.camera_id, stamp)) {
            // left behind by an interrupted run: the file is complete (atomic write) but unlisted
            known.insert(image_id);
            added.push_back({image_id, entry.camera_id, stamp, std::nullopt, std::nullopt, 0});
            ++result.adopted;
            continue;
        }
        const auto last = last_seen_.find(entry.camera_id);
        if (last != last_seen_.end() && entry.timestamp < last->second) {
            result.problems.push_back("camera " + entry.camera_id + ": timestamp " + entry.timestamp +
                                      " goes backwards, skipped");
            ++result.failed;
            continue;
        }
        try {
            const auto bytes = with_retry([&] { return source_.fetch_image(entry.image_url); }, options_.attempts,
                                          options_.base_delay);
            auto path = image_stem(root_, entry.camera_id, stamp);
            path += image_extension(entry.image_url);
            write_file_atomic(path, bytes);
        } catch (const std::exception& e) {
            ++result.failed;
            result.problems.push_back("camera " + entry.camera_id + " at " + entry.timestamp + ": " + e.what());
            continue;
        }
        last_seen_[entry.camera_id] = entry.timestamp;
        known.insert(image_id);
        added.push_back({image_id, entry.camera_id, stamp, std::nullopt, std::nullopt, 0});
        result.saved.push_back(entry);
    }
    if (!added.empty()) {
        rows.insert(rows.end(), added.begin(), added.end());
        write_manifest_atomic(manifest_path, rows);
    }
    return result;
}

PollResult poll_once(FeedSource& source, const fs::path& root, const IngestOptions& options) {
    Ingester ingester(source, root, options);
    return ingester.poll_once();
}

LoopSummary poll_loop(Ingester& ingester, std::chrono::milliseconds interval, std::stop_token stop,
                      std::size_t max_consecutive_failures, std::size_t max_ticks) {
    LoopSummary summary;
    std::mutex m;
    std::condition_variable_any cv;
    std::size_t consecutive = 0;
    auto next = std::chrono::steady_clock::now();
    while (!stop.stop_requested()) {
        summary.tick_times.push_back(std::chrono::steady_clock::now());
        const auto r = ingester.poll_once();
        ++summary.ticks;
        summary.fetched += r.saved.size();
        summary.duplicates += r.duplicates;
        summary.failed += r.failed + (r.feed_failed ? 1 : 0);
        consecutive = r.feed_failed ? consecutive + 1 : 0;
        if (max_consecutive_failures > 0 && consecutive >= max_consecutive_failures) {
            summary.gave_up = true;
            break;
        }
        if (max_ticks > 0 && summary.ticks >= max_ticks) break;
        next += interval;
        std::unique_lock lock(m);
        cv.wait_until(lock, stop, next, [] { return false; });
    }
    return summary;
}

}  // namespace traffic
