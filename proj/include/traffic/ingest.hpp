#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <set>
#include <stop_token>
#include <string>
#include <vector>

#include "traffic/feed.hpp"

namespace traffic {

struct IngestOptions {
    std::set<std::string> cameras;  // empty = every camera
    std::size_t attempts = 3;
    std::chrono::milliseconds base_delay{500};
};

struct PollResult {
    std::vector<CameraFeedEntry> saved;
    std::size_t duplicates = 0;
    std::size_t adopted = 0;            // images already on disk but missing from the manifest
    std::size_t filtered = 0;
    std::size_t failed = 0;             // entries whose download kept failing
    bool feed_failed = false;           // the payload itself could not be fetched or parsed
    std::vector<std::string> problems;  // one line per skipped or failed entry
};

/// Persists new frames into `<root>/images/<camera>/<timestamp>.<ext>` and
/// appends unlabeled rows to `<root>/labels.csv` (rewritten atomically).
class Ingester {
public:
    Ingester(FeedSource& source, std::filesystem::path root, IngestOptions options = {});
    PollResult poll_once();
    const std::filesystem::path& root() const { return root_; }

private:
    FeedSource& source_;
    std::filesystem::path root_;
    IngestOptions options_;
    std::map<std::string, std::string> last_seen_;  // newest timestamp per camera this session
};

PollResult poll_once(FeedSource& source, const std::filesystem::path& root, const IngestOptions& options = {});

struct LoopSummary {
    std::size_t ticks = 0;
    std::size_t fetched = 0;
    std::size_t duplicates = 0;
    std::size_t failed = 0;        // failed entries plus failed feed fetches
    bool gave_up = false;          // too many consecutive failed ticks
    std::vector<std::chrono::steady_clock::time_point> tick_times;
};

/// Polls immediately, then every `interval` until `stop` is requested. Gives up
/// after `max_consecutive_failures` ticks in a row whose feed fetch failed, and
/// returns after `max_ticks` ticks when that is non-zero.
LoopSummary poll_loop(Ingester& ingester, std::chrono::milliseconds interval, std::stop_token stop,
                      std::size_t max_consecutive_failures = 5, std::size_t max_ticks = 0);

/// Writes `bytes` to `path` through a temporary sibling and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

}  // namespace traffic
