#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace traffic {

struct CameraFeedEntry {
    std::string camera_id;
    std::string image_url;
    std::string timestamp;  // as published, ISO 8601
    std::size_t width = 0;
    std::size_t height = 0;
};

struct FeedParse {
    std::vector<CameraFeedEntry> entries;
    std::vector<std::string> problems;  // malformed entries that were skipped
};

/// Parses the traffic-images payload: {"items":[{"cameras":[{camera_id, image,
/// timestamp, image_metadata:{width,height}}]}]}. A payload that is not JSON or
/// lacks `items` throws; bad individual cameras are reported and skipped.
FeedParse parse_feed(std::string_view json);

/// True for `YYYY-MM-DDTHH:MM:SS` with optional fraction and zone suffix.
bool valid_timestamp(std::string_view ts);
/// Filesystem-safe form of a timestamp (':' becomes '-').
std::string sanitize_timestamp(std::string_view ts);

struct FetchError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Where the feed payload and the images come from.
class FeedSource {
public:
    virtual ~FeedSource() = default;
    virtual std::string fetch_feed() = 0;
    virtual std::string fetch_image(const std::string& url) = 0;
};

/// Live HTTP(S) endpoint.
class HttpFeedSource : public FeedSource {
public:
    explicit HttpFeedSource(std::string feed_url, std::chrono::seconds timeout = std::chrono::seconds(10));
    std::string fetch_feed() override;
    std::string fetch_image(const std::string& url) override;

private:
    std::string feed_url_;
    std::chrono::seconds timeout_;
};

/// Recorded payloads on disk. Each fetch_feed returns the next payload file
/// (the last one repeats); images resolve to `<dir>/<last URL path segment>`.
class FixtureFeedSource : public FeedSource {
public:
    FixtureFeedSource(std::vector<std::filesystem::path> payloads, std::filesystem::path image_dir);
    std::string fetch_feed() override;
    std::string fetch_image(const std::string& url) override;

private:
    std::vector<std::filesystem::path> payloads_;
    std::filesystem::path image_dir_;
    std::size_t next_ = 0;
};

struct UrlParts {
    std::string scheme_host;  // e.g. https://api.example.com:8443
    std::string path;         // path plus query, starts with '/'
};
UrlParts split_url(const std::string& url);

/// Default live endpoint; overridden by TRAFFIC_FEED_URL.
inline constexpr const char* kDefaultFeedUrl = "https://api.data.gov.sg/v1/transport/traffic-images";
std::string feed_url_from_env();

/// Calls `fn` up to `attempts` times, sleeping base_delay * 2^k after the k-th
/// failure. Rethrows the last FetchError.
std::string with_retry(const std::function<std::string()>& fn, std::size_t attempts,
                       std::chrono::milliseconds base_delay);

}  // namespace traffic
