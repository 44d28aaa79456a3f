#include "traffic/feed.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace traffic {

bool valid_timestamp(std::string_view ts) {
    static const std::regex pattern(
        R"(\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}(\.\d+)?(Z|[+-]\d{2}:?\d{2})?)");
    return std::regex_match(ts.begin(), ts.end(), pattern);
}

std::string sanitize_timestamp(std::string_view ts) {
    std::string out(ts);
    for (char& c : out) {
        if (c == ':' || c == '/' || c == '\\' || c == ' ') c = '-';
    }
    return out;
}

FeedParse parse_feed(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("feed payload is not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("items") || !j["items"].is_array()) {
        throw std::invalid_argument("feed payload has no 'items' array");
    }
    FeedParse out;
    for (std::size_t i = 0; i < j["items"].size(); ++i) {
        const auto& item = j["items"][i];
        if (!item.contains("cameras") || !item["cameras"].is_array()) {
            out.problems.push_back("item " + std::to_string(i) + " has no cameras array");
            continue;
        }
        for (std::size_t c = 0; c < item["cameras"].size(); ++c) {
            const auto& cam = item["cameras"][c];
            const std::string where = "item " + std::to_string(i) + " camera " + std::to_string(c);
            try {
                CameraFeedEntry e;
                const auto& id = cam.at("camera_id");
                e.camera_id = id.is_string() ? id.get<std::string>() : id.dump();
                e.image_url = cam.at("image").get<std::string>();
                e.timestamp = cam.at("timestamp").get<std::string>();
                if (cam.contains("image_metadata")) {
                    e.width = cam["image_metadata"].value("width", std::size_t{0});
                    e.height = cam["image_metadata"].value("height", std::size_t{0});
                }
                if (e.camera_id.empty() || e.camera_id.find_first_of("/\\.,") != std::string::npos) {
                    throw std::invalid_argument("unusable camera_id '" + e.camera_id + "'");
                }
                if (!valid_timestamp(e.timestamp)) throw std::invalid_argument("bad timestamp '" + e.timestamp + "'");
                out.entries.push_back(std::move(e));
            } catch (const std::exception& ex) {
                out.problems.push_back(where + ": " + ex.what());
            }
        }
    }
    return out;
}

UrlParts split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("URL lacks a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

HttpFeedSource::HttpFeedSource(std::string feed_url, std::chrono::seconds timeout)
    : feed_url_(std::move(feed_url)), timeout_(timeout) {
    split_url(feed_url_);
}

namespace {

std::string http_get(const std::string& url, std::chrono::seconds timeout) {
    const auto parts = split_url(url);
    httplib::Client client(parts.scheme_host);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_follow_location(true);
    auto res = client.Get(parts.path);
    if (!res) throw FetchError("GET " + url + " failed: " + httplib::to_string(res.error()));
    if (res->status != 200) throw FetchError("GET " + url + " returned HTTP " + std::to_string(res->status));
    return res->body;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw FetchError("fixture " + p.string() + " not found");
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

std::string HttpFeedSource::fetch_feed() { return http_get(feed_url_, timeout_); }
std::string HttpFeedSource::fetch_image(const std::string& url) { return http_get(url, timeout_); }

FixtureFeedSource::FixtureFeedSource(std::vector<std::filesystem::path> payloads, std::filesystem::path image_dir)
    : payloads_(std::move(payloads)), image_dir_(std::move(image_dir)) {
    if (payloads_.empty()) throw std::invalid_argument("fixture feed needs at least one payload file");
}

std::string FixtureFeedSource::fetch_feed() {
    const auto& p = payloads_[std::min(next_, payloads_.size() - 1)];
    ++next_;
    return read_file(p);
}

std::string FixtureFeedSource::fetch_image(const std::string& url) {
    auto name = url.substr(url.find_last_of('/') + 1);
    name = name.substr(0, name.find('?'));
    return read_file(image_dir_ / name);
}

std::string feed_url_from_env() {
    const char* v = std::getenv("TRAFFIC_FEED_URL");
    return v && *v ? std::string(v) : std::string(kDefaultFeedUrl);
}

std::string with_retry(const std::function<std::string()>& fn, std::size_t attempts,
                       std::chrono::milliseconds base_delay) {
    if (attempts == 0) throw std::invalid_argument("retry needs at least one attempt");
    for (std::size_t k = 0;; ++k) {
        try {
            return fn();
        } catch (const FetchError&) {
            if (k + 1 >= attempts) throw;
            std::this_thread::sleep_for(base_delay * (1LL << k));
        }
    }
}

}  // namespace traffic
