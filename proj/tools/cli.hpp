#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace cli {

namespace fs = std::filesystem;

/// Bad flag combinations found after parsing; exit code 1.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Collects what a run produced and writes `<out>/run_manifest.json`.
class RunRecord {
public:
    RunRecord(std::string command, const CLI::App& sub);
    void artifact(const fs::path& path) { artifacts_.push_back(path.string()); }
    void seed(std::uint64_t s) { seeds_.push_back(s); }
    void note(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
    /// Writes the manifest into `out_dir` (created if needed).
    void write(const fs::path& out_dir);

private:
    std::string command_;
    nlohmann::json config_;
    std::vector<std::string> artifacts_;
    std::vector<std::uint64_t> seeds_;
    nlohmann::json extra_ = nlohmann::json::object();
    std::chrono::steady_clock::time_point start_;
};

struct Command {
    CLI::App* app = nullptr;
    std::function<int()> run;
};

using Registry = std::vector<Command>;

void register_data_commands(CLI::App& app, Registry& registry);
void register_model_commands(CLI::App& app, Registry& registry);
void register_sim_commands(CLI::App& app, Registry& registry);

/// Writes `text` to `path` (creating parent directories); used for --csv.
void write_text(const fs::path& path, const std::string& text);

/// Aligned table with a header row.
std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);
std::string render_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

std::string fixed(double value, int digits);

}  // namespace cli
