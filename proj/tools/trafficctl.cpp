#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "cli.hpp"

namespace cli {

RunRecord::RunRecord(std::string command, const CLI::App& sub)
    : command_(std::move(command)), config_(nlohmann::json::object()), start_(std::chrono::steady_clock::now()) {
    for (const CLI::Option* opt : sub.get_options()) {
        const auto& names = opt->get_lnames();
        if (names.empty() || names.front() == "help" || names.front() == "config") continue;
        const auto& results = opt->results();
        if (results.empty()) {
            if (opt->get_type_size() == 0) {
                config_[names.front()] = false;
            } else if (opt->get_items_expected_max() > 1) {
                config_[names.front()] = nlohmann::json::array();
            } else if (!opt->get_default_str().empty()) {
                config_[names.front()] = opt->get_default_str();
            }
            continue;
        }
        if (opt->get_type_size() == 0) {
            config_[names.front()] = opt->as<bool>();
        } else if (opt->get_expected_max() > 1 || opt->get_items_expected_max() > 1) {
            config_[names.front()] = results;
        } else {
            config_[names.front()] = results.back();
        }
    }
}

void RunRecord::write(const fs::path& out_dir) {
    fs::create_directories(out_dir);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    nlohmann::json j{{"command", command_},  {"config", config_}, {"seeds", seeds_},
                     {"artifacts", artifacts_}, {"duration_seconds", secs}};
    for (auto& [k, v] : extra_.items()) j[k] = v;
    std::ofstream(out_dir / "run_manifest.json") << j.dump(2) << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& r : rows)
        for (std::size_t c = 0; c < r.size() && c < width.size(); ++c) width[c] = std::max(width[c], r[c].size());
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < width.size(); ++c) {
            const std::string cell = c < cells.size() ? cells[c] : "";
            out << (c ? " | " : "") << (c ? std::right : std::left) << std::setw(static_cast<int>(width[c])) << cell;
        }
        out << "\n";
    };
    line(header);
    for (std::size_t c = 0; c < width.size(); ++c) out << (c ? "-+-" : "") << std::string(width[c], '-');
    out << "\n";
    for (const auto& r : rows) line(r);
    return out.str();
}

std::string render_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) out << (c ? "," : "") << cells[c];
        out << "\n";
    };
    line(header);
    for (const auto& r : rows) line(r);
    return out.str();
}

std::string fixed(double value, int digits) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(digits) << value;
    return out.str();
}

}  // namespace cli

namespace {

bool mentions(const std::vector<std::string>& args, const std::string& flag) {
    return std::any_of(args.begin(), args.end(), [&](const std::string& a) {
        return a == flag || a.rfind(flag + "=", 0) == 0;
    });
}

// Turns --config <file> into flags placed before the user's own, skipping
// anything the user already set. A run manifest works as a config file.
std::vector<std::string> expand_config(std::vector<std::string> args) {
    auto it = std::find_if(args.begin(), args.end(),
                           [](const std::string& a) { return a == "--config" || a.rfind("--config=", 0) == 0; });
    if (it == args.end()) return args;
    std::string path;
    if (*it == "--config") {
        if (std::next(it) == args.end()) throw CLI::ArgumentMismatch("--config needs a file");
        path = *std::next(it);
        it = args.erase(it, std::next(it, 2));
    } else {
        path = it->substr(9);
        it = args.erase(it);
    }
    std::ifstream in(path);
    if (!in) throw CLI::FileError::Missing(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw CLI::ConversionError("config " + path + " is not valid JSON: " + e.what());
    }
    if (j.contains("config") && j["config"].is_object()) j = j["config"];
    if (!j.is_object()) throw CLI::ConversionError("config " + path + " must hold a JSON object");

    std::vector<std::string> extra;
    for (auto& [key, value] : j.items()) {
        const std::string flag = "--" + key;
        if (mentions(args, flag) || value.is_null()) continue;
        if (value.is_boolean()) {
            extra.push_back(flag + (value.get<bool>() ? "" : "=false"));
        } else if (value.is_array()) {
            std::string joined;
            for (const auto& v : value) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
            if (!joined.empty()) extra.push_back(flag + "=" + joined);
        } else if (value.is_string()) {
            extra.push_back(flag + "=" + value.get<std::string>());
        } else {
            extra.push_back(flag + "=" + value.dump());
        }
    }
    // after the subcommand name, before the user's flags
    const auto at = args.empty() ? args.end() : std::next(args.begin());
    args.insert(at, extra.begin(), extra.end());
    return args;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trafficctl: traffic density estimation and signal control toolkit"};
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();  // manifests record defaults too
    cli::Registry registry;
    cli::register_data_commands(app, registry);
    cli::register_model_commands(app, registry);
    cli::register_sim_commands(app, registry);
    for (auto& c : registry) c.app->add_option("--config", "JSON file of flag values; flags on the command line win");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = expand_config(std::move(args));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    for (auto& c : registry) {
        if (!c.app->parsed()) continue;
        try {
            return c.run();
        } catch (const cli::UsageError& e) {
            std::cerr << "usage error: " << e.what() << "\n\n" << c.app->help();
            return 1;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        }
    }
    return 1;
}
