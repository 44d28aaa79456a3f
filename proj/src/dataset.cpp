#include "traffic/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

namespace traffic {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            fields.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return fields;
}

std::optional<double> parse_double(const std::string& s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string format_count(double c) {
    std::ostringstream os;
    os << c;
    return os.str();
}

}  // namespace

void validate_car_count(double count) {
    if (!std::isfinite(count) || count < 0.0) throw std::invalid_argument("car count must be a non-negative number");
    if (std::floor(count * 2.0) != count * 2.0) {
        throw std::invalid_argument("car count " + format_count(count) + " is not a multiple of 0.5");
    }
}

Manifest read_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path.string());
    Manifest m;
    std::string line;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.front() == '#') {
            const auto pos = t.find("format_version=");
            if (pos != std::string::npos) {
                const auto version = parse_double(trim(t.substr(pos + 15)));
                if (!version || *version != kManifestFormatVersion) {
                    throw std::runtime_error("unsupported manifest format version in " + path.string() + ": " + t);
                }
            }
            continue;
        }
        if (!saw_header) {
            if (t != kManifestHeader) {
                throw std::runtime_error("manifest " + path.string() + " has header '" + t + "', expected '" +
                                         kManifestHeader + "'");
            }
            saw_header = true;
            continue;
        }
        const auto f = split_csv(t);
        if (f.size() != 5) {
            m.problems.emplace_back(line_no, "expected 5 fields, got " + std::to_string(f.size()));
            continue;
        }
        ManifestRow row{f[0], f[1], f[2], std::nullopt, std::nullopt, line_no};
        if (row.image_id.empty() || row.camera_id.empty() || row.capture_time.empty()) {
            m.problems.emplace_back(line_no, "image_id, camera_id and capture_time are required");
            continue;
        }
        if (!f[3].empty()) {
            row.car_count = parse_double(f[3]);
            if (!row.car_count) {
                m.problems.emplace_back(line_no, "car_count '" + f[3] + "' is not a number");
                continue;
            }
        }
        if (!f[4].empty()) {
            row.label = parse_density_class(f[4]);
            if (!row.label) {
                m.problems.emplace_back(line_no, "unknown label '" + f[4] + "'");
                continue;
            }
        }
        m.rows.push_back(std::move(row));
    }
    return m;
}

std::string format_manifest(const std::vector<ManifestRow>& rows) {
    std::ostringstream os;
    os << "# format_version=" << kManifestFormatVersion << '\n' << kManifestHeader << '\n';
    for (const auto& r : rows) {
        os << r.image_id << ',' << r.camera_id << ',' << r.capture_time << ','
           << (r.car_count ? format_count(*r.car_count) : std::string()) << ','
           << (r.label ? std::string(to_string(*r.label)) : std::string()) << '\n';
    }
    return os.str();
}

void write_manifest_atomic(const fs::path& path, const std::vector<ManifestRow>& rows) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << format_manifest(rows);
        out.flush();
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

fs::path image_stem(const fs::path& root, const std::string& camera_id, const std::string& capture_time) {
    return root / "images" / camera_id / capture_time;
}

std::optional<fs::path> find_image(const fs::path& root, const std::string& camera_id, const std::string& capture_time) {
    const auto stem = image_stem(root, camera_id, capture_time);
    for (const char* ext : {".png", ".jpg", ".jpeg"}) {
        fs::path candidate = stem;
        candidate += ext;
        if (fs::exists(candidate)) return candidate;
    }
    return std::nullopt;
}

std::vector<MaskPolygon> read_masks(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open mask file " + path.string());
    std::vector<MaskPolygon> masks;
    try {
        const auto doc = nlohmann::json::parse(in);
        const int version = doc.at("format_version").get<int>();
        if (version != kMaskFormatVersion) {
            throw std::runtime_error("unsupported mask format version " + std::to_string(version));
        }
        for (const auto& m : doc.at("masks")) {
            MaskPolygon poly;
            poly.camera_id = m.at("camera_id").get<std::string>();
            for (const auto& v : m.at("vertices")) {
                if (v.size() != 2) throw std::runtime_error("mask vertex must be [x, y]");
                poly.vertices.push_back({v[0].get<double>(), v[1].get<double>()});
            }
            if (poly.vertices.size() < 3) {
                throw std::runtime_error("mask for camera '" + poly.camera_id + "' needs at least 3 vertices");
            }
            masks.push_back(std::move(poly));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed mask file " + path.string() + ": " + e.what());
    }
    return masks;
}

void write_masks(const fs::path& path, const std::vector<MaskPolygon>& masks) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& m : masks) {
        nlohmann::json verts = nlohmann::json::array();
        for (const auto& p : m.vertices) verts.push_back({p.x, p.y});
        list.push_back({{"camera_id", m.camera_id}, {"vertices", verts}});
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << nlohmann::json{{"format_version", kMaskFormatVersion}, {"masks", list}}.dump(2) << '\n';
}

DatasetLoad load_dataset(const fs::path& root, const LoadOptions& options) {
    DatasetLoad result;
    const fs::path manifest_path = root / "labels.csv";
    if (!fs::exists(manifest_path)) throw std::runtime_error("no labels.csv under " + root.string());
    const Manifest manifest = read_manifest(manifest_path);
    for (const auto& [line, message] : manifest.problems) result.errors.push_back({line, "", message});
    result.manifest_rows = manifest.rows.size() + manifest.problems.size();

    std::vector<MaskPolygon> masks;
    if (options.apply_masks && fs::exists(root / "masks.json")) masks = read_masks(root / "masks.json");

    for (const auto& row : manifest.rows) {
        auto fail = [&](std::string message) { result.errors.push_back({row.line, row.image_id, std::move(message)}); };
        if (!row.label) {
            fail("row has no label");
            continue;
        }
        if (row.car_count) {
            try {
                validate_car_count(*row.car_count);
            } catch (const std::exception& e) {
                fail(e.what());
                continue;
            }
            const DensityClass expected = classify_count(*row.car_count);
            if (expected != *row.label) {
                fail("label " + std::string(to_string(*row.label)) + " contradicts car count " +
                     format_count(*row.car_count) + " (" + std::string(to_string(expected)) + ")");
                continue;
            }
        }
        const auto path = find_image(root, row.camera_id, row.capture_time);
        if (!path) {
            fail("missing image " + image_stem(root, row.camera_id, row.capture_time).string() + ".{png,jpg}");
            continue;
        }
        try {
            const RawImage raw = read_image(*path);
            Tensor planes = to_tensor(raw, options.grayscale);
            for (const auto& m : masks) {
                if (m.camera_id == row.camera_id) planes = apply_mask(planes, m);
            }
            result.examples.push_back({row.image_id, row.camera_id, row.capture_time,
                                       resize_bilinear(planes, options.height, options.width), *row.label,
                                       row.car_count});
        } catch (const std::exception& e) {
            fail(e.what());
        }
    }
    return result;
}

std::array<std::size_t, kDensityClassCount> class_histogram(const std::vector<LabeledExample>& examples) {
    std::array<std::size_t, kDensityClassCount> h{};
    for (const auto& e : examples) ++h[index_of(e.label)];
    return h;
}

}  // namespace traffic
