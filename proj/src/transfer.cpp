#include "traffic/transfer.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "traffic/density.hpp"
#include "traffic/kernels.hpp"
#include "traffic/random.hpp"

namespace traffic {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream s(line);
    while (std::getline(s, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

[[noreturn]] void fail(std::size_t line, const std::string& msg) {
    throw std::invalid_argument("feature file line " + std::to_string(line) + ": " + msg);
}

}  // namespace

FeatureSet read_features(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) throw std::invalid_argument("feature file is empty");

    FeatureSet set;
    bool have_version = false;
    for (const auto& part : split_csv(trim(line))) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) fail(line_no, "header must look like feature_dim=<d>,format_version=1");
        const auto key = trim(part.substr(0, eq));
        const auto value = trim(part.substr(eq + 1));
        long long parsed = 0;
        auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), parsed);
        if (ec != std::errc() || p != value.data() + value.size()) fail(line_no, "bad header value '" + value + "'");
        if (key == "feature_dim") {
            if (parsed <= 0) fail(line_no, "feature_dim must be positive");
            set.feature_dim = static_cast<std::size_t>(parsed);
        } else if (key == "format_version") {
            if (parsed != kFeatureFormatVersion) fail(line_no, "unsupported format_version " + value);
            have_version = true;
        } else {
            fail(line_no, "unknown header key '" + key + "'");
        }
    }
    if (set.feature_dim == 0) fail(line_no, "header lacks feature_dim");
    if (!have_version) fail(line_no, "header lacks format_version");

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != set.feature_dim + 2) {
            fail(line_no, "expected " + std::to_string(set.feature_dim) + " features, found " +
                              std::to_string(fields.size() < 2 ? 0 : fields.size() - 2));
        }
        FeatureRow row;
        row.image_id = trim(fields[0]);
        if (row.image_id.empty()) fail(line_no, "missing image_id");
        const auto label = parse_density_class(trim(fields[1]));
        if (!label) fail(line_no, "unknown label '" + trim(fields[1]) + "'");
        row.label = index_of(*label);
        row.values.reserve(set.feature_dim);
        for (std::size_t k = 2; k < fields.size(); ++k) {
            const auto text = trim(fields[k]);
            double v = 0.0;
            auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc() || p != text.data() + text.size()) {
                fail(line_no, "feature " + std::to_string(k - 1) + " is not a number: '" + text + "'");
            }
            if (!std::isfinite(v)) fail(line_no, "feature " + std::to_string(k - 1) + " is not finite");
            row.values.push_back(v);
        }
        set.rows.push_back(std::move(row));
    }
    return set;
}

FeatureSet load_features(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open feature file " + path.string());
    return read_features(in);
}

void write_features(std::ostream& out, const FeatureSet& set) {
    out << "feature_dim=" << set.feature_dim << ",format_version=" << kFeatureFormatVersion << '\n';
    const auto old = out.precision(17);
    for (const auto& row : set.rows) {
        out << row.image_id << ',' << row.label;
        for (double v : row.values) out << ',' << v;
        out << '\n';
    }
    out.precision(old);
}

FeatureSet synthetic_features(const std::vector<std::size_t>& per_class, std::size_t dim, double separation,
                              std::uint64_t seed) {
    if (dim == 0) throw std::invalid_argument("feature dimension must be positive");
    Rng rng(seed);
    std::vector<std::vector<double>> centres(per_class.size(), std::vector<double>(dim));
    for (auto& c : centres)
        for (auto& v : c) v = separation * rng.normal(0.0, 1.0) / std::sqrt(static_cast<double>(dim)) * 4.0;
    FeatureSet set{dim, {}};
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        for (std::size_t i = 0; i < per_class[c]; ++i) {
            FeatureRow row{"f" + std::to_string(c) + "_" + std::to_string(i), c, centres[c]};
            for (auto& v : row.values) v += rng.normal(0.0, 1.0);
            set.rows.push_back(std::move(row));
        }
    }
    rng.shuffle(set.rows);
    return set;
}

ModelConfig head_config(std::size_t feature_dim, std::size_t classes) {
    ModelConfig cfg;
    cfg.input_shape = {feature_dim, 1, 1};
    cfg.class_count = classes;
    cfg.layers = {FlattenLayer{}, DenseLayer{classes}, SoftmaxLayer{}};
    return cfg;
}

std::vector<Sample> feature_samples(const FeatureSet& set) {
    std::vector<Sample> out;
    out.reserve(set.rows.size());
    for (const auto& row : set.rows) {
        if (row.values.size() != set.feature_dim) {
            throw std::invalid_argument("feature row '" + row.image_id + "' has " + std::to_string(row.values.size()) +
                                        " values, expected " + std::to_string(set.feature_dim));
        }
        out.push_back({Tensor({set.feature_dim, 1, 1}, row.values), row.label});
    }
    return out;
}

HeadTrainResult train_head(const FeatureSet& features, const TrainConfig& cfg, std::size_t classes,
                           const FeatureSet* validation) {
    if (features.rows.empty()) throw std::invalid_argument("no training rows for the head");
    const auto samples = feature_samples(features);
    const auto counts = class_counts(samples, classes);
    for (std::size_t c = 0; c < classes; ++c) {
        if (counts[c] == 0) {
            throw std::invalid_argument("class " + std::string(to_string(density_class_from_index(c))) +
                                        " is absent from the training rows");
        }
    }
    std::vector<Sample> val;
    if (validation) {
        if (validation->feature_dim != features.feature_dim) {
            throw std::invalid_argument("validation features have a different dimension");
        }
        val = feature_samples(*validation);
    }
    const Network net(head_config(features.feature_dim, classes));
    auto run = train(net, net.init_parameters(cfg.seed), samples, val, cfg);
    const auto& dense = run.params.layers[1];
    HeadParameters head{dense.weights, dense.bias};
    return {std::move(head), std::move(run)};
}

std::vector<double> predict_head(const HeadParameters& head, const std::vector<double>& features) {
    if (head.weights.rank() != 2 || features.size() != head.weights.dim(1)) {
        throw std::invalid_argument("feature vector has " + std::to_string(features.size()) +
                                    " values, head expects " +
                                    (head.weights.rank() == 2 ? std::to_string(head.weights.dim(1)) : "?"));
    }
    return softmax(dense_forward(Tensor::vector(features), head.weights, head.bias)).storage();
}

MetricsReport evaluate_head(const HeadParameters& head, const FeatureSet& set) {
    std::vector<std::vector<double>> preds;
    std::vector<std::size_t> truths;
    for (const auto& row : set.rows) {
        preds.push_back(predict_head(head, row.values));
        truths.push_back(row.label);
    }
    return evaluate(preds, truths);
}

}  // namespace traffic
