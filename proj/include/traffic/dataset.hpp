#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "traffic/density.hpp"
#include "traffic/image.hpp"
#include "traffic/random.hpp"
#include "traffic/tensor.hpp"

namespace traffic {

inline constexpr int kManifestFormatVersion = 1;
inline constexpr int kMaskFormatVersion = 1;
inline constexpr const char* kManifestHeader = "image_id,camera_id,capture_time,car_count,label";

/// One row of `labels.csv`. Rows written by the ingester carry no label yet.
struct ManifestRow {
    std::string image_id;
    std::string camera_id;
    std::string capture_time;
    std::optional<double> car_count;
    std::optional<DensityClass> label;
    std::size_t line = 0;  // 1-based line in the file it was read from
};

struct Manifest {
    std::vector<ManifestRow> rows;
    /// Per-row parse problems as (1-based line number, message).
    std::vector<std::pair<std::size_t, std::string>> problems;
};

Manifest read_manifest(const std::filesystem::path& path);
std::string format_manifest(const std::vector<ManifestRow>& rows);
/// Writes to a sibling temp file, flushes, then renames over `path`.
void write_manifest_atomic(const std::filesystem::path& path, const std::vector<ManifestRow>& rows);

/// `<root>/images/<camera_id>/<capture_time>` without extension.
std::filesystem::path image_stem(const std::filesystem::path& root, const std::string& camera_id,
                                 const std::string& capture_time);
/// First existing file among the .png/.jpg/.jpeg variants of the stem, if any.
std::optional<std::filesystem::path> find_image(const std::filesystem::path& root, const std::string& camera_id,
                                                const std::string& capture_time);

struct LabeledExample {
    std::string image_id;
    std::string camera_id;
    std::string capture_time;
    Tensor image;
    DensityClass label = DensityClass::Empty;
    std::optional<double> car_count;
};

struct LoadOptions {
    std::size_t height = 128;
    std::size_t width = 128;
    bool grayscale = true;
    /// Apply `<root>/masks.json` polygons (at native resolution, before resizing).
    bool apply_masks = false;
};

struct LoadError {
    std::size_t line = 0;
    std::string image_id;
    std::string message;
};

struct DatasetLoad {
    std::vector<LabeledExample> examples;
    std::vector<LoadError> errors;
    std::size_t manifest_rows = 0;
};

/// Loads every manifest row; failures (missing or unreadable image, label that
/// contradicts the car count, missing label) are collected in `errors`.
DatasetLoad load_dataset(const std::filesystem::path& root, const LoadOptions& options = {});

std::vector<MaskPolygon> read_masks(const std::filesystem::path& path);
void write_masks(const std::filesystem::path& path, const std::vector<MaskPolygon>& masks);

/// Car counts must be non-negative multiples of 0.5 (motorcycles count half).
void validate_car_count(double count);

std::array<std::size_t, kDensityClassCount> class_histogram(const std::vector<LabeledExample>& examples);

struct SplitSpec {
    double train_fraction = 0.9;
    std::uint64_t seed = 0;
};

/// Seeded shuffle, then the first floor(n * fraction) items train and the rest validate.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> split(std::vector<T> items, const SplitSpec& spec) {
    if (!(spec.train_fraction > 0.0 && spec.train_fraction < 1.0)) {
        throw std::invalid_argument("train fraction must lie strictly between 0 and 1");
    }
    if (items.size() < 2) throw std::invalid_argument("cannot split fewer than 2 examples");
    const auto cut = static_cast<std::size_t>(static_cast<double>(items.size()) * spec.train_fraction);
    if (cut == 0 || cut == items.size()) {
        throw std::invalid_argument("split of " + std::to_string(items.size()) + " examples at fraction " +
                                    std::to_string(spec.train_fraction) + " leaves one side empty");
    }
    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(spec.seed);
    rng.shuffle(order);
    std::pair<std::vector<T>, std::vector<T>> out;
    out.first.reserve(cut);
    out.second.reserve(items.size() - cut);
    for (std::size_t i = 0; i < order.size(); ++i) {
        (i < cut ? out.first : out.second).push_back(std::move(items[order[i]]));
    }
    return out;
}

}  // namespace traffic
