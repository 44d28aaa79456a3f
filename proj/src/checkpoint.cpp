#include "traffic/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace traffic {

namespace {

constexpr char kMagic[8] = {'T', 'R', 'A', 'F', 'F', 'I', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
    unsigned char bytes[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
        throw std::runtime_error(std::string("checkpoint truncated while reading ") + what);
    }
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

void put_tensor(std::ostream& out, const Tensor& t) {
    if (t.empty()) {
        put<std::uint64_t>(out, 0);
        return;
    }
    put<std::uint64_t>(out, t.rank());
    for (auto d : t.shape()) put<std::uint64_t>(out, d);
    for (double v : t.values()) put<double>(out, v);
}

Tensor get_tensor(std::istream& in) {
    const auto rank = get<std::uint64_t>(in, "tensor rank");
    if (rank == 0) return {};
    if (rank > 8) throw std::runtime_error("checkpoint tensor rank " + std::to_string(rank) + " is implausible");
    Shape shape(rank);
    std::size_t volume = 1;
    for (auto& d : shape) {
        d = get<std::uint64_t>(in, "tensor dims");
        if (d == 0 || d > (1u << 28)) throw std::runtime_error("checkpoint tensor has a bad extent");
        volume *= d;
        if (volume > (1u << 28)) throw std::runtime_error("checkpoint tensor is too large");
    }
    std::vector<double> values(volume);
    for (auto& v : values) v = get<double>(in, "tensor values");
    return Tensor(std::move(shape), std::move(values));
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelConfig& config, const ModelParameters& params) {
    Network(config).check_parameters(params);
    out.write(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, kCheckpointVersion);
    put<std::uint64_t>(out, params.seed);
    const std::string json = to_json(config);
    put<std::uint64_t>(out, json.size());
    out.write(json.data(), static_cast<std::streamsize>(json.size()));
    put<std::uint64_t>(out, params.layers.size());
    for (const auto& layer : params.layers) {
        put<std::uint8_t>(out, layer.trainable() ? 1 : 0);
        if (!layer.trainable()) continue;
        put_tensor(out, layer.weights);
        put_tensor(out, layer.bias);
    }
    if (!out) throw std::runtime_error("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
    char magic[sizeof(kMagic)];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
        throw std::runtime_error("not a checkpoint file (bad magic)");
    }
    const auto version = get<std::uint32_t>(in, "version");
    if (version != kCheckpointVersion) {
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint cp;
    cp.params.seed = get<std::uint64_t>(in, "seed");
    const auto json_size = get<std::uint64_t>(in, "config size");
    if (json_size > (1u << 24)) throw std::runtime_error("checkpoint config block is implausibly large");
    std::string json(json_size, '\0');
    if (!in.read(json.data(), static_cast<std::streamsize>(json_size))) {
        throw std::runtime_error("checkpoint truncated while reading config");
    }
    cp.config = model_config_from_json(json);
    const auto layers = get<std::uint64_t>(in, "layer count");
    if (layers != cp.config.layers.size()) {
        throw std::runtime_error("checkpoint stores " + std::to_string(layers) + " layers but its config has " +
                                 std::to_string(cp.config.layers.size()));
    }
    cp.params.layers.resize(layers);
    for (auto& layer : cp.params.layers) {
        if (get<std::uint8_t>(in, "layer flag") == 0) continue;
        layer.weights = get_tensor(in);
        layer.bias = get_tensor(in);
    }
    Network(cp.config).check_parameters(cp.params);
    return cp;
}

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config, const ModelParameters& params) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        write_checkpoint(out, config, params);
        out.flush();
        if (!out) throw std::runtime_error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    return read_checkpoint(in);
}

}  // namespace traffic
