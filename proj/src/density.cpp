#include "traffic/density.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>
#include <string>

namespace traffic {

std::string_view to_string(DensityClass c) {
    switch (c) {
        case DensityClass::Empty: return "Empty";
        case DensityClass::Low: return "Low";
        case DensityClass::Medium: return "Medium";
        case DensityClass::High: return "High";
        case DensityClass::TrafficJam: return "TrafficJam";
    }
    return "?";
}

std::optional<DensityClass> parse_density_class(std::string_view text) {
    std::string key;
    for (char ch : text) {
        if (ch != ' ' && ch != '_') key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
    if (key == "empty") return DensityClass::Empty;
    if (key == "low") return DensityClass::Low;
    if (key == "medium") return DensityClass::Medium;
    if (key == "high") return DensityClass::High;
    if (key == "trafficjam" || key == "jam") return DensityClass::TrafficJam;
    std::size_t index = 0;
    const auto [ptr, ec] = std::from_chars(key.data(), key.data() + key.size(), index);
    if (ec == std::errc{} && ptr == key.data() + key.size() && !key.empty() && index < kDensityClassCount) {
        return static_cast<DensityClass>(index);
    }
    return std::nullopt;
}

DensityClass density_class_from_index(std::size_t index) {
    if (index >= kDensityClassCount) throw std::out_of_range("density class index " + std::to_string(index));
    return static_cast<DensityClass>(index);
}

DensityClass classify_count(double car_count) {
    if (std::isnan(car_count) || car_count < 0.0) {
        throw std::invalid_argument("car count must be non-negative, got " + std::to_string(car_count));
    }
    if (car_count <= 8.0) return DensityClass::Empty;
    if (car_count <= 20.0) return DensityClass::Low;
    if (car_count < 50.0) return DensityClass::Medium;
    if (car_count <= 100.0) return DensityClass::High;
    return DensityClass::TrafficJam;
}

}  // namespace traffic
