#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace traffic {

/// Five ordered traffic-density levels for a camera frame.
enum class DensityClass : std::size_t { Empty = 0, Low = 1, Medium = 2, High = 3, TrafficJam = 4 };

inline constexpr std::size_t kDensityClassCount = 5;
inline constexpr std::array<DensityClass, kDensityClassCount> kDensityClasses{
    DensityClass::Empty, DensityClass::Low, DensityClass::Medium, DensityClass::High, DensityClass::TrafficJam};

std::string_view to_string(DensityClass c);
/// Accepts the canonical names (case-insensitive, "Traffic Jam" with or without space) or a class index.
std::optional<DensityClass> parse_density_class(std::string_view text);

inline std::size_t index_of(DensityClass c) { return static_cast<std::size_t>(c); }
DensityClass density_class_from_index(std::size_t index);

/// Maps a (possibly fractional, motorcycles count half) car count to its class:
/// [0,8] Empty, (8,20] Low, (20,50) Medium, [50,100] High, above 100 TrafficJam.
DensityClass classify_count(double car_count);

}  // namespace traffic
