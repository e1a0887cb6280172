#pragma once

#include <filesystem>
#include <string>

#include "roadgen/geometry.hpp"
#include "roadgen/simulator.hpp"

namespace roadgen {

/// Deterministic SVG picture of a road: grey lane boundaries, light
/// centerline, and (when a trace is given) the driven path in green with
/// red markers at the out-of-bound events. Byte-stable across runs.
std::string render_road_svg(const CartesianRoad& road, const SimulationTrace* trace);

void save_road_svg(const std::filesystem::path& path, const CartesianRoad& road,
                   const SimulationTrace* trace);

}  // namespace roadgen
