#include "roadgen/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <vector>

#include "roadgen/serialization.hpp"

namespace roadgen {

namespace {

struct Bounds {
  double min_x = std::numeric_limits<double>::infinity();
  double min_y = std::numeric_limits<double>::infinity();
  double max_x = -std::numeric_limits<double>::infinity();
  double max_y = -std::numeric_limits<double>::infinity();
  void grow(double x, double y) {
    min_x = std::min(min_x, x);
    min_y = std::min(min_y, y);
    max_x = std::max(max_x, x);
    max_y = std::max(max_y, y);
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

/// Polyline offset from the centerline by `off` along the left normal.
std::vector<std::pair<double, double>> offset_line(const std::vector<Pose>& poses, double off) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(poses.size());
  for (const Pose& p : poses)
    pts.emplace_back(p.x - std::sin(p.heading) * off, p.y + std::cos(p.heading) * off);
  return pts;
}

void append_polyline(std::string& svg, const std::vector<std::pair<double, double>>& pts,
                     const Bounds& b, const char* style) {
  svg += "  <polyline fill=\"none\" ";
  svg += style;
  svg += " points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i != 0) svg += ' ';
    svg += fmt(pts[i].first - b.min_x);
    svg += ',';
    svg += fmt(b.max_y - pts[i].second);  // SVG's y axis points down
  }
  svg += "\"/>\n";
}

}  // namespace

std::string render_road_svg(const CartesianRoad& road, const SimulationTrace* trace) {
  const double half = 0.5 * road.lane_width;
  const auto left = offset_line(road.poses, half);
  const auto right = offset_line(road.poses, -half);
  std::vector<std::pair<double, double>> centre;
  centre.reserve(road.poses.size());
  for (const Pose& p : road.poses) centre.emplace_back(p.x, p.y);

  Bounds b;
  for (const auto& [x, y] : left) b.grow(x, y);
  for (const auto& [x, y] : right) b.grow(x, y);
  if (trace != nullptr)
    for (const auto& s : trace->states) b.grow(s.pose.x, s.pose.y);
  const double margin = 2.0;
  b.min_x -= margin;
  b.min_y -= margin;
  b.max_x += margin;
  b.max_y += margin;

  const double w = b.max_x - b.min_x;
  const double h = b.max_y - b.min_y;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " + fmt(w) + " " +
                    fmt(h) + "\" width=\"" + fmt(w * 8.0) + "\" height=\"" + fmt(h * 8.0) +
                    "\">\n";
  append_polyline(svg, left, b, "stroke=\"#888888\" stroke-width=\"0.25\"");
  append_polyline(svg, right, b, "stroke=\"#888888\" stroke-width=\"0.25\"");
  append_polyline(svg, centre, b, "stroke=\"#cccccc\" stroke-width=\"0.12\"");

  if (trace != nullptr && !trace->states.empty()) {
    std::vector<std::pair<double, double>> path;
    path.reserve(trace->states.size());
    for (const auto& s : trace->states) path.emplace_back(s.pose.x, s.pose.y);
    append_polyline(svg, path, b, "stroke=\"#2a8f2a\" stroke-width=\"0.3\"");

    const Centerline cl(road);
    for (const auto& ev : trace->oob_events) {
      const Pose at = cl.point_at(ev.arc_position);
      const double nx = -std::sin(at.heading);
      const double ny = std::cos(at.heading);
      const double ex = at.x + nx * ev.lateral_offset;
      const double ey = at.y + ny * ev.lateral_offset;
      svg += "  <circle cx=\"" + fmt(ex - b.min_x) + "\" cy=\"" + fmt(b.max_y - ey) +
             "\" r=\"0.6\" fill=\"#d22222\"/>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

void save_road_svg(const std::filesystem::path& path, const CartesianRoad& road,
                   const SimulationTrace* trace) {
  write_text(path, render_road_svg(road, trace));
}

}  // namespace roadgen
