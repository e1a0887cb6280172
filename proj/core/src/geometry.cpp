#include "roadgen/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "roadgen/spline.hpp"

namespace roadgen {

double normalize_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, two_pi);  // (-pi, pi] up to the -pi edge
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

void GeometryConfig::check() const {
  if (block_size <= 0) throw std::invalid_argument("geometry: block_size must be positive");
  if (!(step > 0.0)) throw std::invalid_argument("geometry: step must be positive");
  if (!(lane_width > 0.0)) throw std::invalid_argument("geometry: lane_width must be positive");
  if (!(map_size > 0.0)) throw std::invalid_argument("geometry: map_size must be positive");
  if (!(curvature_limit > 0.0)) {
    throw std::invalid_argument("geometry: curvature_limit must be positive");
  }
}

RoadGenome RoadGenome::with_uniform_step(std::vector<double> curvatures, double step) {
  RoadGenome g;
  g.curvature = std::move(curvatures);
  g.arc_length.resize(g.curvature.size());
  for (std::size_t i = 0; i < g.arc_length.size(); ++i) {
    g.arc_length[i] = static_cast<double>(i + 1) * step;
  }
  return g;
}

void RoadGenome::check_invariants() const {
  if (curvature.empty()) throw std::invalid_argument("genome: empty");
  if (curvature.size() != arc_length.size()) {
    throw std::invalid_argument("genome: curvature/arc_length size mismatch");
  }
  double prev = 0.0;
  for (std::size_t i = 0; i < curvature.size(); ++i) {
    if (!std::isfinite(curvature[i])) throw std::invalid_argument("genome: non-finite curvature");
    if (!std::isfinite(arc_length[i]) || arc_length[i] <= prev) {
      throw std::invalid_argument("genome: arc lengths must be strictly increasing from > 0");
    }
    prev = arc_length[i];
  }
}

std::string to_string(RoadViolation v) {
  switch (v) {
    case RoadViolation::SelfIntersecting: return "SelfIntersecting";
    case RoadViolation::CurvatureOutOfRange: return "CurvatureOutOfRange";
    case RoadViolation::OutOfMapBounds: return "OutOfMapBounds";
  }
  return "?";
}

CartesianRoad reconstruct(const RoadGenome& genome, const Pose& start, double lane_width) {
  genome.check_invariants();

  CartesianRoad road;
  road.lane_width = lane_width;
  road.poses.reserve(genome.size() + 1);

  Pose p{start.x, start.y, normalize_angle(start.heading)};
  road.poses.push_back(p);
  for (std::size_t i = 0; i < genome.size(); ++i) {
    const double c = genome.curvature[i];
    const double ds = genome.step_at(i);
    const double h0 = p.heading;
    if (std::abs(c) < kStraightCurvatureEps) {
      p.x += ds * std::cos(h0);
      p.y += ds * std::sin(h0);
    } else {
      // Chord of the circular arc: integrates cos/sin of the linearly
      // advancing heading in closed form.
      const double h1 = h0 + c * ds;
      p.x += (std::sin(h1) - std::sin(h0)) / c;
      p.y += (std::cos(h0) - std::cos(h1)) / c;
    }
    p.heading = normalize_angle(h0 + c * ds);
    road.poses.push_back(p);
  }
  return road;
}

namespace {

int orientation_sign(double ax, double ay, double bx, double by, double cx, double cy) {
  const double v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
  return (v > 0.0) - (v < 0.0);
}

bool on_segment_collinear(double ax, double ay, double bx, double by, double px, double py) {
  return std::min(ax, bx) <= px && px <= std::max(ax, bx) &&
         std::min(ay, by) <= py && py <= std::max(ay, by);
}

}  // namespace

bool segments_intersect(double ax, double ay, double bx, double by,
                        double cx, double cy, double dx, double dy) {
  const int o1 = orientation_sign(ax, ay, bx, by, cx, cy);
  const int o2 = orientation_sign(ax, ay, bx, by, dx, dy);
  const int o3 = orientation_sign(cx, cy, dx, dy, ax, ay);
  const int o4 = orientation_sign(cx, cy, dx, dy, bx, by);

  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment_collinear(ax, ay, bx, by, cx, cy)) return true;
  if (o2 == 0 && on_segment_collinear(ax, ay, bx, by, dx, dy)) return true;
  if (o3 == 0 && on_segment_collinear(cx, cy, dx, dy, ax, ay)) return true;
  if (o4 == 0 && on_segment_collinear(cx, cy, dx, dy, bx, by)) return true;
  return false;
}

bool self_intersects(const std::vector<Pose>& poses) {
  const std::size_t n = poses.size() < 2 ? 0 : poses.size() - 1;
  if (n < 3) return false;

  // Broad phase: chords sorted by min-x, compared only while their x
  // intervals overlap.
  struct Chord {
    double min_x, max_x;
    std::size_t idx;
  };
  std::vector<Chord> chords(n);
  for (std::size_t i = 0; i < n; ++i) {
    chords[i] = {std::min(poses[i].x, poses[i + 1].x),
                 std::max(poses[i].x, poses[i + 1].x), i};
  }
  std::sort(chords.begin(), chords.end(),
            [](const Chord& a, const Chord& b) { return a.min_x < b.min_x; });

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (chords[j].min_x > chords[i].max_x) break;
      const std::size_t a = std::min(chords[i].idx, chords[j].idx);
      const std::size_t b = std::max(chords[i].idx, chords[j].idx);
      if (b - a <= 1) continue;  // shares a polyline vertex
      if (segments_intersect(poses[a].x, poses[a].y, poses[a + 1].x, poses[a + 1].y,
                             poses[b].x, poses[b].y, poses[b + 1].x, poses[b + 1].y)) {
        return true;
      }
    }
  }
  return false;
}

ValidityReport validate(const CartesianRoad& road, const RoadGenome& genome, double map_size,
                        double curvature_limit) {
  ValidityReport report;

  for (double c : genome.curvature) {
    if (c < -curvature_limit || c > curvature_limit) {
      report.violations.insert(RoadViolation::CurvatureOutOfRange);
      break;
    }
  }

  double min_x = std::numeric_limits<double>::infinity(), max_x = -min_x;
  double min_y = min_x, max_y = -min_x;
  for (const Pose& p : road.poses) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  if (!road.poses.empty() && (max_x - min_x > map_size || max_y - min_y > map_size)) {
    report.violations.insert(RoadViolation::OutOfMapBounds);
  }

  if (self_intersects(road.poses)) {
    report.violations.insert(RoadViolation::SelfIntersecting);
  }
  return report;
}

double genome_distance(const RoadGenome& a, const RoadGenome& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("genome_distance: length mismatch");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.curvature[i] - b.curvature[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

RoadGenome smooth(const RoadGenome& genome, double factor) {
  genome.check_invariants();
  RoadGenome out = genome;
  out.curvature = smoothing_spline_fit(genome.arc_length, genome.curvature, factor);
  return out;
}

}  // namespace roadgen
