#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

namespace roadgen {

inline constexpr int kDefaultBlockSize = 50;
inline constexpr double kDefaultStep = 1.0;
inline constexpr double kDefaultLaneWidth = 4.0;
inline constexpr double kDefaultMapSize = 200.0;
inline constexpr double kCurvatureLimit = 0.1;
inline constexpr double kStraightCurvatureEps = 1e-9;

/// Road-encoding parameters shared across generation, validation and search.
struct GeometryConfig {
  int block_size = kDefaultBlockSize;
  double step = kDefaultStep;          // metres between consecutive points
  double lane_width = kDefaultLaneWidth;
  double map_size = kDefaultMapSize;   // side of the square the road must fit in
  double curvature_limit = kCurvatureLimit;

  void check() const;  // throws std::invalid_argument
};

/// Frenet-space road chromosome: per-point signed curvature [1/m] plus the
/// cumulative arc length [m] at the end of each constant-curvature segment.
struct RoadGenome {
  std::vector<double> curvature;
  std::vector<double> arc_length;

  std::size_t size() const { return curvature.size(); }

  /// Arc-length increment of segment i (arc_length[0] is measured from 0).
  double step_at(std::size_t i) const {
    return i == 0 ? arc_length[0] : arc_length[i] - arc_length[i - 1];
  }

  /// Genome on the uniform grid s_i = (i+1)*step.
  static RoadGenome with_uniform_step(std::vector<double> curvatures, double step = kDefaultStep);

  /// Throws std::invalid_argument when the type invariants are violated
  /// (size mismatch, non-finite curvature, non-increasing arc length).
  void check_invariants() const;
};

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // radians, normalized to (-pi, pi]
};

/// Wraps an angle to (-pi, pi].
double normalize_angle(double a);

/// Planar road materialized from a genome: one pose per genome point plus
/// the start pose.
struct CartesianRoad {
  std::vector<Pose> poses;
  double lane_width = kDefaultLaneWidth;

  std::size_t segment_count() const { return poses.empty() ? 0 : poses.size() - 1; }
};

enum class RoadViolation {
  SelfIntersecting,
  CurvatureOutOfRange,
  OutOfMapBounds,
};

std::string to_string(RoadViolation v);

struct ValidityReport {
  std::set<RoadViolation> violations;
  bool valid() const { return violations.empty(); }
};

/// Exact piecewise-constant-curvature integration of the genome from the
/// start pose. Over a segment of length ds with curvature c the heading
/// advances by c*ds; the position follows the circular arc of radius 1/|c|
/// (straight chord when |c| < 1e-9). No numeric ODE stepping.
CartesianRoad reconstruct(const RoadGenome& genome, const Pose& start,
                          double lane_width = kDefaultLaneWidth);

/// Validity per the generation constraints: curvature within
/// [-curvature_limit, curvature_limit], centerline extent within
/// map_size x map_size after translating its bounding box to the origin,
/// and no two non-adjacent centerline chords intersecting.
ValidityReport validate(const CartesianRoad& road, const RoadGenome& genome,
                        double map_size = kDefaultMapSize,
                        double curvature_limit = kCurvatureLimit);

/// True when any two non-adjacent chords of the polyline touch or cross.
/// Chords sharing a polyline vertex (adjacent pairs) are excluded.
bool self_intersects(const std::vector<Pose>& poses);

/// Exact segment-segment intersection test. Touching counts as
/// intersecting, including an endpoint on the other segment's interior.
bool segments_intersect(double ax, double ay, double bx, double by,
                        double cx, double cy, double dx, double dy);

/// L2 norm of the difference of the curvature vectors. Arc lengths are
/// excluded: under the fixed-step encoding they are identical across
/// genomes. Throws std::invalid_argument on length mismatch.
double genome_distance(const RoadGenome& a, const RoadGenome& b);

/// Smoothing-spline pass over the curvature-vs-arc-length profile; arc
/// lengths are unchanged. factor bounds the sum of squared residuals
/// (factor = 0 interpolates, i.e. returns the input).
RoadGenome smooth(const RoadGenome& genome, double factor);

}  // namespace roadgen
