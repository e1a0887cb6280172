#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "roadgen/geometry.hpp"

namespace roadgen {

/// Closed-loop test driver: pure-pursuit steering on a kinematic bicycle
/// with a grip-limited curvature budget and a curvature-aware speed target.
struct SimulatorConfig {
  double v_max = 19.44;               // 70 km/h cruise ceiling [m/s]
  double v_min = 5.0;                 // minimum controllable speed [m/s]
  double lookahead = 6.0;             // pure-pursuit goal distance along the road [m]
  double speed_preview = 12.0;        // how far ahead the speed planner sees [m]
  double max_lateral_accel = 4.0;     // grip budget [m/s^2]
  double max_longitudinal_accel = 3.0;  // braking/accelerating authority [m/s^2]
  double wheelbase = 2.5;             // [m]
  double car_width = 2.0;             // [m]
  double timestep = 0.1;              // [s]
  double tolerance = 0.3;             // OOB slack as a fraction of car width
  int max_steps = 10000;

  void check() const;  // throws std::invalid_argument
};

struct VehicleState {
  Pose pose;
  double speed = 0.0;  // [m/s]
};

struct OobEvent {
  double arc_position;    // arc length along the centerline [m]
  double lateral_offset;  // signed offset at the event, positive left [m]
};

enum class Outcome { Pass, Fail };

/// Execution record. `states` holds the post-step states only (the starting
/// pose is not an executed step), so duration == states.size() * timestep.
struct SimulationTrace {
  std::vector<VehicleState> states;
  std::vector<OobEvent> oob_events;
  Outcome outcome = Outcome::Pass;
  double duration = 0.0;  // [s]
};

/// Training example: a genome with one boolean per point, true where an OOB
/// event occurred within that point's segment.
struct LabeledRoad {
  RoadGenome genome;
  std::vector<bool> labels;

  bool any_positive() const;
};

/// Arc-parameterized view of a reconstructed road: projection, sampling and
/// piecewise curvature lookup. Segment arc lengths are recovered exactly
/// from chord length and turn angle, so arcs here match genome arcs.
class Centerline {
 public:
  explicit Centerline(const CartesianRoad& road);

  double total_arc() const { return total_arc_; }

  struct Projection {
    double arc;          // clamped to [0, total_arc]
    double offset;       // signed; positive to the left of travel
    std::size_t segment;
  };
  Projection project(double x, double y) const;

  /// Projection restricted to segments overlapping [arc_lo, arc_hi]; keeps a
  /// moving tracker on its local stretch when distant parts of the course
  /// pass nearby. Falls back to the whole road when the window is empty.
  Projection project_window(double x, double y, double arc_lo, double arc_hi) const;

  /// Pose on the chord polyline at the given arc (clamped).
  Pose point_at(double arc) const;

  /// Curvature of the segment containing `arc` (clamped at the ends).
  double curvature_at(double arc) const;

 private:
  struct Segment {
    double x0, y0;
    double ux, uy;    // unit chord direction
    double chord;     // chord length
    double arc0;      // cumulative exact arc at segment start
    double arc_len;   // exact arc length
    double curvature;
  };
  std::vector<Segment> segments_;
  double total_arc_ = 0.0;
};

/// Returns the signed lateral offset when the vehicle body (half the car
/// width, relaxed by tolerance * car_width) crosses a lane boundary,
/// std::nullopt while it stays inside.
std::optional<double> detect_oob(const VehicleState& state, const CartesianRoad& road,
                                 double tolerance, double car_width);

/// Drives the road start to end. Deterministic; aborts at the first OOB
/// state (which is recorded in the trace) or when max_steps is exhausted.
SimulationTrace simulate(const CartesianRoad& road, const SimulatorConfig& cfg);

/// Genome point whose segment contains the arc position: arcs on a segment
/// boundary belong to the earlier point, arcs beyond the road to the last.
std::size_t label_index_for_arc(const RoadGenome& genome, double arc);

/// Folds the trace's OOB events into per-point labels.
LabeledRoad label_road(const RoadGenome& genome, const SimulationTrace& trace);

}  // namespace roadgen
