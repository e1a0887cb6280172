#include "roadgen/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace roadgen {

namespace {

constexpr double kDegenerateChord = 1e-12;
constexpr double kEndEps = 1e-9;

/// Out-of-bound threshold on |lateral offset|: half a lane minus half the
/// car, relaxed by the tolerance fraction of the car width.
double oob_threshold(double lane_width, double car_width, double tolerance) {
  return 0.5 * lane_width - 0.5 * car_width + tolerance * car_width;
}

}  // namespace

void SimulatorConfig::check() const {
  if (!(v_min > 0.0) || !(v_max >= v_min))
    throw std::invalid_argument("simulator: need 0 < v_min <= v_max");
  if (!(lookahead > 0.0)) throw std::invalid_argument("simulator: lookahead must be positive");
  if (!(speed_preview >= 0.0))
    throw std::invalid_argument("simulator: speed_preview must be non-negative");
  if (!(max_lateral_accel > 0.0) || !(max_longitudinal_accel > 0.0))
    throw std::invalid_argument("simulator: acceleration limits must be positive");
  if (!(wheelbase > 0.0) || !(car_width > 0.0))
    throw std::invalid_argument("simulator: vehicle dimensions must be positive");
  if (!(timestep > 0.0)) throw std::invalid_argument("simulator: timestep must be positive");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("simulator: tolerance must be >= 0");
  if (max_steps <= 0) throw std::invalid_argument("simulator: max_steps must be positive");
}

bool LabeledRoad::any_positive() const {
  return std::any_of(labels.begin(), labels.end(), [](bool b) { return b; });
}

Centerline::Centerline(const CartesianRoad& road) {
  if (road.poses.size() < 2)
    throw std::invalid_argument("centerline needs at least two road poses");
  segments_.reserve(road.poses.size() - 1);
  double arc0 = 0.0;
  for (std::size_t i = 0; i + 1 < road.poses.size(); ++i) {
    const Pose& a = road.poses[i];
    const Pose& b = road.poses[i + 1];
    Segment s{};
    s.x0 = a.x;
    s.y0 = a.y;
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    s.chord = std::hypot(dx, dy);
    if (s.chord < kDegenerateChord) {
      throw std::invalid_argument("centerline: degenerate (zero-length) segment");
    }
    s.ux = dx / s.chord;
    s.uy = dy / s.chord;
    // Exact arc recovery from chord length and turn angle: for a circular
    // arc, chord = arc * sin(theta/2) / (theta/2).
    const double theta = normalize_angle(b.heading - a.heading);
    if (std::abs(theta) < 1e-12) {
      s.arc_len = s.chord;
      s.curvature = 0.0;
    } else {
      const double half = 0.5 * theta;
      s.arc_len = s.chord * half / std::sin(half);
      s.curvature = theta / s.arc_len;
    }
    s.arc0 = arc0;
    arc0 += s.arc_len;
    segments_.push_back(s);
  }
  total_arc_ = arc0;
}

Centerline::Projection Centerline::project(double x, double y) const {
  return project_window(x, y, 0.0, total_arc_);
}

Centerline::Projection Centerline::project_window(double x, double y, double arc_lo,
                                                  double arc_hi) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  Projection best{0.0, 0.0, 0};
  bool found = false;
  for (int pass = 0; pass < 2 && !found; ++pass) {
    for (std::size_t i = 0; i < segments_.size(); ++i) {
      const Segment& s = segments_[i];
      if (pass == 0 && (s.arc0 + s.arc_len < arc_lo || s.arc0 > arc_hi)) continue;
      const double rx = x - s.x0;
      const double ry = y - s.y0;
      const double t = std::clamp(rx * s.ux + ry * s.uy, 0.0, s.chord);
      const double px = s.x0 + s.ux * t;
      const double py = s.y0 + s.uy * t;
      const double ddx = x - px;
      const double ddy = y - py;
      const double d2 = ddx * ddx + ddy * ddy;
      if (d2 < best_d2) {
        best_d2 = d2;
        const double cross = s.ux * ddy - s.uy * ddx;  // positive left of travel
        best.arc = s.arc0 + (t / s.chord) * s.arc_len;
        best.offset = std::copysign(std::sqrt(d2), cross);
        best.segment = i;
        found = true;
      }
    }
  }
  best.arc = std::clamp(best.arc, 0.0, total_arc_);
  return best;
}

Pose Centerline::point_at(double arc) const {
  const double a = std::clamp(arc, 0.0, total_arc_);
  // Last segment whose start is <= a.
  std::size_t idx = segments_.size() - 1;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].arc0 > a) {
      idx = i == 0 ? 0 : i - 1;
      break;
    }
  }
  const Segment& s = segments_[idx];
  const double frac = std::clamp((a - s.arc0) / s.arc_len, 0.0, 1.0);
  const double t = frac * s.chord;
  return Pose{s.x0 + s.ux * t, s.y0 + s.uy * t, std::atan2(s.uy, s.ux)};
}

double Centerline::curvature_at(double arc) const {
  const double a = std::clamp(arc, 0.0, total_arc_);
  std::size_t idx = segments_.size() - 1;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    if (segments_[i].arc0 > a) {
      idx = i == 0 ? 0 : i - 1;
      break;
    }
  }
  return segments_[idx].curvature;
}

std::optional<double> detect_oob(const VehicleState& state, const CartesianRoad& road,
                                 double tolerance, double car_width) {
  const Centerline cl(road);
  const auto proj = cl.project(state.pose.x, state.pose.y);
  const double thr = oob_threshold(road.lane_width, car_width, tolerance);
  if (std::abs(proj.offset) > thr) return proj.offset;
  return std::nullopt;
}

SimulationTrace simulate(const CartesianRoad& road, const SimulatorConfig& cfg) {
  cfg.check();
  const Centerline cl(road);
  const double thr = oob_threshold(road.lane_width, cfg.car_width, cfg.tolerance);
  const double dt = cfg.timestep;

  // Fastest speed admissible at `arc`, looking `speed_preview` metres ahead:
  // every upcoming curve must be reachable at its grip speed under the
  // braking authority.
  auto allowed_speed = [&](double arc) {
    double v_allow = cfg.v_max;
    const double horizon = arc + cfg.speed_preview;
    double a = arc;
    while (a <= horizon && a < cl.total_arc()) {
      const double kappa = std::abs(cl.curvature_at(a));
      double v_curve = cfg.v_max;
      if (kappa > 1e-12) v_curve = std::min(cfg.v_max, std::sqrt(cfg.max_lateral_accel / kappa));
      const double dist = std::max(0.0, a - arc);
      const double reachable =
          std::sqrt(v_curve * v_curve + 2.0 * cfg.max_longitudinal_accel * dist);
      v_allow = std::min(v_allow, reachable);
      a += 0.5;  // curvature is piecewise constant on ~1 m segments
    }
    return std::max(cfg.v_min, v_allow);
  };

  SimulationTrace trace;
  VehicleState s;
  s.pose = road.poses.front();
  s.speed = allowed_speed(0.0);  // flying start at the locally safe speed

  // Tracker anchor: projections stay within a window around the previous
  // arc so a looping road cannot capture the vehicle onto a distant stretch.
  double anchor = 0.0;
  const double kBack = 10.0;
  const double kFwd = 20.0;

  for (int step = 0; step < cfg.max_steps; ++step) {
    const auto proj = cl.project_window(s.pose.x, s.pose.y, anchor - kBack, anchor + kFwd);

    // Pure pursuit toward the point `lookahead` metres further along.
    const Pose goal = cl.point_at(proj.arc + cfg.lookahead);
    const double gx = goal.x - s.pose.x;
    const double gy = goal.y - s.pose.y;
    const double dist = std::hypot(gx, gy);
    double kappa_cmd = 0.0;
    if (dist > 1e-6) {
      const double alpha = normalize_angle(std::atan2(gy, gx) - s.pose.heading);
      kappa_cmd = 2.0 * std::sin(alpha) / dist;
    }
    // Grip limits the curvature the car can actually hold at this speed.
    const double kappa_grip = cfg.max_lateral_accel / std::max(s.speed * s.speed, 1e-6);
    const double kappa = std::clamp(kappa_cmd, -kappa_grip, kappa_grip);

    // Longitudinal control toward the preview-limited target speed.
    const double v_target = allowed_speed(proj.arc);
    const double dv = std::clamp(v_target - s.speed, -cfg.max_longitudinal_accel * dt,
                                 cfg.max_longitudinal_accel * dt);
    s.speed = std::clamp(s.speed + dv, cfg.v_min, cfg.v_max);

    // Advance along a constant-curvature arc of length v*dt.
    const double ds = s.speed * dt;
    if (std::abs(kappa) < 1e-12) {
      s.pose.x += ds * std::cos(s.pose.heading);
      s.pose.y += ds * std::sin(s.pose.heading);
    } else {
      const double h0 = s.pose.heading;
      const double h1 = h0 + kappa * ds;
      s.pose.x += (std::sin(h1) - std::sin(h0)) / kappa;
      s.pose.y += -(std::cos(h1) - std::cos(h0)) / kappa;
      s.pose.heading = normalize_angle(h1);
    }
    trace.states.push_back(s);

    const auto after = cl.project_window(s.pose.x, s.pose.y, anchor - kBack, anchor + kFwd);
    anchor = after.arc;
    if (std::abs(after.offset) > thr) {
      trace.oob_events.push_back(OobEvent{after.arc, after.offset});
      trace.outcome = Outcome::Fail;
      break;
    }
    if (after.arc >= cl.total_arc() - kEndEps) break;
  }

  trace.duration = static_cast<double>(trace.states.size()) * dt;
  if (trace.oob_events.empty()) trace.outcome = Outcome::Pass;
  return trace;
}

std::size_t label_index_for_arc(const RoadGenome& genome, double arc) {
  const auto& ends = genome.arc_length;
  const auto it = std::lower_bound(ends.begin(), ends.end(), arc);
  if (it == ends.end()) return ends.size() - 1;
  return static_cast<std::size_t>(it - ends.begin());
}

LabeledRoad label_road(const RoadGenome& genome, const SimulationTrace& trace) {
  genome.check_invariants();
  LabeledRoad out;
  out.genome = genome;
  out.labels.assign(genome.size(), false);
  for (const auto& ev : trace.oob_events) {
    out.labels[label_index_for_arc(genome, ev.arc_position)] = true;
  }
  return out;
}

}  // namespace roadgen
