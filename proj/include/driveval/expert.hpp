#pragma once

#include "driveval/vehicle.hpp"
#include "driveval/world.hpp"

namespace driveval {

struct ExpertParams {
  double min_lookahead = 4.0;        // m
  double lookahead_time = 0.5;       // s
  double cruise_speed = 35.0 / 3.6;  // m/s
  double turn_speed = 20.0 / 3.6;    // m/s
  double turn_curvature = 0.02;      // 1/m
  double speed_gain = 0.5;           // 1/s
};

/// Pure-pursuit route follower with proportional speed control. Throws
/// OffRoute when the vehicle is more than 20 m from the route.
Action expert_action(const TownMap& map, const Route& route, const VehicleState& state,
                     const ExpertParams& params = {});

/// The same controller without the off-route check, for callers that
/// already hold a projection (episode runner, data collector).
Action expert_control(const Route& route, const VehicleState& state, double progress,
                      const ExpertParams& params = {}, const VehicleParams& vehicle = {});

double expert_target_speed(const Route& route, double progress, const ExpertParams& params = {});

/// Throttle/brake from the proportional speed loop (drag fed forward).
Action longitudinal_control(double speed, double target_speed, const ExpertParams& params = {},
                            const VehicleParams& vehicle = {});

/// Steering offset injected during noisy data collection.
struct ImpulseSpec {
  double t0 = 0.0;        // s
  double duration = 1.0;  // s, > 0
  double peak = 0.0;      // |peak| <= 0.5
};

/// Zero outside [t0, t0 + duration]; linear up to `peak` at the midpoint and
/// back down.
double triangular_impulse(double t, const ImpulseSpec& spec);

}  // namespace driveval
