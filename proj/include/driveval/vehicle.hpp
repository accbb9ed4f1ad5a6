#pragma once

#include <Eigen/Core>

namespace driveval {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;  // radians, (-pi, pi]

  Eigen::Vector2d position() const { return {x, y}; }
  Eigen::Vector2d heading() const;
};

struct VehicleState {
  Pose pose;
  double speed = 0.0;  // m/s, never negative
};

/// Steering is normalised to [-1, 1] (positive turns left), throttle and
/// brake to [0, 1].
struct Action {
  double steering = 0.0;
  double throttle = 0.0;
  double brake = 0.0;

  Action clamped() const;
};

struct VehicleParams {
  double wheelbase = 2.5;           // m
  double max_wheel_angle = 0.6109;  // rad
  double max_accel = 3.0;           // m/s^2 at full throttle
  double max_decel = 8.0;           // m/s^2 at full brake
  double drag = 0.05;               // 1/s
};

inline constexpr double kPhysicsStep = 0.02;   // s
inline constexpr double kControlPeriod = 0.1;  // s (10 Hz)

/// One kinematic-bicycle step. Speed is updated first, then heading from the
/// new speed, then position along the new heading (semi-implicit Euler).
VehicleState step_vehicle(const VehicleState& state, const Action& action, double dt,
                          const VehicleParams& params = {});

/// Holds `action` over one control period using fixed physics substeps.
VehicleState advance_control_period(const VehicleState& state, const Action& action,
                                    const VehicleParams& params = {});

/// Radius of the steady turning circle for a normalised steering command.
double turning_radius(double steering, const VehicleParams& params = {});

}  // namespace driveval
