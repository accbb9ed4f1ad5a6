#include "driveval/vehicle.hpp"

#include <algorithm>
#include <cmath>

#include "driveval/error.hpp"

namespace driveval {

double wrap_angle(double radians) {
  double a = std::remainder(radians, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

Eigen::Vector2d Pose::heading() const { return {std::cos(yaw), std::sin(yaw)}; }

Action Action::clamped() const {
  return {std::clamp(steering, -1.0, 1.0), std::clamp(throttle, 0.0, 1.0),
          std::clamp(brake, 0.0, 1.0)};
}

VehicleState step_vehicle(const VehicleState& state, const Action& action, double dt,
                          const VehicleParams& params) {
  const bool finite = std::isfinite(state.pose.x) && std::isfinite(state.pose.y) &&
                      std::isfinite(state.pose.yaw) && std::isfinite(state.speed) &&
                      std::isfinite(action.steering) && std::isfinite(action.throttle) &&
                      std::isfinite(action.brake) && std::isfinite(dt);
  if (!finite) throw Error(ErrorKind::NonFiniteInput, "step_vehicle received a non-finite value");
  if (!(dt > 0.0 && dt <= 0.1)) throw Error(ErrorKind::InvalidArgument, "dt must lie in (0, 0.1]");

  const Action a = action.clamped();
  const double accel = params.max_accel * a.throttle - params.max_decel * a.brake -
                       params.drag * state.speed;

  VehicleState next;
  next.speed = std::max(0.0, state.speed + accel * dt);
  const double yaw_rate =
      next.speed * std::tan(params.max_wheel_angle * a.steering) / params.wheelbase;
  const double yaw = state.pose.yaw + yaw_rate * dt;
  next.pose.x = state.pose.x + next.speed * std::cos(yaw) * dt;
  next.pose.y = state.pose.y + next.speed * std::sin(yaw) * dt;
  next.pose.yaw = wrap_angle(yaw);
  return next;
}

VehicleState advance_control_period(const VehicleState& state, const Action& action,
                                    const VehicleParams& params) {
  constexpr int kSubsteps = 5;
  VehicleState s = state;
  for (int i = 0; i < kSubsteps; ++i) s = step_vehicle(s, action, kPhysicsStep, params);
  return s;
}

double turning_radius(double steering, const VehicleParams& params) {
  return params.wheelbase / std::tan(params.max_wheel_angle * std::clamp(steering, -1.0, 1.0));
}

}  // namespace driveval
