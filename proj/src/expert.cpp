#include "driveval/expert.hpp"

#include <algorithm>
#include <cmath>

#include "driveval/error.hpp"

namespace driveval {

double expert_target_speed(const Route& route, double progress, const ExpertParams& params) {
  const double kappa = std::max(std::abs(route.curvature_at(progress)),
                                std::abs(route.curvature_at(progress + 10.0)));
  return kappa > params.turn_curvature ? params.turn_speed : params.cruise_speed;
}

Action longitudinal_control(double speed, double target_speed, const ExpertParams& params,
                            const VehicleParams& vehicle) {
  const double accel = params.speed_gain * (target_speed - speed) + vehicle.drag * speed;
  Action a;
  a.throttle = std::clamp(accel / vehicle.max_accel, 0.0, 1.0);
  a.brake = std::clamp(-accel / vehicle.max_decel, 0.0, 1.0);
  return a;
}

Action expert_control(const Route& route, const VehicleState& state, double progress,
                      const ExpertParams& params, const VehicleParams& vehicle) {
  const double lookahead = std::max(params.min_lookahead, params.lookahead_time * state.speed);
  const Eigen::Vector2d target = route.point_at(progress + lookahead);
  const Eigen::Vector2d delta = target - state.pose.position();
  const double c = std::cos(state.pose.yaw);
  const double s = std::sin(state.pose.yaw);
  const double forward = c * delta.x() + s * delta.y();
  const double left = -s * delta.x() + c * delta.y();
  const double dist = std::hypot(forward, left);

  Action a = longitudinal_control(state.speed, expert_target_speed(route, progress, params),
                                  params, vehicle);
  if (dist > 1e-9) {
    const double alpha = std::atan2(left, forward);
    const double wheel = std::atan(2.0 * vehicle.wheelbase * std::sin(alpha) / dist);
    a.steering = std::clamp(wheel / vehicle.max_wheel_angle, -1.0, 1.0);
  }
  return a;
}

Action expert_action(const TownMap& map, const Route& route, const VehicleState& state,
                     const ExpertParams& params) {
  (void)map;
  const PathProjection proj = route.project(state.pose.position());
  if (proj.distance > kOffRouteDistance) {
    throw Error(ErrorKind::OffRoute, "expert queried more than 20 m from the route");
  }
  return expert_control(route, state, proj.s, params);
}

double triangular_impulse(double t, const ImpulseSpec& spec) {
  if (spec.duration <= 0.0) return 0.0;
  const double u = (t - spec.t0) / spec.duration;
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return spec.peak * (1.0 - std::abs(2.0 * u - 1.0));
}

}  // namespace driveval
