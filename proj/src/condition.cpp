#include "driveval/condition.hpp"

#include <algorithm>

#include "driveval/error.hpp"

namespace driveval {

bool Condition::is_identity() const {
  return curvature_bias == 0.0 &&
         std::all_of(feature_std.begin(), feature_std.end(), [](double s) { return s == 0.0; });
}

Condition clear_condition() { return {}; }

Condition soft_rain_sunset_condition() {
  Condition c;
  c.name = "soft_rain_sunset";
  // offset, heading, curvature@5/10/20, dist_to_intersection, speed
  c.feature_std = {0.05, 0.01, 0.002, 0.002, 0.002, 1.0, 0.1};
  c.curvature_bias = 0.004;
  return c;
}

Condition condition_by_name(const std::string& name) {
  if (name == "clear") return clear_condition();
  if (name == "soft_rain_sunset") return soft_rain_sunset_condition();
  throw Error(ErrorKind::InvalidArgument, "unknown condition '" + name + "'");
}

}  // namespace driveval
