#pragma once

#include <array>
#include <string>

#include "driveval/rng.hpp"

namespace driveval {

inline constexpr int kFeatureCount = 7;

/// Observation-time perturbation profile standing in for weather and
/// lighting. Applied to the state features before the policy sees them.
struct Condition {
  std::string name = "clear";
  std::array<double, kFeatureCount> feature_std{};  // per-feature Gaussian std
  double curvature_bias = 0.0;                      // 1/m, added to all curvature features

  bool is_identity() const;
  bool operator==(const Condition&) const = default;
};

/// Zero profile; the training condition.
Condition clear_condition();
/// Generalisation profile used in town B.
Condition soft_rain_sunset_condition();
/// Looks up one of the built-in profiles by name.
Condition condition_by_name(const std::string& name);

}  // namespace driveval
