#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <variant>

#include <Eigen/Core>

#include "driveval/condition.hpp"
#include "driveval/rng.hpp"
#include "driveval/vehicle.hpp"
#include "driveval/world.hpp"

namespace driveval {

using FeatureVector = Eigen::Matrix<double, kFeatureCount, 1>;

inline constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "lateral_offset", "heading_error", "curvature_5", "curvature_10",
    "curvature_20",   "dist_to_intersection", "speed"};

/// What a policy sees at one control step. `expert` is the privileged
/// expert's action at the true state; learned policies only read its
/// throttle and brake, expert-based policies read all of it.
struct Observation {
  FeatureVector features = FeatureVector::Zero();
  Command command = Command::Continue;
  double speed = 0.0;
  Action expert;
};

/// Builds an observation from a lane frame, applying the condition profile.
/// `noise` may be null when the condition is the identity.
Observation make_observation(const LaneFrame& frame, const VehicleState& state, Command command,
                             const Action& expert, const Condition& condition, SplitMix64* noise);

class Policy {
 public:
  virtual ~Policy() = default;

  virtual std::string name() const = 0;
  virtual std::unique_ptr<Policy> clone() const = 0;
  /// Resets per-episode state; `episode` keys any random streams.
  virtual void begin_episode(std::uint64_t episode) { (void)episode; }
  virtual Action predict(const Observation& obs) = 0;
};

/// Clamped prediction.
Action predict(Policy& policy, const Observation& obs);

class ExpertPolicy final : public Policy {
 public:
  std::string name() const override { return "expert"; }
  std::unique_ptr<Policy> clone() const override { return std::make_unique<ExpertPolicy>(); }
  Action predict(const Observation& obs) override { return obs.expert; }
};

/// Adapter for ad-hoc policies (tests, CLI baselines).
class FunctionPolicy final : public Policy {
 public:
  using Fn = std::function<Action(const Observation&)>;
  FunctionPolicy(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

  std::string name() const override { return name_; }
  std::unique_ptr<Policy> clone() const override {
    return std::make_unique<FunctionPolicy>(name_, fn_);
  }
  Action predict(const Observation& obs) override { return fn_(obs); }

 private:
  std::string name_;
  Fn fn_;
};

namespace perturbation {
struct WhiteNoise { double std = 0.0; };
struct EpisodeBias { double magnitude = 0.0; };
struct OUNoise { double theta = 1.0; double std = 0.0; };
struct TurnFlip { double prob = 0.0; };
struct Quantize { double step = 0.0; };
}  // namespace perturbation

using PerturbationSpec =
    std::variant<perturbation::WhiteNoise, perturbation::EpisodeBias, perturbation::OUNoise,
                 perturbation::TurnFlip, perturbation::Quantize>;

/// Throws InvalidArgument when a parameter is out of range.
void validate(const PerturbationSpec& spec);
std::string describe(const PerturbationSpec& spec);

/// Wraps `base` and perturbs its steering. Deterministic given
/// (seed, episode, step); one instance per running episode.
class PerturbedPolicy final : public Policy {
 public:
  PerturbedPolicy(std::unique_ptr<Policy> base, PerturbationSpec spec, std::uint64_t seed);

  std::string name() const override;
  std::unique_ptr<Policy> clone() const override;
  void begin_episode(std::uint64_t episode) override;
  Action predict(const Observation& obs) override;

  const PerturbationSpec& spec() const { return spec_; }

 private:
  std::unique_ptr<Policy> base_;
  PerturbationSpec spec_;
  std::uint64_t seed_;
  std::uint64_t episode_ = 0;
  std::uint64_t step_ = 0;
  double ou_state_ = 0.0;
  double bias_ = 0.0;
  Command last_command_ = Command::Continue;
  std::uint64_t turn_run_ = 0;
  bool flip_ = false;
};

std::unique_ptr<Policy> make_perturbed(const Policy& base, const PerturbationSpec& spec,
                                       std::uint64_t seed);

}  // namespace driveval
