#include "driveval/policy.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "driveval/error.hpp"

namespace driveval {

Observation make_observation(const LaneFrame& frame, const VehicleState& state, Command command,
                             const Action& expert, const Condition& condition, SplitMix64* noise) {
  Observation obs;
  obs.features << frame.lateral_offset, frame.heading_error, frame.curvature_ahead[0],
      frame.curvature_ahead[1], frame.curvature_ahead[2], frame.dist_to_intersection, state.speed;
  obs.command = command;
  obs.speed = state.speed;
  obs.expert = expert;
  if (!condition.is_identity()) {
    for (int k = 2; k <= 4; ++k) obs.features[k] += condition.curvature_bias;
    if (noise != nullptr) {
      std::normal_distribution<double> gauss(0.0, 1.0);
      for (int k = 0; k < kFeatureCount; ++k) {
        if (condition.feature_std[k] > 0.0) obs.features[k] += condition.feature_std[k] * gauss(*noise);
      }
    }
  }
  return obs;
}

Action predict(Policy& policy, const Observation& obs) { return policy.predict(obs).clamped(); }

void validate(const PerturbationSpec& spec) {
  auto bad = [](const char* what) { throw Error(ErrorKind::InvalidArgument, what); };
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, perturbation::WhiteNoise>) {
          if (!(p.std >= 0.0)) bad("WhiteNoise std must be >= 0");
        } else if constexpr (std::is_same_v<T, perturbation::EpisodeBias>) {
          if (!(p.magnitude >= 0.0)) bad("EpisodeBias magnitude must be >= 0");
        } else if constexpr (std::is_same_v<T, perturbation::OUNoise>) {
          if (!(p.theta > 0.0)) bad("OUNoise theta must be > 0");
          if (!(p.std >= 0.0)) bad("OUNoise std must be >= 0");
        } else if constexpr (std::is_same_v<T, perturbation::TurnFlip>) {
          if (!(p.prob >= 0.0 && p.prob <= 1.0)) bad("TurnFlip prob must lie in [0, 1]");
        } else {
          if (!(p.step >= 0.0)) bad("Quantize step must be >= 0");
        }
      },
      spec);
}

std::string describe(const PerturbationSpec& spec) {
  std::ostringstream os;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, perturbation::WhiteNoise>) {
          os << "white_noise(" << p.std << ")";
        } else if constexpr (std::is_same_v<T, perturbation::EpisodeBias>) {
          os << "episode_bias(" << p.magnitude << ")";
        } else if constexpr (std::is_same_v<T, perturbation::OUNoise>) {
          os << "ou_noise(" << p.theta << "," << p.std << ")";
        } else if constexpr (std::is_same_v<T, perturbation::TurnFlip>) {
          os << "turn_flip(" << p.prob << ")";
        } else {
          os << "quantize(" << p.step << ")";
        }
      },
      spec);
  return os.str();
}

PerturbedPolicy::PerturbedPolicy(std::unique_ptr<Policy> base, PerturbationSpec spec,
                                 std::uint64_t seed)
    : base_(std::move(base)), spec_(spec), seed_(seed) {
  validate(spec_);
  begin_episode(0);
}

std::string PerturbedPolicy::name() const { return base_->name() + "+" + describe(spec_); }

std::unique_ptr<Policy> PerturbedPolicy::clone() const {
  return std::make_unique<PerturbedPolicy>(base_->clone(), spec_, seed_);
}

void PerturbedPolicy::begin_episode(std::uint64_t episode) {
  base_->begin_episode(episode);
  episode_ = episode;
  step_ = 0;
  ou_state_ = 0.0;
  last_command_ = Command::Continue;
  turn_run_ = 0;
  flip_ = false;
  if (const auto* b = std::get_if<perturbation::EpisodeBias>(&spec_)) {
    SplitMix64 rng(derive_seed(seed_, "episode_bias", episode));
    bias_ = (rng() & 1U) ? b->magnitude : -b->magnitude;
  } else {
    bias_ = 0.0;
  }
}

Action PerturbedPolicy::predict(const Observation& obs) {
  Action a = base_->predict(obs);
  const std::uint64_t step = step_++;
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, perturbation::WhiteNoise>) {
          if (p.std > 0.0) {
            SplitMix64 rng(derive_seed(seed_, "white_noise", episode_, step));
            a.steering += std::normal_distribution<double>(0.0, p.std)(rng);
          }
        } else if constexpr (std::is_same_v<T, perturbation::EpisodeBias>) {
          a.steering += bias_;
        } else if constexpr (std::is_same_v<T, perturbation::OUNoise>) {
          a.steering += ou_state_;
          if (p.std > 0.0) {
            SplitMix64 rng(derive_seed(seed_, "ou_noise", episode_, step));
            const double sd = p.std * std::sqrt(kControlPeriod);
            ou_state_ = ou_state_ * (1.0 - p.theta * kControlPeriod) +
                        std::normal_distribution<double>(0.0, sd)(rng);
          }
        } else if constexpr (std::is_same_v<T, perturbation::TurnFlip>) {
          const bool turning = obs.command == Command::Left || obs.command == Command::Right;
          if (turning && obs.command != last_command_) {
            SplitMix64 rng(derive_seed(seed_, "turn_flip", episode_, turn_run_++));
            flip_ = rng.uniform() < p.prob;
          }
          if (turning && flip_) a.steering = -a.steering;
        } else {
          if (p.step > 0.0) a.steering = std::round(a.steering / p.step) * p.step;
        }
      },
      spec_);
  last_command_ = obs.command;
  return a.clamped();
}

std::unique_ptr<Policy> make_perturbed(const Policy& base, const PerturbationSpec& spec,
                                       std::uint64_t seed) {
  return std::make_unique<PerturbedPolicy>(base.clone(), spec, seed);
}

}  // namespace driveval
