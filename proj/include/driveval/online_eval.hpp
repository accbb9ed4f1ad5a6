#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "driveval/condition.hpp"
#include "driveval/policy.hpp"
#include "driveval/world.hpp"

namespace driveval {

enum class InfractionKind { OffRoad, OppositeLane, Collision };
enum class Termination { Goal, Timeout, Stuck };

std::string_view to_string(InfractionKind kind);
std::string_view to_string(Termination termination);

inline constexpr int kSuiteTrials = 25;
inline constexpr double kGoalRadius = 2.0;          // m
inline constexpr double kBudgetSpeed = 10.0 / 3.6;  // m/s used for the time budget
inline constexpr double kStuckSpeed = 0.1;          // m/s
inline constexpr double kStuckTime = 10.0;          // s
inline constexpr double kOffRoadMargin = 0.5;       // m beyond the paved edge
inline constexpr double kSidewalkWidth = 1.5;       // m; buildings start beyond it
inline constexpr double kSustainTime = 0.5;         // s
inline constexpr double kRearmTime = 2.0;           // s

struct EpisodeSpec {
  Route route;
  double time_budget = 0.0;  // s
  double goal_radius = kGoalRadius;
  Condition condition;
  std::uint64_t seed = 0;
  std::uint64_t episode_index = 0;
};

/// Spec with the default budget (route length at 10 km/h).
EpisodeSpec make_episode_spec(Route route, const Condition& condition, std::uint64_t seed,
                              std::uint64_t episode_index = 0);

struct InfractionEvent {
  InfractionKind kind = InfractionKind::OffRoad;
  double time = 0.0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
};

struct TrajectoryPoint {
  double time = 0.0;
  VehicleState state;
  LaneFrame frame;
};

struct EpisodeResult {
  bool success = false;
  double completion = 0.0;      // fraction of along-route distance covered; may be negative
  double distance_driven = 0.0;  // km
  std::vector<InfractionEvent> infractions;
  Termination termination = Termination::Timeout;
  double duration = 0.0;          // s
  double max_abs_lateral = 0.0;   // m
  int start = 0;
  int goal = 0;
  std::uint64_t seed = 0;
};

/// Debounced infractions: off-road (more than 0.5 m beyond the paved surface)
/// and opposite-lane driving count once sustained for 0.5 s; a collision with
/// roadside buildings counts immediately. Each kind re-arms after 2 s clear.
std::vector<InfractionEvent> detect_infractions(const TownMap& map,
                                                std::span<const TrajectoryPoint> trajectory);

/// Closed-loop drive at 10 Hz. Infractions never end an episode; hitting a
/// building immobilises the car, which then ends as Stuck.
EpisodeResult run_episode(const TownMap& map, const Policy& policy, const EpisodeSpec& spec,
                          std::vector<TrajectoryPoint>* trajectory = nullptr);

struct OnlineReport {
  double success_rate = 0.0;
  double avg_completion = 0.0;
  double km_per_infraction = 0.0;
  bool zero_infractions = false;  // km_per_infraction then holds the total km
  std::size_t trials = 0;
  double total_km = 0.0;
  std::size_t infractions = 0;

  /// "success_rate", "avg_completion" or "km_per_infraction".
  double value(std::string_view metric) const;
};

inline constexpr std::array<std::string_view, 3> kOnlineMetrics = {"success_rate", "avg_completion",
                                                                   "km_per_infraction"};

OnlineReport aggregate_online(std::span<const EpisodeResult> results);

struct SuiteEntry {
  int start = 0;
  int goal = 0;
  std::uint64_t seed = 0;
};

/// Benchmark suite: routes of 200-1000 m drawn from the suite seed.
std::vector<SuiteEntry> make_suite(const TownMap& map, std::uint64_t suite_seed,
                                   int trials = kSuiteTrials);

/// Runs every entry (episode index = entry position) on `jobs` threads;
/// results come back in suite order.
std::vector<EpisodeResult> run_suite(const TownMap& map, const Policy& policy,
                                     std::span<const SuiteEntry> suite, const Condition& condition,
                                     int jobs = 1);

}  // namespace driveval
