#include "driveval/online_eval.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "driveval/dataset.hpp"
#include "driveval/error.hpp"
#include "driveval/expert.hpp"
#include "driveval/parallel.hpp"

namespace driveval {

std::string_view to_string(InfractionKind kind) {
  switch (kind) {
    case InfractionKind::OffRoad: return "off_road";
    case InfractionKind::OppositeLane: return "opposite_lane";
    case InfractionKind::Collision: return "collision";
  }
  return "off_road";
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::Goal: return "goal";
    case Termination::Timeout: return "timeout";
    case Termination::Stuck: return "stuck";
  }
  return "timeout";
}

EpisodeSpec make_episode_spec(Route route, const Condition& condition, std::uint64_t seed,
                              std::uint64_t episode_index) {
  EpisodeSpec spec;
  spec.time_budget = route.length() / kBudgetSpeed;
  spec.route = std::move(route);
  spec.condition = condition;
  spec.seed = seed;
  spec.episode_index = episode_index;
  return spec;
}

namespace {

class Debouncer {
 public:
  Debouncer(InfractionKind kind, double sustain) : kind_(kind), sustain_(sustain) {}

  void update(const TrajectoryPoint& p, bool violating, std::vector<InfractionEvent>& out) {
    const double t = p.time;
    if (violating) {
      clear_since_.reset();
      if (!since_) since_ = t;
      if (armed_ && t - *since_ >= sustain_ - 1e-9) {
        out.push_back({kind_, t, p.state.pose.position()});
        armed_ = false;
      }
      return;
    }
    since_.reset();
    if (armed_) return;
    if (!clear_since_) clear_since_ = t;
    if (t - *clear_since_ >= kRearmTime - 1e-9) armed_ = true;
  }

 private:
  InfractionKind kind_;
  double sustain_;
  bool armed_ = true;
  std::optional<double> since_;
  std::optional<double> clear_since_;
};

}  // namespace

std::vector<InfractionEvent> detect_infractions(const TownMap& map,
                                                std::span<const TrajectoryPoint> trajectory) {
  (void)map;
  std::vector<InfractionEvent> events;
  Debouncer off_road(InfractionKind::OffRoad, kSustainTime);
  Debouncer opposite(InfractionKind::OppositeLane, kSustainTime);
  Debouncer collision(InfractionKind::Collision, 0.0);
  for (const auto& p : trajectory) {
    off_road.update(p, p.frame.road_excess > kOffRoadMargin, events);
    opposite.update(p, p.frame.on_opposing_lane, events);
    collision.update(p, p.frame.road_excess > kSidewalkWidth, events);
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const auto& a, const auto& b) { return a.time < b.time; });
  return events;
}

EpisodeResult run_episode(const TownMap& map, const Policy& policy, const EpisodeSpec& spec,
                          std::vector<TrajectoryPoint>* trajectory) {
  const Route& route = spec.route;
  auto driver = policy.clone();
  driver->begin_episode(spec.episode_index);
  SplitMix64 obs_noise(derive_seed(spec.seed, "online_observation", spec.episode_index));

  std::vector<TrajectoryPoint> local;
  std::vector<TrajectoryPoint>& traj = trajectory ? *trajectory : local;
  traj.clear();

  EpisodeResult result;
  result.start = route.start_node();
  result.goal = route.goal_node();
  result.seed = spec.seed;

  VehicleState state;
  state.pose = route.start_pose();
  double start_remaining = 0.0;
  double remaining = 0.0;
  double distance = 0.0;
  double slow_time = 0.0;
  bool blocked = false;
  for (int k = 0;; ++k) {
    const double t = k * kControlPeriod;
    const LaneFrame frame = lane_frame(map, route, state.pose);
    traj.push_back({t, state, frame});
    remaining = route.path_length() - frame.progress;
    if (k == 0) start_remaining = remaining;
    if (frame.road_excess > kSidewalkWidth) blocked = true;

    if (remaining <= spec.goal_radius && frame.route_distance <= kLaneWidth) {
      result.termination = Termination::Goal;
      break;
    }
    if (t >= spec.time_budget - 1e-9) {
      result.termination = Termination::Timeout;
      break;
    }
    if (slow_time >= kStuckTime - 1e-9) {
      result.termination = Termination::Stuck;
      break;
    }

    const Command command = command_from_frame(route, frame);
    const Action expert = expert_control(route, state, frame.progress);
    const Observation obs = make_observation(frame, state, command, expert, spec.condition, &obs_noise);
    const Action action = predict(*driver, obs);

    VehicleState next = state;
    if (blocked) {
      next.speed = 0.0;
    } else {
      next = advance_control_period(state, action);
    }
    distance += (next.pose.position() - state.pose.position()).norm();
    slow_time = next.speed < kStuckSpeed ? slow_time + kControlPeriod : 0.0;
    state = next;
  }

  result.success = result.termination == Termination::Goal;
  result.completion = (start_remaining - remaining) / start_remaining;
  result.distance_driven = distance / 1000.0;
  result.duration = traj.back().time;
  for (const auto& p : traj) {
    result.max_abs_lateral = std::max(result.max_abs_lateral, std::abs(p.frame.lateral_offset));
  }
  result.infractions = detect_infractions(map, traj);
  return result;
}

double OnlineReport::value(std::string_view metric) const {
  if (metric == "success_rate") return success_rate;
  if (metric == "avg_completion") return avg_completion;
  if (metric == "km_per_infraction") return km_per_infraction;
  throw Error(ErrorKind::MissingMetric, "unknown online metric '" + std::string(metric) + "'");
}

OnlineReport aggregate_online(std::span<const EpisodeResult> results) {
  if (results.empty()) throw Error(ErrorKind::EmptyResults, "no episode results to aggregate");
  OnlineReport r;
  r.trials = results.size();
  std::size_t successes = 0;
  double completion = 0.0;
  for (const auto& e : results) {
    successes += e.success ? 1 : 0;
    completion += e.completion;
    r.total_km += e.distance_driven;
    r.infractions += e.infractions.size();
  }
  r.success_rate = static_cast<double>(successes) / static_cast<double>(r.trials);
  r.avg_completion = completion / static_cast<double>(r.trials);
  r.zero_infractions = r.infractions == 0;
  r.km_per_infraction =
      r.zero_infractions ? r.total_km : r.total_km / static_cast<double>(r.infractions);
  return r;
}

std::vector<SuiteEntry> make_suite(const TownMap& map, std::uint64_t suite_seed, int trials) {
  Engine rng(derive_seed(suite_seed, "suite_routes", static_cast<std::uint64_t>(map.town)));
  std::vector<SuiteEntry> suite;
  for (int i = 0; i < trials; ++i) {
    const Route r = random_route(map, rng, 200.0, 1000.0);
    suite.push_back({r.start_node(), r.goal_node(),
                     derive_seed(suite_seed, "suite_trial", static_cast<std::uint64_t>(i))});
  }
  return suite;
}

std::vector<EpisodeResult> run_suite(const TownMap& map, const Policy& policy,
                                     std::span<const SuiteEntry> suite, const Condition& condition,
                                     int jobs) {
  std::vector<EpisodeResult> results(suite.size());
  parallel_for(suite.size(), jobs, [&](std::size_t i) {
    const EpisodeSpec spec =
        make_episode_spec(plan_route(map, suite[i].start, suite[i].goal), condition, suite[i].seed, i);
    results[i] = run_episode(map, policy, spec);
  });
  return results;
}

}  // namespace driveval
