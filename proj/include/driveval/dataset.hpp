#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "driveval/condition.hpp"
#include "driveval/policy.hpp"
#include "driveval/world.hpp"

namespace driveval {

inline constexpr std::string_view kDatasetFormat = "driveval-dataset/1";
inline constexpr double kLateralCameraYaw = kPi / 6.0;  // 30 degrees
inline constexpr double kNoisyEpisodeFraction = 0.1;

enum class Viewpoint : std::uint8_t { Center = 0, Left30 = 1, Right30 = 2 };
std::string_view to_string(Viewpoint v);
Viewpoint parse_viewpoint(std::string_view text);

struct Sample {
  Observation observation;
  Command command = Command::Continue;
  Action action;  // ground-truth label
  double speed = 0.0;
  std::int64_t sequence_id = 0;
  std::int64_t step_index = 0;
  Viewpoint viewpoint = Viewpoint::Center;
  bool perturbed = false;
};

struct DatasetManifest {
  std::string format = std::string(kDatasetFormat);
  TownId town = TownId::A;
  Condition condition;
  int cameras = 1;
  bool noise = false;
  double hours = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::int64_t> noisy_sequences;
  std::string config_hash;

  bool operator==(const DatasetManifest&) const = default;
};

/// Temporally ordered sequences of samples, stored flat in sequence/step
/// order. With three cameras each step holds a center/left/right triple.
struct Dataset {
  DatasetManifest manifest;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }

  /// [begin, end) index ranges of each sequence.
  std::vector<std::pair<std::size_t, std::size_t>> sequences() const;
  /// Only the central viewpoint (the single-camera variant).
  Dataset central_only() const;
  /// The leading sequences covering `hours` of driving (10 Hz steps).
  Dataset first_hours(double hours) const;
};

enum class Cameras { One = 1, Three = 3 };

struct CollectOptions {
  double min_route_length = 200.0;
  double max_route_length = 1000.0;
  double impulse_rate = 1.0 / 20.0;  // impulses per second within a noisy episode
  double min_impulse_duration = 0.5;
  double max_impulse_duration = 2.0;
  double min_impulse_peak = 0.15;
  double max_impulse_peak = 0.5;
};

/// Drives the expert on random routes and logs samples at 10 Hz until
/// `hours` of driving (central steps) are recorded.
Dataset collect(const TownMap& map, double hours, Cameras cameras, bool noise,
                const Condition& condition, std::uint64_t seed, const CollectOptions& options = {});

/// Observation from a virtual camera rotated by `yaw_offset` at the same
/// position; the label is the expert's action at that virtual pose.
Sample synthesize_lateral_sample(const TownMap& map, const Route& route, const VehicleState& state,
                                 double yaw_offset);

/// Random route with a length in [min_length, max_length].
Route random_route(const TownMap& map, Engine& rng, double min_length, double max_length);

/// CSV rows plus a sidecar manifest next to it (`<stem>.manifest.json`).
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);
std::filesystem::path manifest_path(const std::filesystem::path& csv_path);

}  // namespace driveval
