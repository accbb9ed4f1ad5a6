#include "driveval/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "driveval/error.hpp"
#include "driveval/expert.hpp"
#include "driveval/serialization.hpp"

namespace driveval {
namespace {

constexpr int kStepsPerHour = 36000;

Sample make_sample(const TownMap& map, const Route& route, const VehicleState& state,
                   const Condition& condition, SplitMix64* noise, Viewpoint viewpoint,
                   double yaw_offset) {
  VehicleState virtual_state = state;
  virtual_state.pose.yaw = wrap_angle(state.pose.yaw + yaw_offset);
  const LaneFrame frame = lane_frame(map, route, virtual_state.pose);
  if (frame.route_distance > kOffRouteDistance) {
    throw Error(ErrorKind::OffRoute, "sample pose is more than 20 m from the route");
  }
  const Command command = command_from_frame(route, frame);
  const Action label = expert_control(route, virtual_state, frame.progress);
  Sample s;
  s.observation = make_observation(frame, virtual_state, command, label, condition, noise);
  s.command = command;
  s.action = label;
  s.speed = state.speed;
  s.viewpoint = viewpoint;
  return s;
}

}  // namespace

std::string_view to_string(Viewpoint v) {
  switch (v) {
    case Viewpoint::Center: return "center";
    case Viewpoint::Left30: return "left30";
    case Viewpoint::Right30: return "right30";
  }
  return "center";
}

Viewpoint parse_viewpoint(std::string_view text) {
  if (text == "center") return Viewpoint::Center;
  if (text == "left30") return Viewpoint::Left30;
  if (text == "right30") return Viewpoint::Right30;
  throw Error(ErrorKind::InvalidArgument, "unknown viewpoint '" + std::string(text) + "'");
}

std::vector<std::pair<std::size_t, std::size_t>> Dataset::sequences() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t i = 1; i <= samples.size(); ++i) {
    if (i == samples.size() || samples[i].sequence_id != samples[begin].sequence_id) {
      out.emplace_back(begin, i);
      begin = i;
    }
  }
  if (samples.empty()) out.clear();
  return out;
}

Dataset Dataset::central_only() const {
  Dataset out;
  out.manifest = manifest;
  out.manifest.cameras = 1;
  for (const auto& s : samples) {
    if (s.viewpoint == Viewpoint::Center) out.samples.push_back(s);
  }
  return out;
}

Dataset Dataset::first_hours(double hours) const {
  const auto limit = static_cast<std::size_t>(std::llround(hours * kStepsPerHour));
  Dataset out;
  out.manifest = manifest;
  out.manifest.hours = std::min(hours, manifest.hours);
  std::size_t central = 0;
  for (const auto& s : samples) {
    if (s.viewpoint == Viewpoint::Center) {
      if (central == limit) break;
      ++central;
    }
    out.samples.push_back(s);
  }
  std::erase_if(out.manifest.noisy_sequences, [&](std::int64_t id) {
    return out.samples.empty() || id > out.samples.back().sequence_id;
  });
  return out;
}

Route random_route(const TownMap& map, Engine& rng, double min_length, double max_length) {
  const int n = static_cast<int>(map.intersections.size());
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const int a = pick(rng);
    const int b = pick(rng);
    if (a == b) continue;
    Route r = plan_route(map, a, b);
    if (r.length() >= min_length - 1e-9 && r.length() <= max_length + 1e-9) return r;
  }
  throw Error(ErrorKind::InvalidArgument, "no route of the requested length exists on this map");
}

Sample synthesize_lateral_sample(const TownMap& map, const Route& route, const VehicleState& state,
                                 double yaw_offset) {
  if (std::abs(yaw_offset) > kPi / 4.0 + 1e-12) {
    throw Error(ErrorKind::InvalidArgument, "lateral yaw offset must be within pi/4");
  }
  const Viewpoint v = yaw_offset > 0.0   ? Viewpoint::Left30
                      : yaw_offset < 0.0 ? Viewpoint::Right30
                                         : Viewpoint::Center;
  return make_sample(map, route, state, clear_condition(), nullptr, v, yaw_offset);
}

Dataset collect(const TownMap& map, double hours, Cameras cameras, bool noise,
                const Condition& condition, std::uint64_t seed, const CollectOptions& options) {
  if (!(hours > 0.0)) throw Error(ErrorKind::InvalidArgument, "hours must be positive");
  Dataset data;
  data.manifest.town = map.town;
  data.manifest.condition = condition;
  data.manifest.cameras = static_cast<int>(cameras);
  data.manifest.noise = noise;
  data.manifest.hours = hours;
  data.manifest.seed = seed;

  const auto target = static_cast<std::int64_t>(std::llround(hours * kStepsPerHour));
  Engine route_rng(derive_seed(seed, "collect_routes"));
  // Systematic selection: every episode is noisy with probability 0.1 and the
  // realised fraction stays within one episode of it.
  const double phase = SplitMix64(derive_seed(seed, "noise_phase")).uniform();
  SplitMix64 obs_noise(derive_seed(seed, "observation_noise"));

  std::int64_t steps = 0;
  for (std::int64_t episode = 0; steps < target; ++episode) {
    const Route route = random_route(map, route_rng, options.min_route_length, options.max_route_length);
    const bool noisy =
        noise && std::floor((episode + 1) * kNoisyEpisodeFraction + phase) >
                     std::floor(episode * kNoisyEpisodeFraction + phase);
    const double budget = route.length() / (10.0 / 3.6);

    std::vector<ImpulseSpec> impulses;
    if (noisy) {
      data.manifest.noisy_sequences.push_back(episode);
      Engine rng(derive_seed(seed, "impulses", static_cast<std::uint64_t>(episode)));
      std::exponential_distribution<double> gap(options.impulse_rate);
      std::uniform_real_distribution<double> duration(options.min_impulse_duration,
                                                      options.max_impulse_duration);
      std::uniform_real_distribution<double> peak(options.min_impulse_peak, options.max_impulse_peak);
      std::bernoulli_distribution sign(0.5);
      for (double t = gap(rng); t < budget; t += gap(rng)) {
        const double p = peak(rng);
        impulses.push_back({t, duration(rng), sign(rng) ? p : -p});
      }
    }

    VehicleState state;
    state.pose = route.start_pose();
    for (std::int64_t k = 0; steps < target; ++k) {
      const double t = static_cast<double>(k) * kControlPeriod;
      Sample center = make_sample(map, route, state, condition, &obs_noise, Viewpoint::Center, 0.0);
      double impulse = 0.0;
      for (const auto& imp : impulses) impulse += triangular_impulse(t, imp);

      center.sequence_id = episode;
      center.step_index = k;
      center.perturbed = impulse != 0.0;
      Action executed = center.action;
      executed.steering = std::clamp(executed.steering + impulse, -1.0, 1.0);
      data.samples.push_back(center);
      if (cameras == Cameras::Three) {
        for (double yaw : {kLateralCameraYaw, -kLateralCameraYaw}) {
          Sample side = make_sample(map, route, state, condition, &obs_noise,
                                    yaw > 0.0 ? Viewpoint::Left30 : Viewpoint::Right30, yaw);
          side.sequence_id = episode;
          side.step_index = k;
          side.perturbed = center.perturbed;
          data.samples.push_back(side);
        }
      }
      ++steps;

      state = advance_control_period(state, executed);
      const double progress = route.project(state.pose.position()).s;
      if (progress >= route.path_length() - 2.0 || t > budget) break;
    }
  }
  return data;
}

std::filesystem::path manifest_path(const std::filesystem::path& csv_path) {
  std::filesystem::path p = csv_path;
  p.replace_extension(".manifest.json");
  return p;
}

namespace {

constexpr std::string_view kCsvHeader =
    "sequence_id,step_index,viewpoint,perturbed,command,speed,f1,f2,f3,f4,f5,f6,f7,"
    "steer_label,throttle_label,brake_label";

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == sep) {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "# " << dataset.manifest.format << '\n' << kCsvHeader << '\n';
  for (const auto& s : dataset.samples) {
    os << s.sequence_id << ',' << s.step_index << ',' << to_string(s.viewpoint) << ','
       << (s.perturbed ? 1 : 0) << ',' << to_string(s.command) << ',' << format_double(s.speed);
    for (int k = 0; k < kFeatureCount; ++k) os << ',' << format_double(s.observation.features[k]);
    os << ',' << format_double(s.action.steering) << ',' << format_double(s.action.throttle) << ','
       << format_double(s.action.brake) << '\n';
  }
  write_text_file(path, os.str());
  write_text_file(manifest_path(path), to_json(dataset.manifest).dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  Dataset data;
  {
    const nlohmann::json j = parse_json(read_text_file(manifest_path(path)));
    if (j.value("format", std::string()) != kDatasetFormat) {
      throw Error(ErrorKind::FormatVersionMismatch,
                  "manifest format is not " + std::string(kDatasetFormat));
    }
    data.manifest = manifest_from_json(j);
  }

  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "# " + std::string(kDatasetFormat)) {
    throw Error(ErrorKind::FormatVersionMismatch, "dataset header is not " + std::string(kDatasetFormat));
  }
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw Error(ErrorKind::CorruptRow, "row 0: unexpected column header");
  }
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    try {
      if (cols.size() != 16) throw Error(ErrorKind::InvalidArgument, "expected 16 columns");
      Sample s;
      s.sequence_id = parse_int(cols[0]);
      s.step_index = parse_int(cols[1]);
      s.viewpoint = parse_viewpoint(cols[2]);
      s.perturbed = parse_int(cols[3]) != 0;
      s.command = parse_command(cols[4]);
      s.speed = parse_double(cols[5]);
      for (int k = 0; k < kFeatureCount; ++k) s.observation.features[k] = parse_double(cols[6 + k]);
      s.action.steering = parse_double(cols[13]);
      s.action.throttle = parse_double(cols[14]);
      s.action.brake = parse_double(cols[15]);
      s.observation.command = s.command;
      s.observation.speed = s.speed;
      s.observation.expert = s.action;
      data.samples.push_back(s);
    } catch (const Error& e) {
      throw Error(ErrorKind::CorruptRow, "row " + std::to_string(row) + ": " + e.what());
    }
  }
  return data;
}

}  // namespace driveval
