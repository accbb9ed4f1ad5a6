#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <vector>

#include "driveval/analysis.hpp"
#include "driveval/dataset.hpp"
#include "driveval/error.hpp"
#include "driveval/online_eval.hpp"
#include "driveval/serialization.hpp"
#include "driveval/trainer.hpp"
#include "driveval/world.hpp"

using namespace driveval;
using namespace driveval::perturbation;
namespace fs = std::filesystem;

namespace {

template <typename Fn>
void expect_error(ErrorKind kind, Fn&& fn) {
  try {
    fn();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
  }
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("driveval_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Sample make_sample(const FeatureVector& f, double steering, Command c = Command::Continue) {
  Sample s;
  s.observation.features = f;
  s.observation.command = c;
  s.command = c;
  s.action.steering = steering;
  return s;
}

Dataset with_samples(std::vector<Sample> samples) {
  Dataset d;
  d.samples = std::move(samples);
  for (std::size_t i = 0; i < d.samples.size(); ++i) d.samples[i].step_index = static_cast<std::int64_t>(i);
  return d;
}

TrainConfig l2_config(FeatureDepth depth) {
  TrainConfig c;
  c.loss = Loss::L2;
  c.ridge = 0.0;
  c.depth = depth;
  return c;
}

}  // namespace

TEST_CASE("collection sizes and structure") {
  const TownMap a = build_town(TownId::A, 0);
  const Dataset one = collect(a, 0.1, Cameras::One, false, clear_condition(), 4);
  CHECK(one.size() == 3600);
  const Dataset three = collect(a, 0.1, Cameras::Three, false, clear_condition(), 4);
  CHECK(three.size() == 10800);

  for (std::size_t i = 0; i < three.size(); i += 3) {
    CHECK(three.samples[i].viewpoint == Viewpoint::Center);
    CHECK(three.samples[i + 1].viewpoint == Viewpoint::Left30);
    CHECK(three.samples[i + 2].viewpoint == Viewpoint::Right30);
    CHECK(three.samples[i + 1].speed == three.samples[i].speed);
    CHECK(three.samples[i + 2].speed == three.samples[i].speed);
    CHECK(three.samples[i + 1].step_index == three.samples[i].step_index);
  }
  for (const auto& [b, e] : one.sequences()) {
    for (std::size_t i = b + 1; i < e; ++i) CHECK(one.samples[i].step_index > one.samples[i - 1].step_index);
  }
  // Central samples agree with the single-camera collection.
  const Dataset central = three.central_only();
  REQUIRE(central.size() == one.size());
  for (std::size_t i = 0; i < one.size(); i += 97) {
    CHECK(central.samples[i].action.steering == one.samples[i].action.steering);
    CHECK(central.samples[i].speed == one.samples[i].observation.speed);
  }
  // Without noise the label is the action the expert executed.
  for (const Sample& s : one.samples) {
    CHECK_FALSE(s.perturbed);
    CHECK(s.action.steering == s.observation.expert.steering);
  }
}

TEST_CASE("noisy episode fraction") {
  const TownMap a = build_town(TownId::A, 0);
  const Dataset d = collect(a, 1.0, Cameras::One, true, clear_condition(), 12);
  std::size_t in_noisy = 0;
  const auto& noisy = d.manifest.noisy_sequences;
  for (const Sample& s : d.samples) {
    if (std::find(noisy.begin(), noisy.end(), s.sequence_id) != noisy.end()) ++in_noisy;
  }
  const double fraction = static_cast<double>(in_noisy) / d.size();
  CHECK(std::fabs(fraction - 0.10) <= 0.04);
  // Perturbed steps only occur inside noisy episodes.
  for (const Sample& s : d.samples) {
    if (s.perturbed) CHECK(std::find(noisy.begin(), noisy.end(), s.sequence_id) != noisy.end());
  }
}

TEST_CASE("lateral viewpoints") {
  const TownMap a = build_town(TownId::A, 0);
  const Route r = plan_route(a, 0, 3);
  VehicleState state;
  state.pose = r.start_pose();
  state.pose.x += 30.0;
  state.speed = 8.0;
  const Sample c = synthesize_lateral_sample(a, r, state, 0.0);
  const Sample same = synthesize_lateral_sample(a, r, state, 0.0);
  CHECK(c.action.steering == same.action.steering);
  const Sample left = synthesize_lateral_sample(a, r, state, kLateralCameraYaw);
  CHECK(wrap_angle(left.observation.features[1] - c.observation.features[1]) ==
        doctest::Approx(kLateralCameraYaw).epsilon(1e-12));
  CHECK(left.action.steering < 0.0);
  CHECK(synthesize_lateral_sample(a, r, state, -kLateralCameraYaw).action.steering > 0.0);
}

TEST_CASE("dataset persistence") {
  const fs::path dir = scratch_dir("dataset");
  const TownMap b = build_town(TownId::B, 0);
  Dataset d = collect(b, 0.02, Cameras::Three, true, soft_rain_sunset_condition(), 8);
  d.samples.resize(99);
  write_dataset(d, dir / "d.csv");
  const Dataset back = read_dataset(dir / "d.csv");
  CHECK(back.manifest == d.manifest);
  REQUIRE(back.size() == d.size());
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Sample& x = d.samples[i];
    const Sample& y = back.samples[i];
    CHECK(x.observation.features == y.observation.features);
    CHECK(x.command == y.command);
    CHECK(x.action.steering == y.action.steering);
    CHECK(x.action.throttle == y.action.throttle);
    CHECK(x.action.brake == y.action.brake);
    CHECK(x.speed == y.speed);
    CHECK(x.sequence_id == y.sequence_id);
    CHECK(x.step_index == y.step_index);
    CHECK(x.viewpoint == y.viewpoint);
    CHECK(x.perturbed == y.perturbed);
  }

  expect_error(ErrorKind::Io, [&] { read_dataset(dir / "missing.csv"); });

  std::string manifest = read_text_file(manifest_path(dir / "d.csv"));
  const auto pos = manifest.find(kDatasetFormat);
  REQUIRE(pos != std::string::npos);
  manifest.replace(pos, kDatasetFormat.size(), "driveval-dataset/9");
  write_text_file(manifest_path(dir / "d.csv"), manifest);
  expect_error(ErrorKind::FormatVersionMismatch, [&] { read_dataset(dir / "d.csv"); });

  write_dataset(d, dir / "e.csv");
  std::string rows = read_text_file(dir / "e.csv");
  // Third line of the file: data row 1 (rows count from 0 after the header).
  const auto third_line = rows.find('\n', rows.find('\n', rows.find('\n') + 1) + 1);
  rows.insert(third_line, ",garbage");
  write_text_file(dir / "e.csv", rows);
  try {
    read_dataset(dir / "e.csv");
    FAIL("expected CorruptRow");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CorruptRow);
    CHECK(std::string(e.what()).find("row 1:") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("two-point interpolation") {
  FeatureVector f1 = FeatureVector::Zero(), f2 = FeatureVector::Zero();
  f1[0] = 1.0;
  f2[0] = 2.0;
  const Dataset d = with_samples({make_sample(f1, 1.0), make_sample(f2, 2.0)});
  const RegressorPolicy p = fit_regressor(d, l2_config(FeatureDepth::Shallow));
  const auto& h = p.head(Command::Continue);
  CHECK(h.weights[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::fabs(h.bias) <= 1e-6);
  CHECK(p.head(Command::Left).fallback);
}

TEST_CASE("linear steering law is recovered") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> g;
  const std::vector<int> cols = feature_indices(FeatureDepth::Deep);
  REQUIRE(cols.size() == kFeatureCount);
  std::array<FeatureVector, 4> law;
  std::array<double, 4> bias{};
  for (int c = 0; c < 4; ++c) {
    for (int k = 0; k < kFeatureCount; ++k) law[c][k] = 0.3 * g(rng) / kFeatureScale[k];
    bias[c] = 0.1 * g(rng);
  }
  std::vector<Sample> samples;
  for (int i = 0; i < 800; ++i) {
    FeatureVector f;
    for (int k = 0; k < kFeatureCount; ++k) f[k] = kFeatureScale[k] * g(rng);
    const int c = i % 4;
    samples.push_back(make_sample(f, law[c].dot(f) + bias[c], kAllCommands[c]));
  }
  const RegressorPolicy p = fit_regressor(with_samples(samples), l2_config(FeatureDepth::Deep));
  for (int c = 0; c < 4; ++c) {
    const auto& h = p.head(kAllCommands[c]);
    CHECK_FALSE(h.fallback);
    for (int k = 0; k < kFeatureCount; ++k) CHECK(std::fabs(h.weights[k] - law[c][k]) <= 1e-6);
    CHECK(std::fabs(h.bias - bias[c]) <= 1e-6);
  }
}

TEST_CASE("L1 resists a gross outlier") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0, 0.01);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<Sample> samples;
  std::vector<double> xs;
  for (int i = 0; i < 100; ++i) {
    FeatureVector f = FeatureVector::Zero();
    f[0] = u(rng);
    xs.push_back(f[0]);
    double y = -0.6 * f[0] + g(rng);
    if (i == 50) y = 10.0 * (std::fabs(y) + 0.3);
    samples.push_back(make_sample(f, y));
  }
  const Dataset d = with_samples(samples);
  TrainConfig c1 = l2_config(FeatureDepth::Shallow);
  c1.loss = Loss::L1;
  const RegressorPolicy l1 = fit_regressor(d, c1);
  const RegressorPolicy l2 = fit_regressor(d, l2_config(FeatureDepth::Shallow));
  double e1 = 0, e2 = 0;
  for (int i = 0; i < 100; ++i) {
    if (i == 50) continue;
    const FeatureVector& f = d.samples[i].observation.features;
    e1 += std::fabs(l1.steering(f, Command::Continue) - d.samples[i].action.steering);
    e2 += std::fabs(l2.steering(f, Command::Continue) - d.samples[i].action.steering);
  }
  CHECK(e1 < e2);
}

TEST_CASE("ridge normal equations and IRLS descent") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> g;
  const int n = 300, p = 4;
  Eigen::MatrixXd x(n, p + 1);
  Eigen::VectorXd y(n), w(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < p; ++k) x(i, k) = g(rng);
    x(i, p) = 1.0;
    y[i] = x.row(i).head(p).sum() + 0.3 * g(rng) + (i % 37 == 0 ? 5.0 : 0.0);
    w[i] = 1.0 + (i % 3);
  }
  for (double lambda : {0.0, 1e-3, 0.1}) {
    const Eigen::VectorXd theta = solve_ridge(x, y, w, lambda);
    Eigen::MatrixXd d = Eigen::MatrixXd::Identity(p + 1, p + 1) * std::max(lambda, kRidgeFloor);
    d(p, p) = 0.0;
    const Eigen::MatrixXd wx = w.asDiagonal() * x;
    const double sw = w.sum();
    const Eigen::VectorXd residual = (x.transpose() * wx / sw + d) * theta - wx.transpose() * y / sw;
    CHECK(residual.norm() < 1e-8);

    const IrlsResult r = solve_irls(x, y, w, lambda);
    REQUIRE(r.objective.size() >= 2);
    for (std::size_t k = 1; k < r.objective.size(); ++k) CHECK(r.objective[k] <= r.objective[k - 1] + 1e-15);
    CHECK(r.iterations <= 200);
  }
}

TEST_CASE("balanced minibatches") {
  std::vector<Sample> samples;
  for (int i = 0; i < 1000; ++i) {
    // Heavily skewed: most labels near zero, a few in three other bins.
    const double s = i < 900 ? 0.01 : (i < 960 ? 0.4 : (i < 990 ? -0.6 : 0.95));
    samples.push_back(make_sample(FeatureVector::Zero(), s));
  }
  const Dataset d = with_samples(samples);
  const auto batches = balanced_minibatches(d, 120, 8, 3, 800);
  CHECK(batches == balanced_minibatches(d, 120, 8, 3, 800));
  std::array<double, 8> hist{};
  for (const auto& b : batches) {
    CHECK(b.size() == 120);
    std::array<int, 8> per{};
    for (std::size_t i : b) per[steering_bin(d.samples[i].action.steering, 8)]++;
    for (int k = 0; k < 8; ++k) {
      hist[k] += per[k];
      if (per[k] > 0) CHECK(per[k] >= 15);
    }
  }
  // Chi-square against the uniform distribution over the four nonempty bins;
  // 3 degrees of freedom, 0.999 quantile 16.27.
  const double expected = 800.0 * 120 / 4;
  double chi2 = 0;
  int nonempty = 0;
  for (double h : hist) {
    if (h == 0) continue;
    ++nonempty;
    chi2 += (h - expected) * (h - expected) / expected;
  }
  CHECK(nonempty == 4);
  CHECK(chi2 < 16.27);

  const Dataset single = with_samples(std::vector<Sample>(50, make_sample(FeatureVector::Zero(), 0.0)));
  for (const auto& b : balanced_minibatches(single, 120, 8, 1, 10)) CHECK(b.size() == 120);

  expect_error(ErrorKind::EmptyDataset, [] { balanced_minibatches(Dataset{}, 120, 8, 1, 1); });
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.ridge = -1.0;
  CHECK_THROWS_AS(validate(c), Error);
  c = {};
  c.data_hours = 0.0;
  CHECK_THROWS_AS(validate(c), Error);
  c = {};
  c.batch = 100;
  CHECK_THROWS_AS(validate(c), Error);
  expect_error(ErrorKind::EmptyDataset, [] { fit_regressor(Dataset{}, TrainConfig{}); });
}

namespace {

TrajectoryPoint at(double t, double excess, bool opposing = false) {
  TrajectoryPoint p;
  p.time = t;
  p.frame.road_excess = excess;
  p.frame.on_opposing_lane = opposing;
  return p;
}

}  // namespace

TEST_CASE("infraction debouncing") {
  const TownMap a = build_town(TownId::A, 0);
  std::vector<TrajectoryPoint> clean, once, twice, brief;
  for (int k = 0; k < 200; ++k) {
    const double t = k * kControlPeriod;
    clean.push_back(at(t, 0.0));
    once.push_back(at(t, t >= 5.0 && t < 8.0 ? 1.0 : 0.0));
    twice.push_back(at(t, (t >= 2.0 && t < 4.0) || (t >= 9.0 && t < 11.0) ? 1.0 : 0.0));
    brief.push_back(at(t, t >= 5.0 && t < 5.3 ? 1.0 : 0.0, t >= 10 && t < 12));
  }
  CHECK(detect_infractions(a, clean).empty());
  const auto one = detect_infractions(a, once);
  REQUIRE(one.size() == 1);
  CHECK(one[0].kind == InfractionKind::OffRoad);
  CHECK(detect_infractions(a, twice).size() == 2);
  const auto opp = detect_infractions(a, brief);
  REQUIRE(opp.size() == 1);
  CHECK(opp[0].kind == InfractionKind::OppositeLane);
}

TEST_CASE("aggregate online metrics") {
  std::vector<EpisodeResult> rs(25);
  for (int i = 0; i < 25; ++i) {
    rs[i].success = i < 20;
    rs[i].completion = i < 20 ? 1.0 : 0.5;
    rs[i].distance_driven = 12.0 / 25;
  }
  rs[3].infractions.resize(2);
  rs[21].infractions.resize(1);
  const OnlineReport r = aggregate_online(rs);
  CHECK(r.success_rate == doctest::Approx(0.8));
  CHECK(r.km_per_infraction == doctest::Approx(4.0));
  CHECK_FALSE(r.zero_infractions);
  CHECK(r.trials == 25);

  std::reverse(rs.begin(), rs.end());
  const OnlineReport back = aggregate_online(rs);
  CHECK(back.success_rate == r.success_rate);
  CHECK(back.avg_completion == doctest::Approx(r.avg_completion).epsilon(1e-15));
  CHECK(back.km_per_infraction == doctest::Approx(r.km_per_infraction).epsilon(1e-15));

  std::vector<EpisodeResult> neg(2);
  neg[0].completion = 0.75;
  neg[1].completion = -0.2;
  neg[0].distance_driven = 1.5;
  const OnlineReport n = aggregate_online(neg);
  CHECK(n.avg_completion == doctest::Approx(0.275));
  CHECK(n.zero_infractions);
  CHECK(n.km_per_infraction == doctest::Approx(1.5));

  expect_error(ErrorKind::EmptyResults, [] { aggregate_online(std::vector<EpisodeResult>{}); });
}

TEST_CASE("closed-loop episodes") {
  const TownMap a = build_town(TownId::A, 0);
  const auto suite = make_suite(a, 77);
  REQUIRE(suite.size() == 25);
  CHECK(make_suite(a, 77).size() == 25);
  for (std::size_t i = 0; i < suite.size(); ++i) {
    CHECK(make_suite(a, 77)[i].start == suite[i].start);
    const double len = plan_route(a, suite[i].start, suite[i].goal).length();
    CHECK(len >= 200.0);
    CHECK(len <= 1000.0);
  }
  const Route route = plan_route(a, suite[0].start, suite[0].goal);

  const ExpertPolicy expert;
  const EpisodeResult ok = run_episode(a, expert, make_episode_spec(route, clear_condition(), 5));
  CHECK(ok.success);
  CHECK(ok.termination == Termination::Goal);
  CHECK(ok.completion >= 0.99);
  CHECK(ok.infractions.empty());

  // Routes start inside an intersection square, which is wide enough to hold
  // the tightest circle, so full lock starts once the car is in the block.
  const FunctionPolicy full_left("full-left", [steps = 0](const Observation& o) mutable {
    Action act = o.expert;
    if (++steps > 30) act.steering = 1.0;
    return act;
  });
  const EpisodeResult spin = run_episode(a, full_left, make_episode_spec(route, clear_condition(), 5));
  CHECK_FALSE(spin.success);
  CHECK(std::any_of(spin.infractions.begin(), spin.infractions.end(),
                    [](const auto& e) { return e.kind == InfractionKind::OffRoad; }));

  const FunctionPolicy parked("parked", [](const Observation& o) {
    Action act = o.expert;
    act.throttle = 0.0;
    return act;
  });
  const EpisodeResult stuck = run_episode(a, parked, make_episode_spec(route, clear_condition(), 5));
  CHECK(stuck.termination == Termination::Stuck);
  CHECK(std::fabs(stuck.completion) < 0.01);
  CHECK_FALSE(stuck.success);

  // Determinism and the success/completion bound over a noisy policy.
  const auto noisy = make_perturbed(expert, WhiteNoise{0.3}, 9);
  const auto first = run_suite(a, *noisy, suite, clear_condition(), 4);
  const auto second = run_suite(a, *noisy, suite, clear_condition(), 1);
  for (std::size_t i = 0; i < suite.size(); ++i) {
    CHECK(canonical_dump(to_json(first[i])) == canonical_dump(to_json(second[i])));
    CHECK(first[i].completion <= 1.0);
    if (first[i].success) {
      CHECK(first[i].termination == Termination::Goal);
      // Completion is measured along the drivable centreline, which is
      // shorter than the lane length by the trimmed intersection corners.
      const double len = plan_route(a, suite[i].start, suite[i].goal).path_length();
      CHECK(first[i].completion >= 1.0 - kGoalRadius / len);
    }
  }
}

TEST_CASE("serialization round trips") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng) * std::pow(10.0, static_cast<int>(rng() % 40) - 20);
    CHECK(parse_double(format_double(x)) == x);
  }

  StudyRecord r;
  r.model_id = "m";
  r.kind = "trained";
  r.config = "{\"loss\":\"L1\"}";
  r.groups = {"loss"};
  r.size_rank = 2;
  r.offline["A/1cam"].mse = 0.1 / 3;
  r.offline["A/1cam"].tre = 0.7;
  r.online["A"].success_rate = 0.48;
  r.online["A"].trials = 25;
  const std::string text = records_to_jsonl({r, r});
  const auto back = records_from_jsonl(text);
  REQUIRE(back.size() == 2);
  CHECK(back[0].offline.at("A/1cam").mse == r.offline["A/1cam"].mse);
  CHECK(back[1].groups == r.groups);
  CHECK(records_to_jsonl(back) == text);

  const Json cfg = toml_to_json("[offline]\nT = 16 # window\n");
  CHECK(cfg.at("offline").at("T").get<int>() == 16);
  CHECK(config_hash(cfg) == config_hash(toml_to_json("\n[offline]\nT    = 16\n")));

  for (const PerturbationSpec& spec : {PerturbationSpec{WhiteNoise{0.2}}, PerturbationSpec{OUNoise{0.3, 0.4}},
                                       PerturbationSpec{Quantize{0.1}}}) {
    CHECK(canonical_dump(to_json(perturbation_from_json(to_json(spec)))) == canonical_dump(to_json(spec)));
  }
}
