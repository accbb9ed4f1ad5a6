// Acceptance checks 1-8. Prints one PASS/FAIL line per criterion and exits
// nonzero if any fails. Tolerances are fixed here, not read from anywhere.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "driveval/analysis.hpp"
#include "driveval/dataset.hpp"
#include "driveval/offline_metrics.hpp"
#include "driveval/online_eval.hpp"
#include "driveval/serialization.hpp"
#include "driveval/study.hpp"
#include "oracles.hpp"

using namespace driveval;
using namespace driveval::perturbation;

namespace {

constexpr double kOracleTolerance = 1e-12;
constexpr double kMseAgreement = 0.05;
constexpr double kCaseStudyGap = 0.30;
constexpr double kCaseStudyBias = 0.75;
constexpr int kCaseStudySuites = 5;
constexpr double kCompletionCorrelation = 0.6;
constexpr double kExpertMaxLateral = 0.5;
constexpr double kRadiusTolerance = 0.01;

constexpr double kLimitOracles = 10.0;
constexpr double kLimitCaseStudy = 120.0;
constexpr double kLimitStudy = 900.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double x, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

int jobs() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

Eigen::Map<const Eigen::VectorXd> view(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

// 1 -------------------------------------------------------------------------

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(-1, 1), speed(0, 12);
  std::uniform_int_distribution<int> len(80, 400), cls(0, 3);
  double worst = 0.0;
  int mismatched = 0;
  auto track = [&](double got, double want) { worst = std::max(worst, oracle::rel_err(got, want)); };
  for (int trial = 0; trial < 100; ++trial) {
    const int n = len(rng);
    std::vector<double> a(n), p(n), v(n), x(n), y(n);
    std::vector<int> yc(n), pc(n);
    for (int i = 0; i < n; ++i) {
      a[i] = u(rng);
      p[i] = trial % 2 ? a[i] + 0.2 * u(rng) : u(rng);
      v[i] = speed(rng);
      x[i] = u(rng);
      y[i] = 0.5 * x[i] + u(rng);
      yc[i] = cls(rng);
      pc[i] = rng() % 4 ? yc[i] : cls(rng);
    }
    // Ensure every class appears so all breakdowns are defined.
    for (int c = 0; c < 4; ++c) yc[c] = c;
    const int T = 1 + trial % 40;
    const std::vector<std::size_t> lengths = {static_cast<std::size_t>(n / 3),
                                              static_cast<std::size_t>(n - n / 3)};
    track(metrics::mse(view(a), view(p)), oracle::mse(a, p));
    track(metrics::mae(view(a), view(p)), oracle::mae(a, p));
    track(metrics::speed_weighted_mae(view(a), view(p), view(v)), oracle::swae(a, p, v));
    track(metrics::cumulative_swae(view(a), view(p), view(v), T, lengths), oracle::cum_swae(a, p, v, T, lengths));
    track(metrics::quantized_classification_error(view(a), view(p), 0.03), oracle::qce(a, p, 0.03));
    track(metrics::thresholded_relative_error(view(a), view(p), 0.1), oracle::tre(a, p, 0.1));
    const BreakdownReport acc = discrete_accuracy(yc, pc, v);
    const oracle::Accuracy want = oracle::accuracy(yc, pc, v);
    if (!acc.straight || !acc.stop || !acc.turns || !acc.weighted_all || !acc.weighted_turns) {
      ++mismatched;
    } else {
      track(acc.all, want.all);
      track(*acc.straight, want.straight);
      track(*acc.stop, want.stop);
      track(*acc.turns, want.turns);
      track(*acc.weighted_all, want.weighted);
      track(*acc.weighted_turns, want.weighted_turns);
    }
    track(pearson(view(x), view(y)), oracle::pearson(x, y));
  }
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = worst <= kOracleTolerance && mismatched == 0 && elapsed < kLimitOracles;
  char buf[160];
  std::snprintf(buf, sizeof buf, "max rel err %.2e over 100 instances x 8 metric families, %.2f s", worst,
                elapsed);
  o.detail = buf;
  return o;
}

// 2 -------------------------------------------------------------------------

double central_mse(const Dataset& validation, const PerturbationSpec& spec) {
  const ExpertPolicy expert;
  const auto policy = make_perturbed(expert, spec, 7001);
  return evaluate_offline(*policy, validation).mse;
}

double suite_success(const TownMap& map, const PerturbationSpec& spec) {
  const ExpertPolicy expert;
  int successes = 0, trials = 0;
  for (int k = 0; k < kCaseStudySuites; ++k) {
    const auto suite = make_suite(map, 4100 + k);
    const auto policy = make_perturbed(expert, spec, 5100 + k);
    for (const auto& r : run_suite(map, *policy, suite, clear_condition(), jobs())) {
      successes += r.success ? 1 : 0;
      ++trials;
    }
  }
  return static_cast<double>(successes) / trials;
}

Outcome case_study() {
  const auto t0 = Clock::now();
  const TownMap a = build_town(TownId::A, 0);
  const Dataset validation = collect(a, 0.2, Cameras::One, false, clear_condition(), 3001);

  const double bias_mse = central_mse(validation, EpisodeBias{kCaseStudyBias});
  // Clamping makes white-noise error grow slower than std^2; bisect the std.
  double lo = 0.0, hi = 5.0;
  for (int it = 0; it < 50; ++it) {
    const double mid = 0.5 * (lo + hi);
    (central_mse(validation, WhiteNoise{mid}) < bias_mse ? lo : hi) = mid;
  }
  const double white_std = 0.5 * (lo + hi);
  const double white_mse = central_mse(validation, WhiteNoise{white_std});
  const double agreement = std::fabs(white_mse - bias_mse) / bias_mse;

  const double bias_success = suite_success(a, EpisodeBias{kCaseStudyBias});
  const double white_success = suite_success(a, WhiteNoise{white_std});
  const double elapsed = seconds_since(t0);

  Outcome o;
  o.pass = agreement <= kMseAgreement && white_success - bias_success >= kCaseStudyGap && elapsed < kLimitCaseStudy;
  o.detail = "bias " + fmt(kCaseStudyBias, 2) + " mse " + fmt(bias_mse, 4) + " success " + fmt(bias_success) +
             " | white std " + fmt(white_std) + " mse " + fmt(white_mse, 4) + " success " + fmt(white_success) +
             " | mse gap " + fmt(100 * agreement, 2) + "%, " + fmt(elapsed, 1) + " s";
  return o;
}

// 3-6 -----------------------------------------------------------------------

struct StudyRun {
  StudyResult result;
  double seconds = 0.0;
};

StudyRun run_default_study(int worker_count) {
  StudyConfig config = default_study_config();
  config.jobs = worker_count;
  const auto t0 = Clock::now();
  StudyRun run{run_study(config), 0.0};
  run.seconds = seconds_since(t0);
  return run;
}

double corr_or_nan(const CorrelationReport& report, std::string_view x_metric, std::string_view x_source,
                   std::string_view y_metric, std::string_view town) {
  const auto e = report.find(x_metric, x_source, y_metric, town);
  return e ? e->r : std::nan("");
}

Outcome validation_ordering(const StudyRun& run) {
  const auto& records = run.result.records;
  const CorrelationReport filtered = correlate_study(records, FilterSpec{"", 0.5});
  const std::string noisy = variant_key(TownId::B, 3, true);
  const std::string plain = variant_key(TownId::B, 1, false);
  const double r3 = corr_or_nan(filtered, "mse", noisy, "success_rate", "B");
  const double r1 = corr_or_nan(filtered, "mse", plain, "success_rate", "B");
  Outcome o;
  o.pass = std::isfinite(r3) && std::isfinite(r1) && std::fabs(r3) > std::fabs(r1) && run.seconds < kLimitStudy;
  o.detail = "town B, best 50%: |r(success, mse " + noisy + ")| = " + fmt(std::fabs(r3)) + " vs |r(success, mse " +
             plain + ")| = " + fmt(std::fabs(r1)) + ", study " + fmt(run.seconds, 1) + " s";
  return o;
}

Outcome metric_ordering(const StudyRun& run) {
  const CorrelationReport report = correlate_study(run.result.records);
  const std::string plain = variant_key(TownId::B, 1, false);
  const double mse = corr_or_nan(report, "mse", plain, "success_rate", "B");
  const double mae = corr_or_nan(report, "mae", plain, "success_rate", "B");
  const double tre = corr_or_nan(report, "tre", plain, "success_rate", "B");
  Outcome o;
  o.pass = std::isfinite(mse) && std::isfinite(mae) && std::isfinite(tre) && std::fabs(tre) > std::fabs(mse) &&
           std::fabs(mae) > std::fabs(mse);
  o.detail = "town B, " + plain + ": |r| tre " + fmt(std::fabs(tre)) + ", mae " + fmt(std::fabs(mae)) +
             ", mse " + fmt(std::fabs(mse));
  return o;
}

Outcome online_structure(const StudyRun& run) {
  const CorrelationReport report = correlate_study(run.result.records);
  Outcome o{true, ""};
  for (const char* town : {"A", "B"}) {
    const double completion = corr_or_nan(report, "success_rate", town, "avg_completion", town);
    const double km = corr_or_nan(report, "success_rate", town, "km_per_infraction", town);
    o.pass = o.pass && completion > kCompletionCorrelation && km > 0.0;
    o.detail += std::string(o.detail.empty() ? "" : " | ") + "town " + town + ": r(success, completion) " +
                fmt(completion) + ", r(success, km/infraction) " + fmt(km);
  }
  return o;
}

Outcome selection(const StudyRun& run) {
  int groups = 0;
  const int tre = total_selection_matches(run.result.records, "tre", &groups);
  const int mse = total_selection_matches(run.result.records, "mse");
  Outcome o;
  o.pass = groups >= 8 && tre >= mse;
  o.detail = "tre " + std::to_string(tre) + " vs mse " + std::to_string(mse) + " matches over " +
             std::to_string(groups) + " groups";
  return o;
}

// 7 -------------------------------------------------------------------------

bool same_samples(const Dataset& x, const Dataset& y) {
  if (!(x.manifest == y.manifest) || x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Sample& a = x.samples[i];
    const Sample& b = y.samples[i];
    if (a.observation.features != b.observation.features || a.command != b.command ||
        a.action.steering != b.action.steering || a.action.throttle != b.action.throttle ||
        a.action.brake != b.action.brake || a.speed != b.speed || a.sequence_id != b.sequence_id ||
        a.step_index != b.step_index || a.viewpoint != b.viewpoint || a.perturbed != b.perturbed) {
      return false;
    }
  }
  return true;
}

Outcome soundness() {
  Outcome o{true, ""};
  const ExpertPolicy expert;
  for (const auto& [town, condition] :
       {std::pair{TownId::A, clear_condition()}, std::pair{TownId::B, soft_rain_sunset_condition()}}) {
    const TownMap map = build_town(town, 0);
    const auto results = run_suite(map, expert, make_suite(map, 1), condition, jobs());
    int ok = 0;
    std::size_t infractions = 0;
    double lateral = 0.0;
    for (const auto& r : results) {
      ok += r.success ? 1 : 0;
      infractions += r.infractions.size();
      lateral = std::max(lateral, r.max_abs_lateral);
    }
    o.pass = o.pass && ok == static_cast<int>(results.size()) && infractions == 0 && lateral < kExpertMaxLateral;
    o.detail += "town " + std::string(to_string(town)) + " " + std::to_string(ok) + "/" +
                std::to_string(results.size()) + " ok, " + std::to_string(infractions) + " infractions, max |lat| " +
                fmt(lateral) + " m; ";
  }

  const VehicleParams vp;
  double worst = 0.0;
  for (double steer : {0.1, 0.3, 0.5, 0.8, 1.0}) {
    VehicleState s;
    s.speed = 6.0;
    const double throttle = vp.drag * s.speed / vp.max_accel;
    std::vector<double> xs, ys;
    for (int i = 0; i < 100; ++i) {
      s = step_vehicle(s, {steer, throttle, 0.0}, kPhysicsStep);
      xs.push_back(s.pose.x);
      ys.push_back(s.pose.y);
    }
    const double want = vp.wheelbase / std::tan(vp.max_wheel_angle * steer);
    worst = std::max(worst, oracle::rel_err(oracle::fit_circle_radius(xs, ys), want));
  }
  o.pass = o.pass && worst < kRadiusTolerance;
  o.detail += "arc radius err " + fmt(100 * worst, 3) + "%; ";

  const auto dir = std::filesystem::temp_directory_path() / "driveval_acceptance";
  std::filesystem::create_directories(dir);
  const TownMap b = build_town(TownId::B, 0);
  const Dataset d = collect(b, 0.05, Cameras::Three, true, soft_rain_sunset_condition(), 77);
  write_dataset(d, dir / "roundtrip.csv");
  const bool exact = same_samples(d, read_dataset(dir / "roundtrip.csv"));
  std::filesystem::remove_all(dir);
  o.pass = o.pass && exact;
  o.detail += "dataset round-trip " + std::string(exact ? "exact" : "MISMATCH") + " (" + std::to_string(d.size()) +
              " samples)";
  return o;
}

// 8 -------------------------------------------------------------------------

Outcome determinism(const StudyRun& first) {
  // A different worker count must not change a single byte.
  const int other = jobs() == 1 ? 4 : 1;
  const StudyRun second = run_default_study(other);
  const std::string a = records_to_jsonl(first.result.records);
  const std::string b = records_to_jsonl(second.result.records);
  bool same = a == b;
  same = same && canonical_dump(to_json(correlate_study(first.result.records))) ==
                     canonical_dump(to_json(correlate_study(second.result.records)));
  same = same && canonical_dump(to_json(correlate_study(first.result.records, FilterSpec{"", 0.5}))) ==
                     canonical_dump(to_json(correlate_study(second.result.records, FilterSpec{"", 0.5})));
  same = same && canonical_dump(first.result.manifest) == canonical_dump(second.result.manifest);
  Outcome o;
  o.pass = same && first.result.records.size() == 45;
  o.detail = std::to_string(first.result.records.size()) + " records, " + std::to_string(a.size()) +
             " bytes; runs with " + std::to_string(jobs()) + " and " + std::to_string(other) + " workers " + (same ? "identical" : "DIFFER");
  return o;
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("CRITERION %d %s: %s (%s)\n", id, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "metric-oracle equivalence", metric_oracles);
  report(2, "bias vs noise case study", case_study);

  StudyRun study;
  std::string study_error;
  try {
    study = run_default_study(jobs());
  } catch (const std::exception& e) {
    study_error = e.what();
  }
  auto with_study = [&](const std::function<Outcome(const StudyRun&)>& f) {
    return [&, f]() -> Outcome {
      if (!study_error.empty()) return {false, "study failed: " + study_error};
      return f(study);
    };
  };
  report(3, "validation-distribution ordering", with_study(validation_ordering));
  report(4, "metric-design ordering", with_study(metric_ordering));
  report(5, "online-metric cross-correlation", with_study(online_structure));
  report(6, "model-selection consistency", with_study(selection));
  report(7, "simulator and expert soundness", soundness);
  report(8, "determinism", with_study(determinism));

  std::printf("%d of 8 criteria pass\n", 8 - failures);
  return failures == 0 ? 0 : 1;
}
