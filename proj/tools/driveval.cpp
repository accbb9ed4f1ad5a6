// driveval: command-line front end for the offline/online metric study.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "driveval/analysis.hpp"
#include "driveval/dataset.hpp"
#include "driveval/error.hpp"
#include "driveval/offline_metrics.hpp"
#include "driveval/online_eval.hpp"
#include "driveval/serialization.hpp"
#include "driveval/study.hpp"
#include "driveval/trainer.hpp"

namespace fs = std::filesystem;
using namespace driveval;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  int jobs = 1;
  std::string out;
};

fs::path out_dir(const Globals& g) {
  if (!g.out.empty()) return g.out;
  if (const char* env = std::getenv("DRIVEVAL_OUT"); env && *env) return env;
  return ".";
}

void write_json(const fs::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

// "white_noise:0.05", "episode_bias:0.1", "ou_noise:THETA:STD", "turn_flip:P", "quantize:STEP"
PerturbationSpec parse_perturbation(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
  auto arg = [&](std::size_t i) {
    if (i >= parts.size()) throw Error(ErrorKind::InvalidArgument, "missing parameter in '" + text + "'");
    return parse_double(parts[i]);
  };
  const std::string& type = parts.empty() ? text : parts[0];
  PerturbationSpec spec;
  if (type == "white_noise") {
    spec = perturbation::WhiteNoise{arg(1)};
  } else if (type == "episode_bias") {
    spec = perturbation::EpisodeBias{arg(1)};
  } else if (type == "ou_noise") {
    spec = perturbation::OUNoise{arg(1), arg(2)};
  } else if (type == "turn_flip") {
    spec = perturbation::TurnFlip{arg(1)};
  } else if (type == "quantize") {
    spec = perturbation::Quantize{arg(1)};
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown perturbation '" + type + "'");
  }
  validate(spec);
  return spec;
}

struct PolicyArgs {
  std::string policy = "expert";
  std::string perturb;
};

std::unique_ptr<Policy> load_policy(const PolicyArgs& args, std::uint64_t seed) {
  std::unique_ptr<Policy> base;
  if (args.policy == "expert") {
    base = std::make_unique<ExpertPolicy>();
  } else {
    Json j = parse_json(read_text_file(args.policy));
    if (j.contains("model")) j = j.at("model");
    base = std::make_unique<RegressorPolicy>(regressor_from_json(j));
  }
  if (args.perturb.empty()) return base;
  return make_perturbed(*base, parse_perturbation(args.perturb), derive_seed(seed, "cli_policy"));
}

Json policy_json(const PolicyArgs& args) {
  // Model files are identified by content so the hash does not depend on where they live.
  Json j = {{"policy", args.policy == "expert" ? Json("expert") : Json("model")}};
  if (args.policy != "expert") j["policy_file_hash"] = config_hash(parse_json(read_text_file(args.policy)));
  if (!args.perturb.empty()) j["perturb"] = to_json(parse_perturbation(args.perturb));
  return j;
}

std::pair<std::string, double> parse_filter(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(ErrorKind::InvalidArgument, "--filter-best expects METRIC:FRACTION");
  return {text.substr(0, colon), parse_double(text.substr(colon + 1))};
}

void add_globals(CLI::App& app, Globals& g) {
  app.add_option("--seed", g.seed, "Master seed");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory (default: $DRIVEVAL_OUT or .)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Offline vs online driving-policy evaluation workbench"};
  app.require_subcommand(1);
  Globals g;
  add_globals(app, g);

  // town
  std::string town_name = "A";
  auto* town_cmd = app.add_subcommand("town", "Export a town map as JSON");
  town_cmd->add_option("--town", town_name, "A or B")->check(CLI::IsMember({"A", "B"}));

  // collect
  struct {
    std::string town = "A";
    std::string condition = "clear";
    double hours = 0.1;
    int cameras = 1;
    bool noise = false;
    std::string name;
  } col;
  auto* collect_cmd = app.add_subcommand("collect", "Collect expert driving data");
  collect_cmd->add_option("--town", col.town)->check(CLI::IsMember({"A", "B"}));
  collect_cmd->add_option("--condition", col.condition)->check(CLI::IsMember({"clear", "soft_rain_sunset"}));
  collect_cmd->add_option("--hours", col.hours)->check(CLI::PositiveNumber);
  collect_cmd->add_option("--cameras", col.cameras)->check(CLI::IsMember({1, 3}));
  collect_cmd->add_flag("--noise", col.noise, "Inject steering impulses into 10% of episodes");
  collect_cmd->add_option("--name", col.name, "File stem (default derived from the settings)");

  // train
  std::string train_data;
  std::string train_name = "model";
  TrainConfig tc;
  std::string loss = "L2", depth = "standard", distribution = "1cam";
  auto* train_cmd = app.add_subcommand("train", "Fit a per-command steering regressor");
  train_cmd->add_option("--data", train_data, "Training CSV (3-camera data for 3cam distributions)")->required();
  train_cmd->add_option("--loss", loss)->check(CLI::IsMember({"L2", "L1"}));
  train_cmd->add_option("--ridge", tc.ridge)->check(CLI::NonNegativeNumber);
  train_cmd->add_flag("--feature-noise", tc.feature_noise);
  train_cmd->add_flag("--balancing", tc.balancing);
  train_cmd->add_option("--depth", depth)->check(CLI::IsMember({"shallow", "standard", "deep"}));
  train_cmd->add_option("--hours", tc.data_hours)->check(CLI::PositiveNumber);
  train_cmd->add_option("--distribution", distribution)
      ->check(CLI::IsMember({"1cam", "1cam+noise", "3cam", "3cam+noise"}));
  train_cmd->add_option("--name", train_name, "Output file stem");

  // eval-offline
  PolicyArgs off_policy;
  std::string off_data;
  OfflineParams off_params;
  auto* offline_cmd = app.add_subcommand("eval-offline", "Score a policy on a validation set");
  offline_cmd->add_option("--policy", off_policy.policy, "'expert' or a model JSON file");
  offline_cmd->add_option("--perturb", off_policy.perturb, "e.g. white_noise:0.05, episode_bias:0.1");
  offline_cmd->add_option("--data", off_data, "Validation CSV")->required();
  offline_cmd->add_option("--T", off_params.horizon)->check(CLI::NonNegativeNumber);
  offline_cmd->add_option("--sigma", off_params.sigma)->check(CLI::PositiveNumber);
  offline_cmd->add_option("--alpha", off_params.alpha)->check(CLI::NonNegativeNumber);

  // eval-online
  PolicyArgs on_policy;
  std::string on_town = "A";
  std::string on_condition;
  int trials = kSuiteTrials;
  auto* online_cmd = app.add_subcommand("eval-online", "Drive a policy on the benchmark suite");
  online_cmd->add_option("--policy", on_policy.policy, "'expert' or a model JSON file");
  online_cmd->add_option("--perturb", on_policy.perturb, "e.g. white_noise:0.05, episode_bias:0.1");
  online_cmd->add_option("--town", on_town)->check(CLI::IsMember({"A", "B"}));
  online_cmd->add_option("--condition", on_condition, "Default: clear in A, soft_rain_sunset in B")
      ->check(CLI::IsMember({"clear", "soft_rain_sunset"}));
  online_cmd->add_option("--trials", trials)->check(CLI::PositiveNumber);

  // study
  std::string study_config_path;
  auto* study_cmd = app.add_subcommand("study", "Run the full model-family study");
  study_cmd->add_option("--config", study_config_path, "Study TOML (default: built-in family)");

  // correlate
  std::string corr_in;
  std::string corr_filter;
  auto* corr_cmd = app.add_subcommand("correlate", "Pearson correlations over a study file");
  corr_cmd->add_option("--in", corr_in, "study.jsonl")->required();
  corr_cmd->add_option("--filter-best", corr_filter, "METRIC:FRACTION, METRIC may be 'respective'");

  // report
  std::string report_in;
  auto* report_cmd = app.add_subcommand("report", "Scatter plots and summary from a study file");
  report_cmd->add_option("--in", report_in, "study.jsonl")->required();

  for (auto* sub : app.get_subcommands({})) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e, std::cerr, std::cerr);
    return 2;
  }

  const fs::path out = out_dir(g);
  try {
    if (*town_cmd) {
      const TownMap map = build_town(parse_town(town_name), g.seed);
      Json j = to_json(map);
      j["config_hash"] = config_hash({{"command", "town"}, {"town", town_name}, {"seed", g.seed}});
      const fs::path path = out / ("town_" + town_name + ".json");
      write_json(path, j);
      std::cout << path.string() << "\n";
    } else if (*collect_cmd) {
      const Json cfg = {{"command", "collect"}, {"town", col.town}, {"condition", col.condition},
                        {"hours", col.hours},   {"cameras", col.cameras}, {"noise", col.noise},
                        {"seed", g.seed}};
      const TownMap map = build_town(parse_town(col.town), g.seed);
      Dataset d = collect(map, col.hours, col.cameras == 3 ? Cameras::Three : Cameras::One, col.noise,
                          condition_by_name(col.condition), derive_seed(g.seed, "cli_collect"));
      d.manifest.config_hash = config_hash(cfg);
      std::string stem = col.name;
      if (stem.empty()) {
        stem = "data_" + col.town + "_" + col.condition + "_" + std::to_string(col.cameras) + "cam" +
               (col.noise ? "_noise" : "");
      }
      const fs::path path = out / (stem + ".csv");
      write_dataset(d, path);
      std::cout << path.string() << " (" << d.size() << " samples)\n";
    } else if (*train_cmd) {
      tc.loss = parse_loss(loss);
      tc.depth = parse_depth(depth);
      tc.distribution = parse_distribution(distribution);
      tc.seed = derive_seed(g.seed, "cli_train");
      validate(tc);
      const Dataset d = read_dataset(train_data);
      if (uses_three_cameras(tc.distribution) && d.manifest.cameras != 3) {
        throw Error(ErrorKind::InvalidArgument, "distribution " + distribution + " needs 3-camera data");
      }
      if (uses_noise(tc.distribution) != d.manifest.noise) {
        throw Error(ErrorKind::InvalidArgument, "distribution " + distribution + " does not match the data's noise flag");
      }
      Dataset subset = d.first_hours(tc.data_hours);
      if (!uses_three_cameras(tc.distribution)) subset = subset.central_only();
      const RegressorPolicy model = fit_regressor(subset, tc);
      const Json cfg = {{"command", "train"}, {"train", to_json(tc)}, {"data_hash", d.manifest.config_hash}};
      Json j = {{"model", to_json(model)}, {"config", to_json(tc)}, {"config_hash", config_hash(cfg)}};
      const fs::path path = out / (train_name + ".json");
      write_json(path, j);
      std::cout << path.string() << "\n";
    } else if (*offline_cmd) {
      const auto policy = load_policy(off_policy, g.seed);
      const Dataset d = read_dataset(off_data);
      const OfflineReport r = evaluate_offline(*policy, d, off_params);
      Json j = to_json(r);
      j["config_hash"] = config_hash({{"command", "eval-offline"},
                                      {"policy", policy_json(off_policy)},
                                      {"data_hash", d.manifest.config_hash},
                                      {"seed", g.seed}});
      write_json(out / "offline_report.json", j);
      std::cout << j.dump(2) << "\n";
    } else if (*online_cmd) {
      const TownId town = parse_town(on_town);
      const std::string cond_name =
          !on_condition.empty() ? on_condition : (town == TownId::A ? "clear" : "soft_rain_sunset");
      const TownMap map = build_town(town, g.seed);
      const auto policy = load_policy(on_policy, g.seed);
      const std::uint64_t suite_seed = derive_seed(g.seed, "suite", static_cast<std::uint64_t>(town));
      const auto suite = make_suite(map, suite_seed, trials);
      const auto results = run_suite(map, *policy, suite, condition_by_name(cond_name), g.jobs);
      const std::string hash = config_hash({{"command", "eval-online"},
                                            {"policy", policy_json(on_policy)},
                                            {"town", on_town},
                                            {"condition", cond_name},
                                            {"trials", trials},
                                            {"seed", g.seed}});
      std::string episodes;
      for (const auto& res : results) {
        Json line = to_json(res);
        line["config_hash"] = hash;
        episodes += line.dump() + "\n";
      }
      write_text_file(out / ("episodes_" + on_town + ".jsonl"), episodes);
      Json suite_json = suite_to_json(town, suite_seed, suite);
      suite_json["config_hash"] = hash;
      write_json(out / ("suite_" + on_town + ".json"), suite_json);
      Json j = to_json(aggregate_online(results));
      j["town"] = on_town;
      j["condition"] = cond_name;
      j["config_hash"] = hash;
      write_json(out / ("online_report_" + on_town + ".json"), j);
      std::cout << j.dump(2) << "\n";
    } else if (*study_cmd) {
      StudyConfig cfg = study_config_path.empty()
                            ? default_study_config()
                            : study_config_from_toml(read_text_file(study_config_path), study_config_path);
      if (app.get_option("--seed")->count() > 0) cfg.seed = g.seed;
      if (app.get_option("--jobs")->count() > 0) cfg.jobs = g.jobs;
      const StudyResult res = run_study(cfg, [](const std::string& msg) { std::cerr << msg << "\n"; });
      const std::string hash = study_hash(cfg);
      std::string lines;
      for (const auto& r : res.records) {
        Json j = to_json(r);
        j["config_hash"] = hash;
        lines += j.dump() + "\n";
      }
      write_text_file(out / "study.jsonl", lines);
      Json manifest = res.manifest;
      manifest["config"] = to_json(cfg);
      manifest["config"].erase("jobs");
      write_json(out / "study_manifest.json", manifest);
      std::cout << (out / "study.jsonl").string() << " (" << res.records.size() << " records)\n";
    } else if (*corr_cmd) {
      const std::string text = read_text_file(corr_in);
      const auto records = records_from_jsonl(text);
      std::optional<FilterSpec> filter;
      if (!corr_filter.empty()) {
        auto [metric, fraction] = parse_filter(corr_filter);
        filter = FilterSpec{metric == "respective" ? "" : metric, fraction};
      }
      Json j = to_json(correlate_study(records, filter));
      j["config_hash"] = config_hash({{"command", "correlate"},
                                      {"input_hash", format_double(static_cast<double>(fnv1a(text)))},
                                      {"filter", corr_filter}});
      const fs::path path = out / "correlation.json";
      write_json(path, j);
      std::cout << path.string() << " (" << j["entries"].size() << " pairs, " << j["warnings"].size()
                << " warnings)\n";
    } else if (*report_cmd) {
      const std::string text = read_text_file(report_in);
      const auto records = records_from_jsonl(text);
      std::set<std::string> towns;
      for (const auto& r : records) {
        for (const auto& [town, rep] : r.online) towns.insert(town);
      }
      const fs::path dir = out / "report";
      Json summary = Json::object();
      for (const auto& town : towns) {
        for (auto metric : kOfflineMetrics) {
          for (const char* variant : {"/1cam", "/3cam+noise"}) {
            const std::string source = town + variant;
            const ScatterPair pair{std::string(metric), source, "success_rate", town};
            std::string stem = "success_vs_" + std::string(metric) + "_" + source;
            std::replace(stem.begin(), stem.end(), '/', '_');
            std::replace(stem.begin(), stem.end(), '+', '_');
            emit_scatter(records, pair, dir / stem);
          }
        }
        for (const char* y : {"avg_completion", "km_per_infraction"}) {
          emit_scatter(records, {"success_rate", town, y, town}, dir / ("success_vs_" + std::string(y) + "_" + town));
        }
        int groups = 0;
        Json sel = Json::object();
        for (auto metric : kOfflineMetrics) {
          std::vector<ModelGroup> gs;
          for (auto& grp : group_by_axis(records)) {
            if (grp.members.size() >= 2) gs.push_back(grp);
          }
          const auto res = selection_consistency(records, gs, metric, town + "/1cam", town);
          sel[std::string(metric)] = res.matches;
          groups = res.groups;
        }
        summary[town] = {{"selection_matches", sel}, {"groups", groups}};
      }
      const auto corr = correlate_study(records, FilterSpec{});
      write_json(dir / "correlation_best50.json", to_json(corr));
      write_json(dir / "correlation_all.json", to_json(correlate_study(records)));
      write_json(dir / "summary.json", summary);
      std::cout << dir.string() << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
