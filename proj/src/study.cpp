#include "driveval/study.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>
#include <sstream>

#include "driveval/dataset.hpp"
#include "driveval/error.hpp"
#include "driveval/online_eval.hpp"
#include "driveval/parallel.hpp"
#include "driveval/rng.hpp"
#include "driveval/serialization.hpp"

namespace driveval {
namespace {

using perturbation::EpisodeBias;
using perturbation::OUNoise;
using perturbation::Quantize;
using perturbation::TurnFlip;
using perturbation::WhiteNoise;

constexpr std::array<double, 4> kAmounts = {0.05, 0.2, 1.0, 4.0};

std::string hours_label(double h) {
  std::ostringstream os;
  os << h << 'h';
  return os.str();
}

void check_keys(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!j.is_object()) throw Error(ErrorKind::InvalidArgument, std::string(where) + " must be a table");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorKind::InvalidArgument, "unknown key '" + key + "' in " + std::string(where));
    }
  }
}

TownSetting town_setting_from_json(const Json& j, std::string_view where) {
  check_keys(j, {"town", "condition"}, where);
  TownSetting t;
  t.town = parse_town(j.at("town").get<std::string>());
  t.condition = j.value("condition", std::string("clear"));
  condition_by_name(t.condition);
  return t;
}

Json to_json(const TownSetting& t) { return {{"town", to_string(t.town)}, {"condition", t.condition}}; }

ModelSpec model_from_json(const Json& j) {
  check_keys(j,
             {"id", "kind", "groups", "loss", "ridge", "feature_noise", "balancing", "depth", "data_hours",
              "distribution", "batch", "bins", "epochs", "augment_copies", "perturbation"},
             "[[models]]");
  ModelSpec m;
  m.id = j.at("id").get<std::string>();
  m.groups = j.value("groups", std::vector<std::string>{});
  const std::string kind = j.value("kind", std::string("trained"));
  if (kind == "trained") {
    if (j.contains("perturbation")) {
      throw Error(ErrorKind::InvalidArgument, "model " + m.id + ": trained models take no perturbation");
    }
    Json train = j;
    for (const char* key : {"id", "kind", "groups"}) train.erase(key);
    m.config = train_config_from_json(train);
  } else if (kind == "perturbed") {
    m.config = PerturbedModel{perturbation_from_json(j.at("perturbation"))};
  } else {
    throw Error(ErrorKind::InvalidArgument, "model " + m.id + ": unknown kind '" + kind + "'");
  }
  return m;
}

double train_hours_of(const ModelSpec& m) {
  if (const auto* t = std::get_if<TrainConfig>(&m.config)) return t->data_hours;
  return 0.0;
}

int size_rank(const ModelSpec& m) {
  const auto* t = std::get_if<TrainConfig>(&m.config);
  if (!t) return 0;
  int rank = 1;
  for (double a : kAmounts) {
    if (t->data_hours > a + 1e-12) ++rank;
  }
  return rank;
}

}  // namespace

std::vector<ModelSpec> default_family() {
  std::vector<ModelSpec> family;
  // The axis base sits mid-range online, so moving one parameter can help or
  // hurt and groups have a unique best model.
  TrainConfig base;
  base.loss = Loss::L1;
  base.ridge = 1e-3;
  base.balancing = false;
  base.depth = FeatureDepth::Shallow;
  base.data_hours = 0.2;
  base.distribution = DataDistribution::OneCamNoise;

  auto add = [&](std::string id, TrainConfig c, std::vector<std::string> groups) {
    family.push_back({std::move(id), c, std::move(groups)});
  };
  add("base", base, {"amount", "distribution", "balancing", "regularization", "depth", "loss"});

  for (double h : kAmounts) {
    if (h == base.data_hours) continue;
    TrainConfig c = base;
    c.data_hours = h;
    add("amount-" + hours_label(h), c, {"amount"});
  }
  for (auto d : {DataDistribution::OneCam, DataDistribution::ThreeCam, DataDistribution::ThreeCamNoise}) {
    TrainConfig c = base;
    c.distribution = d;
    add("dist-" + std::string(to_string(d)), c, {"distribution"});
  }
  {
    TrainConfig c = base;
    c.balancing = true;
    add("balanced", c, {"balancing"});
  }
  for (auto [ridge, name] : {std::pair{0.0, "reg-none"}, std::pair{1e-1, "reg-high"}}) {
    TrainConfig c = base;
    c.ridge = ridge;
    add(name, c, {"regularization"});
  }
  for (auto d : {FeatureDepth::Standard, FeatureDepth::Deep}) {
    TrainConfig c = base;
    c.depth = d;
    add("depth-" + std::string(to_string(d)), c, {"depth"});
  }
  {
    TrainConfig c = base;
    c.loss = Loss::L2;
    add("loss-L2", c, {"loss"});
  }
  // Standard-depth L2 models over the two data axes.
  for (auto d : {DataDistribution::OneCam, DataDistribution::OneCamNoise, DataDistribution::ThreeCam,
                 DataDistribution::ThreeCamNoise}) {
    for (double h : {0.2, 1.0}) {
      TrainConfig c;
      c.loss = Loss::L2;
      c.ridge = 1e-3;
      c.depth = FeatureDepth::Standard;
      c.distribution = d;
      c.data_hours = h;
      add("grid-" + std::string(to_string(d)) + "-" + hours_label(h), c, {});
    }
  }

  auto zoo = [&](std::string id, PerturbationSpec p) { family.push_back({std::move(id), PerturbedModel{p}, {}}); };
  zoo("expert", WhiteNoise{0.0});
  // Bias-dominant zoo: a dense bias sweep through the range where a constant
  // offset starts to cost routes, against a few white-noise levels.
  for (double m : {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.9, 1.0}) {
    zoo("bias-" + format_double(m), EpisodeBias{m});
  }
  for (double s : {0.3, 0.6, 0.8}) zoo("white-" + format_double(s), WhiteNoise{s});
  for (double s : {0.2, 0.4}) zoo("ou-slow-" + format_double(s), OUNoise{0.3, s});
  for (double p : {0.1, 0.5}) zoo("turnflip-" + format_double(p), TurnFlip{p});
  for (double q : {0.1, 0.3}) zoo("quantize-" + format_double(q), Quantize{q});
  return family;
}

StudyConfig default_study_config() {
  StudyConfig c;
  c.models = default_family();
  return c;
}

StudyConfig study_config_from_json(const Json& j) {
  check_keys(j, {"seed", "jobs", "trials", "validation_hours", "training", "towns", "offline", "models"},
             "study config");
  StudyConfig c;
  try {
    c.seed = j.value("seed", c.seed);
    c.jobs = j.value("jobs", c.jobs);
    c.trials = j.value("trials", c.trials);
    c.validation_hours = j.value("validation_hours", c.validation_hours);
    if (j.contains("training")) c.training = town_setting_from_json(j.at("training"), "[training]");
    if (j.contains("towns")) {
      c.towns.clear();
      for (const auto& t : j.at("towns")) c.towns.push_back(town_setting_from_json(t, "[[towns]]"));
    }
    if (j.contains("offline")) {
      const Json& o = j.at("offline");
      check_keys(o, {"T", "sigma", "alpha"}, "[offline]");
      c.offline.horizon = o.value("T", c.offline.horizon);
      c.offline.sigma = o.value("sigma", c.offline.sigma);
      c.offline.alpha = o.value("alpha", c.offline.alpha);
    }
    if (j.contains("models")) {
      for (const auto& m : j.at("models")) c.models.push_back(model_from_json(m));
    } else {
      c.models = default_family();
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("malformed study config: ") + e.what());
  }

  if (c.models.empty()) throw Error(ErrorKind::InvalidArgument, "model family is empty");
  if (c.towns.empty()) throw Error(ErrorKind::InvalidArgument, "no evaluation towns");
  if (c.trials < 1) throw Error(ErrorKind::InvalidArgument, "trials must be >= 1");
  if (!(c.validation_hours > 0.0)) throw Error(ErrorKind::InvalidArgument, "validation_hours must be > 0");
  if (c.offline.horizon < 0 || !(c.offline.sigma > 0.0) || !(c.offline.alpha >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "offline parameters out of range");
  }
  std::set<std::string> ids;
  std::set<TownId> towns;
  for (const auto& m : c.models) {
    if (!ids.insert(m.id).second) throw Error(ErrorKind::InvalidArgument, "duplicate model id " + m.id);
  }
  for (const auto& t : c.towns) {
    if (!towns.insert(t.town).second) throw Error(ErrorKind::InvalidArgument, "town listed twice");
  }
  return c;
}

StudyConfig study_config_from_toml(std::string_view text, std::string_view source) {
  return study_config_from_json(toml_to_json(text, source));
}

Json model_config_json(const ModelSpec& model) {
  Json j;
  if (const auto* t = std::get_if<TrainConfig>(&model.config)) {
    j = to_json(*t);
    j.erase("seed");
    j["kind"] = "trained";
  } else {
    j = {{"kind", "perturbed"},
         {"base", "expert"},
         {"perturbation", to_json(std::get<PerturbedModel>(model.config).perturbation)}};
  }
  j["id"] = model.id;
  j["groups"] = model.groups;
  return j;
}

Json to_json(const StudyConfig& c) {
  Json towns = Json::array();
  for (const auto& t : c.towns) towns.push_back(to_json(t));
  Json models = Json::array();
  for (const auto& m : c.models) models.push_back(model_config_json(m));
  return {{"seed", c.seed},
          {"jobs", c.jobs},
          {"trials", c.trials},
          {"validation_hours", c.validation_hours},
          {"training", to_json(c.training)},
          {"towns", std::move(towns)},
          {"offline", {{"T", c.offline.horizon}, {"sigma", c.offline.sigma}, {"alpha", c.offline.alpha}}},
          {"models", std::move(models)}};
}

std::string study_hash(const StudyConfig& config) {
  Json j = to_json(config);
  j.erase("jobs");
  return config_hash(j);
}

double max_training_hours(const StudyConfig& config) {
  double h = 0.0;
  for (const auto& m : config.models) h = std::max(h, train_hours_of(m));
  return h;
}

TrainingData collect_training_data(const StudyConfig& config) {
  TrainingData data;
  const double hours = max_training_hours(config);
  if (hours <= 0.0) return data;
  const TownMap map = build_town(config.training.town, config.seed);
  const Condition condition = condition_by_name(config.training.condition);
  const std::string hash = study_hash(config);
  Dataset sets[2];
  parallel_for(2, config.jobs, [&](std::size_t k) {
    sets[k] = collect(map, hours, Cameras::Three, k == 1, condition, derive_seed(config.seed, "training", k));
    sets[k].manifest.config_hash = hash;
  });
  data.three_cam = std::move(sets[0]);
  data.three_cam_noise = std::move(sets[1]);
  return data;
}

Dataset select_training_data(const TrainingData& data, const TrainConfig& train) {
  const Dataset& source = uses_noise(train.distribution) ? data.three_cam_noise : data.three_cam;
  Dataset out = source.first_hours(train.data_hours);
  if (!uses_three_cameras(train.distribution)) out = out.central_only();
  return out;
}

std::unique_ptr<Policy> build_model(const StudyConfig& config, std::size_t index, const TrainingData& data) {
  const ModelSpec& m = config.models.at(index);
  const std::uint64_t seed = derive_seed(config.seed, "model", index);
  if (const auto* t = std::get_if<TrainConfig>(&m.config)) {
    TrainConfig train = *t;
    train.seed = seed;
    return std::make_unique<RegressorPolicy>(fit_regressor(select_training_data(data, train), train));
  }
  return make_perturbed(ExpertPolicy(), std::get<PerturbedModel>(m.config).perturbation, seed);
}

StudyResult run_study(const StudyConfig& config, const StudyLog& log) {
  auto say = [&](const std::string& msg) {
    if (log) log(msg);
  };
  const std::string hash = study_hash(config);

  say("collecting training data (" + format_double(max_training_hours(config)) + " h, town " +
      std::string(to_string(config.training.town)) + ")");
  const TrainingData training = collect_training_data(config);

  struct TownData {
    TownSetting setting;
    TownMap map;
    Condition condition;
    std::vector<SuiteEntry> suite;
    std::vector<std::pair<std::string, Dataset>> validation;
  };
  std::vector<TownData> towns;
  for (std::size_t i = 0; i < config.towns.size(); ++i) {
    TownData t;
    t.setting = config.towns[i];
    t.map = build_town(t.setting.town, config.seed);
    t.condition = condition_by_name(t.setting.condition);
    t.suite = make_suite(t.map, derive_seed(config.seed, "suite", static_cast<std::uint64_t>(t.setting.town)),
                         config.trials);
    towns.push_back(std::move(t));
  }
  say("collecting validation sets");
  parallel_for(towns.size() * 2, config.jobs, [&](std::size_t k) {
    TownData& t = towns[k / 2];
    const bool noise = k % 2 == 1;
    Dataset three = collect(t.map, config.validation_hours, Cameras::Three, noise, t.condition,
                            derive_seed(config.seed, "validation", static_cast<std::uint64_t>(t.setting.town),
                                        noise ? 1 : 0));
    three.manifest.config_hash = hash;
    Dataset one = three.central_only();
    // Slots: [1cam, 1cam+noise, 3cam, 3cam+noise] filled below in a fixed order.
    static std::mutex m;
    std::lock_guard lock(m);
    t.validation.emplace_back(variant_key(t.setting.town, 1, noise), std::move(one));
    t.validation.emplace_back(variant_key(t.setting.town, 3, noise), std::move(three));
  });
  for (auto& t : towns) {
    std::sort(t.validation.begin(), t.validation.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
  }

  const std::size_t n = config.models.size();
  std::vector<StudyRecord> records(n);
  std::mutex log_mutex;
  std::size_t done = 0;
  parallel_for(n, config.jobs, [&](std::size_t i) {
    const ModelSpec& spec = config.models[i];
    const auto policy = build_model(config, i, training);
    StudyRecord r;
    r.model_id = spec.id;
    r.kind = std::holds_alternative<TrainConfig>(spec.config) ? "trained" : "perturbed";
    Json cfg = model_config_json(spec);
    cfg["seed"] = derive_seed(config.seed, "model", i);
    r.config = canonical_dump(cfg);
    r.groups = spec.groups;
    r.size_rank = size_rank(spec);
    for (const auto& t : towns) {
      for (const auto& [key, set] : t.validation) r.offline[key] = evaluate_offline(*policy, set, config.offline);
      const auto results = run_suite(t.map, *policy, t.suite, t.condition, 1);
      r.online[std::string(to_string(t.setting.town))] = aggregate_online(results);
    }
    records[i] = std::move(r);
    std::lock_guard lock(log_mutex);
    ++done;
    std::ostringstream os;
    os << "[" << done << "/" << n << "] " << spec.id;
    for (const auto& [town, rep] : records[i].online) os << "  " << town << ": success " << rep.success_rate;
    say(os.str());
  });

  StudyResult result;
  result.records = std::move(records);
  Json validation = Json::object();
  for (const auto& t : towns) {
    for (const auto& [key, set] : t.validation) {
      validation[key] = {{"describe", describe_validation(set.manifest)},
                         {"samples", set.size()},
                         {"condition", t.setting.condition}};
    }
  }
  Json suites = Json::object();
  for (const auto& t : towns) {
    suites[std::string(to_string(t.setting.town))] =
        suite_to_json(t.setting.town, derive_seed(config.seed, "suite", static_cast<std::uint64_t>(t.setting.town)),
                      t.suite);
  }
  result.manifest = {{"format", kStudyFormat},
                     {"config_hash", hash},
                     {"seed", config.seed},
                     {"models", n},
                     {"training_samples", {{"3cam", training.three_cam.size()},
                                           {"3cam+noise", training.three_cam_noise.size()}}},
                     {"validation", std::move(validation)},
                     {"suites", std::move(suites)}};
  return result;
}

int total_selection_matches(const std::vector<StudyRecord>& records, std::string_view offline_metric,
                            int* group_count) {
  std::vector<ModelGroup> groups;
  for (auto& g : group_by_axis(records)) {
    if (g.members.size() >= 2) groups.push_back(std::move(g));
  }
  std::set<std::string> towns;
  for (const auto& r : records) {
    for (const auto& [town, rep] : r.online) towns.insert(town);
  }
  int matches = 0;
  int count = 0;
  for (const auto& town : towns) {
    const auto res = selection_consistency(records, groups, offline_metric, town + "/1cam", town);
    matches += res.matches;
    count += res.groups;
  }
  if (group_count) *group_count = count;
  return matches;
}

}  // namespace driveval
