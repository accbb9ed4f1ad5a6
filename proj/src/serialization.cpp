#include "driveval/serialization.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "toml.hpp"

#include "driveval/error.hpp"
#include "driveval/rng.hpp"

namespace driveval {
namespace {

// Runs a JSON decoder, turning library exceptions into domain errors.
template <typename F>
auto guarded(std::string_view what, F&& f) {
  try {
    return f();
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, "malformed " + std::string(what) + ": " + e.what());
  }
}

Json vec_to_json(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json toml_node_to_json(const toml::node& node) {
  if (const auto* t = node.as_table()) {
    Json out = Json::object();
    for (const auto& [key, value] : *t) out[std::string(key.str())] = toml_node_to_json(value);
    return out;
  }
  if (const auto* a = node.as_array()) {
    Json out = Json::array();
    for (const auto& value : *a) out.push_back(toml_node_to_json(value));
    return out;
  }
  if (const auto* s = node.as_string()) return s->get();
  if (const auto* i = node.as_integer()) return i->get();
  if (const auto* f = node.as_floating_point()) return f->get();
  if (const auto* b = node.as_boolean()) return b->get();
  std::ostringstream os;
  node.visit([&](const auto& v) { os << v; });
  return os.str();
}

}  // namespace

std::string format_double(double x) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  double x = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::InvalidArgument, "not a number: '" + std::string(text) + "'");
  }
  return x;
}

std::int64_t parse_int(std::string_view text) {
  std::int64_t x = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), x);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw Error(ErrorKind::InvalidArgument, "not an integer: '" + std::string(text) + "'");
  }
  return x;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  if (in.bad()) throw Error(ErrorKind::Io, "read failed: " + path.string());
  return os.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed: " + path.string());
}

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("malformed JSON: ") + e.what());
  }
}

std::string canonical_dump(const Json& j) { return j.dump(); }

std::string config_hash(const Json& j) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(canonical_dump(j))));
  return buf;
}

Json toml_to_json(std::string_view text, std::string_view source) {
  try {
    const toml::table table = toml::parse(text, source);
    return toml_node_to_json(table);
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << source << ':' << e.source().begin.line << ':' << e.source().begin.column << ": "
       << e.description();
    throw Error(ErrorKind::InvalidArgument, os.str());
  }
}

Json to_json(const Condition& c) {
  return {{"name", c.name},
          {"feature_std", c.feature_std},
          {"curvature_bias", c.curvature_bias}};
}

Condition condition_from_json(const Json& j) {
  return guarded("condition", [&] {
    Condition c;
    c.name = j.at("name").get<std::string>();
    c.feature_std = j.at("feature_std").get<std::array<double, kFeatureCount>>();
    c.curvature_bias = j.at("curvature_bias").get<double>();
    for (double s : c.feature_std) {
      if (!(s >= 0.0)) throw Error(ErrorKind::InvalidArgument, "condition std must be >= 0");
    }
    return c;
  });
}

Json to_json(const DatasetManifest& m) {
  return {{"format", m.format},
          {"town", to_string(m.town)},
          {"condition", to_json(m.condition)},
          {"cameras", m.cameras},
          {"noise", m.noise},
          {"hours", m.hours},
          {"seed", m.seed},
          {"noisy_sequences", m.noisy_sequences},
          {"config_hash", m.config_hash}};
}

DatasetManifest manifest_from_json(const Json& j) {
  return guarded("dataset manifest", [&] {
    DatasetManifest m;
    m.format = j.at("format").get<std::string>();
    m.town = parse_town(j.at("town").get<std::string>());
    m.condition = condition_from_json(j.at("condition"));
    m.cameras = j.at("cameras").get<int>();
    m.noise = j.at("noise").get<bool>();
    m.hours = j.at("hours").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.noisy_sequences = j.at("noisy_sequences").get<std::vector<std::int64_t>>();
    m.config_hash = j.at("config_hash").get<std::string>();
    return m;
  });
}

Json to_json(const TownMap& map) {
  Json intersections = Json::array();
  for (const auto& n : map.intersections) {
    intersections.push_back({{"id", n.id}, {"x", n.position.x()}, {"y", n.position.y()}});
  }
  Json segments = Json::array();
  for (const auto& s : map.segments) {
    Json poly = Json::array();
    for (const auto& p : s.polyline) poly.push_back({p.x(), p.y()});
    segments.push_back({{"id", s.id},
                        {"from", s.from},
                        {"to", s.to},
                        {"width", s.width},
                        {"polyline", std::move(poly)},
                        {"opposing", s.opposing}});
  }
  return {{"format", kTownFormat},
          {"town", to_string(map.town)},
          {"seed", map.seed},
          {"rows", map.rows},
          {"cols", map.cols},
          {"block_length", map.block_length},
          {"intersections", std::move(intersections)},
          {"segments", std::move(segments)}};
}

Json to_json(const PerturbationSpec& spec) {
  using namespace perturbation;
  return std::visit(
      [](const auto& p) -> Json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, WhiteNoise>) return {{"type", "white_noise"}, {"std", p.std}};
        if constexpr (std::is_same_v<T, EpisodeBias>) {
          return {{"type", "episode_bias"}, {"magnitude", p.magnitude}};
        }
        if constexpr (std::is_same_v<T, OUNoise>) {
          return {{"type", "ou_noise"}, {"theta", p.theta}, {"std", p.std}};
        }
        if constexpr (std::is_same_v<T, TurnFlip>) return {{"type", "turn_flip"}, {"prob", p.prob}};
        if constexpr (std::is_same_v<T, Quantize>) return {{"type", "quantize"}, {"step", p.step}};
      },
      spec);
}

PerturbationSpec perturbation_from_json(const Json& j) {
  using namespace perturbation;
  const PerturbationSpec spec = guarded("perturbation", [&]() -> PerturbationSpec {
    const auto type = j.at("type").get<std::string>();
    if (type == "white_noise") return WhiteNoise{j.at("std").get<double>()};
    if (type == "episode_bias") return EpisodeBias{j.at("magnitude").get<double>()};
    if (type == "ou_noise") return OUNoise{j.at("theta").get<double>(), j.at("std").get<double>()};
    if (type == "turn_flip") return TurnFlip{j.at("prob").get<double>()};
    if (type == "quantize") return Quantize{j.at("step").get<double>()};
    throw Error(ErrorKind::InvalidArgument, "unknown perturbation type '" + type + "'");
  });
  validate(spec);
  return spec;
}

Json to_json(const TrainConfig& c) {
  return {{"loss", to_string(c.loss)},
          {"ridge", c.ridge},
          {"feature_noise", c.feature_noise},
          {"balancing", c.balancing},
          {"depth", to_string(c.depth)},
          {"data_hours", c.data_hours},
          {"distribution", to_string(c.distribution)},
          {"seed", c.seed},
          {"batch", c.batch},
          {"bins", c.bins},
          {"epochs", c.epochs},
          {"augment_copies", c.augment_copies}};
}

TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c = guarded("train config", [&] {
    TrainConfig c;
    c.loss = parse_loss(j.value("loss", std::string(to_string(c.loss))));
    c.ridge = j.value("ridge", c.ridge);
    c.feature_noise = j.value("feature_noise", c.feature_noise);
    c.balancing = j.value("balancing", c.balancing);
    c.depth = parse_depth(j.value("depth", std::string(to_string(c.depth))));
    c.data_hours = j.value("data_hours", c.data_hours);
    c.distribution = parse_distribution(j.value("distribution", std::string(to_string(c.distribution))));
    c.seed = j.value("seed", c.seed);
    c.batch = j.value("batch", c.batch);
    c.bins = j.value("bins", c.bins);
    c.epochs = j.value("epochs", c.epochs);
    c.augment_copies = j.value("augment_copies", c.augment_copies);
    return c;
  });
  validate(c);
  return c;
}

Json to_json(const RegressorPolicy& policy) {
  Json features = Json::array();
  for (int f : policy.features()) features.push_back(kFeatureNames[static_cast<std::size_t>(f)]);
  Json heads = Json::object();
  for (Command c : kAllCommands) {
    const auto& h = policy.head(c);
    heads[std::string(to_string(c))] = {
        {"weights", vec_to_json(h.weights)}, {"bias", h.bias}, {"fallback", h.fallback}};
  }
  return {{"format", kRegressorFormat}, {"features", std::move(features)}, {"heads", std::move(heads)}};
}

RegressorPolicy regressor_from_json(const Json& j) {
  return guarded("regressor", [&] {
    if (j.at("format").get<std::string>() != kRegressorFormat) {
      throw Error(ErrorKind::FormatVersionMismatch, "regressor format is not " + std::string(kRegressorFormat));
    }
    std::vector<int> features;
    for (const auto& name : j.at("features")) {
      const auto s = name.get<std::string>();
      const auto it = std::find(kFeatureNames.begin(), kFeatureNames.end(), s);
      if (it == kFeatureNames.end()) throw Error(ErrorKind::InvalidArgument, "unknown feature '" + s + "'");
      features.push_back(static_cast<int>(it - kFeatureNames.begin()));
    }
    std::array<RegressorPolicy::Head, 4> heads;
    for (Command c : kAllCommands) {
      const Json& h = j.at("heads").at(std::string(to_string(c)));
      const auto w = h.at("weights").get<std::vector<double>>();
      if (w.size() != features.size()) {
        throw Error(ErrorKind::InvalidArgument, "head weight count differs from feature count");
      }
      auto& head = heads[static_cast<int>(c)];
      head.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
      head.bias = h.at("bias").get<double>();
      head.fallback = h.value("fallback", false);
    }
    return RegressorPolicy(std::move(features), std::move(heads));
  });
}

Json to_json(const OfflineReport& r) {
  Json metrics = Json::object();
  for (auto m : kOfflineMetrics) metrics[std::string(m)] = r.value(m);
  return {{"metrics", std::move(metrics)},
          {"params", {{"T", r.params.horizon}, {"sigma", r.params.sigma}, {"alpha", r.params.alpha}}},
          {"n", r.n},
          {"validation", r.validation}};
}

OfflineReport offline_report_from_json(const Json& j) {
  return guarded("offline report", [&] {
    OfflineReport r;
    const Json& m = j.at("metrics");
    r.mse = m.at("mse").get<double>();
    r.mae = m.at("mae").get<double>();
    r.swae = m.at("swae").get<double>();
    r.cum_swae = m.at("cum_swae").get<double>();
    r.qce = m.at("qce").get<double>();
    r.tre = m.at("tre").get<double>();
    const Json& p = j.at("params");
    r.params.horizon = p.at("T").get<int>();
    r.params.sigma = p.at("sigma").get<double>();
    r.params.alpha = p.at("alpha").get<double>();
    r.n = j.at("n").get<std::size_t>();
    r.validation = j.at("validation").get<std::string>();
    return r;
  });
}

Json to_json(const OnlineReport& r) {
  return {{"success_rate", r.success_rate},
          {"avg_completion", r.avg_completion},
          {"km_per_infraction", r.km_per_infraction},
          {"zero_infractions", r.zero_infractions},
          {"trials", r.trials},
          {"total_km", r.total_km},
          {"infractions", r.infractions}};
}

OnlineReport online_report_from_json(const Json& j) {
  return guarded("online report", [&] {
    OnlineReport r;
    r.success_rate = j.at("success_rate").get<double>();
    r.avg_completion = j.at("avg_completion").get<double>();
    r.km_per_infraction = j.at("km_per_infraction").get<double>();
    r.zero_infractions = j.at("zero_infractions").get<bool>();
    r.trials = j.at("trials").get<std::size_t>();
    r.total_km = j.at("total_km").get<double>();
    r.infractions = j.at("infractions").get<std::size_t>();
    return r;
  });
}

Json to_json(const EpisodeResult& r) {
  Json infractions = Json::array();
  for (const auto& e : r.infractions) {
    infractions.push_back({{"kind", to_string(e.kind)},
                           {"time", e.time},
                           {"position", {e.position.x(), e.position.y()}}});
  }
  return {{"start", r.start},
          {"goal", r.goal},
          {"seed", r.seed},
          {"success", r.success},
          {"completion", r.completion},
          {"distance_km", r.distance_driven},
          {"termination", to_string(r.termination)},
          {"duration", r.duration},
          {"max_abs_lateral", r.max_abs_lateral},
          {"infractions", std::move(infractions)}};
}

Json suite_to_json(TownId town, std::uint64_t suite_seed, std::span<const SuiteEntry> suite) {
  Json trials = Json::array();
  for (const auto& e : suite) trials.push_back({{"start", e.start}, {"goal", e.goal}, {"seed", e.seed}});
  return {{"format", kSuiteFormat}, {"town", to_string(town)}, {"suite_seed", suite_seed},
          {"trials", std::move(trials)}};
}

std::vector<SuiteEntry> suite_from_json(const Json& j) {
  return guarded("suite", [&] {
    if (j.at("format").get<std::string>() != kSuiteFormat) {
      throw Error(ErrorKind::FormatVersionMismatch, "suite format is not " + std::string(kSuiteFormat));
    }
    std::vector<SuiteEntry> out;
    for (const auto& t : j.at("trials")) {
      out.push_back({t.at("start").get<int>(), t.at("goal").get<int>(), t.at("seed").get<std::uint64_t>()});
    }
    return out;
  });
}

Json to_json(const StudyRecord& record) {
  Json offline = Json::object();
  for (const auto& [variant, report] : record.offline) offline[variant] = to_json(report);
  Json online = Json::object();
  for (const auto& [town, report] : record.online) online[town] = to_json(report);
  return {{"model_id", record.model_id},
          {"kind", record.kind},
          {"config", parse_json(record.config)},
          {"groups", record.groups},
          {"size_rank", record.size_rank},
          {"offline", std::move(offline)},
          {"online", std::move(online)}};
}

StudyRecord study_record_from_json(const Json& j) {
  return guarded("study record", [&] {
    StudyRecord r;
    r.model_id = j.at("model_id").get<std::string>();
    r.kind = j.at("kind").get<std::string>();
    r.config = canonical_dump(j.at("config"));
    r.groups = j.at("groups").get<std::vector<std::string>>();
    r.size_rank = j.at("size_rank").get<int>();
    for (const auto& [variant, report] : j.at("offline").items()) {
      r.offline[variant] = offline_report_from_json(report);
    }
    for (const auto& [town, report] : j.at("online").items()) {
      r.online[town] = online_report_from_json(report);
    }
    if (r.offline.empty() || r.online.empty()) {
      throw Error(ErrorKind::InvalidArgument, r.model_id + " needs offline and online results");
    }
    return r;
  });
}

std::string records_to_jsonl(const std::vector<StudyRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

std::vector<StudyRecord> records_from_jsonl(std::string_view text) {
  std::vector<StudyRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(study_record_from_json(parse_json(line)));
    } catch (const Error& e) {
      throw Error(ErrorKind::CorruptRow, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

Json to_json(const CorrelationReport& report) {
  Json entries = Json::array();
  for (const auto& e : report.entries) {
    entries.push_back({{"kind", e.kind},
                       {"x_metric", e.x_metric},
                       {"x_source", e.x_source},
                       {"y_metric", e.y_metric},
                       {"town", e.town},
                       {"r", e.r},
                       {"n", e.n}});
  }
  Json warnings = Json::array();
  for (const auto& w : report.warnings) warnings.push_back({{"pair", w.pair}, {"reason", w.reason}});
  Json filter = nullptr;
  if (report.filter) {
    filter = {{"metric", report.filter->metric.empty() ? "respective" : report.filter->metric},
              {"keep_fraction", report.filter->keep_fraction}};
  }
  return {{"format", kCorrelationFormat},
          {"filter", std::move(filter)},
          {"entries", std::move(entries)},
          {"warnings", std::move(warnings)}};
}

}  // namespace driveval
