#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "driveval/analysis.hpp"
#include "driveval/condition.hpp"
#include "driveval/offline_metrics.hpp"
#include "driveval/policy.hpp"
#include "driveval/trainer.hpp"
#include "driveval/world.hpp"

namespace driveval {

inline constexpr std::string_view kStudyFormat = "driveval-study/1";

/// A model built from the expert by a perturbation wrapper.
struct PerturbedModel {
  PerturbationSpec perturbation;
};

struct ModelSpec {
  std::string id;
  std::variant<TrainConfig, PerturbedModel> config;
  /// Parameter axes this model takes part in ("amount", "loss", ...). A
  /// model in axis group g differs from every other member of g in that
  /// parameter only.
  std::vector<std::string> groups;
};

struct TownSetting {
  TownId town = TownId::A;
  std::string condition = "clear";
};

/// Frozen study schema. Every random stream derives from `seed`.
struct StudyConfig {
  std::uint64_t seed = 1;
  int jobs = 1;
  int trials = kSuiteTrials;
  double validation_hours = 0.2;
  TownSetting training{TownId::A, "clear"};
  std::vector<TownSetting> towns{{TownId::A, "clear"}, {TownId::B, "soft_rain_sunset"}};
  OfflineParams offline;
  std::vector<ModelSpec> models;
};

/// The 45-model family: one-axis sweeps around a base configuration, an
/// L2 grid over data amount and distribution, and a perturbation zoo over
/// the expert weighted towards episode bias.
std::vector<ModelSpec> default_family();
StudyConfig default_study_config();

/// Parses the study TOML. A missing `[[models]]` list means the default
/// family. Unknown keys are rejected.
StudyConfig study_config_from_toml(std::string_view text, std::string_view source = "config");
StudyConfig study_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StudyConfig& config);
nlohmann::json model_config_json(const ModelSpec& model);
/// Hash of the canonical config (the `jobs` setting excluded).
std::string study_hash(const StudyConfig& config);

/// Largest training amount the family needs.
double max_training_hours(const StudyConfig& config);

/// Builds the policy for one model from collected training data.
struct TrainingData {
  Dataset three_cam_noise;
  Dataset three_cam;
};
TrainingData collect_training_data(const StudyConfig& config);
Dataset select_training_data(const TrainingData& data, const TrainConfig& train);
std::unique_ptr<Policy> build_model(const StudyConfig& config, std::size_t index,
                                    const TrainingData& data);

struct StudyResult {
  std::vector<StudyRecord> records;  // in config order
  nlohmann::json manifest;
};

using StudyLog = std::function<void(const std::string&)>;

StudyResult run_study(const StudyConfig& config, const StudyLog& log = {});

/// Axis groups evaluated in each town; record groups are axis names.
int total_selection_matches(const std::vector<StudyRecord>& records, std::string_view offline_metric,
                            int* group_count = nullptr);

}  // namespace driveval
