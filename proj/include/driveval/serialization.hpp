#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "driveval/analysis.hpp"
#include "driveval/dataset.hpp"
#include "driveval/offline_metrics.hpp"
#include "driveval/online_eval.hpp"
#include "driveval/policy.hpp"
#include "driveval/trainer.hpp"
#include "driveval/world.hpp"

namespace driveval {

using Json = nlohmann::json;

inline constexpr std::string_view kTownFormat = "driveval-town/1";
inline constexpr std::string_view kRegressorFormat = "driveval-regressor/1";
inline constexpr std::string_view kSuiteFormat = "driveval-suite/1";
inline constexpr std::string_view kCorrelationFormat = "driveval-correlation/1";

/// Shortest decimal text that parses back to the same double.
std::string format_double(double x);
double parse_double(std::string_view text);
std::int64_t parse_int(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
/// Creates missing parent directories.
void write_text_file(const std::filesystem::path& path, std::string_view text);

Json parse_json(std::string_view text);
/// Compact dump with sorted keys; the input to config hashes.
std::string canonical_dump(const Json& j);
/// FNV-1a of the canonical dump, as 16 hex digits.
std::string config_hash(const Json& j);

/// TOML document as JSON (tables become objects, arrays stay arrays).
Json toml_to_json(std::string_view text, std::string_view source = "config");

Json to_json(const Condition& c);
Condition condition_from_json(const Json& j);

Json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const Json& j);

Json to_json(const TownMap& map);

Json to_json(const PerturbationSpec& spec);
PerturbationSpec perturbation_from_json(const Json& j);

Json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const Json& j);

Json to_json(const RegressorPolicy& policy);
RegressorPolicy regressor_from_json(const Json& j);

Json to_json(const OfflineReport& report);
OfflineReport offline_report_from_json(const Json& j);

Json to_json(const OnlineReport& report);
OnlineReport online_report_from_json(const Json& j);

Json to_json(const EpisodeResult& result);

Json suite_to_json(TownId town, std::uint64_t suite_seed, std::span<const SuiteEntry> suite);
std::vector<SuiteEntry> suite_from_json(const Json& j);

Json to_json(const StudyRecord& record);
StudyRecord study_record_from_json(const Json& j);

/// One record per line, in order.
std::string records_to_jsonl(const std::vector<StudyRecord>& records);
std::vector<StudyRecord> records_from_jsonl(std::string_view text);

Json to_json(const CorrelationReport& report);

}  // namespace driveval
