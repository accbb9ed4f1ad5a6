#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "driveval/error.hpp"
#include "driveval/offline_metrics.hpp"
#include "driveval/online_eval.hpp"

namespace driveval {

/// Sample Pearson correlation, clamped to [-1, 1]. Throws TooFewPoints for
/// n < 2 and ZeroVariance (naming the constant axis) for constant inputs.
template <typename DX, typename DY>
typename DX::Scalar pearson(const Eigen::DenseBase<DX>& x, const Eigen::DenseBase<DY>& y) {
  using Scalar = typename DX::Scalar;
  if (x.size() != y.size()) throw Error(ErrorKind::LengthMismatch, "pearson inputs differ in length");
  if (x.size() < 2) throw Error(ErrorKind::TooFewPoints, "pearson needs at least two points");
  if (x.maxCoeff() == x.minCoeff()) throw Error(ErrorKind::ZeroVariance, "x is constant");
  if (y.maxCoeff() == y.minCoeff()) throw Error(ErrorKind::ZeroVariance, "y is constant");
  const auto dx = (x.derived().array() - x.derived().array().mean()).eval();
  const auto dy = (y.derived().array() - y.derived().array().mean()).eval();
  const Scalar r = (dx * dy).sum() / std::sqrt(dx.square().sum() * dy.square().sum());
  return std::clamp<Scalar>(r, Scalar(-1), Scalar(1));
}

/// One evaluated model: offline reports keyed by validation variant
/// ("<town>/<n>cam[+noise]") and online reports keyed by town.
struct StudyRecord {
  std::string model_id;
  std::string kind;            // "trained" or "perturbed"
  std::string config;          // canonical JSON of the model config
  std::vector<std::string> groups;  // parameter-axis groups the model belongs to
  int size_rank = 0;           // scatter marker size (data-amount rank)
  std::map<std::string, OfflineReport> offline;
  std::map<std::string, OnlineReport> online;

  double offline_value(std::string_view metric, const std::string& variant) const;
  double online_value(std::string_view metric, const std::string& town) const;
};

std::string variant_key(TownId town, int cameras, bool noise);

/// Keeps ceil(keep_fraction * n) records with the lowest offline error,
/// ties broken by model id.
std::vector<StudyRecord> filter_best(const std::vector<StudyRecord>& records, std::string_view metric,
                                     const std::string& variant, double keep_fraction);

struct FilterSpec {
  /// Empty: each pair is filtered by its own offline metric.
  std::string metric;
  double keep_fraction = 0.5;
};

struct CorrelationEntry {
  std::string kind;      // "offline_online" or "online_online"
  std::string x_metric;
  std::string x_source;  // validation variant, or the town for online pairs
  std::string y_metric;
  std::string town;
  double r = 0.0;
  std::size_t n = 0;
};

struct CorrelationWarning {
  std::string pair;
  std::string reason;
};

struct CorrelationReport {
  std::optional<FilterSpec> filter;
  std::vector<CorrelationEntry> entries;
  std::vector<CorrelationWarning> warnings;

  std::optional<CorrelationEntry> find(std::string_view x_metric, std::string_view x_source,
                                       std::string_view y_metric, std::string_view town) const;
};

/// Pearson r for every (offline metric, variant, online metric, town) and
/// every online-online pair per town. Degenerate pairs become warnings.
CorrelationReport correlate_study(const std::vector<StudyRecord>& records,
                                  const std::optional<FilterSpec>& filter = std::nullopt);

struct ModelGroup {
  std::string name;
  std::vector<std::size_t> members;  // indices into the record list
};

/// Groups records by their parameter-axis tags, in tag order.
std::vector<ModelGroup> group_by_axis(const std::vector<StudyRecord>& records);

struct SelectionResult {
  int matches = 0;
  int groups = 0;
  std::vector<bool> per_group;
};

/// Per group: a match when the unique lowest offline error and the unique
/// highest success rate belong to the same model. Any tie is a non-match.
SelectionResult selection_consistency(const std::vector<StudyRecord>& records,
                                      const std::vector<ModelGroup>& groups,
                                      std::string_view offline_metric, const std::string& variant,
                                      const std::string& town);

struct ScatterPair {
  std::string x_metric;
  std::string x_source;  // variant for offline metrics, town for online ones
  std::string y_metric;
  std::string town;
};

/// Writes `<stem>.csv` and `<stem>.svg`.
void emit_scatter(const std::vector<StudyRecord>& records, const ScatterPair& pair,
                  const std::filesystem::path& stem);

}  // namespace driveval
