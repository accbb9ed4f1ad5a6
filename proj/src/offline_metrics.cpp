#include "driveval/offline_metrics.hpp"

#include <map>
#include <sstream>
#include <tuple>

namespace driveval {

BreakdownReport discrete_accuracy(std::span<const int> labels, std::span<const int> preds,
                                  std::span<const double> speeds) {
  if (labels.empty()) throw Error(ErrorKind::EmptySet, "accuracy over an empty set");
  if (labels.size() != preds.size() || labels.size() != speeds.size()) {
    throw Error(ErrorKind::LengthMismatch, "labels, predictions and speeds differ in length");
  }
  auto check = [](int c) {
    if (c < 0 || c > 3) throw Error(ErrorKind::UnknownClass, "class id " + std::to_string(c));
  };
  double hit = 0, straight_n = 0, straight_hit = 0, stop_n = 0, stop_hit = 0, turn_n = 0, turn_hit = 0;
  double v_all = 0, v_hit = 0, v_turn = 0, v_turn_hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check(labels[i]);
    check(preds[i]);
    if (speeds[i] < 0.0) throw Error(ErrorKind::NegativeSpeed, "negative speed");
    const bool ok = labels[i] == preds[i];
    const auto label = static_cast<DiscreteAction>(labels[i]);
    hit += ok;
    v_all += speeds[i];
    v_hit += ok ? speeds[i] : 0.0;
    if (label == DiscreteAction::Straight) {
      ++straight_n;
      straight_hit += ok;
    } else if (label == DiscreteAction::Stop) {
      ++stop_n;
      stop_hit += ok;
    } else {
      ++turn_n;
      turn_hit += ok;
      v_turn += speeds[i];
      v_turn_hit += ok ? speeds[i] : 0.0;
    }
  }
  BreakdownReport r;
  r.all = hit / static_cast<double>(labels.size());
  if (straight_n > 0) r.straight = straight_hit / straight_n;
  if (stop_n > 0) r.stop = stop_hit / stop_n;
  if (turn_n > 0) r.turns = turn_hit / turn_n;
  if (v_all > 0) r.weighted_all = v_hit / v_all;
  if (v_turn > 0) r.weighted_turns = v_turn_hit / v_turn;
  return r;
}

double OfflineReport::value(std::string_view metric) const {
  if (metric == "mse") return mse;
  if (metric == "mae") return mae;
  if (metric == "swae") return swae;
  if (metric == "cum_swae") return cum_swae;
  if (metric == "qce") return qce;
  if (metric == "tre") return tre;
  throw Error(ErrorKind::MissingMetric, "unknown offline metric '" + std::string(metric) + "'");
}

std::string describe_validation(const DatasetManifest& m) {
  std::ostringstream os;
  os << to_string(m.town) << '/' << m.condition.name << '/' << m.cameras << "cam"
     << (m.noise ? "+noise" : "") << "/seed" << m.seed;
  return os.str();
}

OfflineReport evaluate_offline(const Policy& policy, const Dataset& validation,
                               const OfflineParams& params) {
  if (validation.empty()) throw Error(ErrorKind::EmptySet, "validation set is empty");

  // Stable grouping into (sequence, viewpoint) streams, each in step order.
  std::map<std::tuple<std::int64_t, int>, std::vector<std::size_t>> streams;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    const Sample& s = validation.samples[i];
    streams[{s.sequence_id, static_cast<int>(s.viewpoint)}].push_back(i);
  }

  const auto n = static_cast<Eigen::Index>(validation.size());
  Eigen::VectorXd truth(n), pred(n), speed(n);
  std::vector<std::size_t> lengths;
  lengths.reserve(streams.size());
  Eigen::Index row = 0;
  auto runner = policy.clone();
  for (const auto& [key, indices] : streams) {
    const auto [sequence, viewpoint] = key;
    runner->begin_episode(static_cast<std::uint64_t>(sequence) * 3 + static_cast<std::uint64_t>(viewpoint));
    for (std::size_t i : indices) {
      const Sample& s = validation.samples[i];
      truth[row] = s.action.steering;
      pred[row] = predict(*runner, s.observation).steering;
      speed[row] = s.speed;
      ++row;
    }
    lengths.push_back(indices.size());
  }

  OfflineReport r;
  r.params = params;
  r.n = validation.size();
  r.validation = describe_validation(validation.manifest);
  r.mse = metrics::mse(truth, pred);
  r.mae = metrics::mae(truth, pred);
  r.swae = metrics::speed_weighted_mae(truth, pred, speed);
  r.cum_swae = metrics::cumulative_swae(truth, pred, speed, params.horizon, lengths);
  r.qce = metrics::quantized_classification_error(truth, pred, params.sigma);
  r.tre = metrics::thresholded_relative_error(truth, pred, params.alpha);
  return r;
}

}  // namespace driveval
