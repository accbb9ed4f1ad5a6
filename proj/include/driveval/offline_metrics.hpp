#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "driveval/dataset.hpp"
#include "driveval/error.hpp"
#include "driveval/policy.hpp"

namespace driveval {

// Steering-error metrics over a validation set. Ground truth `a`,
// predictions `pred` and speeds `v` are any Eigen vector expressions.
namespace metrics {

template <typename DA, typename DB>
void check_pair(const Eigen::DenseBase<DA>& a, const Eigen::DenseBase<DB>& pred) {
  if (a.size() == 0) throw Error(ErrorKind::EmptySet, "metric over an empty set");
  if (a.size() != pred.size()) throw Error(ErrorKind::LengthMismatch, "prediction length differs");
}

template <typename DV>
void check_speeds(const Eigen::DenseBase<DV>& v, Eigen::Index n) {
  if (v.size() != n) throw Error(ErrorKind::LengthMismatch, "speed length differs");
  if ((v.derived().array() < 0).any()) throw Error(ErrorKind::NegativeSpeed, "negative speed");
}

template <typename DA, typename DB>
typename DA::Scalar mse(const Eigen::DenseBase<DA>& a, const Eigen::DenseBase<DB>& pred) {
  check_pair(a, pred);
  return (a.derived().array() - pred.derived().array()).square().mean();
}

template <typename DA, typename DB>
typename DA::Scalar mae(const Eigen::DenseBase<DA>& a, const Eigen::DenseBase<DB>& pred) {
  check_pair(a, pred);
  return (a.derived().array() - pred.derived().array()).abs().mean();
}

template <typename DA, typename DB, typename DV>
typename DA::Scalar speed_weighted_mae(const Eigen::DenseBase<DA>& a,
                                       const Eigen::DenseBase<DB>& pred,
                                       const Eigen::DenseBase<DV>& v) {
  check_pair(a, pred);
  check_speeds(v, a.size());
  return ((a.derived().array() - pred.derived().array()).abs() * v.derived().array()).mean();
}

/// Mean over every window of `horizon + 1` consecutive steps lying wholly
/// inside one sequence of |sum (a - pred) * v|. `sequence_lengths` splits
/// the inputs into temporally ordered sequences; empty means one sequence.
template <typename DA, typename DB, typename DV>
typename DA::Scalar cumulative_swae(const Eigen::DenseBase<DA>& a, const Eigen::DenseBase<DB>& pred,
                                    const Eigen::DenseBase<DV>& v, int horizon,
                                    std::span<const std::size_t> sequence_lengths = {}) {
  using Scalar = typename DA::Scalar;
  check_pair(a, pred);
  check_speeds(v, a.size());
  if (horizon < 0) throw Error(ErrorKind::InvalidArgument, "horizon must be >= 0");
  const std::size_t n = static_cast<std::size_t>(a.size());
  std::size_t covered = 0;
  for (std::size_t len : sequence_lengths) covered += len;
  if (!sequence_lengths.empty() && covered != n) {
    throw Error(ErrorKind::LengthMismatch, "sequence lengths do not cover the inputs");
  }
  const std::array<std::size_t, 1> whole = {n};
  const std::span<const std::size_t> lengths =
      sequence_lengths.empty() ? std::span<const std::size_t>(whole) : sequence_lengths;

  const auto err = ((a.derived().array() - pred.derived().array()) * v.derived().array()).eval();
  const std::size_t width = static_cast<std::size_t>(horizon) + 1;
  Scalar total = 0;
  std::size_t windows = 0;
  std::size_t offset = 0;
  for (std::size_t len : lengths) {
    for (std::size_t i = 0; i + width <= len; ++i) {
      Scalar acc = 0;
      for (std::size_t t = 0; t < width; ++t) acc += err[static_cast<Eigen::Index>(offset + i + t)];
      total += std::abs(acc);
      ++windows;
    }
    offset += len;
  }
  if (windows == 0) throw Error(ErrorKind::NoValidWindow, "no sequence spans horizon + 1 steps");
  return total / static_cast<Scalar>(windows);
}

/// -1 below -sigma, 0 on [-sigma, sigma), 1 from sigma up.
template <typename Scalar>
int quantize(Scalar x, Scalar sigma) {
  if (x < -sigma) return -1;
  if (x < sigma) return 0;
  return 1;
}

template <typename DA, typename DB>
typename DA::Scalar quantized_classification_error(const Eigen::DenseBase<DA>& a,
                                                   const Eigen::DenseBase<DB>& pred,
                                                   typename DA::Scalar sigma) {
  using Scalar = typename DA::Scalar;
  check_pair(a, pred);
  if (!(sigma > 0)) throw Error(ErrorKind::InvalidArgument, "sigma must be > 0");
  Eigen::Index wrong = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (quantize<Scalar>(a.derived()[i], sigma) != quantize<Scalar>(pred.derived()[i], sigma)) ++wrong;
  }
  return static_cast<Scalar>(wrong) / static_cast<Scalar>(a.size());
}

/// Fraction of samples with |pred - a| > alpha |a| (an exact prediction is
/// never counted).
template <typename DA, typename DB>
typename DA::Scalar thresholded_relative_error(const Eigen::DenseBase<DA>& a,
                                               const Eigen::DenseBase<DB>& pred,
                                               typename DA::Scalar alpha) {
  using Scalar = typename DA::Scalar;
  check_pair(a, pred);
  if (!(alpha >= 0)) throw Error(ErrorKind::InvalidArgument, "alpha must be >= 0");
  const auto err = (pred.derived().array() - a.derived().array()).abs();
  const auto tol = alpha * a.derived().array().abs();
  return static_cast<Scalar>((err > tol).count()) / static_cast<Scalar>(a.size());
}

}  // namespace metrics

/// Four-way discrete action classes (accelerate, brake, left, right).
enum class DiscreteAction : int { Straight = 0, Stop = 1, Left = 2, Right = 3 };

struct BreakdownReport {
  double all = 0.0;
  std::optional<double> straight;
  std::optional<double> stop;
  std::optional<double> turns;
  std::optional<double> weighted_all;
  std::optional<double> weighted_turns;
};

/// Accuracy overall and per ground-truth subset (left and right merged into
/// turns), plus speed-weighted accuracy. Subsets with no samples (or no
/// speed mass) are left empty.
BreakdownReport discrete_accuracy(std::span<const int> labels, std::span<const int> preds,
                                  std::span<const double> speeds);

struct OfflineParams {
  int horizon = 64;     // T, steps
  double sigma = 0.03;  // quantisation threshold
  double alpha = 0.1;   // relative-error threshold
};

inline constexpr std::array<std::string_view, 6> kOfflineMetrics = {"mse", "mae", "swae",
                                                                    "cum_swae", "qce", "tre"};

struct OfflineReport {
  double mse = 0.0;
  double mae = 0.0;
  double swae = 0.0;
  double cum_swae = 0.0;
  double qce = 0.0;
  double tre = 0.0;
  OfflineParams params;
  std::size_t n = 0;
  std::string validation;  // manifest reference

  /// Value by metric id; throws MissingMetric for unknown ids.
  double value(std::string_view metric) const;
};

/// Predicts every sample and scores the predictions. Samples are replayed
/// per (sequence, viewpoint) stream, each stream one policy episode, so
/// perturbed policies are reproducible.
OfflineReport evaluate_offline(const Policy& policy, const Dataset& validation,
                               const OfflineParams& params = {});

std::string describe_validation(const DatasetManifest& manifest);

}  // namespace driveval
