#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "driveval/dataset.hpp"
#include "driveval/policy.hpp"

namespace driveval {

enum class Loss { L2, L1 };
/// Capacity axis: number of observation features the regressor may use.
enum class FeatureDepth { Shallow = 3, Standard = 5, Deep = 7 };
enum class DataDistribution { OneCam, OneCamNoise, ThreeCam, ThreeCamNoise };

std::string_view to_string(Loss loss);
std::string_view to_string(FeatureDepth depth);
std::string_view to_string(DataDistribution dist);
Loss parse_loss(std::string_view text);
FeatureDepth parse_depth(std::string_view text);
DataDistribution parse_distribution(std::string_view text);

bool uses_three_cameras(DataDistribution dist);
bool uses_noise(DataDistribution dist);

/// Feature columns used at each depth: {offset, heading, curvature@10},
/// the five geometric features, or all seven.
std::vector<int> feature_indices(FeatureDepth depth);

inline constexpr double kFeatureNoiseStd = 0.01;
/// Nominal magnitude of each observation feature; regressors are fitted on
/// features divided by these so the ridge penalty is unit-free.
inline constexpr std::array<double, kFeatureCount> kFeatureScale = {1.0, 0.2, 0.1, 0.1, 0.1, 25.0, 10.0};
inline constexpr double kRidgeFloor = 1e-10;
inline constexpr double kIrlsEpsilon = 1e-6;

struct TrainConfig {
  Loss loss = Loss::L2;
  double ridge = 0.0;          // lambda >= 0
  bool feature_noise = false;  // additive N(0, 0.01^2) feature noise while resampling
  bool balancing = false;
  FeatureDepth depth = FeatureDepth::Standard;
  double data_hours = 1.0;
  DataDistribution distribution = DataDistribution::OneCam;
  std::uint64_t seed = 0;
  int batch = 120;
  int bins = 8;
  int epochs = 50;
  int augment_copies = 4;
};

void validate(const TrainConfig& config);

/// Steering bin in [0, bins) for a label in [-1, 1].
int steering_bin(double steering, int bins);

/// Endless stream of class-balanced minibatches: each batch takes
/// batch/bins indices (with replacement) from every non-empty steering bin;
/// the quota of empty bins is handed round-robin to non-empty ones.
class BalancedBatchSampler {
 public:
  BalancedBatchSampler(const Dataset& dataset, int batch, int bins, std::uint64_t seed);

  std::vector<std::size_t> next();
  const std::vector<std::vector<std::size_t>>& bins() const { return bins_; }

 private:
  int batch_;
  std::vector<std::vector<std::size_t>> bins_;
  std::vector<int> nonempty_;
  Engine rng_;
  std::uint64_t batches_drawn_ = 0;
};

std::vector<std::vector<std::size_t>> balanced_minibatches(const Dataset& dataset, int batch,
                                                           int bins, std::uint64_t seed,
                                                           std::size_t count);

/// Weighted ridge regression with an unpenalised intercept (last column of
/// `design` must be the constant 1). Solves
///   (X^T W X / sum(W) + lambda D) theta = X^T W y / sum(W).
Eigen::VectorXd solve_ridge(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                            const Eigen::VectorXd& weights, double lambda);

struct IrlsResult {
  Eigen::VectorXd theta;
  std::vector<double> objective;  // per iteration, non-increasing
  int iterations = 0;
};

/// Smoothed-L1 regression, mean sqrt(e^2 + eps^2) + lambda |w|^2, by
/// iteratively reweighted least squares starting from the ridge solution.
IrlsResult solve_irls(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                      const Eigen::VectorXd& weights, double lambda, int max_iterations = 200,
                      double tolerance = 1e-8);

/// Per-command linear steering model (one head per command).
class RegressorPolicy final : public Policy {
 public:
  struct Head {
    Eigen::VectorXd weights;
    double bias = 0.0;
    bool fallback = false;  // no training data; copied from the Continue head
  };

  RegressorPolicy(std::vector<int> features, std::array<Head, 4> heads);

  std::string name() const override { return "regressor"; }
  std::unique_ptr<Policy> clone() const override;
  Action predict(const Observation& obs) override;

  double steering(const FeatureVector& features, Command command) const;
  const std::vector<int>& features() const { return features_; }
  const std::array<Head, 4>& heads() const { return heads_; }
  const Head& head(Command c) const { return heads_[static_cast<int>(c)]; }

 private:
  std::vector<int> features_;
  std::array<Head, 4> heads_;
};

RegressorPolicy fit_regressor(const Dataset& dataset, const TrainConfig& config);

}  // namespace driveval
