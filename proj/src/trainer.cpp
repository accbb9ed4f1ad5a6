#include "driveval/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Cholesky>

#include "driveval/error.hpp"

namespace driveval {

std::string_view to_string(Loss loss) { return loss == Loss::L2 ? "L2" : "L1"; }

std::string_view to_string(FeatureDepth depth) {
  switch (depth) {
    case FeatureDepth::Shallow: return "shallow";
    case FeatureDepth::Standard: return "standard";
    case FeatureDepth::Deep: return "deep";
  }
  return "standard";
}

std::string_view to_string(DataDistribution dist) {
  switch (dist) {
    case DataDistribution::OneCam: return "1cam";
    case DataDistribution::OneCamNoise: return "1cam+noise";
    case DataDistribution::ThreeCam: return "3cam";
    case DataDistribution::ThreeCamNoise: return "3cam+noise";
  }
  return "1cam";
}

Loss parse_loss(std::string_view text) {
  if (text == "L2" || text == "l2") return Loss::L2;
  if (text == "L1" || text == "l1") return Loss::L1;
  throw Error(ErrorKind::InvalidArgument, "unknown loss '" + std::string(text) + "'");
}

FeatureDepth parse_depth(std::string_view text) {
  for (auto d : {FeatureDepth::Shallow, FeatureDepth::Standard, FeatureDepth::Deep}) {
    if (to_string(d) == text) return d;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown feature depth '" + std::string(text) + "'");
}

DataDistribution parse_distribution(std::string_view text) {
  for (auto d : {DataDistribution::OneCam, DataDistribution::OneCamNoise, DataDistribution::ThreeCam,
                 DataDistribution::ThreeCamNoise}) {
    if (to_string(d) == text) return d;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown data distribution '" + std::string(text) + "'");
}

bool uses_three_cameras(DataDistribution d) {
  return d == DataDistribution::ThreeCam || d == DataDistribution::ThreeCamNoise;
}

bool uses_noise(DataDistribution d) {
  return d == DataDistribution::OneCamNoise || d == DataDistribution::ThreeCamNoise;
}

std::vector<int> feature_indices(FeatureDepth depth) {
  switch (depth) {
    case FeatureDepth::Shallow: return {0, 1, 3};
    case FeatureDepth::Standard: return {0, 1, 2, 3, 4};
    case FeatureDepth::Deep: return {0, 1, 2, 3, 4, 5, 6};
  }
  return {};
}

void validate(const TrainConfig& c) {
  if (!(c.ridge >= 0.0)) throw Error(ErrorKind::InvalidArgument, "ridge must be >= 0");
  if (!(c.data_hours > 0.0)) throw Error(ErrorKind::InvalidArgument, "data_hours must be > 0");
  if (c.batch <= 0 || c.bins <= 0 || c.batch % c.bins != 0) {
    throw Error(ErrorKind::InvalidArgument, "batch must be a positive multiple of bins");
  }
  if (c.epochs <= 0 || c.augment_copies <= 0) {
    throw Error(ErrorKind::InvalidArgument, "epochs and augment_copies must be positive");
  }
}

int steering_bin(double steering, int bins) {
  const double u = (std::clamp(steering, -1.0, 1.0) + 1.0) / 2.0;
  return std::min(bins - 1, static_cast<int>(std::floor(u * bins)));
}

BalancedBatchSampler::BalancedBatchSampler(const Dataset& dataset, int batch, int bins,
                                           std::uint64_t seed)
    : batch_(batch), bins_(bins > 0 ? bins : 0), rng_(seed) {
  if (bins <= 0 || batch <= 0 || batch % bins != 0) {
    throw Error(ErrorKind::InvalidArgument, "batch must be a positive multiple of bins");
  }
  if (dataset.empty()) throw Error(ErrorKind::EmptyDataset, "cannot balance an empty dataset");
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    bins_[steering_bin(dataset.samples[i].action.steering, bins)].push_back(i);
  }
  for (int b = 0; b < bins; ++b) {
    if (!bins_[b].empty()) nonempty_.push_back(b);
  }
}

std::vector<std::size_t> BalancedBatchSampler::next() {
  const int bins = static_cast<int>(bins_.size());
  const int per_bin = batch_ / bins;
  std::vector<int> quota(bins, 0);
  int spare = 0;
  for (int b = 0; b < bins; ++b) {
    if (bins_[b].empty()) {
      spare += per_bin;
    } else {
      quota[b] = per_bin;
    }
  }
  const std::size_t n = nonempty_.size();
  for (int k = 0; k < spare; ++k) {
    quota[nonempty_[(batches_drawn_ + static_cast<std::size_t>(k)) % n]] += 1;
  }
  std::vector<std::size_t> out;
  out.reserve(batch_);
  for (int b = 0; b < bins; ++b) {
    if (quota[b] == 0) continue;
    std::uniform_int_distribution<std::size_t> pick(0, bins_[b].size() - 1);
    for (int k = 0; k < quota[b]; ++k) out.push_back(bins_[b][pick(rng_)]);
  }
  ++batches_drawn_;
  return out;
}

std::vector<std::vector<std::size_t>> balanced_minibatches(const Dataset& dataset, int batch,
                                                           int bins, std::uint64_t seed,
                                                           std::size_t count) {
  BalancedBatchSampler sampler(dataset, batch, bins, seed);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sampler.next());
  return out;
}

namespace {

Eigen::VectorXd solve_normal(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                             const Eigen::VectorXd& weights, double lambda) {
  const Eigen::Index p = design.cols();
  const double total = weights.sum();
  Eigen::MatrixXd gram = design.transpose() * weights.asDiagonal() * design / total;
  Eigen::VectorXd rhs = design.transpose() * weights.cwiseProduct(target) / total;
  for (Eigen::Index k = 0; k + 1 < p; ++k) gram(k, k) += lambda;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw Error(ErrorKind::SingularSystem, "normal equations are singular");
  }
  Eigen::VectorXd theta = ldlt.solve(rhs);
  if (!theta.allFinite()) throw Error(ErrorKind::SingularSystem, "normal equations are singular");
  return theta;
}

double smoothed_l1_objective(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                             const Eigen::VectorXd& weights, double lambda,
                             const Eigen::VectorXd& theta) {
  const Eigen::VectorXd r = design * theta - target;
  const double data = weights.dot((r.array().square() + kIrlsEpsilon * kIrlsEpsilon).sqrt().matrix()) /
                      weights.sum();
  return data + lambda * theta.head(theta.size() - 1).squaredNorm();
}

}  // namespace

Eigen::VectorXd solve_ridge(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                            const Eigen::VectorXd& weights, double lambda) {
  if (design.rows() == 0) throw Error(ErrorKind::EmptyDataset, "no rows to fit");
  return solve_normal(design, target, weights, std::max(lambda, kRidgeFloor));
}

IrlsResult solve_irls(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                      const Eigen::VectorXd& weights, double lambda, int max_iterations,
                      double tolerance) {
  IrlsResult result;
  const double reg = std::max(lambda, kRidgeFloor);
  result.theta = solve_ridge(design, target, weights, lambda);
  result.objective.push_back(smoothed_l1_objective(design, target, weights, reg, result.theta));
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd r = design * result.theta - target;
    const Eigen::VectorXd w =
        weights.cwiseQuotient((r.array().square() + kIrlsEpsilon * kIrlsEpsilon).sqrt().matrix());
    // Majorise sqrt(e^2 + eps^2) by a quadratic at the current residuals;
    // the factor 2 keeps the penalty consistent with the majoriser's 1/2.
    const Eigen::VectorXd next = solve_normal(design, target, w * (weights.sum() / w.sum()),
                                              2.0 * reg * weights.sum() / w.sum());
    const double change = (next - result.theta).cwiseAbs().maxCoeff();
    result.theta = next;
    result.iterations = it + 1;
    result.objective.push_back(smoothed_l1_objective(design, target, weights, reg, result.theta));
    if (change < tolerance) break;
  }
  return result;
}

RegressorPolicy::RegressorPolicy(std::vector<int> features, std::array<Head, 4> heads)
    : features_(std::move(features)), heads_(std::move(heads)) {
  for (const auto& h : heads_) {
    if (h.weights.size() != static_cast<Eigen::Index>(features_.size()) || !h.weights.allFinite() ||
        !std::isfinite(h.bias)) {
      throw Error(ErrorKind::InvalidArgument, "regressor head does not match its feature list");
    }
  }
}

std::unique_ptr<Policy> RegressorPolicy::clone() const {
  return std::make_unique<RegressorPolicy>(*this);
}

double RegressorPolicy::steering(const FeatureVector& features, Command command) const {
  const Head& h = head(command);
  double s = h.bias;
  for (std::size_t k = 0; k < features_.size(); ++k) s += h.weights[k] * features[features_[k]];
  return s;
}

Action RegressorPolicy::predict(const Observation& obs) {
  Action a = obs.expert;
  a.steering = std::clamp(steering(obs.features, obs.command), -1.0, 1.0);
  return a;
}

RegressorPolicy fit_regressor(const Dataset& dataset, const TrainConfig& config) {
  validate(config);
  if (dataset.empty()) throw Error(ErrorKind::EmptyDataset, "cannot fit on an empty dataset");

  const std::size_t n = dataset.size();
  std::vector<double> counts(n, 1.0);
  if (config.balancing) {
    std::fill(counts.begin(), counts.end(), 0.0);
    BalancedBatchSampler sampler(dataset, config.batch, config.bins,
                                 derive_seed(config.seed, "balanced_batches"));
    const std::size_t per_epoch = (n + config.batch - 1) / config.batch;
    const std::size_t total = per_epoch * static_cast<std::size_t>(config.epochs);
    for (std::size_t b = 0; b < total; ++b) {
      for (std::size_t idx : sampler.next()) counts[idx] += 1.0;
    }
  }

  const std::vector<int> cols = feature_indices(config.depth);
  const int p = static_cast<int>(cols.size());
  const int copies = config.feature_noise ? config.augment_copies : 1;
  SplitMix64 noise_rng(derive_seed(config.seed, "feature_noise"));
  std::normal_distribution<double> gauss(0.0, kFeatureNoiseStd);

  std::array<std::vector<std::size_t>, 4> rows_by_head;
  for (std::size_t i = 0; i < n; ++i) {
    if (counts[i] > 0.0) rows_by_head[static_cast<int>(dataset.samples[i].command)].push_back(i);
  }

  auto fit_rows = [&](const std::vector<std::size_t>& rows) {
    const Eigen::Index m = static_cast<Eigen::Index>(rows.size()) * copies;
    Eigen::MatrixXd x(m, p + 1);
    Eigen::VectorXd y(m);
    Eigen::VectorXd w(m);
    Eigen::Index r = 0;
    for (std::size_t i : rows) {
      const Sample& s = dataset.samples[i];
      for (int c = 0; c < copies; ++c, ++r) {
        for (int k = 0; k < p; ++k) {
          x(r, k) = s.observation.features[cols[k]] + (config.feature_noise ? gauss(noise_rng) : 0.0);
        }
        x(r, p) = 1.0;
        y[r] = s.action.steering;
        w[r] = counts[i] / copies;
      }
    }
    // Ridge acts on features in nominal units so lambda does not depend on
    // physical units (curvatures are ~0.1 1/m, distances ~10 m).
    Eigen::VectorXd scale(p);
    for (int k = 0; k < p; ++k) {
      scale[k] = kFeatureScale[static_cast<std::size_t>(cols[k])];
      x.col(k) /= scale[k];
    }
    Eigen::VectorXd theta = config.loss == Loss::L2 ? solve_ridge(x, y, w, config.ridge)
                                                    : solve_irls(x, y, w, config.ridge).theta;
    RegressorPolicy::Head h;
    h.weights = theta.head(p).cwiseQuotient(scale);
    h.bias = theta[p];
    return h;
  };

  std::array<RegressorPolicy::Head, 4> heads;
  const int cont = static_cast<int>(Command::Continue);
  if (rows_by_head[cont].empty()) {
    std::vector<std::size_t> all;
    for (const auto& rows : rows_by_head) all.insert(all.end(), rows.begin(), rows.end());
    std::sort(all.begin(), all.end());
    heads[cont] = fit_rows(all);
    heads[cont].fallback = true;
  } else {
    heads[cont] = fit_rows(rows_by_head[cont]);
  }
  for (int c = 0; c < 4; ++c) {
    if (c == cont) continue;
    if (rows_by_head[c].empty()) {
      heads[c] = heads[cont];
      heads[c].fallback = true;
    } else {
      heads[c] = fit_rows(rows_by_head[c]);
    }
  }
  return RegressorPolicy(cols, heads);
}

}  // namespace driveval
