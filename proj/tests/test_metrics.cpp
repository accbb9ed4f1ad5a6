#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "driveval/dataset.hpp"
#include "driveval/error.hpp"
#include "driveval/offline_metrics.hpp"
#include "oracles.hpp"

using namespace driveval;

namespace {

Eigen::Map<const Eigen::VectorXd> view(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

template <typename Fn>
void expect_error(ErrorKind kind, Fn&& fn) {
  try {
    fn();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == kind);
  }
}

}  // namespace

TEST_CASE("mse and mae examples") {
  const std::vector<double> a = {0.1, -0.2}, zero = {0.0, 0.0};
  CHECK(metrics::mse(view(a), view(zero)) == doctest::Approx(0.025).epsilon(1e-15));
  CHECK(metrics::mae(view(a), view(zero)) == doctest::Approx(0.15).epsilon(1e-15));
  CHECK(metrics::mse(view(a), view(a)) == 0.0);
  CHECK(metrics::mae(view(a), view(a)) == 0.0);

  // Homogeneity of mae.
  const std::vector<double> b = {0.3, 0.05}, a3 = {0.3, -0.6}, b3 = {0.9, 0.15};
  CHECK(metrics::mae(view(a3), view(b3)) == doctest::Approx(3 * metrics::mae(view(a), view(b))).epsilon(1e-14));

  expect_error(ErrorKind::EmptySet, [] {
    const std::vector<double> e;
    metrics::mse(view(e), view(e));
  });
  expect_error(ErrorKind::LengthMismatch, [&] { metrics::mae(view(a), view(std::vector<double>{1.0})); });
}

TEST_CASE("speed-weighted and cumulative errors") {
  const std::vector<double> a = {0.1, 0.2}, p = {0.0, 0.0}, v = {2.0, 4.0};
  CHECK(metrics::speed_weighted_mae(view(a), view(p), view(v)) == doctest::Approx(0.5));
  const std::vector<double> still = {0.0, 0.0};
  CHECK(metrics::speed_weighted_mae(view(a), view(p), view(still)) == 0.0);
  expect_error(ErrorKind::NegativeSpeed,
               [&] { metrics::speed_weighted_mae(view(a), view(p), view(std::vector<double>{1.0, -1.0})); });

  // T = 0 degenerates to the speed-weighted error.
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1), s(0, 10);
  std::vector<double> ra(50), rp(50), rv(50);
  for (int i = 0; i < 50; ++i) { ra[i] = u(rng); rp[i] = u(rng); rv[i] = s(rng); }
  CHECK(metrics::cumulative_swae(view(ra), view(rp), view(rv), 0) ==
        doctest::Approx(metrics::speed_weighted_mae(view(ra), view(rp), view(rv))).epsilon(1e-13));

  // Alternating errors cancel inside every two-step window.
  std::vector<double> alt(10), zeros(10, 0.0), speed(10, 3.0);
  for (int i = 0; i < 10; ++i) alt[i] = i % 2 ? -0.2 : 0.2;
  CHECK(metrics::cumulative_swae(view(alt), view(zeros), view(speed), 1) == doctest::Approx(0.0));

  // A constant bias accumulates without cancellation.
  std::vector<double> bias(100, 0.05), z(100, 0.0), v5(100, 5.0);
  CHECK(metrics::cumulative_swae(view(bias), view(z), view(v5), 63) == doctest::Approx(64 * 0.05 * 5.0));

  expect_error(ErrorKind::NoValidWindow, [&] { metrics::cumulative_swae(view(a), view(p), view(v), 5); });
  // Windows do not straddle sequences: two sequences of length 2 with T=2 have none.
  const std::vector<double> four = {1, 1, 1, 1}, fz = {0, 0, 0, 0};
  const std::vector<std::size_t> lens = {2, 2};
  expect_error(ErrorKind::NoValidWindow,
               [&] { metrics::cumulative_swae(view(four), view(fz), view(four), 2, lens); });
}

TEST_CASE("quantized classification error") {
  auto one = [](double a, double p) {
    const std::vector<double> va = {a}, vp = {p};
    return metrics::quantized_classification_error(view(va), view(vp), 0.03);
  };
  CHECK(one(0.05, -0.05) == 1.0);
  CHECK(one(0.01, 0.02) == 0.0);
  CHECK(metrics::quantize(-0.03, 0.03) == 0);
  CHECK(metrics::quantize(0.03, 0.03) == 1);
  CHECK(metrics::quantize(-0.0300001, 0.03) == -1);
}

TEST_CASE("thresholded relative error") {
  auto one = [](double a, double p, double alpha) {
    const std::vector<double> va = {a}, vp = {p};
    return metrics::thresholded_relative_error(view(va), view(vp), alpha);
  };
  CHECK(one(1.0, 1.05, 0.1) == 0.0);
  CHECK(one(0.0, 0.01, 0.1) == 1.0);
  CHECK(one(0.3, 0.3, 0.0) == 0.0);

  // Non-increasing in alpha on fixed data.
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> a(400), p(400);
  for (int i = 0; i < 400; ++i) { a[i] = u(rng); p[i] = a[i] + 0.2 * u(rng); }
  double last = 1.0;
  for (double alpha = 0.0; alpha <= 2.0; alpha += 0.05) {
    const double t = metrics::thresholded_relative_error(view(a), view(p), alpha);
    CHECK(t <= last);
    CHECK(t >= 0.0);
    last = t;
  }
}

TEST_CASE("metrics agree with plain-loop oracles on random data") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1, 1), s(0, 12);
  std::uniform_int_distribution<int> len(70, 300);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = len(rng);
    std::vector<double> a(n), p(n), v(n);
    for (int i = 0; i < n; ++i) {
      a[i] = u(rng);
      p[i] = a[i] + 0.3 * u(rng);
      v[i] = s(rng);
    }
    const std::vector<std::size_t> lens = {static_cast<std::size_t>(n / 2), static_cast<std::size_t>(n - n / 2)};
    CHECK(oracle::rel_err(metrics::mse(view(a), view(p)), oracle::mse(a, p)) <= 1e-12);
    CHECK(oracle::rel_err(metrics::mae(view(a), view(p)), oracle::mae(a, p)) <= 1e-12);
    CHECK(oracle::rel_err(metrics::speed_weighted_mae(view(a), view(p), view(v)), oracle::swae(a, p, v)) <= 1e-12);
    CHECK(oracle::rel_err(metrics::cumulative_swae(view(a), view(p), view(v), 16, lens),
                          oracle::cum_swae(a, p, v, 16, lens)) <= 1e-12);
    CHECK(metrics::quantized_classification_error(view(a), view(p), 0.03) == oracle::qce(a, p, 0.03));
    CHECK(metrics::thresholded_relative_error(view(a), view(p), 0.1) == oracle::tre(a, p, 0.1));
  }
}

TEST_CASE("jensen bound and permutation invariance") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0, 0.3);
  std::vector<double> a(500), p(500), v(500);
  for (int i = 0; i < 500; ++i) { a[i] = g(rng); p[i] = g(rng); v[i] = std::fabs(g(rng)) * 10; }
  const double m = metrics::mae(view(a), view(p));
  CHECK(m * m <= metrics::mse(view(a), view(p)));

  std::vector<int> order(500);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<double> sa(500), sp(500), sv(500);
  for (int i = 0; i < 500; ++i) { sa[i] = a[order[i]]; sp[i] = p[order[i]]; sv[i] = v[order[i]]; }
  CHECK(metrics::mse(view(sa), view(sp)) == doctest::Approx(metrics::mse(view(a), view(p))).epsilon(1e-13));
  CHECK(metrics::mae(view(sa), view(sp)) == doctest::Approx(metrics::mae(view(a), view(p))).epsilon(1e-13));
  CHECK(metrics::speed_weighted_mae(view(sa), view(sp), view(sv)) ==
        doctest::Approx(metrics::speed_weighted_mae(view(a), view(p), view(v))).epsilon(1e-13));
  CHECK(metrics::quantized_classification_error(view(sa), view(sp), 0.03) ==
        metrics::quantized_classification_error(view(a), view(p), 0.03));
  CHECK(metrics::thresholded_relative_error(view(sa), view(sp), 0.1) ==
        metrics::thresholded_relative_error(view(a), view(p), 0.1));
}

TEST_CASE("cumulative error is order-sensitive") {
  // A biased sequence loses its accumulation once shuffled against
  // alternating-sign errors elsewhere.
  std::vector<double> a(200), p(200, 0.0), v(200, 4.0);
  for (int i = 0; i < 200; ++i) a[i] = i < 100 ? 0.1 : -0.1;
  const double ordered = metrics::cumulative_swae(view(a), view(p), view(v), 20);
  std::mt19937_64 rng(9);
  std::shuffle(a.begin(), a.end(), rng);
  const double shuffled = metrics::cumulative_swae(view(a), view(p), view(v), 20);
  CHECK(shuffled < 0.5 * ordered);
}

TEST_CASE("discrete accuracy breakdowns") {
  const std::vector<int> labels = {2, 3, 0, 1}, preds = {2, 2, 0, 1};
  const std::vector<double> speeds = {1, 1, 1, 1};
  const BreakdownReport r = discrete_accuracy(labels, preds, speeds);
  CHECK(r.all == doctest::Approx(0.75));
  REQUIRE(r.turns);
  CHECK(*r.turns == doctest::Approx(0.5));

  const std::vector<int> all = {0, 2, 3};
  const std::vector<double> v = {1, 2, 3};
  CHECK(*discrete_accuracy(all, all, v).weighted_all == doctest::Approx(1.0));

  expect_error(ErrorKind::UnknownClass, [] {
    const std::vector<int> l = {0, 7};
    const std::vector<double> s = {1, 1};
    discrete_accuracy(l, l, s);
  });
  expect_error(ErrorKind::EmptySet, [] { discrete_accuracy({}, {}, {}); });

  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> cls(0, 3);
  std::uniform_real_distribution<double> sp(0.1, 10);
  std::vector<int> y(500), p(500);
  std::vector<double> w(500);
  for (int i = 0; i < 500; ++i) { y[i] = cls(rng); p[i] = rng() % 3 ? y[i] : cls(rng); w[i] = sp(rng); }
  const BreakdownReport got = discrete_accuracy(y, p, w);
  const oracle::Accuracy want = oracle::accuracy(y, p, w);
  CHECK(oracle::rel_err(got.all, want.all) <= 1e-12);
  CHECK(oracle::rel_err(*got.straight, want.straight) <= 1e-12);
  CHECK(oracle::rel_err(*got.stop, want.stop) <= 1e-12);
  CHECK(oracle::rel_err(*got.turns, want.turns) <= 1e-12);
  CHECK(oracle::rel_err(*got.weighted_all, want.weighted) <= 1e-12);
  CHECK(oracle::rel_err(*got.weighted_turns, want.weighted_turns) <= 1e-12);
}

TEST_CASE("offline report lookup") {
  OfflineReport r;
  r.mse = 1;
  r.tre = 0.5;
  CHECK(r.value("mse") == 1.0);
  CHECK(r.value("tre") == 0.5);
  expect_error(ErrorKind::MissingMetric, [&] { r.value("rmse"); });
}
