#pragma once

// Plain-loop reference implementations. Written from the metric definitions
// without sharing code with the library, so agreement is meaningful.

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

namespace oracle {

inline double mse(const std::vector<double>& a, const std::vector<double>& p) {
  long double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double d = static_cast<long double>(a[i]) - p[i];
    sum += d * d;
  }
  return static_cast<double>(sum / a.size());
}

inline double mae(const std::vector<double>& a, const std::vector<double>& p) {
  long double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::fabs(static_cast<long double>(a[i]) - p[i]);
  return static_cast<double>(sum / a.size());
}

inline double swae(const std::vector<double>& a, const std::vector<double>& p, const std::vector<double>& v) {
  long double sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::fabs(static_cast<long double>(a[i]) - p[i]) * v[i];
  return static_cast<double>(sum / a.size());
}

// Windows never straddle two sequences.
inline double cum_swae(const std::vector<double>& a, const std::vector<double>& p, const std::vector<double>& v,
                       int T, const std::vector<std::size_t>& lengths) {
  long double total = 0;
  std::size_t windows = 0;
  std::size_t start = 0;
  for (std::size_t len : lengths) {
    for (std::size_t i = start; i + T < start + len; ++i) {
      long double acc = 0;
      for (int t = 0; t <= T; ++t) acc += (static_cast<long double>(a[i + t]) - p[i + t]) * v[i + t];
      total += std::fabs(acc);
      ++windows;
    }
    start += len;
  }
  return static_cast<double>(total / windows);
}

inline int q(double x, double sigma) {
  if (x < -sigma) return -1;
  if (x >= sigma) return 1;
  return 0;
}

inline double qce(const std::vector<double>& a, const std::vector<double>& p, double sigma) {
  int wrong = 0;
  for (std::size_t i = 0; i < a.size(); ++i) wrong += q(a[i], sigma) != q(p[i], sigma);
  return static_cast<double>(wrong) / a.size();
}

inline double tre(const std::vector<double>& a, const std::vector<double>& p, double alpha) {
  int over = 0;
  for (std::size_t i = 0; i < a.size(); ++i) over += std::fabs(p[i] - a[i]) > alpha * std::fabs(a[i]);
  return static_cast<double>(over) / a.size();
}

struct Accuracy {
  double all = 0, straight = 0, stop = 0, turns = 0, weighted = 0, weighted_turns = 0;
};

// Classes: 0 straight, 1 stop, 2 left, 3 right.
inline Accuracy accuracy(const std::vector<int>& y, const std::vector<int>& p, const std::vector<double>& v) {
  double hit = 0, n_s = 0, hit_s = 0, n_st = 0, hit_st = 0, n_t = 0, hit_t = 0;
  double w = 0, w_hit = 0, wt = 0, wt_hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool ok = y[i] == p[i];
    hit += ok;
    w += v[i];
    w_hit += ok * v[i];
    if (y[i] == 0) { n_s += 1; hit_s += ok; }
    if (y[i] == 1) { n_st += 1; hit_st += ok; }
    if (y[i] >= 2) { n_t += 1; hit_t += ok; wt += v[i]; wt_hit += ok * v[i]; }
  }
  return {hit / y.size(), hit_s / n_s, hit_st / n_st, hit_t / n_t, w_hit / w, wt_hit / wt};
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

inline double rel_err(double got, double want) {
  const double scale = std::max(std::fabs(want), 1e-300);
  return got == want ? 0.0 : std::fabs(got - want) / scale;
}

// Algebraic least-squares circle fit (Kasa): solve for D, E, F in
// x^2 + y^2 + D x + E y + F = 0 via 3x3 normal equations.
inline double fit_circle_radius(const std::vector<double>& xs, const std::vector<double>& ys) {
  double m[3][4] = {};
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double row[3] = {xs[i], ys[i], 1.0};
    const double rhs = -(xs[i] * xs[i] + ys[i] * ys[i]);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) m[r][c] += row[r] * row[c];
      m[r][3] += row[r] * rhs;
    }
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
    for (int c = 0; c < 4; ++c) std::swap(m[col][c], m[piv][c]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 4; ++c) m[r][c] -= f * m[col][c];
    }
  }
  const double D = m[0][3] / m[0][0], E = m[1][3] / m[1][1], F = m[2][3] / m[2][2];
  return std::sqrt(D * D / 4 + E * E / 4 - F);
}

}  // namespace oracle
