#pragma once

// Brute-force dense oracles, deliberately independent of Eigen's
// decompositions: plain Gaussian elimination with partial pivoting.

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;
using Vec = std::vector<double>;

struct Lu {
  Mat a;
  std::vector<std::size_t> perm;
  int sign = 1;
};

inline Lu lu(Mat a) {
  const std::size_t n = a.size();
  Lu f;
  f.perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) f.perm[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a[i][k]) > std::abs(a[p][k])) p = i;
    if (a[p][k] == 0.0) throw std::runtime_error("oracle: singular matrix");
    if (p != k) {
      std::swap(a[p], a[k]);
      std::swap(f.perm[p], f.perm[k]);
      f.sign = -f.sign;
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      a[i][k] /= a[k][k];
      for (std::size_t j = k + 1; j < n; ++j) a[i][j] -= a[i][k] * a[k][j];
    }
  }
  f.a = std::move(a);
  return f;
}

// log |det A|
inline double log_abs_det(const Mat& a) {
  const Lu f = lu(a);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::log(std::abs(f.a[i][i]));
  return s;
}

inline Vec solve(const Mat& a, const Vec& b) {
  const Lu f = lu(a);
  const std::size_t n = a.size();
  Vec y(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[f.perm[i]];
    for (std::size_t j = 0; j < i; ++j) s -= f.a[i][j] * y[j];
    y[i] = s;
  }
  Vec x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = y[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= f.a[i][j] * x[j];
    x[i] = s / f.a[i][i];
  }
  return x;
}

inline Mat inverse(const Mat& a) {
  const std::size_t n = a.size();
  Mat inv(n, Vec(n));
  for (std::size_t c = 0; c < n; ++c) {
    Vec e(n, 0.0);
    e[c] = 1.0;
    const Vec col = solve(a, e);
    for (std::size_t r = 0; r < n; ++r) inv[r][c] = col[r];
  }
  return inv;
}

// sqrt(v^T A^{-1} v) through the explicit inverse.
inline double inverse_quadratic_norm(const Mat& a, const Vec& v) {
  const Mat inv = inverse(a);
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) s += v[i] * inv[i][j] * v[j];
  return std::sqrt(s);
}

inline Mat ridge_gram(std::size_t d, double lambda, const std::vector<Vec>& xs) {
  Mat a(d, Vec(d, 0.0));
  for (std::size_t i = 0; i < d; ++i) a[i][i] = lambda;
  for (const auto& x : xs)
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) a[i][j] += x[i] * x[j];
  return a;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

}  // namespace oracle
