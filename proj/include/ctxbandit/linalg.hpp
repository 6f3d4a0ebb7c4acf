#pragma once

// Dense symmetric positive-definite helpers: Gram accumulators, Cholesky-based
// log-determinants, ridge solves and matrix-weighted norms.

#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "ctxbandit/error.hpp"

namespace ctxbandit {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// A d-dimensional feature (phi or psi). Kept as a plain Eigen vector so the
// arithmetic reads naturally; finiteness is checked where vectors are produced.
using FeatureVector = Vector;

inline bool all_finite(const Vector& v) { return v.allFinite(); }

// Running Gram matrix W = sum v v^T together with the ridge lambda that is
// added on factorization, so factor() works on lambda*I + W.
class PsdAccumulator {
 public:
  PsdAccumulator() = default;
  PsdAccumulator(Eigen::Index dim, double ridge)
      : gram_(Matrix::Zero(dim, dim)), ridge_(ridge) {
    detail::require(dim > 0, "PsdAccumulator: dimension must be positive");
    detail::require(ridge > 0.0, "PsdAccumulator: ridge must be positive");
  }

  // Adopts an existing PSD matrix (symmetrized from its upper triangle).
  static PsdAccumulator from_gram(const Matrix& gram, double ridge) {
    detail::require(gram.rows() == gram.cols(), "PsdAccumulator: gram must be square");
    PsdAccumulator acc(gram.rows(), ridge);
    for (Eigen::Index j = 0; j < gram.cols(); ++j)
      for (Eigen::Index i = 0; i <= j; ++i) acc.gram_(i, j) = acc.gram_(j, i) = gram(i, j);
    return acc;
  }

  Eigen::Index dim() const { return gram_.rows(); }
  double ridge() const { return ridge_; }
  const Matrix& gram() const { return gram_; }

  Matrix regularized() const {
    Matrix m = gram_;
    m.diagonal().array() += ridge_;
    return m;
  }

  // W += v v^T. Upper triangle is computed once and mirrored, so the matrix
  // stays bit-exactly symmetric.
  void add_outer(const Vector& v) {
    if (v.size() != dim())
      throw ContractViolation("rank_one_update: vector has dimension " + std::to_string(v.size()) +
                              ", accumulator has " + std::to_string(dim()));
    for (Eigen::Index j = 0; j < dim(); ++j) {
      for (Eigen::Index i = 0; i < j; ++i) {
        gram_(i, j) += v[i] * v[j];
        gram_(j, i) = gram_(i, j);
      }
      gram_(j, j) += v[j] * v[j];
    }
  }

  // Element-wise sum of two symmetric matrices is symmetric bit for bit.
  PsdAccumulator& operator+=(const PsdAccumulator& other) {
    if (other.dim() != dim())
      throw ContractViolation("PsdAccumulator: cannot add accumulators of different dimension");
    gram_ += other.gram_;
    return *this;
  }

  friend PsdAccumulator operator+(PsdAccumulator a, const PsdAccumulator& b) {
    a += b;
    return a;
  }

  void set_zero() { gram_.setZero(); }
  bool is_zero() const { return (gram_.array() == 0.0).all(); }

  friend bool operator==(const PsdAccumulator& a, const PsdAccumulator& b) {
    return a.ridge_ == b.ridge_ && a.gram_.rows() == b.gram_.rows() &&
           (a.gram_.array() == b.gram_.array()).all();
  }

 private:
  Matrix gram_;
  double ridge_ = 1.0;
};

// U = sum v * y.
class LinearStatistics {
 public:
  LinearStatistics() = default;
  explicit LinearStatistics(Eigen::Index dim) : vec_(Vector::Zero(dim)) {}
  explicit LinearStatistics(Vector v) : vec_(std::move(v)) {}

  Eigen::Index dim() const { return vec_.size(); }
  const Vector& vector() const { return vec_; }

  void add(const Vector& v, double y) {
    if (v.size() != dim()) throw ContractViolation("LinearStatistics: dimension mismatch");
    vec_ += v * y;
  }
  LinearStatistics& operator+=(const LinearStatistics& other) {
    if (other.dim() != dim()) throw ContractViolation("LinearStatistics: dimension mismatch");
    vec_ += other.vec_;
    return *this;
  }
  friend LinearStatistics operator+(LinearStatistics a, const LinearStatistics& b) {
    a += b;
    return a;
  }
  void set_zero() { vec_.setZero(); }
  bool is_zero() const { return (vec_.array() == 0.0).all(); }

  friend bool operator==(const LinearStatistics& a, const LinearStatistics& b) {
    return a.vec_.size() == b.vec_.size() && (a.vec_.array() == b.vec_.array()).all();
  }

 private:
  Vector vec_;
};

// Cholesky factor L of lambda*I + W. Recomputed from the stored matrix on each
// use rather than updated incrementally.
class SpdFactor {
 public:
  explicit SpdFactor(const PsdAccumulator& acc) : llt_(acc.regularized()) {
    if (llt_.info() != Eigen::Success)
      throw NumericalError("Cholesky factorization failed: matrix is not positive definite");
    const auto& l = llt_.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
      const double p = l(i, i);
      if (!(p > 0.0) || !std::isfinite(p))
        throw NumericalError("Cholesky factorization produced a non-positive pivot");
    }
  }

  Eigen::Index dim() const { return llt_.matrixLLT().rows(); }

  double log_det() const {
    const auto& l = llt_.matrixLLT();
    double s = 0.0;
    for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
    return 2.0 * s;
  }

  Vector solve(const Vector& rhs) const {
    if (rhs.size() != dim()) throw ContractViolation("ridge_solve: dimension mismatch");
    Vector x = llt_.solve(rhs);
    if (!x.allFinite()) throw NumericalError("ridge_solve: non-finite solution");
    return x;
  }

  // sqrt(v^T A^{-1} v) = ||L^{-1} v||.
  double inverse_norm(const Vector& v) const {
    if (v.size() != dim()) throw ContractViolation("weighted_norm: dimension mismatch");
    Vector y = llt_.matrixL().solve(v);
    return y.norm();
  }

  // sqrt(z^T A z) = ||L^T z||.
  double norm(const Vector& z) const {
    if (z.size() != dim()) throw ContractViolation("weighted_norm: dimension mismatch");
    Vector y = llt_.matrixU() * z;
    return y.norm();
  }

 private:
  Eigen::LLT<Matrix> llt_;
};

inline PsdAccumulator rank_one_update(PsdAccumulator acc, const FeatureVector& v) {
  acc.add_outer(v);
  return acc;
}

// log det(lambda*I + W).
inline double log_det(const PsdAccumulator& acc) { return SpdFactor(acc).log_det(); }

inline double log_det_ratio(const PsdAccumulator& now, const PsdAccumulator& then) {
  if (now.dim() != then.dim()) throw ContractViolation("log_det_ratio: dimension mismatch");
  return log_det(now) - log_det(then);
}

inline FeatureVector ridge_solve(const PsdAccumulator& acc, const LinearStatistics& stats) {
  if (acc.dim() != stats.dim()) throw ContractViolation("ridge_solve: dimension mismatch");
  return SpdFactor(acc).solve(stats.vector());
}

// ||v|| in the metric (lambda*I + W)^{-1}.
inline double weighted_norm(const PsdAccumulator& acc, const FeatureVector& v) {
  return SpdFactor(acc).inverse_norm(v);
}

}  // namespace ctxbandit
