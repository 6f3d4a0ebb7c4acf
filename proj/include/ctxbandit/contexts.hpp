#pragma once

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ctxbandit/error.hpp"
#include "ctxbandit/linalg.hpp"
#include "ctxbandit/rng.hpp"

namespace ctxbandit {

struct Dirac {
  Vector point;
};

// Independent coordinates; var holds the covariance diagonal.
struct DiagGaussian {
  Vector mean;
  Vector var;
};

struct Empirical {
  std::vector<Vector> points;
  std::vector<double> weights;
};

// A distribution over contexts that can be sampled and whose first and second
// moments are available to the feature maps.
class ContextDistribution {
 public:
  using Kind = std::variant<Dirac, DiagGaussian, Empirical>;

  static ContextDistribution dirac(Vector point) {
    detail::require(point.size() > 0, "dirac: empty context");
    detail::require(point.allFinite(), "dirac: non-finite context");
    return ContextDistribution(Dirac{std::move(point)});
  }

  static ContextDistribution gaussian(Vector mean, Vector var) {
    detail::require(mean.size() > 0, "gaussian: empty mean");
    detail::require(mean.size() == var.size(), "gaussian: mean/variance dimension mismatch");
    detail::require(mean.allFinite() && var.allFinite(), "gaussian: non-finite parameters");
    detail::require((var.array() >= 0.0).all(), "gaussian: negative variance");
    return ContextDistribution(DiagGaussian{std::move(mean), std::move(var)});
  }

  static ContextDistribution empirical(std::vector<Vector> points, std::vector<double> weights) {
    detail::require(!points.empty(), "empirical: no support points");
    detail::require(points.size() == weights.size(), "empirical: points/weights size mismatch");
    double total = 0.0;
    for (std::size_t k = 0; k < points.size(); ++k) {
      detail::require(points[k].size() == points[0].size(), "empirical: ragged support points");
      detail::require(points[k].allFinite(), "empirical: non-finite support point");
      detail::require(weights[k] >= 0.0, "empirical: negative weight");
      total += weights[k];
    }
    detail::require(std::abs(total - 1.0) <= 1e-12, "empirical: weights must sum to 1");
    return ContextDistribution(Empirical{std::move(points), std::move(weights)});
  }

  const Kind& kind() const { return kind_; }
  bool is_dirac() const { return std::holds_alternative<Dirac>(kind_); }

  Eigen::Index context_dim() const {
    return std::visit(
        [](const auto& k) -> Eigen::Index {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Dirac>) return k.point.size();
          else if constexpr (std::is_same_v<K, DiagGaussian>) return k.mean.size();
          else return k.points.front().size();
        },
        kind_);
  }

  Vector mean() const {
    return std::visit(
        [](const auto& k) -> Vector {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Dirac>) return k.point;
          else if constexpr (std::is_same_v<K, DiagGaussian>) return k.mean;
          else {
            Vector m = Vector::Zero(k.points.front().size());
            for (std::size_t i = 0; i < k.points.size(); ++i) m += k.weights[i] * k.points[i];
            return m;
          }
        },
        kind_);
  }

  // Dirac draws nothing from the stream.
  Vector sample(Rng& rng) const {
    return std::visit(
        [&rng](const auto& k) -> Vector {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, Dirac>) {
            return k.point;
          } else if constexpr (std::is_same_v<K, DiagGaussian>) {
            std::normal_distribution<double> n01(0.0, 1.0);
            Vector c(k.mean.size());
            for (Eigen::Index i = 0; i < c.size(); ++i)
              c[i] = k.mean[i] + std::sqrt(k.var[i]) * n01(rng);
            return c;
          } else {
            std::discrete_distribution<std::size_t> pick(k.weights.begin(), k.weights.end());
            return k.points[pick(rng)];
          }
        },
        kind_);
  }

 private:
  explicit ContextDistribution(Kind k) : kind_(std::move(k)) {}
  Kind kind_;
};

}  // namespace ctxbandit
