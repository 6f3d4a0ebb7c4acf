#pragma once

// Feature maps phi(x, c) and their expectations psi(x, mu) = E_{c~mu} phi(x, c).

#include <cmath>
#include <concepts>
#include <cstdint>
#include <variant>

#include "ctxbandit/contexts.hpp"
#include "ctxbandit/linalg.hpp"
#include "ctxbandit/rng.hpp"

namespace ctxbandit {

template <class Map>
concept FeatureMap = requires(const Map& m, const Vector& x, const Vector& c) {
  { m(x, c) } -> std::convertible_to<Vector>;
};

// Maps that know E[phi] under a diagonal Gaussian without sampling.
template <class Map>
concept GaussianClosedForm = FeatureMap<Map> && requires(const Map& m, const Vector& x,
                                                         const DiagGaussian& g) {
  { m.gaussian_expectation(x, g) } -> std::convertible_to<Vector>;
};

// phi = [x_1^2..x_n^2, c_1^2..c_n^2, x_1 c_1..x_n c_n], d = 3n.
inline FeatureVector phi_quadratic(const Vector& x, const Vector& c) {
  if (x.size() != c.size())
    throw ContractViolation("phi_quadratic: action and context dimensions differ");
  const Eigen::Index n = x.size();
  FeatureVector phi(3 * n);
  phi.segment(0, n) = x.array().square();
  phi.segment(n, n) = c.array().square();
  phi.segment(2 * n, n) = x.array() * c.array();
  return phi;
}

// phi = vec(v w^T) for user factor v (the context) and item factor w (the
// action), column-major so phi[i + k*j] = v_i w_j.
inline FeatureVector phi_bilinear(const Vector& w, const Vector& v) {
  if (w.size() != v.size())
    throw ContractViolation("phi_bilinear: user and item factor dimensions differ");
  const Eigen::Index k = v.size();
  FeatureVector phi(k * k);
  for (Eigen::Index j = 0; j < k; ++j) phi.segment(j * k, k) = v * w[j];
  return phi;
}

struct QuadraticFeatures {
  FeatureVector operator()(const Vector& x, const Vector& c) const { return phi_quadratic(x, c); }

  // E[c_i^2] = m_i^2 + v_i, E[x_i c_i] = x_i m_i.
  FeatureVector gaussian_expectation(const Vector& x, const DiagGaussian& g) const {
    if (x.size() != g.mean.size())
      throw ContractViolation("psi_expected: action and context dimensions differ");
    const Eigen::Index n = x.size();
    FeatureVector psi(3 * n);
    psi.segment(0, n) = x.array().square();
    psi.segment(n, n) = g.mean.array().square() + g.var.array();
    psi.segment(2 * n, n) = x.array() * g.mean.array();
    return psi;
  }
};

struct BilinearFeatures {
  FeatureVector operator()(const Vector& w, const Vector& v) const { return phi_bilinear(w, v); }

  // Linear in the context, so E[phi] = phi(w, E[v]).
  FeatureVector gaussian_expectation(const Vector& w, const DiagGaussian& g) const {
    return phi_bilinear(w, g.mean);
  }
};

struct MonteCarloOptions {
  std::size_t samples = 10000;
  std::uint64_t seed = 0x5eed;
};

// Sample average of phi(x, c) over c ~ mu with a fixed seeded stream.
template <FeatureMap Map>
FeatureVector psi_monte_carlo(const Map& map, const Vector& x, const ContextDistribution& mu,
                              const MonteCarloOptions& opts = {}) {
  detail::require(opts.samples > 0, "psi_monte_carlo: need at least one sample");
  Rng rng(opts.seed);
  FeatureVector acc = map(x, mu.sample(rng));
  for (std::size_t s = 1; s < opts.samples; ++s) acc += map(x, mu.sample(rng));
  return acc / static_cast<double>(opts.samples);
}

// Expected feature vector of action x under mu. Dirac and empirical
// distributions are exact; Gaussians use the map's closed form when it has one
// and fall back to Monte Carlo otherwise.
template <FeatureMap Map>
FeatureVector psi_expected(const Map& map, const Vector& x, const ContextDistribution& mu,
                           const MonteCarloOptions& mc = {}) {
  return std::visit(
      [&](const auto& k) -> FeatureVector {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Dirac>) {
          return map(x, k.point);
        } else if constexpr (std::is_same_v<K, Empirical>) {
          FeatureVector acc = k.weights[0] * map(x, k.points[0]);
          for (std::size_t i = 1; i < k.points.size(); ++i) acc += k.weights[i] * map(x, k.points[i]);
          return acc;
        } else if constexpr (GaussianClosedForm<Map>) {
          return map.gaussian_expectation(x, k);
        } else {
          return psi_monte_carlo(map, x, mu, mc);
        }
      },
      mu.kind());
}

}  // namespace ctxbandit
