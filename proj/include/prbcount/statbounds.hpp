#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

// Concentration analysis for the count estimator C_hat = beta * X, where X is
// a sum of n_ppl iid Bernoulli(p) indicators. The tail bound is governed by
// the sub-Gaussian variance proxy of a Bernoulli(p) variable.

namespace prbcount {

struct BoundQuery {
  double p = 0.0;             // mean transmission probability
  std::uint64_t n_ppl = 0;    // population size
  double phi = 0.0;           // relative deviation, > 0

  void validate() const {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p outside [0,1]");
    if (n_ppl == 0) throw std::invalid_argument("n_ppl must be positive");
    if (!(phi > 0.0)) throw std::invalid_argument("phi must be positive");
  }
};

// Variance proxy of a Bernoulli(p) variable:
//   0 at p in {0,1},  1/4 at p = 1/2,  (p-q) / (2 (ln p - ln q)) otherwise.
// The closed form is 0/0 at p = 1/2; inside |p - 1/2| < 1e-8 the series value
// equals 1/4 to double precision, so the constant is returned there.
inline double bernoulli_variance_proxy(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("bernoulli_variance_proxy: p outside [0,1]");
  if (p == 0.0 || p == 1.0) return 0.0;
  if (std::abs(p - 0.5) < 1e-8) return 0.25;
  const double q = 1.0 - p;
  return (p - q) / (2.0 * (std::log(p) - std::log(q)));
}

// Upper bound on P[|C_hat - n_ppl| >= phi * n_ppl]:
//   2 exp(-(phi^2 / 2) n_ppl p^2 / K(p)), clamped to [0, 1].
// Degenerate at p in {0,1} where the proxy vanishes.
inline double concentration_bound(const BoundQuery& query) {
  query.validate();
  if (query.p == 0.0 || query.p == 1.0)
    throw std::invalid_argument("concentration_bound: p must lie in (0,1)");
  const double proxy = bernoulli_variance_proxy(query.p);
  const double exponent =
      -(query.phi * query.phi / 2.0) * static_cast<double>(query.n_ppl) *
      (query.p * query.p / proxy);
  return std::min(1.0, 2.0 * std::exp(exponent));
}

// Hoeffding baseline for the same event: 2 exp(-2 phi^2 n_ppl p^2), clamped.
inline double hoeffding_bound(const BoundQuery& query) {
  query.validate();
  if (query.p == 0.0)
    throw std::invalid_argument("hoeffding_bound: p must lie in (0,1]");
  const double exponent = -2.0 * query.phi * query.phi *
                          static_cast<double>(query.n_ppl) * query.p * query.p;
  return std::min(1.0, 2.0 * std::exp(exponent));
}

// Monte-Carlo frequency of {|C_hat - n_ppl| >= phi * n_ppl} with
// C_hat = X / p and X ~ Binomial(n_ppl, p). Verification harness for the
// concentration bound; not part of the counting path.
inline double empirical_tail(double p, std::uint64_t n_ppl, double phi,
                             std::uint32_t trials, std::uint64_t seed) {
  if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("empirical_tail: p outside (0,1]");
  if (n_ppl == 0) throw std::invalid_argument("empirical_tail: n_ppl must be positive");
  if (!(phi > 0.0)) throw std::invalid_argument("empirical_tail: phi must be positive");
  if (trials == 0) throw std::invalid_argument("empirical_tail: trials must be positive");

  std::mt19937_64 rng(seed);
  std::binomial_distribution<std::int64_t> binom(static_cast<std::int64_t>(n_ppl), p);
  const double n = static_cast<double>(n_ppl);
  std::uint64_t hits = 0;
  for (std::uint32_t t = 0; t < trials; ++t) {
    const double c_hat = static_cast<double>(binom(rng)) / p;
    if (std::abs(c_hat - n) >= phi * n) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

}  // namespace prbcount
