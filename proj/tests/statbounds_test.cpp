#include "prbcount/statbounds.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace prbcount;

// Frozen with a 50-digit-precision evaluation of (1/3) / (2 ln 2).
constexpr double kProxyOneThird = 0.24044917348149390122665411350031535623777432569216;

TEST(VarianceProxy, ClosedFormAnchors) {
  EXPECT_EQ(bernoulli_variance_proxy(0.5), 0.25);
  EXPECT_EQ(bernoulli_variance_proxy(0.0), 0.0);
  EXPECT_EQ(bernoulli_variance_proxy(1.0), 0.0);
  EXPECT_NEAR(bernoulli_variance_proxy(1.0 / 3.0), kProxyOneThird, 1e-12);
}

TEST(VarianceProxy, RejectsOutsideUnitInterval) {
  EXPECT_THROW(bernoulli_variance_proxy(-0.01), std::invalid_argument);
  EXPECT_THROW(bernoulli_variance_proxy(1.01), std::invalid_argument);
  EXPECT_THROW(bernoulli_variance_proxy(std::nan("")), std::invalid_argument);
}

TEST(VarianceProxy, GridShapeProperties) {
  // 10^4-point grid over (0,1): symmetry, bounded by 1/4 with the maximum at
  // 1/2, increasing on the left half, and concave (the curve rises from 0 to
  // 1/4 and back to 0, so second differences are non-positive).
  const int n = 10000;
  const double h = 1.0 / n;
  double prev = 0.0;
  double prev2 = -1.0;
  for (int i = 1; i < n; ++i) {
    const double p = i * h;
    const double k = bernoulli_variance_proxy(p);
    ASSERT_NEAR(k, bernoulli_variance_proxy(1.0 - p), 1e-12) << "p=" << p;
    ASSERT_LE(k, 0.25 + 1e-15);
    if (p < 0.5) {
      ASSERT_GE(k, prev - 1e-15) << "not increasing at p=" << p;
    }
    if (i >= 3) {
      const double second_diff = k - 2.0 * prev + prev2;
      ASSERT_LE(second_diff, 1e-9) << "convexity bulge at p=" << p;
    }
    prev2 = prev;
    prev = k;
  }
  // Maximum attained exactly at 1/2.
  EXPECT_EQ(bernoulli_variance_proxy(0.5), 0.25);
  EXPECT_LT(bernoulli_variance_proxy(0.5 - h), 0.25);
  EXPECT_LT(bernoulli_variance_proxy(0.5 + h), 0.25);
}

TEST(VarianceProxy, ContinuityAcrossTheHalfSeam) {
  const double at_seam = bernoulli_variance_proxy(0.5);
  for (double eps : {1e-6, 1e-7, 1e-9, 1e-12}) {
    EXPECT_NEAR(bernoulli_variance_proxy(0.5 - eps), at_seam, 1e-11);
    EXPECT_NEAR(bernoulli_variance_proxy(0.5 + eps), at_seam, 1e-11);
  }
}

TEST(VarianceProxy, ExponentRatioLimits) {
  // p^2 / K(p) vanishes as p -> 0+ and grows without bound toward p -> 1-.
  const double small = 1e-6;
  const double tiny_ratio = small * small / bernoulli_variance_proxy(small);
  EXPECT_LT(tiny_ratio, 1e-9);
  const double big = 1.0 - 1e-6;
  const double big_ratio = big * big / bernoulli_variance_proxy(big);
  EXPECT_GT(big_ratio, 25.0);  // ~27.6 at this point, still climbing
  EXPECT_GT(big_ratio, 0.9 * 0.9 / bernoulli_variance_proxy(0.9));
}

TEST(ConcentrationBound, MatchesHoeffdingAtHalf) {
  for (std::uint64_t n : {100ULL, 1000ULL, 100000ULL}) {
    for (double phi : {0.05, 0.1, 0.3}) {
      const BoundQuery q{0.5, n, phi};
      EXPECT_NEAR(concentration_bound(q), hoeffding_bound(q), 1e-12);
    }
  }
}

TEST(ConcentrationBound, HandValueAtHalf) {
  // p = 1/2: bound reduces to 2 exp(-phi^2 n / 2) = 2 exp(-5) here.
  const BoundQuery q{0.5, 1000, 0.1};
  EXPECT_NEAR(hoeffding_bound(q), 0.013475893998170934, 1e-15);
  EXPECT_NEAR(concentration_bound(q), 0.013475893998170934, 1e-15);
}

TEST(ConcentrationBound, DominatesHoeffdingOnGrid) {
  const BoundQuery base{0.0, 1000, 0.1};
  for (int i = 1; i <= 999; ++i) {
    const double p = i / 1000.0;
    BoundQuery q = base;
    q.p = p;
    ASSERT_LE(concentration_bound(q), hoeffding_bound(q) + 1e-15) << "p=" << p;
    // Root cause of strict dominance away from 1/2: the proxy sits strictly
    // below 1/4 there.
    if (p != 0.5) {
      ASSERT_LT(bernoulli_variance_proxy(p), 0.25);
    }
  }
}

TEST(ConcentrationBound, ScalesExponentiallyInPopulation) {
  const BoundQuery q1{0.3, 500, 0.1};
  BoundQuery q10 = q1;
  q10.n_ppl = 5000;
  const double b1 = concentration_bound(q1);
  const double b10 = concentration_bound(q10);
  EXPECT_NEAR(b10 / 2.0, std::pow(b1 / 2.0, 10.0), 1e-12);
}

TEST(ConcentrationBound, DegenerateProbabilitiesRejected) {
  EXPECT_THROW(concentration_bound(BoundQuery{0.0, 10, 0.1}), std::invalid_argument);
  EXPECT_THROW(concentration_bound(BoundQuery{1.0, 10, 0.1}), std::invalid_argument);
  EXPECT_THROW(concentration_bound(BoundQuery{0.5, 10, 0.0}), std::invalid_argument);
  EXPECT_THROW(concentration_bound(BoundQuery{0.5, 0, 0.1}), std::invalid_argument);
}

TEST(Bounds, ClampToProbabilityRange) {
  // Tiny populations make the raw right-hand side exceed 1.
  const BoundQuery q{0.1, 1, 0.01};
  EXPECT_EQ(concentration_bound(q), 1.0);
  EXPECT_EQ(hoeffding_bound(q), 1.0);
  const BoundQuery sharp{0.5, 100000, 1.0};
  EXPECT_LT(concentration_bound(sharp), 1e-300);
}

TEST(EmpiricalTail, CertainTransmissionHasNoTail) {
  EXPECT_EQ(empirical_tail(1.0, 500, 0.05, 2000, 42), 0.0);
}

TEST(EmpiricalTail, StaysBelowConcentrationBound) {
  const double p = 0.3;
  const std::uint64_t n = 1000;
  const double phi = 0.2;
  const std::uint32_t trials = 100000;
  const double freq = empirical_tail(p, n, phi, trials, 1234);
  const double bound = concentration_bound(BoundQuery{p, n, phi});
  const double se = std::sqrt(freq * (1.0 - freq) / trials);
  EXPECT_LE(freq, bound + 3.0 * se);
}

TEST(EmpiricalTail, ShrinksWithPopulation) {
  const double phi = 0.1;
  const double f_small = empirical_tail(0.3, 100, phi, 50000, 99);
  const double f_large = empirical_tail(0.3, 10000, phi, 50000, 99);
  EXPECT_LT(f_large, f_small);
  EXPECT_EQ(f_large, 0.0);  // 0.1 relative deviation is ~18 sigma at n=10^4
}

TEST(EmpiricalTail, DeterministicGivenSeed) {
  EXPECT_EQ(empirical_tail(0.4, 200, 0.1, 10000, 5),
            empirical_tail(0.4, 200, 0.1, 10000, 5));
}
