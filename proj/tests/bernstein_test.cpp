#include <krein/bernstein.hpp>

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace krein;

namespace {

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo * std::pow(hi / lo, double(i) / (n - 1)));
  return g;
}

std::vector<KreinString> families() {
  return {KreinString::atomic({{1.0, 1.0}}), KreinString::atomic({{0.5, 1.0}, {1.5, 0.25}, {3.0, 2.0}}),
          KreinString::linear(0.5), KreinString::fractional(0.25), KreinString::fractional(0.5),
          KreinString::fractional(0.75)};
}

}  // namespace

TEST(EvalBernstein, FractionalConstant) {
  const double s = 0.5;
  const double c = std::pow(s, s - 1) * std::pow(1 - s, s) * std::tgamma(1 - s) / (2 * std::tgamma(s));
  EXPECT_NEAR(eval_bernstein(BernsteinFunction::from_string(KreinString::fractional(s)), 4.0), c * 2.0, 1e-14);
  EXPECT_NEAR(eval_bernstein(BernsteinFunction::from_string(KreinString::fractional(s)), 4.0), 1.0, 1e-14);
}

TEST(EvalBernstein, ZeroAtOrigin) {
  for (const auto& m : families()) {
    EXPECT_EQ(eval_bernstein(BernsteinFunction::from_triple(levy_triple_of(m)), 0.0), 0.0);
    EXPECT_EQ(eval_bernstein(BernsteinFunction::from_string(m), 0.0), 0.0);
  }
}

TEST(EvalBernstein, MixtureIdentity) {
  LevyTriple t;
  t.nu = LevyMeasure::exp_mixture({{0.5, 0.25}});
  EXPECT_NEAR(eval_bernstein(BernsteinFunction::from_triple(t), 1.0), 1.0 / 3.0, 1e-15);
}

TEST(EvalBernstein, DomainAndConvergenceErrors) {
  EXPECT_THROW(eval_bernstein(BernsteinFunction::identity(), -1.0), DomainError);
  LevyTriple t;
  t.nu = LevyMeasure::callable([](double r) { return std::pow(r, -1.5) * (2.0 + std::sin(1.0 / r)); }, "wild");
  try {
    eval_bernstein(BernsteinFunction::from_triple(t), 1.0, 1e-15);
    FAIL() << "expected a convergence error";
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.estimate(), 0.0);
  }
}

TEST(EvalBernstein, CallableDensityQuadrature) {
  // h(r) = e^{-r}: psi = lambda / (1 + lambda)
  LevyTriple t;
  t.nu = LevyMeasure::callable([](double r) { return std::exp(-r); }, "exp");
  for (double l : {0.1, 1.0, 10.0}) EXPECT_NEAR(eval_bernstein(BernsteinFunction::from_triple(t), l), l / (1 + l), 1e-11);
}

TEST(KreinPsi, LinearClosedForm) {
  const auto m = KreinString::linear(0.5);
  EXPECT_NEAR(krein_psi(m, 4.0), 1.0, 1e-15);
  for (double a : {0.1, 2.0})
    for (double l : {0.3, 3.0}) EXPECT_NEAR(krein_psi(KreinString::linear(a), l), std::sqrt(a * l / 2), 1e-14);
}

TEST(KreinPsi, SingleAtom) {
  const auto m = KreinString::atomic({{1.0, 1.0}});
  EXPECT_NEAR(krein_psi(m, 1.0), 1.0 / 3.0, 1e-15);
  std::mt19937_64 g(2);
  std::uniform_real_distribution<double> u(0.01, 50.0);
  for (int i = 0; i < 20; ++i) {
    const double l = u(g);
    EXPECT_NEAR(krein_psi(m, l), l / (1 + 2 * l), 1e-15);
  }
}

TEST(KreinPsi, AtomicMatchesDenseSolve) {
  const oracle::Atoms a = {{0.3, 0.5}, {0.9, 2.0}, {1.2, 0.1}, {2.5, 1.0}, {2.6, 3.0}};
  std::vector<Atom> at;
  for (auto [x, w] : a) at.push_back({x, w});
  const auto m = KreinString::atomic(at, 0.4);
  for (double l : log_grid(1e-3, 1e3, 13)) EXPECT_NEAR(krein_psi(m, l), oracle::atomic_psi(a, l, 0.4), 1e-12 * (1 + l));
}

TEST(KreinPsi, Heaviside) {
  EXPECT_EQ(krein_psi(KreinString::heaviside(1.0), 7.0), 7.0);
  EXPECT_EQ(krein_psi(KreinString::heaviside(0.5), 2.0), 1.0);
}

TEST(KreinPsi, RejectsNonPositiveLambda) {
  EXPECT_THROW(krein_psi(KreinString::linear(1.0), 0.0), DomainError);
  EXPECT_THROW(krein_psi(KreinString::linear(1.0), -1.0), DomainError);
}

TEST(LevyTriple, SingleAtomMixture) {
  auto t = levy_triple_of(KreinString::atomic({{1.0, 1.0}}));
  EXPECT_EQ(t.a, 0.0);
  EXPECT_EQ(t.b, 0.0);
  ASSERT_EQ(t.nu.kind, LevyMeasure::Kind::Mixture);
  ASSERT_EQ(t.nu.mixture.size(), 1u);
  EXPECT_NEAR(t.nu.mixture[0].gamma, 0.5, 1e-15);
  EXPECT_NEAR(t.nu.mixture[0].weight, 0.25, 1e-15);
}

TEST(LevyTriple, LinearHalfDensity) {
  // sqrt(alpha) / (2 sqrt(2 pi)) t^{-3/2} at alpha = 1/2
  auto t = levy_triple_of(KreinString::linear(0.5));
  for (double r : {0.1, 1.0, 5.0}) EXPECT_NEAR(t.nu.density(r), 1.0 / (4.0 * std::sqrt(M_PI)) * std::pow(r, -1.5), 1e-15);
}

TEST(LevyTriple, HeavisideIsPureDrift) {
  auto t = levy_triple_of(KreinString::heaviside(1.0));
  EXPECT_EQ(t.a, 0.0);
  EXPECT_EQ(t.b, 1.0);
  EXPECT_EQ(t.nu.kind, LevyMeasure::Kind::Empty);
}

TEST(LevyTriple, DriftIsMassAtZero) {
  auto t = levy_triple_of(KreinString::atomic({{1.0, 1.0}}, 0.75));
  EXPECT_EQ(t.b, 0.75);
}

TEST(LevyTriple, IntegrabilityFinite) {
  for (const auto& m : families()) {
    auto t = levy_triple_of(m);
    EXPECT_TRUE(std::isfinite(t.nu.integrability()));
    EXPECT_NO_THROW(t.validate());
  }
}

TEST(Properties, RouteAgreement) {
  for (const auto& m : families()) {
    auto tr = BernsteinFunction::from_triple(levy_triple_of(m));
    for (double l : log_grid(0.1, 100.0, 13)) {
      const double a = krein_psi(m, l);
      EXPECT_LE(std::abs(a - eval_bernstein(tr, l)), 1e-8 * (1 + a)) << m.describe() << " lambda=" << l;
    }
  }
}

TEST(Properties, ConcaveAndRatioNonIncreasing) {
  for (const auto& m : families()) {
    auto psi = BernsteinFunction::from_triple(levy_triple_of(m));
    const auto g = log_grid(0.01, 100.0, 40);
    for (std::size_t i = 1; i + 1 < g.size(); ++i) {
      const double f0 = eval_bernstein(psi, g[i - 1]), f1 = eval_bernstein(psi, g[i]), f2 = eval_bernstein(psi, g[i + 1]);
      const double dd = ((f2 - f1) / (g[i + 1] - g[i]) - (f1 - f0) / (g[i] - g[i - 1])) / (g[i + 1] - g[i - 1]);
      EXPECT_LE(dd, 1e-9);
      EXPECT_LE(f2 / g[i + 1], f1 / g[i] * (1 + 1e-12));
    }
  }
}

TEST(Properties, CompoundPoissonLaplaceExponent) {
  // exp(-t psi) against prod_k exp(-t c_k lambda / (gamma_k (gamma_k + lambda)))
  const auto m = KreinString::atomic({{0.5, 1.0}, {1.5, 0.25}, {3.0, 2.0}});
  auto tr = levy_triple_of(m);
  std::mt19937_64 g(9);
  std::uniform_real_distribution<double> u(0.05, 5.0);
  for (int i = 0; i < 20; ++i) {
    const double t = u(g), l = u(g);
    double lp = 0.0;
    for (const auto& a : tr.nu.mixture) lp += t * a.weight / a.gamma * (1.0 - a.gamma / (a.gamma + l));
    EXPECT_NEAR(std::exp(-t * krein_psi(m, l)), std::exp(-lp), 1e-12);
  }
}
