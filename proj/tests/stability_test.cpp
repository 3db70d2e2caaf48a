#include <krein/stability.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace krein;

namespace {

const OperatorHandle kDiag = OperatorHandle::diagonal(Eigen::Vector2d(1.0, 4.0));
const Eigen::VectorXd kOnes = Eigen::VectorXd::Ones(2);
const KreinString kLimit = KreinString::heaviside(0.5);

double two_c_oracle(double s) { return std::pow(s, s - 1) * std::pow(1 - s, s) * std::tgamma(1 - s) / std::tgamma(s); }

// resolvent gap per eigenvalue from scalar arithmetic
double resolvent_gap_oracle(double s) {
  double g = 0.0;
  for (double l : {1.0, 4.0}) {
    const double d = 1.0 / (1.0 + 0.5 * two_c_oracle(s) * std::pow(l, s)) - 1.0 / (1.0 + 0.5 * l);
    g += d * d;
  }
  return std::sqrt(g);
}

}  // namespace

TEST(FractionalConstant, Values) {
  EXPECT_NEAR(fractional_constant(0.5), 0.5, 1e-15);
  for (double s : {0.1, 0.3, 0.7, 0.9, 0.99, 0.999}) EXPECT_NEAR(2 * fractional_constant(s), two_c_oracle(s), 1e-12 * two_c_oracle(s));
  EXPECT_THROW(fractional_constant(1.0), DomainError);
  EXPECT_THROW(fractional_constant(0.0), DomainError);
}

TEST(FractionalConstant, LimitIsOne) {
  double prev = INFINITY;
  for (double e : {1e-3, 1e-4, 1e-5, 1e-6}) {
    const double gap = std::abs(2 * fractional_constant(1 - e) - 1);
    EXPECT_LT(gap, prev);
    prev = gap;
  }
  EXPECT_LT(prev, 1e-4);
}

TEST(FractionalConstant, NotMonotoneOnTheCoarseLadder) {
  // 2c rises above 1 before returning to it
  EXPECT_NEAR(2 * fractional_constant(0.9), 1.1326, 1e-4);
  EXPECT_NEAR(2 * fractional_constant(0.99), 1.0352, 1e-4);
  EXPECT_NEAR(2 * fractional_constant(0.999), 1.0058, 1e-4);
  EXPECT_GT(2 * fractional_constant(0.9), 2 * fractional_constant(0.99));
}

TEST(Vague, Trivial) {
  const auto hats = dyadic_hats(4, 4.0);
  for (const auto& m : {KreinString::fractional(0.7), KreinString::atomic({{1.0, 2.0}}), kLimit})
    EXPECT_EQ(vague_gap(m, m, hats), 0.0);
  EXPECT_THROW(vague_gap(kLimit, kLimit, {{0.5, 1.0}}), DomainError);
}

TEST(Vague, DyadicHats) {
  const auto hats = dyadic_hats(2, 4.0);
  ASSERT_EQ(hats.size(), 8u);
  EXPECT_EQ(hats[0].center, 2.0);
  EXPECT_EQ(hats[0].half_width, 1.0);
  EXPECT_EQ(hats[2].half_width, 0.5);
  for (const auto& h : hats) {
    EXPECT_GT(h.center - h.half_width, 0.0);
    EXPECT_LE(h.center + h.half_width, 4.0);
  }
}

TEST(Vague, HatIntegralOfLinearString) {
  // int hat * alpha dz = alpha * half_width
  EXPECT_NEAR(integrate_hat(KreinString::linear(3.0), {2.0, 0.5}), 1.5, 1e-12);
  EXPECT_NEAR(integrate_hat(KreinString::atomic({{1.5, 2.0}}), {2.0, 1.0}), 1.0, 1e-15);
}

TEST(Vague, FractionalSequenceDecreases) {
  const auto hats = dyadic_hats(4, 4.0);
  double prev = INFINITY;
  for (int n : {2, 4, 8, 16}) {
    const double g = vague_gap(KreinString::fractional(1.0 - 1.0 / n), kLimit, hats);
    EXPECT_LT(g, prev) << n;
    prev = g;
  }
}

TEST(Vague, ShiftedAtom) {
  const auto hats = dyadic_hats(4, 4.0);
  const auto m = KreinString::atomic({{1.0, 1.0}});
  double prev = INFINITY;
  for (int n : {16, 32, 64, 128}) {
    const double g = vague_gap(KreinString::atomic({{1.0 + 1.0 / n, 1.0}}), m, hats);
    EXPECT_LT(g, prev);
    prev = g;
  }
  EXPECT_LT(prev, 0.1);
}

TEST(Resolvent, Trivial) {
  EXPECT_EQ(resolvent_gap(kDiag, kLimit, kLimit, 1.0, kOnes), 0.0);
  EXPECT_THROW(resolvent_gap(kDiag, kLimit, kLimit, 0.0, kOnes), DomainError);
}

TEST(Resolvent, MatchesScalarOracle) {
  for (double s : {0.5, 0.75, 0.9, 0.99, 0.999})
    EXPECT_NEAR(resolvent_gap(kDiag, KreinString::fractional(s), kLimit, 1.0, kOnes), resolvent_gap_oracle(s), 1e-12);
}

TEST(Resolvent, BuiltinSequenceDecreases) {
  double pr = INFINITY, ps = INFINITY;
  for (int n : {2, 4, 8, 16, 32}) {
    const auto m = KreinString::fractional(1.0 - 1.0 / n);
    const double r = resolvent_gap(kDiag, m, kLimit, 1.0, kOnes);
    const double s = semigroup_gap(kDiag, m, kLimit, kOnes);
    EXPECT_LT(r, pr) << n;
    EXPECT_LT(s, ps) << n;
    pr = r;
    ps = s;
  }
}

TEST(Resolvent, GapAtTheLastLadderStep) {
  // the slow 1 - sigma rate leaves the gap above 1e-3 at 0.999; it drops below one step later
  const double g3 = resolvent_gap(kDiag, KreinString::fractional(0.999), kLimit, 1.0, kOnes);
  EXPECT_NEAR(g3, 0.0016060, 1e-6);
  EXPECT_LT(resolvent_gap(kDiag, KreinString::fractional(0.9999), kLimit, 1.0, kOnes), 1e-3);
}

TEST(Resolvent, JointWithSemigroupGap) {
  // both vanish together along the sequence, and a gap in one shows in the other
  const auto far = KreinString::fractional(0.3);
  EXPECT_GT(resolvent_gap(kDiag, far, kLimit, 1.0, kOnes), 1e-2);
  EXPECT_GT(semigroup_gap(kDiag, far, kLimit, kOnes), 1e-2);
  const auto near = KreinString::fractional(0.99999);
  EXPECT_LT(resolvent_gap(kDiag, near, kLimit, 1.0, kOnes), 1e-4);
  EXPECT_LT(semigroup_gap(kDiag, near, kLimit, kOnes), 1e-4);
}

TEST(Sequence, Builtin) {
  auto s = StringSequence::fractional_builtin({2, 4, 8});
  ASSERT_EQ(s.strings.size(), 3u);
  EXPECT_EQ(s.parameter[2], 0.875);
  EXPECT_THROW(StringSequence::fractional_builtin({1}), DomainError);
}

TEST(Sequence, RefusesDriftToZero) {
  EXPECT_THROW(StringSequence::fractional({0.5, 0.1, 0.01}), DomainError);
  EXPECT_NO_THROW(StringSequence::fractional({0.5, 0.9}));
  EXPECT_THROW(StringSequence::fractional({}), DomainError);
  EXPECT_THROW(StringSequence::fractional({0.5, 1.0}), DomainError);
}

TEST(Experiment, Table) {
  const std::vector<double> sg = {0.5, 0.9, 0.99, 0.999};
  auto rows = fractional_limit_experiment(kDiag, sg, kOnes);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_NEAR(rows[0].c_sigma, 0.5, 1e-15);
  EXPECT_NEAR(rows[0].eigen_error, 2.0, 1e-14);  // |2^1 - 4| at lambda = 4
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_NEAR(rows[i].two_c, two_c_oracle(sg[i]), 1e-12);
    EXPECT_NEAR(rows[i].resolvent_gap, resolvent_gap_oracle(sg[i]), 1e-12);
    if (i) {
      EXPECT_LT(rows[i].resolvent_gap, rows[i - 1].resolvent_gap);
      EXPECT_LT(rows[i].semigroup_gap, rows[i - 1].semigroup_gap);
      EXPECT_LT(rows[i].vague_gap, rows[i - 1].vague_gap);
    }
  }
  EXPECT_LT(rows.back().vague_gap, 1e-3);
}
