#pragma once

#include <krein/bernstein.hpp>
#include <krein/calculus.hpp>
#include <krein/error.hpp>
#include <krein/operator.hpp>
#include <krein/quadrature.hpp>
#include <krein/strings.hpp>

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <string>
#include <vector>

namespace krein {

struct StringSequence {
  std::vector<KreinString> strings;
  std::vector<double> parameter;
  std::string label;

  // fractional strings m(z) = z^{(1-sigma)/sigma}/2; sequences drifting to sigma -> 0 are refused
  static StringSequence fractional(const std::vector<double>& sigmas) {
    if (sigmas.empty()) throw DomainError("empty sigma sequence");
    if (sigmas.size() > 1 && sigmas.back() < sigmas.front() && sigmas.back() < 0.5)
      throw DomainError("sigma sequences heading to 0+ are refused: the pointwise limit there is not a string");
    StringSequence s;
    s.label = "fractional";
    for (double sg : sigmas) {
      s.strings.push_back(KreinString::fractional(sg));
      s.parameter.push_back(sg);
    }
    return s;
  }

  // sigma_n = 1 - 1/n
  static StringSequence fractional_builtin(const std::vector<int>& ns) {
    std::vector<double> sg;
    for (int n : ns) {
      if (n < 2) throw DomainError("built-in sequence needs n >= 2");
      sg.push_back(1.0 - 1.0 / n);
    }
    return fractional(sg);
  }
};

// hat of half-width w centred at c, supported in (0, inf)
struct HatFunction {
  double center;
  double half_width;
  double operator()(double z) const {
    const double d = std::abs(z - center);
    return d >= half_width ? 0.0 : 1.0 - d / half_width;
  }
};

// hats on dyadic grids: level l has half-width 2^{-l} z_max / 4, centres at multiples of the
// half-width, supports inside (0, z_max]
inline std::vector<HatFunction> dyadic_hats(int levels, double z_max) {
  std::vector<HatFunction> hats;
  for (int l = 0; l < levels; ++l) {
    const double w = 0.25 * z_max / std::pow(2.0, l);
    for (double c = 2.0 * w; c + w <= z_max + 1e-12; c += w) hats.push_back({c, w});
  }
  return hats;
}

inline double integrate_hat(const KreinString& m, const HatFunction& phi, double tol = 1e-13) {
  const double lo = phi.center - phi.half_width, hi = phi.center + phi.half_width;
  if (auto s = m.get_if<AtomicString>()) {
    double v = lo < 0.0 ? s->mass_at_zero * phi(0.0) : 0.0;
    for (const auto& a : s->atoms) v += a.w * phi(a.x);
    return v;
  }
  if (auto h = m.get_if<HeavisideString>()) return lo < 0.0 ? h->h * phi(0.0) : 0.0;
  QuadOptions opt;
  opt.abs_tol = tol;
  opt.rel_tol = tol;
  auto g = [&](double z) { return phi(z) * m.density(z); };
  const double a = std::max(lo, 0.0);
  double v = 0.0;
  if (phi.center > a) v += integrate(g, a, phi.center, opt).value;
  v += integrate(g, std::max(phi.center, a), hi, opt).value;
  return v;
}

inline double vague_gap(const KreinString& mn, const KreinString& m, const std::vector<HatFunction>& tests) {
  double gap = 0.0;
  for (const auto& phi : tests) {
    if (phi.center - phi.half_width <= 0.0) throw DomainError("test functions must be supported in (0, inf)");
    gap = std::max(gap, std::abs(integrate_hat(mn, phi) - integrate_hat(m, phi)));
  }
  return gap;
}

inline double resolvent_gap(const OperatorHandle& A, const KreinString& mn, const KreinString& m, double lambda,
                            const Eigen::VectorXd& f) {
  if (!(lambda > 0.0)) throw DomainError("resolvent_gap needs lambda > 0");
  auto r1 = resolvent_apply(A, BernsteinFunction::from_string(mn), lambda, f);
  auto r2 = resolvent_apply(A, BernsteinFunction::from_string(m), lambda, f);
  return (r1 - r2).norm();
}

// sup over a uniform grid of [0, t_max]
inline double semigroup_gap(const OperatorHandle& A, const KreinString& mn, const KreinString& m,
                            const Eigen::VectorXd& f, double t_max = 1.0, int points = 101) {
  double gap = 0.0;
  for (int i = 0; i < points; ++i) {
    const double t = t_max * i / (points - 1);
    gap = std::max(gap, (subordinate_apply(A, mn, t, f) - subordinate_apply(A, m, t, f)).norm());
  }
  return gap;
}

// sigma^{sigma-1} (1-sigma)^sigma Gamma(1-sigma) / (2 Gamma(sigma))
inline double fractional_constant(double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("sigma must lie in (0, 1)");
  return std::exp((sigma - 1.0) * std::log(sigma) + sigma * std::log1p(-sigma) + std::lgamma(1.0 - sigma) -
                  std::lgamma(sigma)) / 2.0;
}

struct FractionalLimitRow {
  double sigma;
  double c_sigma;
  double two_c;
  double eigen_error;    // max_k |2 c lambda_k^sigma - lambda_k|
  double resolvent_gap;  // against Heaviside{1/2}
  double semigroup_gap;
  double vague_gap;
};

inline std::vector<FractionalLimitRow> fractional_limit_experiment(const OperatorHandle& A,
                                                                   const std::vector<double>& sigmas,
                                                                   const Eigen::VectorXd& f, double lambda = 1.0) {
  auto seq = StringSequence::fractional(sigmas);
  const KreinString limit = KreinString::heaviside(0.5);
  const auto hats = dyadic_hats(4, 4.0);
  std::vector<FractionalLimitRow> rows;
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    const double sg = sigmas[i];
    FractionalLimitRow r{};
    r.sigma = sg;
    r.c_sigma = fractional_constant(sg);
    r.two_c = 2.0 * r.c_sigma;
    for (Eigen::Index k = 0; k < A.size(); ++k) {
      const double l = A.eigenvalues()[k];
      r.eigen_error = std::max(r.eigen_error, std::abs(r.two_c * std::pow(l, sg) - l));
    }
    r.resolvent_gap = resolvent_gap(A, seq.strings[i], limit, lambda, f);
    r.semigroup_gap = semigroup_gap(A, seq.strings[i], limit, f);
    r.vague_gap = vague_gap(seq.strings[i], limit, hats);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace krein
