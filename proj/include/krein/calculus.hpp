#pragma once

#include <krein/bernstein.hpp>
#include <krein/error.hpp>
#include <krein/montecarlo.hpp>
#include <krein/operator.hpp>
#include <krein/quadrature.hpp>
#include <krein/spectral.hpp>
#include <krein/strings.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace krein {

struct VectorResult {
  Eigen::VectorXd value;
  double error = 0.0;
};

inline Eigen::VectorXd semigroup_apply(const OperatorHandle& A, double t, const Eigen::VectorXd& f) {
  if (!(t >= 0.0)) throw DomainError("semigroup_apply needs t >= 0");
  return A.apply_function([t](double l) { return std::exp(-t * l); }, f);
}

// a f + b A f + int (f - e^{-tA} f) h(t) dt, componentwise in the eigenbasis
inline VectorResult phillips_apply(const OperatorHandle& A, const LevyTriple& triple, const Eigen::VectorXd& f,
                                   double tol = 1e-12) {
  triple.validate();
  const Eigen::VectorXd c = A.to_eigenbasis(f);
  const Eigen::VectorXd& lam = A.eigenvalues();
  Eigen::VectorXd out = triple.a * c + triple.b * lam.cwiseProduct(c);
  double err = 0.0;
  if (triple.nu.kind != LevyMeasure::Kind::Empty) {
    for (Eigen::Index k = 0; k < c.size(); ++k) {
      if (lam[k] == 0.0 || c[k] == 0.0) continue;
      auto j = jump_part(triple.nu, lam[k], tol);
      out[k] += j.value * c[k];
      err += j.error * std::abs(c[k]);
    }
  }
  return {A.from_eigenbasis(out), err};
}

inline VectorResult spectral_psi_apply(const OperatorHandle& A, const BernsteinFunction& psi, const Eigen::VectorXd& f,
                                       double tol = 1e-12) {
  Eigen::VectorXd c = A.to_eigenbasis(f);
  double err = 0.0;
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    auto v = eval_bernstein_value(psi, A.eigenvalues()[k], tol);
    err += v.error * std::abs(c[k]);
    c[k] *= v.value;
  }
  return {A.from_eigenbasis(c), err};
}

inline VectorResult spectral_psi_apply(const OperatorHandle& A, const KreinString& m, const Eigen::VectorXd& f) {
  return spectral_psi_apply(A, BernsteinFunction::from_string(m), f);
}

// (lambda + psi(A))^{-1} f
inline Eigen::VectorXd resolvent_apply(const OperatorHandle& A, const BernsteinFunction& psi, double lambda,
                                       const Eigen::VectorXd& f) {
  if (!(lambda > 0.0)) throw DomainError("resolvent needs lambda > 0");
  return A.apply_function([&](double l) { return 1.0 / (lambda + eval_bernstein(psi, l)); }, f);
}

namespace detail {

// E_z e^{-lambda tau} = int e^{-lambda t} omega(t, z) dt (+ the atom at t = 0)
inline BernsteinValue poisson_factor(const Spectrum& sp, double z, double lambda, double tol) {
  if (z == 0.0) return {1.0, 0.0};
  if (sp.atomic()) return {sp.hitting_laplace(z, lambda), 4.0 * std::numeric_limits<double>::epsilon()};
  QuadOptions opt;
  opt.abs_tol = tol;
  opt.rel_tol = tol;
  // the density peaks near a(z); rescale time so the split point sits there
  const double a = std::max(sp.power_law().a(z), 1e-300);
  auto g = [&](double s) {
    const double t = a * s;
    return std::exp(-lambda * t) * sp.hitting_density(t, z) * a;
  };
  auto r = integrate_half_line_nothrow(g, opt);
  if (!r.converged) throw ConvergenceError("Poisson-formula quadrature did not reach tolerance", r.error);
  return {r.value, r.error};
}

}  // namespace detail

// u(z) = int e^{-tA} f omega(t, z) dt
inline VectorResult poisson_solution(const OperatorHandle& A, const KreinString& m, const Eigen::VectorXd& f, double z,
                                     double tol = 1e-12) {
  if (!(z >= 0.0)) throw DomainError("poisson_solution needs z >= 0");
  A.check(f);
  if (z == 0.0 || m.get_if<HeavisideString>()) return {f, 0.0};
  Spectrum sp(m);
  Eigen::VectorXd c = A.to_eigenbasis(f);
  double err = 0.0;
  for (Eigen::Index k = 0; k < c.size(); ++k) {
    auto v = detail::poisson_factor(sp, z, A.eigenvalues()[k], tol);
    err += v.error * std::abs(c[k]);
    c[k] *= v.value;
  }
  return {A.from_eigenbasis(c), err};
}

inline VectorResult apply_A_inside(const OperatorHandle& A, const KreinString& m, const Eigen::VectorXd& f, double z,
                                   double tol = 1e-12) {
  auto u = poisson_solution(A, m, f, z, tol);
  return {A.apply(u.value), u.error * A.eigenvalues().maxCoeff()};
}

struct ExtensionProfile {
  std::vector<double> grid;
  std::vector<Eigen::VectorXd> u;
  Eigen::VectorXd f;
  Eigen::VectorXd slope0;     // du/dz at 0+
  bool has_slope = false;
  std::vector<double> residual;
  double truncation = 0.0;    // Z, last grid point
  double truncation_norm = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

// Block tridiagonal solve of
//   (u_{j+1} - u_j)/h_{j+1} - (u_j - u_{j-1})/h_j = 2 mass_j A u_j,  j = 1..N
// with u_0 = f and no flux past node N.
inline std::vector<Eigen::VectorXd> block_thomas(const Eigen::MatrixXd& A, const std::vector<double>& h,
                                                 const std::vector<double>& mass, const Eigen::VectorXd& f) {
  const std::size_t N = mass.size();
  const auto n = A.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  std::vector<Eigen::MatrixXd> M(N);
  std::vector<Eigen::VectorXd> g(N);
  Eigen::VectorXd y = f / h[0];
  Eigen::MatrixXd prevM;
  for (std::size_t j = 0; j < N; ++j) {
    const double a_here = 1.0 / h[j];
    const double a_next = j + 1 < N ? 1.0 / h[j + 1] : 0.0;
    Eigen::MatrixXd D = (a_here + a_next) * I + 2.0 * mass[j] * A;
    if (j > 0) {
      D -= a_here * prevM;
      y = a_here * g[j - 1];
    }
    Eigen::LLT<Eigen::MatrixXd> llt(D);
    if (llt.info() != Eigen::Success) throw NumericError("extension block system is singular");
    g[j] = llt.solve(y);
    if (a_next != 0.0) M[j] = llt.solve(a_next * I);
    prevM = M[j];
  }
  std::vector<Eigen::VectorXd> u(N);
  u[N - 1] = g[N - 1];
  for (std::size_t j = N - 1; j-- > 0;) u[j] = g[j] + M[j] * u[j + 1];
  return u;
}

inline double node_residual(const Eigen::MatrixXd& A, const Eigen::VectorXd& um, const Eigen::VectorXd& u,
                            const Eigen::VectorXd* up, double hl, double hr, double mass) {
  Eigen::VectorXd r = -(u - um) / hl - 2.0 * mass * (A * u);
  if (up) r += (*up - u) / hr;
  return r.lpNorm<Eigen::Infinity>();
}

}  // namespace detail

// Stretched grid on [0, Z], Z from the decay estimate of the slowest mode.
inline std::vector<double> extension_grid(const OperatorHandle& A, const KreinString& m, std::size_t intervals,
                                          double decay_tol = 1e-8) {
  auto pf = m.power_form();
  if (!pf) throw UnsupportedVariant("extension_grid is for continuous strings");
  if (intervals < 2) throw DomainError("extension_grid needs at least two intervals");
  const auto& lam = A.eigenvalues();
  double lmin = std::numeric_limits<double>::infinity(), lmax = 0.0;
  for (Eigen::Index k = 0; k < lam.size(); ++k) {
    if (lam[k] > 1e-12) lmin = std::min(lmin, lam[k]);
    lmax = std::max(lmax, lam[k]);
  }
  if (!std::isfinite(lmin)) lmin = lmax = 1.0;
  // int_0^Z sqrt(2 lambda m'(z)) dz = -log(decay_tol)
  const double q = 0.5 * (pf->p + 1.0);
  const double Z = std::pow(-std::log(decay_tol) * q / std::sqrt(2.0 * lmin * pf->c * pf->p), 1.0 / q);
  const double ratio = std::min(std::sqrt(lmax / lmin), 1e3);
  const double beta = ratio > 1.0 + 1e-9 ? std::acosh(ratio) : 0.0;
  std::vector<double> z(intervals + 1);
  for (std::size_t j = 0; j <= intervals; ++j) {
    const double xi = double(j) / intervals;
    z[j] = beta > 1e-6 ? Z * std::sinh(beta * xi) / std::sinh(beta) : Z * xi;
  }
  z.front() = 0.0;
  z.back() = Z;
  return z;
}

inline ExtensionProfile extension_solve(const OperatorHandle& A, const KreinString& m, const Eigen::VectorXd& f,
                                        std::vector<double> grid, double truncation_tol = 1e-6) {
  A.check(f);
  ExtensionProfile P;
  P.f = f;
  const Eigen::MatrixXd& Am = A.matrix();
  if (m.get_if<HeavisideString>()) {
    if (grid.empty()) grid = {0.0, 1.0};
    P.grid = grid;
    P.u.assign(grid.size(), f);
    P.slope0 = Eigen::VectorXd::Zero(f.size());
    P.has_slope = true;
    P.residual.assign(grid.size(), 0.0);
    P.truncation = grid.back();
    P.truncation_norm = f.lpNorm<Eigen::Infinity>();
    return P;
  }
  if (auto s = m.get_if<AtomicString>()) {
    std::vector<double> x, h, w;
    double prev = 0.0;
    for (const auto& a : s->atoms) {
      x.push_back(a.x);
      w.push_back(a.w);
      h.push_back(a.x - prev);
      prev = a.x;
    }
    if (grid.empty()) {
      grid.push_back(0.0);
      grid.insert(grid.end(), x.begin(), x.end());
    }
    if (grid.front() != 0.0) throw PreconditionError("extension grid must start at 0");
    for (double xi : x)
      if (!std::binary_search(grid.begin(), grid.end(), xi))
        throw PreconditionError("extension grid misses the atom at " + std::to_string(xi));
    auto ua = detail::block_thomas(Am, h, w, f);
    P.slope0 = (ua[0] - f) / x[0];
    P.has_slope = true;
    std::vector<double> kink(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) {
      const Eigen::VectorXd& um = j ? ua[j - 1] : f;
      kink[j] = detail::node_residual(Am, um, ua[j], j + 1 < x.size() ? &ua[j + 1] : nullptr, h[j],
                                      j + 1 < x.size() ? h[j + 1] : 1.0, w[j]);
    }
    P.grid = grid;
    for (double z : grid) {
      if (z <= 0.0) {
        P.u.push_back(f);
        P.residual.push_back(0.0);
        continue;
      }
      auto it = std::lower_bound(x.begin(), x.end(), z);
      if (it != x.end() && *it == z) {
        const auto j = static_cast<std::size_t>(it - x.begin());
        P.u.push_back(ua[j]);
        P.residual.push_back(kink[j]);
        continue;
      }
      P.residual.push_back(0.0);
      if (it == x.end()) {
        P.u.push_back(ua.back());
        continue;
      }
      const auto j = static_cast<std::size_t>(it - x.begin());
      const double lo = j ? x[j - 1] : 0.0;
      const Eigen::VectorXd& ul = j ? ua[j - 1] : f;
      const double t = (z - lo) / (x[j] - lo);
      P.u.push_back((1.0 - t) * ul + t * ua[j]);
    }
    P.truncation = grid.back();
    P.truncation_norm = ua.back().lpNorm<Eigen::Infinity>();
    return P;
  }
  if (!m.continuous()) throw UnsupportedVariant("extension_solve: unsupported string");
  if (grid.empty()) grid = extension_grid(A, m, 2000);
  if (grid.size() < 3 || grid.front() != 0.0) throw PreconditionError("extension grid must start at 0 with >= 3 points");
  for (std::size_t j = 1; j < grid.size(); ++j)
    if (!(grid[j] > grid[j - 1])) throw PreconditionError("extension grid must be strictly increasing");
  const std::size_t N = grid.size() - 1;
  std::vector<double> h(N), mass(N);
  for (std::size_t j = 0; j < N; ++j) h[j] = grid[j + 1] - grid[j];
  for (std::size_t j = 1; j <= N; ++j) {
    const double lo = grid[j] - 0.5 * h[j - 1];
    const double hi = j < N ? grid[j] + 0.5 * h[j] : grid[j];
    mass[j - 1] = m.measure(lo, hi);
  }
  auto uu = detail::block_thomas(Am, h, mass, f);
  const double m_first = m.measure(0.0, 0.5 * h[0]);
  P.slope0 = (uu[0] - f) / h[0] - 2.0 * m_first * (Am * f);
  P.has_slope = true;
  P.grid = grid;
  P.u.push_back(f);
  P.residual.push_back(0.0);
  for (std::size_t j = 0; j < N; ++j) {
    const Eigen::VectorXd& um = j ? uu[j - 1] : f;
    P.u.push_back(uu[j]);
    P.residual.push_back(detail::node_residual(Am, um, uu[j], j + 1 < N ? &uu[j + 1] : nullptr, h[j],
                                               j + 1 < N ? h[j + 1] : 1.0, mass[j]));
  }
  P.truncation = grid.back();
  P.truncation_norm = uu.back().lpNorm<Eigen::Infinity>();
  if (P.truncation_norm > truncation_tol * std::max(1.0, f.lpNorm<Eigen::Infinity>()))
    P.warnings.push_back("truncation point Z = " + std::to_string(P.truncation) + " leaves |u(Z)| = " +
                         std::to_string(P.truncation_norm));
  return P;
}

inline ExtensionProfile extension_solve(const OperatorHandle& A, const KreinString& m, const Eigen::VectorXd& f) {
  return extension_solve(A, m, f, {});
}

// m(0+) A f - u'(0+)/2 (+ robin_alpha f)
inline Eigen::VectorXd dtw_extract(const ExtensionProfile& P, const OperatorHandle& A, const KreinString& m,
                                   const Eigen::VectorXd& f, double robin_alpha = 0.0) {
  if (!P.has_slope) throw PreconditionError("extension profile carries no slope at 0");
  A.check(f);
  if (P.f.size() != f.size() || (P.f - f).lpNorm<Eigen::Infinity>() != 0.0)
    throw PreconditionError("extension profile was solved for different boundary data");
  return m.mass_at_zero() * A.apply(f) - 0.5 * P.slope0 + robin_alpha * f;
}

inline Eigen::VectorXd subordinate_apply(const OperatorHandle& A, const KreinString& m, double t,
                                         const Eigen::VectorXd& f) {
  if (!(t >= 0.0)) throw DomainError("subordinate_apply needs t >= 0");
  return A.apply_function([&](double l) { return l > 0.0 ? std::exp(-t * krein_psi(m, l)) : 1.0; }, f);
}

enum class SubordinateMode { Spectral, MonteCarlo };

inline VectorEstimate subordinate_apply(const OperatorHandle& A, const KreinString& m, double t,
                                        const Eigen::VectorXd& f, SubordinateMode mode, const SimConfig& cfg = {}) {
  if (mode == SubordinateMode::Spectral) {
    VectorEstimate e;
    e.mean = subordinate_apply(A, m, t, f);
    e.standard_error = Eigen::VectorXd::Zero(f.size());
    return e;
  }
  if (!(t >= 0.0)) throw DomainError("subordinate_apply needs t >= 0");
  return mc_subordinate(A, m, t, f, cfg);
}

// |u(z) - [f - 2z int (f - e^{-tA} f) h dt + 2 int_0^z int_(0,x] A u dmu dx]|
inline double representation_residual(const OperatorHandle& A, const KreinString& m, const Eigen::VectorXd& f, double z,
                                      double tol = 1e-13) {
  if (!(z > 0.0)) throw DomainError("representation_residual needs z > 0");
  A.check(f);
  const Eigen::VectorXd u = poisson_solution(A, m, f, z, tol).value;
  Eigen::VectorXd jump = Eigen::VectorXd::Zero(f.size());
  if (!m.get_if<HeavisideString>()) {
    LevyTriple t = levy_triple_of(m);
    t.b = 0.0;
    jump = phillips_apply(A, t, f, tol).value;
  }
  Eigen::VectorXd inner = Eigen::VectorXd::Zero(f.size());
  if (auto s = m.get_if<AtomicString>()) {
    for (const auto& a : s->atoms)
      if (a.x <= z) inner += a.w * (z - a.x) * A.apply(poisson_solution(A, m, f, a.x, tol).value);
  } else if (m.continuous()) {
    Spectrum sp(m);
    const Eigen::VectorXd c = A.to_eigenbasis(f);
    Eigen::VectorXd ci(c.size());
    QuadOptions opt;
    opt.abs_tol = tol;
    opt.rel_tol = tol;
    for (Eigen::Index k = 0; k < c.size(); ++k) {
      const double l = A.eigenvalues()[k];
      if (l == 0.0 || c[k] == 0.0) {
        ci[k] = 0.0;
        continue;
      }
      auto g = [&](double v) { return (z - v) * detail::poisson_factor(sp, v, l, tol).value * m.density(v); };
      ci[k] = l * c[k] * integrate(g, 0.0, z, opt).value;
    }
    inner = A.from_eigenbasis(ci);
  }
  const Eigen::VectorXd rhs = f - 2.0 * z * jump + 2.0 * inner;
  return (u - rhs).lpNorm<Eigen::Infinity>();
}

}  // namespace krein
