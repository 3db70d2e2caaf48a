#pragma once

// Reference computations built from elementary linear algebra and closed
// forms. Nothing here calls into the library's spectral or quadrature code.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

namespace oracle {

using Atoms = std::vector<std::pair<double, double>>;  // (position, weight)

// generator of the gap diffusion on the atoms, killed at 0
inline Eigen::MatrixXd killed_generator(const Atoms& a) {
  const int n = static_cast<int>(a.size());
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double x = a[i].first, w = a[i].second;
    const double left = x - (i ? a[i - 1].first : 0.0);
    G(i, i) -= 1.0 / (2.0 * w * left);
    if (i > 0) G(i, i - 1) = 1.0 / (2.0 * w * left);
    if (i + 1 < n) {
      const double right = a[i + 1].first - x;
      G(i, i + 1) = 1.0 / (2.0 * w * right);
      G(i, i) -= 1.0 / (2.0 * w * right);
    }
  }
  return G;
}

inline Eigen::VectorXd killing_vector(const Atoms& a) {
  Eigen::VectorXd k = Eigen::VectorXd::Zero(a.size());
  k[0] = 1.0 / (2.0 * a[0].second * a[0].first);
  return k;
}

// hitting density of 0 from atom i: (e^{tG} k)_i
inline double ctmc_hitting_density(const Atoms& a, int i, double t) {
  const Eigen::MatrixXd E = (t * killed_generator(a)).exp();
  return (E * killing_vector(a))[i];
}

inline double ctmc_survival(const Atoms& a, int i, double t) {
  const Eigen::MatrixXd E = (t * killed_generator(a)).exp();
  return E.row(i).sum();
}

// p(t, x_i, x_j) with respect to mu: (e^{tG})_{ij} / w_j
inline double ctmc_transition(const Atoms& a, int i, int j, double t) {
  const Eigen::MatrixXd E = (t * killed_generator(a)).exp();
  return E(i, j) / a[j].second;
}

inline Eigen::VectorXd ctmc_mean_hitting(const Atoms& a) {
  return (-killed_generator(a)).fullPivLu().solve(Eigen::VectorXd::Ones(a.size()));
}

// expected exit time from (lo, hi) for the chain on the atoms inside, both ends absorbing
inline double ctmc_mean_exit(const Atoms& a, double lo, double hi, int start) {
  std::vector<std::pair<double, double>> in;
  for (const auto& p : a)
    if (p.first > lo && p.first < hi) in.push_back(p);
  const int n = static_cast<int>(in.size());
  Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double w = in[i].second;
    const double l = in[i].first - (i ? in[i - 1].first : lo);
    const double r = (i + 1 < n ? in[i + 1].first : hi) - in[i].first;
    Q(i, i) = -1.0 / (2.0 * w * l) - 1.0 / (2.0 * w * r);
    if (i > 0) Q(i, i - 1) = 1.0 / (2.0 * w * l);
    if (i + 1 < n) Q(i, i + 1) = 1.0 / (2.0 * w * r);
  }
  const Eigen::VectorXd m = (-Q).fullPivLu().solve(Eigen::VectorXd::Ones(n));
  // index of the starting atom among those inside
  int k = 0;
  for (int i = 0; i < n; ++i)
    if (in[i].first == a[start].first) k = i;
  return m[k];
}

// psi for an atomic string from a dense solve of the kink equations
// (phi_{i+1}-phi_i)/h_{i+1} - (phi_i-phi_{i-1})/h_i = 2 lambda w_i phi_i, phi_0 = 1, flat tail
inline double atomic_psi(const Atoms& a, double lambda, double mass_at_zero = 0.0) {
  const int n = static_cast<int>(a.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    const double hl = a[i].first - (i ? a[i - 1].first : 0.0);
    M(i, i) = -1.0 / hl - 2.0 * lambda * a[i].second;
    if (i > 0)
      M(i, i - 1) = 1.0 / hl;
    else
      rhs[i] = -1.0 / hl;
    if (i + 1 < n) {
      const double hr = a[i + 1].first - a[i].first;
      M(i, i) -= 1.0 / hr;
      M(i, i + 1) = 1.0 / hr;
    }
  }
  const Eigen::VectorXd phi = M.fullPivLu().solve(rhs);
  return mass_at_zero * lambda - 0.5 * (phi[0] - 1.0) / a[0].first;
}

// E_z exp(-lambda tau) for the linear string alpha z
inline double linear_laplace(double alpha, double z, double lambda) { return std::exp(-std::sqrt(2.0 * alpha * lambda) * z); }

inline double linear_hitting_density(double alpha, double z, double t) {
  return z * std::sqrt(alpha) / std::sqrt(2.0 * M_PI * t * t * t) * std::exp(-alpha * z * z / (2.0 * t));
}

inline double linear_survival(double alpha, double z, double t) { return std::erf(z * std::sqrt(alpha / (2.0 * t))); }

// composite Simpson on [a, b] with n (even) panels
inline double simpson(const std::function<double(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// int_0^inf f(t) dt via t = e^u, Simpson on [u0, u1]
inline double simpson_log(const std::function<double(double)>& f, double u0, double u1, int n) {
  return simpson([&](double u) { const double t = std::exp(u); return f(t) * t; }, u0, u1, n);
}

}  // namespace oracle
