#pragma once

#include <krein/error.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace krein {

struct QuadOptions {
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  int max_intervals = 4000;
};

template <class T>
struct QuadResult {
  T value;
  double error = 0.0;
  int evaluations = 0;
  bool converged = true;
};

namespace detail {

template <class X>
auto plain(X&& x) {
  using D = std::decay_t<X>;
  if constexpr (std::is_arithmetic_v<D>)
    return static_cast<double>(x);
  else
    return typename D::PlainObject(std::forward<X>(x));
}

inline double magnitude(double x) { return std::abs(x); }
inline double magnitude(const Eigen::VectorXd& v) {
  return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0;
}

inline double zero_like(double) { return 0.0; }
inline Eigen::VectorXd zero_like(const Eigen::VectorXd& v) {
  return Eigen::VectorXd::Zero(v.size());
}

// Gauss-Kronrod 7/15 abscissae and weights
inline constexpr double gk_x[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
inline constexpr double gk_wk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double gk_wg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class T>
struct Panel {
  double a, b;
  T value;
  double error;
};

template <class F>
auto gk15(F& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  auto fc = plain(f(c));
  using T = std::decay_t<decltype(fc)>;
  T kron = fc * gk_wk[7];
  T gauss = fc * gk_wg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * gk_x[j];
    auto f1 = plain(f(c - dx));
    auto f2 = plain(f(c + dx));
    T s = f1 + f2;
    kron += s * gk_wk[j];
    if (j % 2 == 1) gauss += s * gk_wg[j / 2];
  }
  T value = kron * h;
  T diff = (kron - gauss) * h;
  return Panel<T>{a, b, std::move(value), magnitude(diff)};
}

}  // namespace detail

// Globally adaptive G7K15 on a finite interval; never throws on non-convergence.
template <class F>
auto integrate_nothrow(F&& f, double a, double b, const QuadOptions& opt = {}) {
  using T = decltype(detail::plain(f(0.5 * (a + b))));
  QuadResult<T> out{};
  if (!(std::isfinite(a) && std::isfinite(b))) throw DomainError("integration limits must be finite");
  if (a == b) {
    out.value = detail::zero_like(detail::plain(f(a)));
    return out;
  }
  auto cmp = [](const detail::Panel<T>& l, const detail::Panel<T>& r) { return l.error < r.error; };
  std::priority_queue<detail::Panel<T>, std::vector<detail::Panel<T>>, decltype(cmp)> heap(cmp);
  auto first = detail::gk15(f, a, b);
  out.evaluations = 15;
  T total = first.value;
  double err = first.error;
  heap.push(std::move(first));
  std::vector<detail::Panel<T>> frozen;
  const double min_width = 64 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b));
  int n = 1;
  while (!heap.empty()) {
    const double target = std::max(opt.abs_tol, opt.rel_tol * detail::magnitude(total));
    if (err <= target) break;
    if (n >= opt.max_intervals) {
      out.converged = false;
      break;
    }
    auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (worst.b - worst.a <= min_width || mid <= worst.a || mid >= worst.b) {
      frozen.push_back(std::move(worst));
      continue;
    }
    auto l = detail::gk15(f, worst.a, mid);
    auto r = detail::gk15(f, mid, worst.b);
    out.evaluations += 30;
    total += l.value + r.value - worst.value;
    err += l.error + r.error - worst.error;
    heap.push(std::move(l));
    heap.push(std::move(r));
    ++n;
  }
  if (heap.empty() && !frozen.empty()) out.converged = false;
  // resum to shed accumulated cancellation in the running total
  T sum = detail::zero_like(total);
  double esum = 0.0;
  while (!heap.empty()) {
    sum += heap.top().value;
    esum += heap.top().error;
    heap.pop();
  }
  for (auto& p : frozen) {
    sum += p.value;
    esum += p.error;
  }
  out.value = std::move(sum);
  out.error = esum;
  if (esum > std::max(opt.abs_tol, opt.rel_tol * detail::magnitude(out.value))) out.converged = false;
  return out;
}

template <class F>
auto integrate(F&& f, double a, double b, const QuadOptions& opt = {}) {
  auto r = integrate_nothrow(std::forward<F>(f), a, b, opt);
  if (!r.converged)
    throw ConvergenceError("quadrature did not reach tolerance; achieved " + std::to_string(r.error), r.error);
  return r;
}

// Integral over [0, upper] of an integrand with an integrable endpoint singularity at 0,
// via t = v^4.
template <class F>
auto integrate_near_zero_nothrow(F&& f, double upper, const QuadOptions& opt = {}) {
  const double s = std::sqrt(std::sqrt(upper));
  auto g = [&](double v) {
    const double v2 = v * v;
    return detail::plain(detail::plain(f(v2 * v2)) * (4.0 * v2 * v));
  };
  return integrate_nothrow(g, 0.0, s, opt);
}

// Integral over [a, inf) via t = a + e^u - 1, u = s / (1 - s).
template <class F>
auto integrate_tail_nothrow(F&& f, double a, const QuadOptions& opt = {}) {
  auto g = [&](double s) {
    const double u = s / (1.0 - s);
    const double du = 1.0 / ((1.0 - s) * (1.0 - s));
    const double eu = std::exp(u);
    using T = decltype(detail::plain(f(a)));
    if (!std::isfinite(eu) || !std::isfinite(du)) return detail::zero_like(T(detail::plain(f(a))));
    return T(detail::plain(f(a + eu - 1.0)) * (eu * du));
  };
  return integrate_nothrow(g, 0.0, 1.0, opt);
}

// Integral over (0, inf) split at t = 1: v^4 substitution near 0, exponential map on the tail.
template <class F>
auto integrate_half_line_nothrow(F&& f, const QuadOptions& opt = {}) {
  QuadOptions half = opt;
  half.abs_tol = 0.5 * opt.abs_tol;
  auto lo = integrate_near_zero_nothrow(f, 1.0, half);
  auto hi = integrate_tail_nothrow(f, 1.0, half);
  using T = decltype(lo.value);
  QuadResult<T> out{};
  out.value = lo.value + hi.value;
  out.error = lo.error + hi.error;
  out.evaluations = lo.evaluations + hi.evaluations;
  out.converged = lo.converged && hi.converged;
  return out;
}

template <class F>
auto integrate_half_line(F&& f, const QuadOptions& opt = {}) {
  auto r = integrate_half_line_nothrow(std::forward<F>(f), opt);
  if (!r.converged)
    throw ConvergenceError("half-line quadrature did not reach tolerance; achieved " + std::to_string(r.error), r.error);
  return r;
}

}  // namespace krein
