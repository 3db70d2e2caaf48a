#pragma once

#include <krein/bernstein.hpp>
#include <krein/error.hpp>
#include <krein/operator.hpp>
#include <krein/random.hpp>
#include <krein/spectral.hpp>
#include <krein/strings.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace krein {

struct SimConfig {
  std::uint64_t master_seed = 1;
  std::size_t n_paths = 10000;
  double dt = 1e-6;           // smallest Brownian step
  double epsilon = 1e-2;      // local-time band half-width
  double horizon = 1e6;       // truncation horizon in the diffusion's own clock
  double step_factor = 0.1;   // adaptive step: dt_k = max(dt, (step_factor * B)^2)
  unsigned threads = 0;       // 0: hardware, capped by KREIN_THREADS

  void validate() const {
    if (n_paths < 1) throw DomainError("SimConfig: n_paths must be >= 1");
    if (!(dt > 0.0)) throw DomainError("SimConfig: dt must be > 0");
    if (!(epsilon > 0.0)) throw DomainError("SimConfig: epsilon must be > 0");
    if (!(horizon > 0.0)) throw DomainError("SimConfig: horizon must be > 0");
    if (!(step_factor > 0.0 && step_factor <= 1.0)) throw DomainError("SimConfig: step_factor must lie in (0, 1]");
  }
};

struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
};

struct SampleSummary {
  double mean = 0.0;
  double variance = 0.0;
  double standard_error = 0.0;
  std::size_t n = 0;
  std::optional<Histogram> histogram;
};

// index-ordered reduction
inline SampleSummary summarize(const std::vector<double>& x, std::size_t bins = 0, double lo = 0.0, double hi = 1.0) {
  SampleSummary s;
  s.n = x.size();
  if (s.n == 0) return s;
  double sum = 0.0;
  for (double v : x) sum += v;
  s.mean = sum / s.n;
  double ss = 0.0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.variance = s.n > 1 ? ss / (s.n - 1) : 0.0;
  s.standard_error = std::sqrt(s.variance / s.n);
  if (bins > 0 && hi > lo) {
    Histogram h;
    for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(lo + (hi - lo) * b / bins);
    h.counts.assign(bins, 0);
    for (double v : x) {
      if (v < lo || v >= hi) continue;
      auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * bins);
      h.counts[std::min(b, bins - 1)]++;
    }
    s.histogram = std::move(h);
  }
  return s;
}

struct HittingSamples {
  std::vector<double> tau;          // censored entries hold the horizon
  std::vector<std::uint8_t> censored;
  std::size_t n_censored = 0;
  std::size_t clamp_events = 0;
  std::vector<std::string> warnings;

  double censored_fraction() const { return tau.empty() ? 0.0 : double(n_censored) / tau.size(); }
  void count() { n_censored = std::accumulate(censored.begin(), censored.end(), std::size_t{0}); }
};

// one-sample Kolmogorov-Smirnov distance restricted to [0, limit]; censored samples lie beyond it
template <class Cdf>
double ks_statistic(const HittingSamples& s, Cdf&& cdf, double limit) {
  std::vector<double> x;
  for (std::size_t i = 0; i < s.tau.size(); ++i)
    if (!s.censored[i] && s.tau[i] <= limit) x.push_back(s.tau[i]);
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(s.tau.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double F = cdf(x[i]);
    d = std::max(d, std::max(std::abs((i + 1) / n - F), std::abs(F - i / n)));
  }
  d = std::max(d, std::abs(x.size() / n - cdf(limit)));
  return d;
}

// asymptotic Kolmogorov tail with the Stephens small-sample correction
inline double ks_pvalue(double d, double n) {
  const double sn = std::sqrt(n);
  const double lam = (sn + 0.12 + 0.11 / sn) * d;
  if (lam < 0.2) return 1.0;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lam * lam);
    p += term;
    if (std::abs(term) < 1e-16) break;
  }
  return std::clamp(p, 0.0, 1.0);
}

inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(double(i) / a.size() - double(j) / b.size()));
  }
  return d;
}

// run, and on a failed check re-run once with twice the paths
template <class Run, class Pass>
auto with_rerun(Run&& run, SimConfig cfg, Pass&& pass) {
  auto r = run(cfg);
  if (pass(r)) return r;
  cfg.n_paths *= 2;
  return run(cfg);
}

namespace detail {

enum StreamTag : std::uint64_t {
  kCtmc = 1,
  kTimeChange = 2,
  kInverseLocal = 3,
  kBessel = 4,
  kPoisson = 5,
  kReflected = 6,
};

struct Chain {
  std::vector<double> x, left, right, rate;

  explicit Chain(const AtomicString& s) {
    KilledGenerator g(s);
    x = g.x;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      left.push_back(g.left_rate[i]);
      right.push_back(g.right_rate[i]);
      rate.push_back(g.exit_rate[i]);
    }
  }

  std::size_t index_of(double z) const {
    auto it = std::lower_bound(x.begin(), x.end(), z);
    if (it == x.end() || *it != z) throw DomainError("starting point " + std::to_string(z) + " is not an atom");
    return static_cast<std::size_t>(it - x.begin());
  }

  // time to absorption from state i
  template <class Rng>
  double hit(std::size_t i, Rng& rng) const {
    double t = 0.0;
    for (;;) {
      t += -std::log(rng.uniform()) / rate[i];
      if (rng.uniform() * rate[i] < left[i]) {
        if (i == 0) return t;
        --i;
      } else {
        ++i;
      }
    }
  }

  // harmonic splitting: the atom where a path from z first lands (or -1 for the origin)
  template <class Rng>
  long land(double z, Rng& rng) const {
    if (z <= 0.0) return -1;
    if (z >= x.back()) return static_cast<long>(x.size()) - 1;
    auto it = std::lower_bound(x.begin(), x.end(), z);
    const auto j = static_cast<long>(it - x.begin());
    if (*it == z) return j;
    const double lo = j ? x[j - 1] : 0.0;
    const double up = (z - lo) / (x[j] - lo);
    if (rng.uniform() < up) return j;
    return j - 1;
  }
};

// mean density of mu on the band [B - eps, B + eps] clipped at 0
inline double band_density(const KreinString& m, double B, double eps) {
  if (auto l = m.get_if<LinearString>()) return l->alpha;
  const double lo = std::max(0.0, B - eps), hi = B + eps;
  const double lo_eval = lo == 0.0 ? -1.0 : lo;  // mu((-1, hi]) includes nothing below 0 for continuous strings
  return m.measure(lo_eval, hi) / (hi - lo);
}

inline void require_continuous(const KreinString& m, const char* who) {
  if (!m.continuous()) throw UnsupportedVariant(std::string(who) + " needs a linear or power-law string");
}

}  // namespace detail

inline HittingSamples simulate_ctmc_hitting(const KreinString& m, double z0, const SimConfig& cfg) {
  cfg.validate();
  detail::Chain chain(m.atomic_data());
  const std::size_t start = chain.index_of(z0);
  HittingSamples out;
  out.tau.assign(cfg.n_paths, 0.0);
  out.censored.assign(cfg.n_paths, 0);
  parallel_for(cfg.n_paths, [&](std::size_t i) {
    auto rng = path_stream(cfg.master_seed, detail::kCtmc, i);
    out.tau[i] = chain.hit(start, rng);
  }, cfg.threads);
  return out;
}

struct SkeletonPoint {
  double s;  // Brownian clock
  double B;
  double A;  // additive functional, the diffusion's clock
};

struct TimeChangeResult {
  HittingSamples hitting;
  std::vector<SkeletonPoint> skeleton;  // first path, thinned
  SampleSummary tau_summary;            // over uncensored samples
};

namespace detail {

// killed walk from z0 until it crosses 0 (bridge-corrected) or A passes the horizon
template <class Rng>
double timechange_hit(const KreinString& m, double z0, const SimConfig& cfg, Rng& rng, bool& censored,
                      std::vector<SkeletonPoint>* skel) {
  std::normal_distribution<double> N(0.0, 1.0);
  double B = z0, A = 0.0, s = 0.0;
  std::size_t k = 0;
  censored = false;
  for (;;) {
    const double dt = std::max(cfg.dt, std::pow(cfg.step_factor * B, 2));
    const double dA = dt * band_density(m, B, cfg.epsilon);
    const double next = B + std::sqrt(dt) * N(rng);
    bool hit = next <= 0.0;
    if (!hit && rng.uniform() < std::exp(-2.0 * B * next / dt)) hit = true;
    if (hit) {
      A += 0.5 * dA;
      if (skel) skel->push_back({s + 0.5 * dt, 0.0, A});
      return A;
    }
    A += dA;
    s += dt;
    B = next;
    if (skel && (++k % 64 == 0)) skel->push_back({s, B, A});
    if (A > cfg.horizon) {
      censored = true;
      return cfg.horizon;
    }
  }
}

}  // namespace detail

inline TimeChangeResult simulate_reflected_bm_timechange(const KreinString& m, double z0, const SimConfig& cfg) {
  cfg.validate();
  detail::require_continuous(m, "simulate_reflected_bm_timechange");
  if (!(z0 > 0.0)) throw DomainError("simulate_reflected_bm_timechange needs z0 > 0");
  TimeChangeResult out;
  auto& h = out.hitting;
  h.tau.assign(cfg.n_paths, 0.0);
  h.censored.assign(cfg.n_paths, 0);
  parallel_for(cfg.n_paths, [&](std::size_t i) {
    auto rng = path_stream(cfg.master_seed, detail::kTimeChange, i);
    bool cens = false;
    h.tau[i] = detail::timechange_hit(m, z0, cfg, rng, cens, i == 0 ? &out.skeleton : nullptr);
    h.censored[i] = cens;
  }, cfg.threads);
  h.count();
  std::vector<double> done;
  for (std::size_t i = 0; i < h.tau.size(); ++i)
    if (!h.censored[i]) done.push_back(h.tau[i]);
  out.tau_summary = summarize(done);
  return out;
}

namespace detail {

// reflected walk run until A reaches t; returns Z_t and accumulates occupation data
struct ReflectedRun {
  double Z;
  double lhs;                  // int g(Z_r) dr over [0, t]
  std::vector<double> cells;   // Brownian time spent in [2 eps j, 2 eps (j+1))
};

template <class Rng>
ReflectedRun reflected_run(const KreinString& m, double z0, double t, const SimConfig& cfg, Rng& rng,
                           double g_lo, double g_hi, std::size_t n_cells) {
  std::normal_distribution<double> N(0.0, 1.0);
  ReflectedRun r{z0, 0.0, std::vector<double>(n_cells, 0.0)};
  double B = z0, A = 0.0;
  const double width = 2.0 * cfg.epsilon;
  while (A < t) {
    double dt = std::max(cfg.dt, std::pow(cfg.step_factor * B, 2));
    const double rate = band_density(m, B, cfg.epsilon);
    if (A + dt * rate > t) dt = (t - A) / rate;
    A += dt * rate;
    if (B >= g_lo && B <= g_hi) r.lhs += dt * rate;
    const auto c = static_cast<std::size_t>(B / width);
    if (c < n_cells) r.cells[c] += dt;
    B = std::abs(B + std::sqrt(dt) * N(rng));
  }
  r.Z = B;
  return r;
}

}  // namespace detail

// samples of Z_t for the reflected (unkilled) diffusion
inline std::vector<double> reflected_endpoint_samples(const KreinString& m, double z0, double t, const SimConfig& cfg) {
  cfg.validate();
  detail::require_continuous(m, "reflected_endpoint_samples");
  if (!(z0 >= 0.0) || !(t > 0.0)) throw DomainError("reflected_endpoint_samples needs z0 >= 0, t > 0");
  std::vector<double> z(cfg.n_paths);
  parallel_for(cfg.n_paths, [&](std::size_t i) {
    auto rng = path_stream(cfg.master_seed, detail::kReflected, i);
    z[i] = detail::reflected_run(m, z0, t, cfg, rng, 0.0, -1.0, 0).Z;
  }, cfg.threads);
  return z;
}

struct OccupationCheck {
  double lhs;  // int_0^t g(Z_r) dr
  double rhs;  // int g L dmu from the band-occupation field
  double relative_gap;
};

// g = indicator of [g_lo, g_hi], summed over paths
inline OccupationCheck occupation_self_test(const KreinString& m, double z0, double t, const SimConfig& cfg,
                                            double g_lo = 0.0, double g_hi = 1.0) {
  cfg.validate();
  detail::require_continuous(m, "occupation_self_test");
  const double width = 2.0 * cfg.epsilon;
  const auto n_cells = static_cast<std::size_t>(std::ceil(g_hi / width)) + 1;
  std::vector<double> lhs(cfg.n_paths), rhs(cfg.n_paths);
  parallel_for(cfg.n_paths, [&](std::size_t i) {
    auto rng = path_stream(cfg.master_seed, detail::kReflected, i);
    auto r = detail::reflected_run(m, z0, t, cfg, rng, g_lo, g_hi, n_cells);
    lhs[i] = r.lhs;
    double v = 0.0;
    for (std::size_t j = 0; j < n_cells; ++j) {
      const double a = j * width, b = a + width, mid = 0.5 * (a + b);
      if (mid < g_lo || mid > g_hi) continue;
      const double L = r.cells[j] / width;
      v += L * m.measure(j ? a : -1.0, b);
    }
    rhs[i] = v;
  }, cfg.threads);
  OccupationCheck c{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < cfg.n_paths; ++i) {
    c.lhs += lhs[i];
    c.rhs += rhs[i];
  }
  c.lhs /= cfg.n_paths;
  c.rhs /= cfg.n_paths;
  c.relative_gap = std::abs(c.lhs - c.rhs) / std::max(std::abs(c.lhs), 1e-300);
  return c;
}

struct InverseLocalTimeSamples {
  std::vector<double> value;
  std::vector<std::uint8_t> censored;
  std::size_t n_censored = 0;
};

inline InverseLocalTimeSamples sample_inverse_local_time(const KreinString& m, double t, const SimConfig& cfg) {
  cfg.validate();
  if (!(t >= 0.0)) throw DomainError("sample_inverse_local_time needs t >= 0");
  InverseLocalTimeSamples out;
  out.value.assign(cfg.n_paths, 0.0);
  out.censored.assign(cfg.n_paths, 0);
  if (t == 0.0) return out;
  if (auto h = m.get_if<HeavisideString>()) {
    std::fill(out.value.begin(), out.value.end(), h->h * t);
    return out;
  }
  if (auto s = m.get_if<AtomicString>()) {
    detail::Chain chain(*s);
    const double rate = t / (2.0 * s->atoms.front().x);
    const double drift = s->mass_at_zero * t;
    parallel_for(cfg.n_paths, [&](std::size_t i) {
      auto rng = path_stream(cfg.master_seed, detail::kInverseLocal, i);
      std::poisson_distribution<long> P(rate);
      const long k = P(rng);
      double v = drift;
      for (long j = 0; j < k; ++j) v += chain.hit(0, rng);
      out.value[i] = v;
    }, cfg.threads);
    return out;
  }
  auto l = m.get_if<LinearString>();
  if (!l) throw UnsupportedVariant("sample_inverse_local_time supports atomic, Heaviside and linear strings");
  const double alpha = l->alpha, eps = cfg.epsilon;
  parallel_for(cfg.n_paths, [&](std::size_t i) {
    auto rng = path_stream(cfg.master_seed, detail::kInverseLocal, i);
    std::normal_distribution<double> N(0.0, 1.0);
    double B = 0.0, s = 0.0, ell = 0.0;
    for (;;) {
      const double dt = std::max(cfg.dt, std::pow(cfg.step_factor * B, 2));
      if (B < eps) {
        const double d_ell = dt / eps;
        if (ell + d_ell >= t) {
          s += (t - ell) * eps;
          break;
        }
        ell += d_ell;
      }
      s += dt;
      B = std::abs(B + std::sqrt(dt) * N(rng));
      if (alpha * s > cfg.horizon) {
        out.censored[i] = 1;
        break;
      }
    }
    out.value[i] = alpha * s;
  }, cfg.threads);
  out.n_censored = std::accumulate(out.censored.begin(), out.censored.end(), std::size_t{0});
  return out;
}

struct KnightResult {
  double empirical;
  double standard_error;
  double theory;
  double z_score;
  std::size_t n;
  std::size_t n_censored;
};

// E exp(-lambda L^{-1}_t) against exp(-t psi(lambda))
inline KnightResult knight_check(const KreinString& m, double lambda, double t, const SimConfig& cfg) {
  if (!(lambda >= 0.0)) throw DomainError("knight_check needs lambda >= 0");
  const double psi_lambda = lambda > 0.0 ? krein_psi(m, lambda) : 0.0;
  auto s = sample_inverse_local_time(m, t, cfg);
  std::vector<double> v(s.value.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = s.censored[i] ? 0.0 : std::exp(-lambda * s.value[i]);
  if (lambda == 0.0) std::fill(v.begin(), v.end(), 1.0);
  auto sum = summarize(v);
  KnightResult r{sum.mean, sum.standard_error, std::exp(-t * psi_lambda), 0.0, sum.n, s.n_censored};
  const double diff = r.empirical - r.theory;
  r.z_score = r.standard_error > 0.0 ? diff / r.standard_error : (diff == 0.0 ? 0.0 : INFINITY);
  return r;
}

// squared Bessel of dimension 2(1 - sigma) from y0^2; times returned in the
// convention whose law is a/G, a = y0^2/4 (half the standard clock)
inline HittingSamples simulate_bessel_hitting(double sigma, double y0, const SimConfig& cfg) {
  cfg.validate();
  if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("simulate_bessel_hitting needs sigma in (0, 1)");
  if (!(y0 > 0.0)) throw DomainError("simulate_bessel_hitting needs y0 > 0");
  const double delta = 2.0 * (1.0 - sigma);
  const double thr = cfg.epsilon * cfg.epsilon;
  HittingSamples out;
  out.tau.assign(cfg.n_paths, 0.0);
  out.censored.assign(cfg.n_paths, 0);
  std::vector<std::size_t> clamps(cfg.n_paths, 0), steps(cfg.n_paths, 0);
  parallel_for(cfg.n_paths, [&](std::size_t i) {
    auto rng = path_stream(cfg.master_seed, detail::kBessel, i);
    std::normal_distribution<double> N(0.0, 1.0);
    double X = y0 * y0, s = 0.0;
    while (X > thr) {
      const double dt = std::max(cfg.dt, cfg.step_factor * cfg.step_factor * X);
      double next = X + delta * dt + 2.0 * std::sqrt(X * dt) * N(rng);
      ++steps[i];
      if (next < 0.0) {
        ++clamps[i];
        next = 0.0;
      }
      s += dt;
      X = next;
      if (0.5 * s > cfg.horizon) {
        out.censored[i] = 1;
        break;
      }
    }
    out.tau[i] = out.censored[i] ? cfg.horizon : 0.5 * s;
  }, cfg.threads);
  out.count();
  std::size_t total = 0;
  for (std::size_t i = 0; i < cfg.n_paths; ++i) {
    out.clamp_events += clamps[i];
    total += steps[i];
  }
  if (total && out.clamp_events > 1e-3 * total)
    out.warnings.push_back("squared Bessel step produced negative values on " + std::to_string(out.clamp_events) +
                           " of " + std::to_string(total) + " steps");
  return out;
}

// tau samples from z by the family-appropriate route
inline HittingSamples hitting_samples_from(const KreinString& m, double z, const SimConfig& cfg) {
  cfg.validate();
  HittingSamples out;
  out.tau.assign(cfg.n_paths, 0.0);
  out.censored.assign(cfg.n_paths, 0);
  if (z == 0.0 || m.get_if<HeavisideString>()) return out;
  if (auto s = m.get_if<AtomicString>()) {
    detail::Chain chain(*s);
    parallel_for(cfg.n_paths, [&](std::size_t i) {
      auto rng = path_stream(cfg.master_seed, detail::kPoisson, i);
      const long j = chain.land(z, rng);
      out.tau[i] = j < 0 ? 0.0 : chain.hit(static_cast<std::size_t>(j), rng);
    }, cfg.threads);
    return out;
  }
  return simulate_reflected_bm_timechange(m, z, cfg).hitting;
}

struct VectorEstimate {
  Eigen::VectorXd mean;
  Eigen::VectorXd standard_error;
  std::size_t n = 0;
  std::size_t n_censored = 0;
};

// E exp(-tau A) f
inline VectorEstimate mc_poisson_solution(const OperatorHandle& A, const KreinString& m, const Eigen::VectorXd& f,
                                          double z, const SimConfig& cfg) {
  if (!(z >= 0.0)) throw DomainError("mc_poisson_solution needs z >= 0");
  A.check(f);
  auto hs = hitting_samples_from(m, z, cfg);
  hs.count();
  const Eigen::VectorXd c = A.to_eigenbasis(f);
  const auto& lam = A.eigenvalues();
  const auto n = A.size();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n), sq = Eigen::VectorXd::Zero(n);
  std::vector<Eigen::VectorXd> vals(hs.tau.size());
  for (std::size_t i = 0; i < hs.tau.size(); ++i) {
    Eigen::VectorXd ci = c;
    for (Eigen::Index k = 0; k < n; ++k) ci[k] *= std::exp(-hs.tau[i] * lam[k]);
    vals[i] = A.from_eigenbasis(ci);
    sum += vals[i];
  }
  const double N = static_cast<double>(vals.size());
  VectorEstimate out;
  out.mean = sum / N;
  for (const auto& v : vals) sq += (v - out.mean).cwiseAbs2();
  out.standard_error = N > 1 ? Eigen::VectorXd((sq / (N - 1) / N).cwiseSqrt()) : Eigen::VectorXd::Zero(n);
  out.n = vals.size();
  out.n_censored = hs.n_censored;
  return out;
}

// E exp(-S A) f over samples S of the inverse local time at t
inline VectorEstimate mc_subordinate(const OperatorHandle& A, const KreinString& m, double t, const Eigen::VectorXd& f,
                                     const SimConfig& cfg) {
  if (cfg.n_paths == 0) throw DomainError("Monte Carlo sample budget is zero");
  A.check(f);
  auto s = sample_inverse_local_time(m, t, cfg);
  const Eigen::VectorXd c = A.to_eigenbasis(f);
  const auto& lam = A.eigenvalues();
  const auto n = A.size();
  std::vector<Eigen::VectorXd> vals(s.value.size());
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(n), sq = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < vals.size(); ++i) {
    Eigen::VectorXd ci = c;
    for (Eigen::Index k = 0; k < n; ++k) ci[k] *= std::exp(-s.value[i] * lam[k]);
    vals[i] = A.from_eigenbasis(ci);
    sum += vals[i];
  }
  const double N = static_cast<double>(vals.size());
  VectorEstimate out;
  out.mean = sum / N;
  for (const auto& v : vals) sq += (v - out.mean).cwiseAbs2();
  out.standard_error = N > 1 ? Eigen::VectorXd((sq / (N - 1) / N).cwiseSqrt()) : Eigen::VectorXd::Zero(n);
  out.n = vals.size();
  out.n_censored = s.n_censored;
  return out;
}

}  // namespace krein
