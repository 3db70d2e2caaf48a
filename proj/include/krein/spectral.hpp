#pragma once

#include <krein/error.hpp>
#include <krein/quadrature.hpp>
#include <krein/strings.hpp>

#include <Eigen/Dense>
#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace krein {

struct SpectralAtom {
  double gamma;
  double weight;
};

// rho(gamma) = coef * gamma^sigma / Gamma(1 + sigma)
struct PrincipalMeasure {
  enum class Form { Atoms, Density };
  Form form = Form::Atoms;
  std::vector<SpectralAtom> atoms;
  double coef = 0.0;
  double sigma = 0.0;

  double density(double gamma) const {
    if (form != Form::Density) throw UnsupportedVariant("principal measure has no density");
    if (gamma <= 0.0) return 0.0;
    return coef * std::pow(gamma, sigma) / std::tgamma(1.0 + sigma);
  }

  // int 1/(gamma(gamma+1)) dDelta
  double finiteness_integral() const {
    if (form == Form::Atoms) {
      double s = 0.0;
      for (const auto& a : atoms) s += a.weight / (a.gamma * (a.gamma + 1.0));
      return s;
    }
    return coef * M_PI / (std::tgamma(1.0 + sigma) * std::sin(M_PI * sigma));
  }

  // int 1/gamma dDelta; infinite for the power densities
  double inverse_moment() const {
    if (form == Form::Atoms) {
      double s = 0.0;
      for (const auto& a : atoms) s += a.weight / a.gamma;
      return s;
    }
    return std::numeric_limits<double>::infinity();
  }

  // int e^{-gamma t} dDelta
  double laplace(double t) const {
    if (form == Form::Atoms) {
      double s = 0.0;
      for (const auto& a : atoms) s += a.weight * std::exp(-a.gamma * t);
      return s;
    }
    return coef * std::pow(t, -1.0 - sigma);
  }
};

// Killed gap-diffusion on the atoms, absorbing at 0.
struct KilledGenerator {
  std::vector<double> x, w;
  Eigen::VectorXd exit_rate;  // -G_ii
  Eigen::VectorXd left_rate;  // G_{i,i-1}; left_rate[0] is the killing rate
  Eigen::VectorXd right_rate; // G_{i,i+1}; zero for the last state

  explicit KilledGenerator(const AtomicString& s) {
    const auto n = static_cast<Eigen::Index>(s.atoms.size());
    if (n == 0) throw DomainError("killed generator needs at least one atom");
    exit_rate.resize(n);
    left_rate.resize(n);
    right_rate.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x.push_back(s.atoms[i].x);
      w.push_back(s.atoms[i].w);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dl = x[i] - (i ? x[i - 1] : 0.0);
      left_rate[i] = 1.0 / (2.0 * w[i] * dl);
      right_rate[i] = (i + 1 < n) ? 1.0 / (2.0 * w[i] * (x[i + 1] - x[i])) : 0.0;
      exit_rate[i] = left_rate[i] + right_rate[i];
    }
  }

  Eigen::Index size() const { return exit_rate.size(); }
  double killing_rate() const { return left_rate[0]; }

  Eigen::MatrixXd matrix() const {
    const auto n = size();
    Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      G(i, i) = -exit_rate[i];
      if (i > 0) G(i, i - 1) = left_rate[i];
      if (i + 1 < n) G(i, i + 1) = right_rate[i];
    }
    return G;
  }

  // W^{1/2} (-G) W^{-1/2} in tridiagonal form
  void symmetric_form(Eigen::VectorXd& diag, Eigen::VectorXd& sub) const {
    const auto n = size();
    diag = exit_rate;
    sub.resize(std::max<Eigen::Index>(n - 1, 0));
    for (Eigen::Index i = 0; i + 1 < n; ++i) sub[i] = -1.0 / (2.0 * (x[i + 1] - x[i]) * std::sqrt(w[i] * w[i + 1]));
  }
};

// Eigen data of the killed generator, with C(x_i, gamma_k) tabulated.
class AtomicSpectrum {
public:
  explicit AtomicSpectrum(const AtomicString& s) : gen_(s) {
    Eigen::VectorXd diag, sub;
    gen_.symmetric_form(diag, sub);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw NumericError("tridiagonal eigensolver failed");
    const auto n = gen_.size();
    gamma_ = es.eigenvalues();
    const Eigen::MatrixXd& U = es.eigenvectors();
    weight_.resize(n);
    C_.resize(n, n);
    const double x1 = gen_.x[0], w1 = gen_.w[0];
    for (Eigen::Index k = 0; k < n; ++k) {
      if (!(gamma_[k] > 0.0)) throw NumericError("killed generator has a non-positive rate");
      const double u1 = U(0, k);
      weight_[k] = u1 * u1 / (4.0 * w1 * x1 * x1);
      for (Eigen::Index i = 0; i < n; ++i)
        C_(i, k) = 2.0 * x1 * (U(i, k) / std::sqrt(gen_.w[i])) / (u1 / std::sqrt(w1));
    }
  }

  const KilledGenerator& generator() const { return gen_; }
  Eigen::Index size() const { return gamma_.size(); }
  double gamma(Eigen::Index k) const { return gamma_[k]; }
  double weight(Eigen::Index k) const { return weight_[k]; }
  const Eigen::VectorXd& gammas() const { return gamma_; }
  const Eigen::VectorXd& weights() const { return weight_; }

  // C(z, gamma_k): 2z below x_1, linear between atoms, flat past x_N
  double C(double z, Eigen::Index k) const {
    const auto& x = gen_.x;
    const auto n = size();
    if (z <= 0.0) return 0.0;
    if (z <= x[0]) return C_(0, k) * z / x[0];
    if (z >= x[n - 1]) return C_(n - 1, k);
    auto it = std::upper_bound(x.begin(), x.end(), z);
    const auto j = static_cast<Eigen::Index>(it - x.begin());
    const double t = (z - x[j - 1]) / (x[j] - x[j - 1]);
    return (1.0 - t) * C_(j - 1, k) + t * C_(j, k);
  }

  Eigen::VectorXd C_row(double z) const {
    Eigen::VectorXd r(size());
    for (Eigen::Index k = 0; k < size(); ++k) r[k] = C(z, k);
    return r;
  }

  double hitting_atom(double z) const { return z < gen_.x[0] ? 1.0 - z / gen_.x[0] : 0.0; }

  PrincipalMeasure principal() const {
    PrincipalMeasure pm;
    pm.form = PrincipalMeasure::Form::Atoms;
    for (Eigen::Index k = 0; k < size(); ++k) pm.atoms.push_back({gamma_[k], weight_[k]});
    return pm;
  }

private:
  KilledGenerator gen_;
  Eigen::VectorXd gamma_, weight_;
  Eigen::MatrixXd C_;
};

// tau from z has the law of a/G with G ~ Gamma(sigma), a = 2 c p sigma^2 z^{1/sigma}
struct PowerLawLaw {
  double c, p, sigma;
  explicit PowerLawLaw(const PowerLawString& s) : c(s.c), p(s.p), sigma(s.sigma()) {}

  double scale() const { return 2.0 * c * p * sigma * sigma; }
  double a(double z) const { return scale() * std::pow(z, 1.0 / sigma); }
  double levy_coef() const { return std::pow(scale(), sigma) / (2.0 * std::tgamma(sigma)); }
  double psi_coef() const { return levy_coef() * std::tgamma(1.0 - sigma) / sigma; }

  double hitting_density(double t, double z) const {
    const double az = a(z);
    return std::exp(sigma * std::log(az) - (1.0 + sigma) * std::log(t) - az / t - std::lgamma(sigma));
  }
  double survival(double z, double t) const {
    if (t <= 0.0) return 1.0;
    return boost::math::gamma_p(sigma, a(z) / t);
  }
  double levy_density(double t) const { return levy_coef() * std::pow(t, -1.0 - sigma); }
  double beta(double t) const { return levy_coef() * std::pow(t, -sigma) / sigma; }
  // E_z exp(-lambda tau)
  double laplace(double z, double lambda) const {
    if (lambda <= 0.0) return 1.0;
    const double x = 2.0 * std::sqrt(a(z) * lambda);
    if (x > 700.0) return 0.0;
    return 2.0 * std::pow(0.5 * x, sigma) * boost::math::cyl_bessel_k(sigma, x) / std::tgamma(sigma);
  }
  double eigenfunction(double z, double gamma) const {
    const double x = 2.0 * std::sqrt(2.0 * c * p * gamma) / (p + 1.0) * std::pow(z, 0.5 * (p + 1.0));
    if (x == 0.0) return 2.0 * z;
    return 2.0 * z * std::tgamma(1.0 + sigma) * std::pow(0.5 * x, -sigma) * boost::math::cyl_bessel_j(sigma, x);
  }
};

// Spectral data of a string, computed once.
class Spectrum {
public:
  explicit Spectrum(const KreinString& m) : m_(m) {
    if (auto s = m.get_if<AtomicString>())
      atomic_ = std::make_shared<AtomicSpectrum>(*s);
    else if (auto pf = m.power_form())
      power_ = std::make_shared<PowerLawLaw>(*pf);
    else
      throw UnsupportedVariant(std::string("spectral data unavailable for ") + to_string(m.kind()) + " strings");
  }

  const KreinString& string() const { return m_; }
  bool atomic() const { return static_cast<bool>(atomic_); }
  const AtomicSpectrum& atomic_spectrum() const {
    if (!atomic_) throw UnsupportedVariant("atomic spectrum requested for a continuous string");
    return *atomic_;
  }
  const PowerLawLaw& power_law() const {
    if (!power_) throw UnsupportedVariant("power-law law requested for an atomic string");
    return *power_;
  }

  PrincipalMeasure principal() const {
    if (atomic_) return atomic_->principal();
    PrincipalMeasure pm;
    pm.form = PrincipalMeasure::Form::Density;
    pm.coef = power_->levy_coef();
    pm.sigma = power_->sigma;
    return pm;
  }

  double hitting_density(double t, double z) const {
    if (!(t > 0.0) || !(z > 0.0)) throw DomainError("hitting_density needs t > 0 and z > 0");
    if (power_) return power_->hitting_density(t, z);
    double s = 0.0;
    for (Eigen::Index k = 0; k < atomic_->size(); ++k)
      s += std::exp(-atomic_->gamma(k) * t) * atomic_->C(z, k) * atomic_->weight(k);
    return s;
  }

  // P_z(tau = 0)
  double hitting_atom(double z) const { return atomic_ ? atomic_->hitting_atom(z) : 0.0; }

  double survival(double z, double t) const {
    if (!(z > 0.0) || !(t >= 0.0)) throw DomainError("survival needs z > 0 and t >= 0");
    if (power_) return power_->survival(z, t);
    double s = 0.0;
    for (Eigen::Index k = 0; k < atomic_->size(); ++k)
      s += std::exp(-atomic_->gamma(k) * t) * atomic_->C(z, k) * atomic_->weight(k) / atomic_->gamma(k);
    return std::clamp(s, 0.0, 1.0);
  }

  double levy_density(double t) const {
    if (!(t > 0.0)) throw DomainError("levy_density needs t > 0");
    if (power_) return power_->levy_density(t);
    return atomic_->principal().laplace(t);
  }

  double beta(double t) const {
    if (!(t > 0.0)) throw DomainError("beta needs t > 0");
    if (power_) return power_->beta(t);
    double s = 0.0;
    for (Eigen::Index k = 0; k < atomic_->size(); ++k)
      s += atomic_->weight(k) * std::exp(-atomic_->gamma(k) * t) / atomic_->gamma(k);
    return s;
  }

  double transition_density(double t, double z, double y) const {
    if (!atomic_) throw UnsupportedVariant("transition_density is available for atomic strings only");
    if (!(t >= 0.0) || !(z >= 0.0) || !(y >= 0.0)) throw DomainError("transition_density needs t, z, y >= 0");
    double s = 0.0;
    for (Eigen::Index k = 0; k < atomic_->size(); ++k)
      s += std::exp(-atomic_->gamma(k) * t) * atomic_->C(z, k) * atomic_->C(y, k) * atomic_->weight(k);
    return s;
  }

  // E_z exp(-lambda tau), exact
  double hitting_laplace(double z, double lambda) const {
    if (!(z >= 0.0) || !(lambda >= 0.0)) throw DomainError("hitting_laplace needs z, lambda >= 0");
    if (z == 0.0) return 1.0;
    if (power_) return power_->laplace(z, lambda);
    double s = atomic_->hitting_atom(z);
    for (Eigen::Index k = 0; k < atomic_->size(); ++k)
      s += atomic_->C(z, k) * atomic_->weight(k) / (atomic_->gamma(k) + lambda);
    return s;
  }

private:
  KreinString m_;
  std::shared_ptr<AtomicSpectrum> atomic_;
  std::shared_ptr<PowerLawLaw> power_;
};

inline PrincipalMeasure principal_measure(const KreinString& m) { return Spectrum(m).principal(); }
inline double hitting_density(const KreinString& m, double t, double z) { return Spectrum(m).hitting_density(t, z); }
inline double transition_density(const KreinString& m, double t, double z, double y) {
  return Spectrum(m).transition_density(t, z, y);
}
inline double levy_density(const KreinString& m, double t) { return Spectrum(m).levy_density(t); }
inline double beta(const KreinString& m, double t) { return Spectrum(m).beta(t); }
inline double survival(const KreinString& m, double z, double t) { return Spectrum(m).survival(z, t); }

// Levy density normalised against the scale function y^{2 sigma} of the Bessel-type
// extension: t^{-1-sigma} / (4^sigma Gamma(sigma)).
inline double bessel_extension_levy_density(double sigma, double t) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("sigma must lie in (0, 1)");
  if (!(t > 0.0)) throw DomainError("t must be > 0");
  return std::pow(t, -1.0 - sigma) / (std::pow(4.0, sigma) * std::tgamma(sigma));
}

struct SeriesValue {
  double value;
  double bound;  // remainder bound plus rounding floor
  int terms;
};

// C(z, gamma) = sum_n (-gamma)^n C_n(z), C_0 = 2z, C_n = 2 int_0^z int_(0,x] C_{n-1} dmu dx
inline SeriesValue eigenfunction_C(const KreinString& m, double z, double gamma, double tol = 1e-12,
                                   int max_terms = 2000) {
  if (!(z >= 0.0) || !(gamma > 0.0)) throw DomainError("eigenfunction_C needs z >= 0 and gamma > 0");
  if (!(tol > 0.0)) throw DomainError("eigenfunction_C needs tol > 0");
  const double eps = std::numeric_limits<double>::epsilon();
  const double r = 2.0 * gamma * m.integrated_mass(z);
  if (r == 0.0) return {2.0 * z, 0.0, 1};

  double sum = 2.0 * z, abs_sum = 2.0 * z;
  double majorant = 2.0 * z;  // 2z r^n / n!
  auto remainder = [&](int n) {
    // bound on sum_{k > n} 2z r^k / k!
    const double next = majorant * r / (n + 1);
    if (n + 2 > r) return next / (1.0 - r / (n + 2));
    return std::numeric_limits<double>::infinity();
  };

  if (auto s = m.get_if<AtomicString>()) {
    std::vector<double> xs, ws;
    for (const auto& a : s->atoms)
      if (a.x <= z) {
        xs.push_back(a.x);
        ws.push_back(a.w);
      }
    const std::size_t K = xs.size();
    std::vector<double> prev(K), cur(K);
    for (std::size_t i = 0; i < K; ++i) prev[i] = 2.0 * xs[i];
    double sign_gamma = 1.0;
    for (int n = 1; n <= max_terms; ++n) {
      double at_z = 0.0;
      for (std::size_t i = 0; i < K; ++i) at_z += ws[i] * prev[i] * (z - xs[i]);
      at_z *= 2.0;
      for (std::size_t j = 0; j < K; ++j) {
        double v = 0.0;
        for (std::size_t i = 0; i < j; ++i) v += ws[i] * prev[i] * (xs[j] - xs[i]);
        cur[j] = 2.0 * v;
      }
      sign_gamma *= -gamma;
      const double term = sign_gamma * at_z;
      sum += term;
      abs_sum += std::abs(term);
      majorant *= r / n;
      bool vanished = true;
      for (double v : cur) vanished = vanished && v == 0.0;
      const double floor = 4.0 * eps * abs_sum;
      if (vanished) return {sum, floor, n + 1};
      const double rem = remainder(n);
      if (rem + floor <= tol) return {sum, rem + floor, n + 1};
      if (floor > tol && rem < floor)
        throw ConvergenceError("eigenfunction series: cancellation floor exceeds tolerance", rem + floor);
      std::swap(prev, cur);
    }
    throw ConvergenceError("eigenfunction series: iteration cap reached", remainder(max_terms));
  }

  if (m.get_if<HeavisideString>()) return {2.0 * z, 0.0, 1};

  auto pf = *m.power_form();
  const double p = pf.p, c = pf.c;
  double term = 2.0 * z;
  const double zp = std::pow(z, p + 1.0);
  for (int n = 1; n <= max_terms; ++n) {
    const double q = 1.0 + (n - 1) * (p + 1.0);
    term *= -gamma * 2.0 * c * p * zp / ((q + p) * (q + p + 1.0));
    sum += term;
    abs_sum += std::abs(term);
    majorant *= r / n;
    const double floor = 4.0 * eps * abs_sum;
    const double rem = remainder(n);
    if (rem + floor <= tol) return {sum, rem + floor, n + 1};
    if (floor > tol && rem < floor)
      throw ConvergenceError("eigenfunction series: cancellation floor exceeds tolerance", rem + floor);
  }
  throw ConvergenceError("eigenfunction series: iteration cap reached", remainder(max_terms));
}

// C(z, gamma) by exact kink recursion (atomic) or Bessel J (power law)
inline double eigenfunction_closed(const KreinString& m, double z, double gamma) {
  if (!(z >= 0.0) || !(gamma > 0.0)) throw DomainError("eigenfunction needs z >= 0 and gamma > 0");
  if (auto s = m.get_if<AtomicString>()) {
    double x = 0.0, C = 0.0, slope = 2.0;
    for (const auto& a : s->atoms) {
      if (a.x > z) break;
      C += slope * (a.x - x);
      x = a.x;
      slope -= 2.0 * gamma * a.w * C;
    }
    return C + slope * (z - x);
  }
  if (m.get_if<HeavisideString>()) return 2.0 * z;
  return PowerLawLaw(*m.power_form()).eigenfunction(z, gamma);
}

// |2 int_0^z int_(0,x] omega(t,v) dmu(v) dx - (2 z beta(t) - P_z(tau > t))|
inline double hitting_identity_residual(const KreinString& m, double z, double t, double tol = 1e-11) {
  if (!(z > 0.0) || !(t > 0.0)) throw DomainError("hitting_identity_residual needs z > 0 and t > 0");
  Spectrum sp(m);
  double lhs = 0.0;
  if (auto s = m.get_if<AtomicString>()) {
    for (const auto& a : s->atoms)
      if (a.x <= z) lhs += a.w * (z - a.x) * sp.hitting_density(t, a.x);
    lhs *= 2.0;
  } else {
    QuadOptions opt;
    opt.abs_tol = tol;
    opt.rel_tol = tol;
    auto inner = [&](double x) {
      if (x <= 0.0) return 0.0;
      auto f = [&](double v) { return sp.hitting_density(t, v) * m.density(v); };
      return integrate(f, 0.0, x, opt).value;
    };
    lhs = 2.0 * integrate(inner, 0.0, z, opt).value;
  }
  const double rhs = 2.0 * z * sp.beta(t) - sp.survival(z, t);
  return std::abs(lhs - rhs);
}

}  // namespace krein
