#pragma once

#include <krein/error.hpp>
#include <krein/quadrature.hpp>
#include <krein/spectral.hpp>
#include <krein/strings.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace krein {

// Levy measure nu(dr) = h(r) dr
struct LevyMeasure {
  enum class Kind { Empty, PowerDensity, Mixture, Callable };
  Kind kind = Kind::Empty;
  double coef = 0.0;   // PowerDensity: h(r) = coef r^{-1-sigma}
  double sigma = 0.0;
  std::vector<SpectralAtom> mixture;  // h(r) = sum c_k e^{-gamma_k r}
  std::function<double(double)> fn;
  std::string label;

  static LevyMeasure empty() { return {}; }
  static LevyMeasure power(double coef, double sigma) {
    if (!(coef > 0.0) || !(sigma > 0.0 && sigma < 1.0)) throw DomainError("power Levy density needs coef > 0, sigma in (0,1)");
    LevyMeasure m;
    m.kind = Kind::PowerDensity;
    m.coef = coef;
    m.sigma = sigma;
    return m;
  }
  static LevyMeasure exp_mixture(std::vector<SpectralAtom> atoms) {
    for (const auto& a : atoms)
      if (!(a.gamma > 0.0) || !(a.weight > 0.0)) throw DomainError("mixture atoms need gamma > 0 and c > 0");
    LevyMeasure m;
    m.kind = atoms.empty() ? Kind::Empty : Kind::Mixture;
    m.mixture = std::move(atoms);
    return m;
  }
  static LevyMeasure callable(std::function<double(double)> h, std::string label) {
    LevyMeasure m;
    m.kind = Kind::Callable;
    m.fn = std::move(h);
    m.label = std::move(label);
    return m;
  }

  double density(double r) const {
    if (!(r > 0.0)) throw DomainError("Levy density needs r > 0");
    switch (kind) {
      case Kind::Empty: return 0.0;
      case Kind::PowerDensity: return coef * std::pow(r, -1.0 - sigma);
      case Kind::Mixture: {
        double s = 0.0;
        for (const auto& a : mixture) s += a.weight * std::exp(-a.gamma * r);
        return s;
      }
      case Kind::Callable: return fn(r);
    }
    return 0.0;
  }

  // nu((T, inf))
  double tail_mass(double T) const {
    if (!(T > 0.0)) throw DomainError("tail_mass needs T > 0");
    switch (kind) {
      case Kind::Empty: return 0.0;
      case Kind::PowerDensity: return coef * std::pow(T, -sigma) / sigma;
      case Kind::Mixture: {
        double s = 0.0;
        for (const auto& a : mixture) s += a.weight * std::exp(-a.gamma * T) / a.gamma;
        return s;
      }
      case Kind::Callable: {
        QuadOptions opt;
        auto tail = [&](double r) { return fn(r); };
        return integrate_tail_nothrow(tail, T, opt).value;
      }
    }
    return 0.0;
  }

  // int (r ^ 1) dnu; must be finite
  double integrability() const {
    switch (kind) {
      case Kind::Empty: return 0.0;
      case Kind::PowerDensity: return coef * (1.0 / (1.0 - sigma) + 1.0 / sigma);
      default: break;
    }
    QuadOptions opt;
    opt.abs_tol = 1e-10;
    opt.rel_tol = 1e-8;
    auto g = [&](double r) { return std::min(r, 1.0) * density(r); };
    auto lo = integrate_near_zero_nothrow(g, 1.0, opt);
    auto hi = integrate_tail_nothrow(g, 1.0, opt);
    const double v = lo.value + hi.value;
    if (!lo.converged || !hi.converged || !std::isfinite(v))
      throw DomainError("Levy measure fails the integrability condition int (r ^ 1) dnu < inf");
    return v;
  }
};

struct LevyTriple {
  double a = 0.0;  // killing
  double b = 0.0;  // drift
  LevyMeasure nu;

  void validate() const {
    if (!(a >= 0.0) || !(b >= 0.0)) throw DomainError("Levy triple needs a, b >= 0");
  }
};

struct BernsteinValue {
  double value;
  double error;
};

class BernsteinFunction {
public:
  enum class Source { ClosedForm, FromTriple, FromString };

  static BernsteinFunction closed_form(std::string family, std::function<double(double)> fn) {
    BernsteinFunction b(Source::ClosedForm);
    b.label_ = std::move(family);
    b.fn_ = std::move(fn);
    return b;
  }
  // K lambda^sigma
  static BernsteinFunction power(double K, double sigma) {
    return closed_form("power", [K, sigma](double l) { return l == 0.0 ? 0.0 : K * std::pow(l, sigma); });
  }
  static BernsteinFunction identity() { return closed_form("identity", [](double l) { return l; }); }
  static BernsteinFunction zero() { return closed_form("zero", [](double) { return 0.0; }); }
  static BernsteinFunction from_triple(LevyTriple t) {
    t.validate();
    BernsteinFunction b(Source::FromTriple);
    b.triple_ = std::make_shared<LevyTriple>(std::move(t));
    return b;
  }
  static BernsteinFunction from_string(const KreinString& m) {
    BernsteinFunction b(Source::FromString);
    b.string_ = std::make_shared<KreinString>(m);
    return b;
  }

  Source source() const { return source_; }
  const std::string& label() const { return label_; }
  const std::function<double(double)>& function() const { return fn_; }
  const LevyTriple& triple() const { return *triple_; }
  const KreinString& string() const { return *string_; }

private:
  explicit BernsteinFunction(Source s) : source_(s) {}
  Source source_;
  std::string label_;
  std::function<double(double)> fn_;
  std::shared_ptr<LevyTriple> triple_;
  std::shared_ptr<KreinString> string_;
};

// int_0^inf (1 - e^{-lambda r}) dnu(r)
inline BernsteinValue jump_part(const LevyMeasure& nu, double lambda, double tol = 1e-12) {
  if (lambda == 0.0 || nu.kind == LevyMeasure::Kind::Empty) return {0.0, 0.0};
  if (nu.kind == LevyMeasure::Kind::Mixture) {
    double s = 0.0;
    for (const auto& a : nu.mixture) s += a.weight * lambda / (a.gamma * (a.gamma + lambda));
    return {s, 4.0 * std::numeric_limits<double>::epsilon() * s};
  }
  QuadOptions opt;
  opt.abs_tol = tol;
  opt.rel_tol = tol;
  if (nu.kind == LevyMeasure::Kind::PowerDensity) {
    // peel off the non-integrable-looking leading terms on (0, 1] and [1, inf)
    const double K = nu.coef, sg = nu.sigma;
    auto near = [&](double r) {
      const double x = lambda * r;
      double d;  // 1 - e^{-x} - x
      if (x < 0.1) {
        double term = -x * x / 2.0;
        d = term;
        for (int k = 3; k < 14; ++k) {
          term *= -x / k;
          d += term;
        }
      } else {
        d = -std::expm1(-x) - x;
      }
      return K * std::pow(r, -1.0 - sg) * d;
    };
    auto far = [&](double r) { return K * std::pow(r, -1.0 - sg) * std::exp(-lambda * r); };
    auto lo = integrate_near_zero_nothrow(near, 1.0, opt);
    auto hi = integrate_tail_nothrow(far, 1.0, opt);
    const double err = lo.error + hi.error;
    if (!lo.converged || !hi.converged)
      throw ConvergenceError("Bernstein jump integral did not reach tolerance", err);
    return {lambda * K / (1.0 - sg) + lo.value + K / sg - hi.value, err};
  }
  auto g = [&](double r) { return -std::expm1(-lambda * r) * nu.density(r); };
  auto lo = integrate_near_zero_nothrow(g, 1.0, opt);
  auto hi = integrate_tail_nothrow(g, 1.0, opt);
  const double err = lo.error + hi.error;
  if (!lo.converged || !hi.converged)
    throw ConvergenceError("Bernstein jump integral did not reach tolerance", err);
  return {lo.value + hi.value, err};
}

inline BernsteinValue krein_psi_value(const KreinString& m, double lambda);

inline BernsteinValue eval_bernstein_value(const BernsteinFunction& psi, double lambda, double tol = 1e-12) {
  if (!(lambda >= 0.0)) throw DomainError("Bernstein functions are evaluated at lambda >= 0");
  switch (psi.source()) {
    case BernsteinFunction::Source::ClosedForm: {
      const double v = psi.function()(lambda);
      return {v, 4.0 * std::numeric_limits<double>::epsilon() * std::abs(v)};
    }
    case BernsteinFunction::Source::FromTriple: {
      const auto& t = psi.triple();
      auto j = jump_part(t.nu, lambda, tol);
      return {t.a + t.b * lambda + j.value, j.error};
    }
    case BernsteinFunction::Source::FromString: {
      if (lambda == 0.0) return {0.0, 0.0};
      return krein_psi_value(psi.string(), lambda);
    }
  }
  return {0.0, 0.0};
}

inline double eval_bernstein(const BernsteinFunction& psi, double lambda, double tol = 1e-12) {
  return eval_bernstein_value(psi, lambda, tol).value;
}

// psi_m(lambda) = m(0+) lambda - phi'(0)/2 for the bounded solution of
// -phi''/2 + lambda phi mu = 0, phi(0) = 1
inline BernsteinValue krein_psi_value(const KreinString& m, double lambda) {
  if (!(lambda > 0.0)) throw DomainError("krein_psi needs lambda > 0");
  const double eps = std::numeric_limits<double>::epsilon();
  if (auto s = m.get_if<AtomicString>()) {
    // backward sweep from the flat tail; phi grows toward 0, no cancellation
    double phi = 1.0, slope = 0.0;
    for (std::size_t k = s->atoms.size(); k-- > 0;) {
      slope -= 2.0 * lambda * s->atoms[k].w * phi;
      const double left = k ? s->atoms[k - 1].x : 0.0;
      phi -= slope * (s->atoms[k].x - left);
    }
    const double v = s->mass_at_zero * lambda - 0.5 * slope / phi;
    return {v, 8.0 * eps * s->atoms.size() * std::abs(v)};
  }
  if (auto h = m.get_if<HeavisideString>()) return {h->h * lambda, eps * h->h * lambda};
  if (auto l = m.get_if<LinearString>()) {
    // phi(z) = exp(-sqrt(2 alpha lambda) z)
    const double v = 0.5 * std::sqrt(2.0 * l->alpha * lambda);
    return {v, 4.0 * eps * v};
  }
  if (auto p = m.get_if<PowerLawString>()) {
    const double v = PowerLawLaw(*p).psi_coef() * std::pow(lambda, p->sigma());
    return {v, 16.0 * eps * v};
  }
  throw UnsupportedVariant("no bounded-solution construction for this string");
}

inline double krein_psi(const KreinString& m, double lambda) { return krein_psi_value(m, lambda).value; }

inline LevyTriple levy_triple_of(const KreinString& m) {
  LevyTriple t;
  t.b = m.mass_at_zero();
  if (m.get_if<HeavisideString>()) return t;
  Spectrum sp(m);
  if (sp.atomic()) {
    std::vector<SpectralAtom> atoms;
    for (const auto& a : sp.principal().atoms)
      if (a.weight > 0.0) atoms.push_back(a);
    t.nu = LevyMeasure::exp_mixture(std::move(atoms));
  } else {
    const auto& law = sp.power_law();
    t.nu = LevyMeasure::power(law.levy_coef(), law.sigma);
  }
  return t;
}

}  // namespace krein
