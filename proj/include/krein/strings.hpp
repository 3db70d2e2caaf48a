#pragma once

#include <krein/error.hpp>
#include <krein/quadrature.hpp>

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace krein {

enum class StringKind { Atomic, PowerLaw, Heaviside, Linear };

inline const char* to_string(StringKind k) {
  switch (k) {
    case StringKind::Atomic: return "atomic";
    case StringKind::PowerLaw: return "power";
    case StringKind::Heaviside: return "heaviside";
    case StringKind::Linear: return "linear";
  }
  return "?";
}

struct Atom {
  double x;
  double w;
};

struct AtomicString {
  double mass_at_zero = 0.0;
  std::vector<Atom> atoms;
};

// m(z) = c z^p
struct PowerLawString {
  double c;
  double p;
  double sigma() const { return 1.0 / (1.0 + p); }
};

struct HeavisideString {
  double h;
};

struct LinearString {
  double alpha;
};

class KreinString {
public:
  using Variant = std::variant<AtomicString, PowerLawString, HeavisideString, LinearString>;

  static KreinString atomic(std::vector<Atom> atoms, double mass_at_zero = 0.0) {
    return KreinString(AtomicString{mass_at_zero, std::move(atoms)});
  }
  static KreinString power_law(double c, double p) { return KreinString(PowerLawString{c, p}); }
  static KreinString heaviside(double h) { return KreinString(HeavisideString{h}); }
  static KreinString linear(double alpha) { return KreinString(LinearString{alpha}); }

  // m(z) = z^{(1-sigma)/sigma} / 2
  static KreinString fractional(double sigma) {
    check_sigma(sigma);
    return power_law(0.5, (1.0 - sigma) / sigma);
  }
  // m(z) = sigma/(2(1-sigma)) z^{(1-sigma)/sigma}; the Bessel-type string
  static KreinString bessel(double sigma) {
    check_sigma(sigma);
    return power_law(sigma / (2.0 * (1.0 - sigma)), (1.0 - sigma) / sigma);
  }

  explicit KreinString(Variant v) : v_(std::move(v)) { validate(); }

  StringKind kind() const { return static_cast<StringKind>(v_.index()); }
  const Variant& variant() const { return v_; }

  template <class T>
  const T* get_if() const { return std::get_if<T>(&v_); }

  const AtomicString& atomic_data() const {
    if (auto p = get_if<AtomicString>()) return *p;
    throw UnsupportedVariant(std::string("expected an atomic string, got ") + to_string(kind()));
  }

  // m(0+)
  double mass_at_zero() const {
    if (auto a = get_if<AtomicString>()) return a->mass_at_zero;
    if (auto h = get_if<HeavisideString>()) return h->h;
    return 0.0;
  }

  // PowerLaw view of the continuous families; Linear is p = 1
  std::optional<PowerLawString> power_form() const {
    if (auto p = get_if<PowerLawString>()) return *p;
    if (auto l = get_if<LinearString>()) return PowerLawString{l->alpha, 1.0};
    return std::nullopt;
  }

  bool continuous() const { return power_form().has_value(); }

  double value(double x) const {
    if (x < 0.0) return 0.0;
    return std::visit(
        [x](const auto& s) -> double {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, AtomicString>) {
            double sum = s.mass_at_zero;
            for (const auto& a : s.atoms) {
              if (a.x > x) break;
              sum += a.w;
            }
            return sum;
          } else if constexpr (std::is_same_v<S, PowerLawString>) {
            return s.c * std::pow(x, s.p);
          } else if constexpr (std::is_same_v<S, HeavisideString>) {
            return s.h;
          } else {
            return s.alpha * x;
          }
        },
        v_);
  }

  // density of mu on (0, inf) for the continuous families
  double density(double x) const {
    auto pf = power_form();
    if (!pf) throw UnsupportedVariant("density requires a continuous string");
    if (x <= 0.0) return pf->p == 1.0 ? pf->c : (pf->p < 1.0 ? INFINITY : 0.0);
    return pf->c * pf->p * std::pow(x, pf->p - 1.0);
  }

  // mu((a, b])
  double measure(double a, double b) const {
    if (!(a < b)) throw DomainError("measure_of_interval needs a < b");
    if (auto s = get_if<AtomicString>()) {
      double sum = (a < 0.0 && b >= 0.0) ? s->mass_at_zero : 0.0;
      for (const auto& at : s->atoms)
        if (at.x > a && at.x <= b) sum += at.w;
      return sum;
    }
    if (auto h = get_if<HeavisideString>()) return (a < 0.0 && b >= 0.0) ? h->h : 0.0;
    auto pf = *power_form();
    const double lo = std::max(a, 0.0);
    if (b <= 0.0) return 0.0;
    if (pf.p == 1.0) return pf.c * (b - lo);
    return pf.c * (std::pow(b, pf.p) - std::pow(lo, pf.p));
  }

  // integral of M(x) = m(x) - m(0+) over [0, z]
  double integrated_mass(double z) const {
    if (z <= 0.0) return 0.0;
    if (auto s = get_if<AtomicString>()) {
      double sum = 0.0;
      for (const auto& at : s->atoms)
        if (at.x <= z) sum += at.w * (z - at.x);
      return sum;
    }
    if (get_if<HeavisideString>()) return 0.0;
    auto pf = *power_form();
    return pf.c * std::pow(z, pf.p + 1.0) / (pf.p + 1.0);
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(17);
    std::visit(
        [&os](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, AtomicString>) {
            os << "Atomic{m0=" << s.mass_at_zero;
            for (const auto& a : s.atoms) os << ", (" << a.x << "," << a.w << ")";
            os << "}";
          } else if constexpr (std::is_same_v<S, PowerLawString>) {
            os << "PowerLaw{c=" << s.c << ", p=" << s.p << "}";
          } else if constexpr (std::is_same_v<S, HeavisideString>) {
            os << "Heaviside{h=" << s.h << "}";
          } else {
            os << "Linear{alpha=" << s.alpha << "}";
          }
        },
        v_);
    return os.str();
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["type"] = to_string(kind());
    if (auto s = get_if<AtomicString>()) {
      j["mass_at_zero"] = s->mass_at_zero;
      j["atoms"] = nlohmann::json::array();
      for (const auto& a : s->atoms) j["atoms"].push_back({a.x, a.w});
    } else if (auto p = get_if<PowerLawString>()) {
      j["c"] = p->c;
      j["p"] = p->p;
    } else if (auto h = get_if<HeavisideString>()) {
      j["h"] = h->h;
    } else if (auto l = get_if<LinearString>()) {
      j["alpha"] = l->alpha;
    }
    return j;
  }

  static KreinString from_json(const nlohmann::json& j);
  static KreinString parse(const std::string& text);
  static KreinString load(const std::string& path);

private:
  static void check_sigma(double sigma) {
    if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("sigma must lie in (0, 1)");
  }

  static void positive(double v, const char* what, const char* property) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw DomainError(std::string("invalid string: ") + what + " must be finite and > 0 (" + property + ")");
  }

  void validate() const {
    std::visit(
        [](const auto& s) {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, AtomicString>) {
            if (!(s.mass_at_zero >= 0.0) || !std::isfinite(s.mass_at_zero))
              throw DomainError("invalid string: mass_at_zero must be finite and >= 0 (m vanishes on (-inf,0) and is non-decreasing)");
            if (s.atoms.empty())
              throw DomainError("invalid string: an atomic string needs at least one atom (m > 0 on (0,inf))");
            double prev = 0.0;
            for (const auto& a : s.atoms) {
              positive(a.x, "atom position", "atoms sit on (0,inf) where m may jump");
              positive(a.w, "atom weight", "m is non-decreasing");
              if (!(a.x > prev))
                throw DomainError("invalid string: atom positions must be strictly increasing (m is a right-continuous non-decreasing function)");
              prev = a.x;
            }
          } else if constexpr (std::is_same_v<S, PowerLawString>) {
            positive(s.c, "power-law coefficient c", "m > 0 on (0,inf) and non-decreasing");
            positive(s.p, "power-law exponent p", "m is non-decreasing and m(0+) is finite");
          } else if constexpr (std::is_same_v<S, HeavisideString>) {
            positive(s.h, "Heaviside height h", "m > 0 on (0,inf)");
          } else {
            positive(s.alpha, "linear slope alpha", "m > 0 on (0,inf) and non-decreasing");
          }
        },
        v_);
  }

  Variant v_;
};

inline KreinString KreinString::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DomainError("invalid string file: expected a JSON object");
  if (!j.contains("type") || !j["type"].is_string()) throw DomainError("invalid string file: missing \"type\"");
  const std::string type = j["type"];
  auto num = [&](const char* key) -> double {
    if (!j.contains(key) || !j[key].is_number())
      throw DomainError(std::string("invalid string file: missing numeric field \"") + key + "\"");
    return j[key].get<double>();
  };
  if (type == "atomic") {
    double m0 = j.contains("mass_at_zero") ? num("mass_at_zero") : 0.0;
    if (!j.contains("atoms") || !j["atoms"].is_array()) throw DomainError("invalid string file: \"atoms\" must be an array");
    std::vector<Atom> atoms;
    for (const auto& a : j["atoms"]) {
      if (!a.is_array() || a.size() != 2 || !a[0].is_number() || !a[1].is_number())
        throw DomainError("invalid string file: each atom must be [position, weight]");
      atoms.push_back({a[0].get<double>(), a[1].get<double>()});
    }
    return atomic(std::move(atoms), m0);
  }
  if (type == "power") return power_law(num("c"), num("p"));
  if (type == "heaviside") return heaviside(num("h"));
  if (type == "linear") return linear(num("alpha"));
  throw DomainError("invalid string file: unknown type \"" + type + "\"");
}

inline KreinString KreinString::parse(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("invalid string file: ") + e.what());
  }
  return from_json(j);
}

inline KreinString KreinString::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open string file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

inline double m_value(const KreinString& m, double x) { return m.value(x); }

inline double measure_of_interval(const KreinString& m, double a, double b) { return m.measure(a, b); }

// values[j] is the datum at grid[j]
struct GridFunction {
  std::vector<double> grid;
  std::vector<Eigen::VectorXd> values;

  GridFunction() = default;
  GridFunction(std::vector<double> g, std::vector<Eigen::VectorXd> v) : grid(std::move(g)), values(std::move(v)) {
    validate();
  }

  static GridFunction scalar(std::vector<double> g, const std::vector<double>& v) {
    std::vector<Eigen::VectorXd> vals;
    vals.reserve(v.size());
    for (double x : v) vals.push_back(Eigen::VectorXd::Constant(1, x));
    return GridFunction(std::move(g), std::move(vals));
  }

  std::size_t size() const { return grid.size(); }
  Eigen::Index dim() const { return values.empty() ? 0 : values.front().size(); }

  void validate() const {
    if (grid.size() != values.size()) throw DomainError("grid function: grid and values differ in length");
    for (std::size_t j = 0; j < grid.size(); ++j) {
      if (!(grid[j] >= 0.0)) throw DomainError("grid function: grid values must be >= 0");
      if (j && !(grid[j] > grid[j - 1])) throw DomainError("grid function: grid must be strictly increasing");
      if (values[j].size() != values.front().size()) throw DomainError("grid function: value dimension varies");
    }
  }
};

// Backward m-difference quotient on cells (z_{j-1}, z_j] of positive mass.
inline GridFunction m_derivative(const GridFunction& f, const KreinString& m) {
  f.validate();
  if (f.size() < 2) throw DomainError("m_derivative needs at least two grid points");
  const double lo = f.grid.front(), hi = f.grid.back();
  if (auto s = m.get_if<AtomicString>()) {
    for (const auto& a : s->atoms) {
      if (a.x < lo || a.x > hi) continue;
      if (!std::binary_search(f.grid.begin(), f.grid.end(), a.x))
        throw PreconditionError("m_derivative: grid misses the atom at " + std::to_string(a.x));
    }
  }
  GridFunction g;
  for (std::size_t j = 1; j < f.size(); ++j) {
    const double mass = m.measure(f.grid[j - 1], f.grid[j]);
    if (mass <= 0.0) continue;
    g.grid.push_back(f.grid[j]);
    g.values.push_back((f.values[j] - f.values[j - 1]) / mass);
  }
  if (g.grid.empty()) throw DomainError("m_derivative: the string puts no mass on the grid span");
  return g;
}

// coefficients of A2 y^e2 f'' + A1 y^e1 f'
struct GeneratorForm {
  double second_coef;
  double second_exp;
  double first_coef;
  double first_exp;
};

struct ScaleFunction {
  double q;       // s(y) = (y/L)^q
  double length;  // L
  double operator()(double y) const { return std::pow(y / length, q); }
  double inverse(double z) const { return length * std::pow(z, 1.0 / q); }
};

struct RescaledString {
  KreinString speed;  // pushforward of mu under s^{-1}, in y
  ScaleFunction scale;
  GeneratorForm original_scale;
  GeneratorForm natural_scale;
};

inline RescaledString rescale(const KreinString& m, double q, double length = 1.0) {
  auto pl = m.get_if<PowerLawString>();
  if (!pl) throw UnsupportedVariant("rescale requires a power-law string");
  if (!(q > 0.0) || !(length > 0.0)) throw DomainError("rescale: q and L must be > 0");
  const double P = pl->p * q;
  const double c2 = pl->c * std::pow(length, -P);
  GeneratorForm orig{std::pow(length, q) / (2.0 * c2 * P * q), 2.0 - P - q,
                     -(q - 1.0) * std::pow(length, q) / (2.0 * q * c2 * P), 1.0 - q - P};
  if (q == 1.0) orig.first_coef = 0.0;
  GeneratorForm nat{1.0 / (2.0 * pl->c * pl->p), 1.0 - pl->p, 0.0, 0.0};
  return RescaledString{KreinString::power_law(c2, P), ScaleFunction{q, length}, orig, nat};
}

// Green kernel of (a,b) for the 1/2 (d/dm)(d/dz) convention
inline double green_kernel(double a, double b, double y, double r) {
  if (r <= a || r >= b) return 0.0;
  return 2.0 * (std::min(y, r) - a) * (b - std::max(y, r)) / (b - a);
}

inline double mean_exit_time(const KreinString& m, double a, double b, double y, double tol = 1e-12) {
  if (!(a >= 0.0) || !(a < b)) throw DomainError("mean_exit_time needs 0 <= a < b");
  if (!(y > a && y < b)) throw DomainError("mean_exit_time needs y inside (a, b)");
  if (auto s = m.get_if<AtomicString>()) {
    double sum = 0.0;
    for (const auto& at : s->atoms) sum += at.w * green_kernel(a, b, y, at.x);
    return sum;
  }
  if (m.get_if<HeavisideString>()) return 0.0;
  QuadOptions opt;
  opt.abs_tol = tol;
  opt.rel_tol = tol;
  auto g = [&](double r) { return green_kernel(a, b, y, r) * m.density(r); };
  auto pf = *m.power_form();
  double left;
  if (a == 0.0 && pf.p < 1.0)
    left = integrate_near_zero_nothrow(g, y, opt).value;
  else
    left = integrate(g, a, y, opt).value;
  return left + integrate(g, y, b, opt).value;
}

}  // namespace krein
