#pragma once

#include <krein/bernstein.hpp>
#include <krein/calculus.hpp>
#include <krein/error.hpp>
#include <krein/montecarlo.hpp>
#include <krein/operator.hpp>
#include <krein/quadrature.hpp>
#include <krein/random.hpp>
#include <krein/spectral.hpp>
#include <krein/stability.hpp>
#include <krein/strings.hpp>
#include <krein/version.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace krein::cli {

enum ExitCode : int {
  kOk = 0,
  kDomain = 1,
  kConvergence = 2,
  kStatistical = 3,
  kCheckFailed = 4,
};

// shortest round-trip decimal, independent of the C locale
inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  void add(std::vector<Cell> r) {
    if (r.size() != columns.size()) throw std::logic_error("table row width mismatch");
    rows.push_back(std::move(r));
  }
};

inline std::string cell_text(const Cell& c) {
  if (auto d = std::get_if<double>(&c)) return num(*d);
  if (auto i = std::get_if<long long>(&c)) return std::to_string(*i);
  const auto& s = std::get<std::string>(c);
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return q + "\"";
}

inline nlohmann::json cell_json(const Cell& c) {
  if (auto d = std::get_if<double>(&c)) {
    if (std::isfinite(*d)) return *d;
    return num(*d);
  }
  if (auto i = std::get_if<long long>(&c)) return *i;
  return std::get<std::string>(c);
}

inline std::string to_csv(const Table& t) {
  std::string s;
  for (std::size_t j = 0; j < t.columns.size(); ++j) s += (j ? "," : "") + t.columns[j];
  s += "\n";
  for (const auto& r : t.rows) {
    for (std::size_t j = 0; j < r.size(); ++j) s += (j ? "," : "") + cell_text(r[j]);
    s += "\n";
  }
  return s;
}

inline nlohmann::json rows_json(const Table& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json o = nlohmann::json::object();
    for (std::size_t j = 0; j < r.size(); ++j) o[t.columns[j]] = cell_json(r[j]);
    rows.push_back(std::move(o));
  }
  return rows;
}

struct OutputOptions {
  std::string path;
  std::string format = "csv";
};

inline void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    fallback.flush();
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DomainError("cannot open output file " + path);
  os << text;
}

// CSV goes to the output with the metadata in a <out>.json sidecar; JSON carries both
inline void emit(const Table& t, const nlohmann::json& meta, const OutputOptions& o, std::ostream& out) {
  if (o.format == "json") {
    nlohmann::json doc;
    doc["meta"] = meta;
    doc["rows"] = rows_json(t);
    write_text(o.path, doc.dump(2) + "\n", out);
    return;
  }
  write_text(o.path, to_csv(t), out);
  if (!o.path.empty() && o.path != "-") write_text(o.path + ".json", meta.dump(2) + "\n", out);
}

// a single record; JSON output is the flat object
inline void emit_record(const Table& t, const nlohmann::json& meta, const OutputOptions& o, std::ostream& out) {
  if (o.format == "json" && t.rows.size() == 1) {
    nlohmann::json doc = rows_json(t)[0];
    doc["meta"] = meta;
    write_text(o.path, doc.dump(2) + "\n", out);
    return;
  }
  emit(t, meta, o, out);
}

inline nlohmann::json options_json(const CLI::App* app) {
  nlohmann::json cfg = nlohmann::json::object();
  for (const CLI::Option* opt : app->get_options()) {
    std::string name = opt->get_name(false, true);
    if (name.empty() || name == "--help" || name == "-h") continue;
    while (!name.empty() && name.front() == '-') name.erase(name.begin());
    if (opt->count() > 0) {
      const auto& res = opt->results();
      if (res.size() == 1)
        cfg[name] = res[0];
      else
        cfg[name] = res;
    } else if (!opt->get_default_str().empty()) {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

inline nlohmann::json base_meta(const std::string& command, const CLI::App* app) {
  nlohmann::json m;
  m["tool"] = "krein";
  m["version"] = version;
  m["command"] = command;
  m["config"] = options_json(app);
  return m;
}

struct OperatorArgs {
  std::string op = "laplacian1d";
  int n = 32;
  double h = 1.0;
  std::string matrix;
  std::vector<double> diag;

  OperatorHandle build() const {
    if (!matrix.empty()) return OperatorHandle::from_csv(matrix);
    if (op == "laplacian1d") {
      if (n < 1) throw DomainError("--n must be >= 1");
      if (!(h > 0.0)) throw DomainError("--h must be > 0");
      return OperatorHandle::laplacian1d(n, h);
    }
    if (op == "diag") {
      if (diag.empty()) throw DomainError("--op diag needs --diag values");
      return OperatorHandle::diagonal(Eigen::Map<const Eigen::VectorXd>(diag.data(), diag.size()));
    }
    throw DomainError("unknown operator '" + op + "'; expected laplacian1d or diag");
  }
};

inline void add_operator_flags(CLI::App* app, OperatorArgs& a) {
  app->add_option("--op", a.op, "laplacian1d or diag")->capture_default_str();
  app->add_option("--n", a.n, "Laplacian size")->capture_default_str();
  app->add_option("--h", a.h, "Laplacian spacing")->capture_default_str();
  app->add_option("--matrix", a.matrix, "dense symmetric matrix CSV");
  app->add_option("--diag", a.diag, "diagonal entries for --op diag")->delimiter(',');
}

inline void add_output_flags(CLI::App* app, OutputOptions& o, const std::string& default_format = "csv") {
  o.format = default_format;
  app->add_option("--out", o.path, "output path (stdout when omitted)");
  app->add_option("--format", o.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
}

inline Eigen::VectorXd load_f(const std::string& path, Eigen::Index n) {
  if (path.empty()) return Eigen::VectorXd::Ones(n);
  Eigen::VectorXd f = csv::read_vector(path);
  if (f.size() != n)
    throw DomainError("boundary datum has " + std::to_string(f.size()) + " entries, operator has " + std::to_string(n));
  return f;
}

// ---------------------------------------------------------------------------- psi

inline BernsteinValue closed_psi(const KreinString& m, double lambda) {
  const double eps = std::numeric_limits<double>::epsilon();
  if (!(lambda >= 0.0)) throw DomainError("lambda must be >= 0");
  if (auto h = m.get_if<HeavisideString>()) return {h->h * lambda, eps * h->h * lambda};
  if (auto l = m.get_if<LinearString>()) {
    const double v = std::sqrt(l->alpha * lambda / 2.0);
    return {v, 4 * eps * v};
  }
  if (auto p = m.get_if<PowerLawString>()) {
    const double v = PowerLawLaw(*p).psi_coef() * std::pow(lambda, p->sigma());
    return {v, 16 * eps * v};
  }
  throw UnsupportedVariant("no closed form for atomic strings; use --route ode or triple");
}

// ------------------------------------------------------------------------ validate

struct Check {
  std::string name;
  bool pass;
  double value;
  double threshold;
};

inline Eigen::VectorXd random_vector(Xoshiro256& g, Eigen::Index n) {
  Eigen::VectorXd f(n);
  for (Eigen::Index i = 0; i < n; ++i) f[i] = 2.0 * g.uniform() - 1.0;
  return f;
}

inline std::vector<Check> validate_suite(const std::string& suite, std::uint64_t seed, unsigned threads = 0) {
  if (suite != "quick" && suite != "full") throw DomainError("unknown suite '" + suite + "'");
  const bool full = suite == "full";
  std::vector<Check> out;
  auto le = [&](std::string name, double v, double thr) { out.push_back({std::move(name), v <= thr, v, thr}); };
  Xoshiro256 g(seed);

  const auto lin = KreinString::linear(0.5);
  const auto atom = KreinString::atomic({{1.0, 1.0}});
  const auto frac = KreinString::fractional(0.5);

  double e = 0.0;
  for (double l : {0.25, 1.0, 4.0, 16.0}) e = std::max(e, std::abs(krein_psi(lin, l) - std::sqrt(l) / 2.0));
  le("psi_linear_closed_form", e, 1e-10);

  e = 0.0;
  const std::vector<KreinString> family = {atom, KreinString::atomic({{0.5, 1.0}, {1.5, 0.25}, {3.0, 2.0}}), lin,
                                           KreinString::fractional(0.25), frac, KreinString::fractional(0.75)};
  for (const auto& m : family) {
    auto tr = BernsteinFunction::from_triple(levy_triple_of(m));
    for (int k = 0; k <= 12; ++k) {
      const double l = 0.1 * std::pow(1000.0, k / 12.0);
      const double a = krein_psi(m, l), b = eval_bernstein(tr, l);
      e = std::max(e, std::abs(a - b) / (1.0 + a));
    }
  }
  le("psi_route_agreement", e, 1e-8);

  const auto L = OperatorHandle::laplacian1d(32, 1.0);
  double ep = 0.0, ed = 0.0;
  for (int r = 0; r < 10; ++r) {
    const Eigen::VectorXd f = random_vector(g, 32);
    const Eigen::VectorXd s = spectral_psi_apply(L, atom, f).value;
    ep = std::max(ep, (phillips_apply(L, levy_triple_of(atom), f).value - s).norm() / f.norm());
    ed = std::max(ed, (dtw_extract(extension_solve(L, atom, f), L, atom, f) - s).norm() / f.norm());
  }
  le("routes_atomic_phillips", ep, 1e-8);
  le("routes_atomic_dtw", ed, 1e-8);

  {
    const Eigen::VectorXd f = random_vector(g, 32);
    const Eigen::VectorXd s = spectral_psi_apply(L, frac, f).value;
    std::vector<double> err;
    for (std::size_t N : {500u, 1000u, 2000u}) {
      auto P = extension_solve(L, frac, f, extension_grid(L, frac, N));
      err.push_back((dtw_extract(P, L, frac, f) - s).norm());
    }
    le("dtw_fractional_order_deviation", std::abs(err[1] / err[2] - 4.0), 0.5);
  }

  {
    const auto two = KreinString::atomic({{1.0, 1.0}, {2.0, 0.5}});
    Spectrum sp(two);
    double worst = 0.0;
    for (double z : {0.5, 1.0, 2.0, 3.0}) {
      auto r = integrate_half_line([&](double t) { return sp.hitting_density(t, z); });
      worst = std::max(worst, std::abs(r.value + sp.hitting_atom(z) - 1.0));
    }
    Spectrum sl(lin);
    for (double z : {0.5, 1.0, 2.0}) {
      auto r = integrate_half_line([&](double t) { return sl.hitting_density(t, z); });
      worst = std::max(worst, std::abs(r.value - 1.0));
    }
    le("hitting_density_normalisation", worst, 1e-8);

    double asym = 0.0;
    for (int r = 0; r < 20; ++r) {
      const double t = 3.0 * g.uniform(), z = 3.0 * g.uniform(), y = 3.0 * g.uniform();
      asym = std::max(asym, std::abs(sp.transition_density(t, z, y) - sp.transition_density(t, y, z)));
    }
    le("transition_density_symmetry", asym, 1e-12);
  }
  le("hitting_identity_atomic", hitting_identity_residual(atom, 2.0, 1.0), 1e-10);
  le("hitting_identity_linear", hitting_identity_residual(lin, 1.0, 1.0), 1e-6);

  {
    // sign of k-th divided differences of h on a geometric grid must be (-1)^k
    long long bad = 0;
    for (const auto& m : {family[1], frac}) {
      Spectrum sp(m);
      for (int k = 0; k <= 4; ++k)
        for (int s0 = 0; s0 < 8; ++s0) {
          std::vector<double> t, v;
          for (int j = 0; j <= k; ++j) t.push_back(0.2 * std::pow(1.5, s0 + j));
          for (double x : t) v.push_back(sp.levy_density(x));
          for (int o = 1; o <= k; ++o)
            for (int j = k; j >= o; --j) v[j] = (v[j] - v[j - 1]) / (t[j] - t[j - o]);
          if (!((k % 2 ? -v[k] : v[k]) > 0.0)) ++bad;
        }
    }
    le("levy_density_complete_monotonicity_violations", double(bad), 0.0);

    double lim = 0.0;
    for (const auto& m : {family[1], frac}) {
      Spectrum sp(m);
      lim = std::max({lim, 1e-10 * sp.beta(1e-10), sp.beta(1e10)});
    }
    le("beta_limits", lim, 1e-3);
  }

  le("closed_form_density_anchor",
     std::abs(hitting_density(frac, 1.0, 1.0) - std::exp(-0.25) / (2.0 * std::sqrt(M_PI))), 1e-9);

  {
    const auto A = OperatorHandle::diagonal(Eigen::Vector2d(1.0, 4.0));
    const Eigen::VectorXd f = Eigen::Vector2d(1.0, 1.0);
    le("representation_atomic", representation_residual(A, atom, f, 0.7), 1e-10);
    const auto A1 = OperatorHandle::diagonal(Eigen::VectorXd::Constant(1, 1.0));
    le("representation_linear", representation_residual(A1, lin, Eigen::VectorXd::Constant(1, 1.0), 1.0), 1e-6);
    double excess = 0.0;
    for (int r = 0; r < 50; ++r) {
      const double z = 4.0 * g.uniform();
      const Eigen::VectorXd fr = random_vector(g, 32);
      const auto& m = r % 2 ? atom : lin;
      excess = std::max(excess, apply_A_inside(L, m, fr, z).value.norm() - L.apply(fr).norm());
    }
    le("bochner_bound_excess", excess, 1e-12);
  }

  {
    SimConfig c;
    c.master_seed = seed;
    c.threads = threads;
    c.n_paths = full ? 100000 : 20000;
    auto k = with_rerun([&](const SimConfig& cc) { return knight_check(atom, 1.0, 1.0, cc); }, c,
                        [](const KnightResult& r) { return std::abs(r.z_score) <= 3.0; });
    le("knight_atomic_abs_z", std::abs(k.z_score), 3.0);

    const auto two = KreinString::atomic({{1.0, 1.0}, {2.0, 0.5}});
    KilledGenerator G(two.atomic_data());
    const Eigen::VectorXd mean = (-G.matrix()).lu().solve(Eigen::VectorXd::Ones(2));
    auto h = with_rerun([&](const SimConfig& cc) { return simulate_ctmc_hitting(two, 2.0, cc); }, c,
                        [&](const HittingSamples& s) {
                          auto sm = summarize(s.tau);
                          return std::abs(sm.mean - mean[1]) <= 3.0 * sm.standard_error;
                        });
    auto sm = summarize(h.tau);
    le("ctmc_mean_hitting_abs_z", std::abs(sm.mean - mean[1]) / sm.standard_error, 3.0);
  }

  if (full) {
    SimConfig c;
    c.master_seed = seed;
    c.threads = threads;
    c.n_paths = 4000;
    c.dt = 1e-5;
    auto k = knight_check(lin, 4.0, 1.0, c);
    const double budget = 3.0 * k.standard_error + std::sqrt(c.dt) + c.epsilon;
    le("knight_linear_bias_budget_excess", std::abs(k.empirical - k.theory) - budget, 0.0);

    SimConfig b;
    b.master_seed = seed;
    b.threads = threads;
    b.n_paths = 10000;
    b.step_factor = 0.02;
    const auto bs = KreinString::bessel(0.5);
    auto s = with_rerun([&](const SimConfig& cc) { return simulate_bessel_hitting(0.5, 1.0, cc); }, b,
                        [&](const HittingSamples& hs) {
                          const double d = ks_statistic(hs, [&](double t) { return 1.0 - survival(bs, 1.0, t); },
                                                        b.horizon);
                          return ks_pvalue(d, hs.tau.size()) >= 0.01;
                        });
    const double d = ks_statistic(s, [&](double t) { return 1.0 - survival(bs, 1.0, t); }, b.horizon);
    out.push_back({"bessel_ks_pvalue", ks_pvalue(d, s.tau.size()) >= 0.01, ks_pvalue(d, s.tau.size()), 0.01});
  }

  {
    const auto A = OperatorHandle::diagonal(Eigen::Vector2d(1.0, 4.0));
    const Eigen::VectorXd f = Eigen::Vector2d(1.0, 1.0);
    auto rows = fractional_limit_experiment(A, {0.5, 0.9, 0.99, 0.999}, f);
    double worst_c = -std::numeric_limits<double>::infinity(), worst_r = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < rows.size(); ++i) {
      worst_c = std::max(worst_c, rows[i - 1].two_c - rows[i].two_c);
      worst_r = std::max(worst_r, rows[i].resolvent_gap - rows[i - 1].resolvent_gap);
    }
    out.push_back({"stability_two_c_increase_violation", worst_c < 0.0, worst_c, 0.0});
    out.push_back({"stability_resolvent_decrease_violation", worst_r < 0.0, worst_r, 0.0});
    le("stability_resolvent_gap_at_0.999", rows.back().resolvent_gap, 1e-3);
  }
  return out;
}

// ------------------------------------------------------------------------ dispatch

inline int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConvergenceError& e) {
    err << "convergence error: " << e.what() << " (estimate " << num(e.estimate()) << ")\n";
    return kConvergence;
  } catch (const StatisticalFailure& e) {
    err << "statistical failure: " << e.what() << "\n";
    return kStatistical;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kConvergence;
  } catch (const DomainError& e) {
    err << "domain error: " << e.what() << "\n";
    return kDomain;
  } catch (const nlohmann::json::exception& e) {
    err << "domain error: malformed JSON: " << e.what() << "\n";
    return kDomain;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDomain;
  }
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"krein: complete Bernstein functions of matrices through Krein strings"};
  app.set_help_flag("--help", "print help");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(version));

  // shared flags
  std::string string_path;
  double quad_tol = 1e-10;
  OperatorArgs opargs;
  std::string f_path;
  OutputOptions o, o_psi;

  // psi
  auto* psi = app.add_subcommand("psi", "evaluate psi_m(lambda)");
  double lambda = 1.0;
  std::string psi_route = "ode";
  psi->add_option("--string", string_path, "string JSON file")->required();
  psi->add_option("--lambda", lambda, "spectral parameter")->required();
  psi->add_option("--route", psi_route, "ode, triple or closed")
      ->check(CLI::IsMember({"ode", "triple", "closed"}))
      ->capture_default_str();
  psi->add_option("--tol", quad_tol, "quadrature tolerance")->capture_default_str();
  add_output_flags(psi, o_psi, "json");

  // density
  auto* density = app.add_subcommand("density", "hitting-time density, Levy density, beta and survival");
  std::vector<double> zs{1.0}, ts;
  std::vector<double> t_log;
  density->add_option("--string", string_path, "string JSON file")->required();
  density->add_option("--z", zs, "starting points")->delimiter(',');
  density->add_option("--t", ts, "times")->delimiter(',');
  density->add_option("--t-log", t_log, "min,max,count for a log-spaced time grid")->delimiter(',')->expected(3);
  add_output_flags(density, o);

  // spectrum
  auto* spectrum = app.add_subcommand("spectrum", "principal measure of the killed process");
  std::vector<double> gammas{0.25, 0.5, 1.0, 2.0, 4.0};
  spectrum->add_option("--string", string_path, "string JSON file")->required();
  spectrum->add_option("--gamma", gammas, "density probe points for continuous strings")->delimiter(',');
  add_output_flags(spectrum, o);

  // apply
  auto* apply = app.add_subcommand("apply", "apply psi_m(A) or a related operator to a vector");
  std::string apply_route = "spectral", sub_mode = "spectral";
  double z = 1.0, t = 1.0, robin = 0.0;
  std::size_t intervals = 2000;
  std::uint64_t seed = 0;
  std::size_t paths = 10000;
  add_operator_flags(apply, opargs);
  apply->add_option("--string", string_path, "string JSON file")->required();
  apply->add_option("--f", f_path, "boundary datum CSV (ones when omitted)");
  apply->add_option("--route", apply_route, "spectral, phillips, dtw, subordinate or poisson")
      ->check(CLI::IsMember({"spectral", "phillips", "dtw", "subordinate", "poisson"}))
      ->capture_default_str();
  apply->add_option("--z", z, "height for the poisson route")->capture_default_str();
  apply->add_option("--t", t, "time for the subordinate route")->capture_default_str();
  apply->add_option("--mode", sub_mode, "spectral or mc for the subordinate route")
      ->check(CLI::IsMember({"spectral", "mc"}))
      ->capture_default_str();
  apply->add_option("--seed", seed, "master seed for --mode mc");
  apply->add_option("--paths", paths, "sample paths for --mode mc")->capture_default_str();
  apply->add_option("--intervals", intervals, "extension grid intervals for continuous strings")->capture_default_str();
  apply->add_option("--robin", robin, "add robin*f to the Dirichlet-to-Wentzell output")->capture_default_str();
  apply->add_option("--tol", quad_tol, "quadrature tolerance")->capture_default_str();
  add_output_flags(apply, o);

  // mc
  auto* mc = app.add_subcommand("mc", "Monte Carlo checks");
  mc->require_subcommand(1);
  SimConfig cfg;
  std::vector<double> t_checks{0.5, 1.0, 2.0};
  auto add_sim = [&](CLI::App* s) {
    s->add_option("--seed", cfg.master_seed, "master seed")->required();
    s->add_option("--paths", cfg.n_paths, "sample paths")->capture_default_str();
    s->add_option("--dt", cfg.dt, "smallest Brownian step")->capture_default_str();
    s->add_option("--eps", cfg.epsilon, "local-time band half-width / hitting threshold")->capture_default_str();
    s->add_option("--horizon", cfg.horizon, "censoring horizon")->capture_default_str();
    s->add_option("--step-factor", cfg.step_factor, "adaptive step factor")->capture_default_str();
    s->add_option("--threads", cfg.threads, "worker threads (0: all, capped by KREIN_THREADS)");
    add_output_flags(s, o);
  };
  auto* mc_hit = mc->add_subcommand("hitting", "hitting time of 0 against the spectral law");
  mc_hit->add_option("--string", string_path, "string JSON file")->required();
  mc_hit->add_option("--z", z, "starting point")->capture_default_str();
  mc_hit->add_option("--t-check", t_checks, "survival probe times")->delimiter(',');
  add_sim(mc_hit);
  auto* mc_knight = mc->add_subcommand("knight", "Laplace transform of the inverse local time");
  mc_knight->add_option("--string", string_path, "string JSON file")->required();
  mc_knight->add_option("--lambda", lambda, "spectral parameter")->capture_default_str();
  mc_knight->add_option("--t", t, "local time level")->capture_default_str();
  add_sim(mc_knight);
  auto* mc_poisson = mc->add_subcommand("poisson", "E exp(-tau A) f against the Poisson formula");
  mc_poisson->add_option("--string", string_path, "string JSON file")->required();
  mc_poisson->add_option("--z", z, "starting height")->capture_default_str();
  mc_poisson->add_option("--f", f_path, "boundary datum CSV (ones when omitted)");
  add_operator_flags(mc_poisson, opargs);
  add_sim(mc_poisson);
  auto* mc_bessel = mc->add_subcommand("bessel", "squared Bessel hitting time against the closed form");
  double sigma = 0.5, y0 = 1.0;
  mc_bessel->add_option("--sigma", sigma, "index in (0, 1)")->capture_default_str();
  mc_bessel->add_option("--y0", y0, "starting point")->capture_default_str();
  add_sim(mc_bessel);

  // stability
  auto* stability = app.add_subcommand("stability", "fractional-limit table against Heaviside{1/2}");
  std::string sequence = "fractional";
  std::vector<double> sigmas{0.5, 0.9, 0.99, 0.999};
  std::vector<int> builtin;
  stability->add_option("--sequence", sequence, "fractional")->check(CLI::IsMember({"fractional"}))->capture_default_str();
  stability->add_option("--sigmas", sigmas, "sigma values")->delimiter(',');
  stability->add_option("--builtin", builtin, "n values for sigma = 1 - 1/n")->delimiter(',');
  stability->add_option("--lambda", lambda, "resolvent parameter")->capture_default_str();
  stability->add_option("--f", f_path, "test vector CSV (ones when omitted)");
  add_operator_flags(stability, opargs);
  add_output_flags(stability, o);

  // validate
  auto* validate = app.add_subcommand("validate", "cross-route acceptance suite");
  std::string suite = "quick";
  std::uint64_t vseed = 7;
  unsigned vthreads = 0;
  validate->add_option("--suite", suite, "quick or full")->check(CLI::IsMember({"quick", "full"}))->capture_default_str();
  validate->add_option("--seed", vseed, "master seed")->capture_default_str();
  validate->add_option("--threads", vthreads, "worker threads for the Monte Carlo checks (0: all, capped by KREIN_THREADS)");
  add_output_flags(validate, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForVersion& e) {
    out << version << "\n";
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "usage error: " << e.what() << "\n";
    return kDomain;
  }
  if (!(quad_tol > 0.0)) {
    err << "domain error: --tol must be > 0\n";
    return kDomain;
  }

  return run_guarded([&]() -> int {
    const double eps = std::numeric_limits<double>::epsilon();

    if (psi->parsed()) {
      const auto m = KreinString::load(string_path);
      BernsteinValue v{};
      if (psi_route == "ode")
        v = krein_psi_value(m, lambda);
      else if (psi_route == "triple")
        v = eval_bernstein_value(BernsteinFunction::from_triple(levy_triple_of(m)), lambda, quad_tol);
      else
        v = closed_psi(m, lambda);
      Table tb{{"lambda", "psi", "route", "error_estimate"}, {}};
      tb.add({lambda, v.value, psi_route, v.error});
      auto meta = base_meta("psi", psi);
      meta["string"] = m.to_json();
      emit_record(tb, meta, o_psi, out);
      return kOk;
    }

    if (density->parsed()) {
      const auto m = KreinString::load(string_path);
      Spectrum sp(m);
      std::vector<double> grid = ts;
      if (!t_log.empty()) {
        if (!(t_log[0] > 0.0 && t_log[1] > t_log[0] && t_log[2] >= 2.0)) throw DomainError("--t-log needs 0 < min < max, count >= 2");
        const int n = static_cast<int>(t_log[2]);
        for (int i = 0; i < n; ++i) grid.push_back(t_log[0] * std::pow(t_log[1] / t_log[0], double(i) / (n - 1)));
      }
      if (grid.empty()) grid = {0.5, 1.0, 2.0};
      Table tb{{"t", "z", "omega", "h", "beta", "survival", "error_estimate"}, {}};
      const double scale = sp.atomic() ? 64.0 * double(sp.atomic_spectrum().size()) : 64.0;
      for (double zz : zs)
        for (double tt : grid) {
          const double om = sp.hitting_density(tt, zz), h = sp.levy_density(tt), b = sp.beta(tt),
                       s = sp.survival(zz, tt);
          tb.add({tt, zz, om, h, b, s, scale * eps * std::max({1.0, om, h, b})});
        }
      auto meta = base_meta("density", density);
      meta["string"] = m.to_json();
      emit(tb, meta, o, out);
      return kOk;
    }

    if (spectrum->parsed()) {
      const auto m = KreinString::load(string_path);
      const auto pm = principal_measure(m);
      auto meta = base_meta("spectrum", spectrum);
      meta["string"] = m.to_json();
      meta["finiteness_integral"] = pm.finiteness_integral();
      if (pm.form == PrincipalMeasure::Form::Atoms) {
        Table tb{{"gamma", "weight", "error_estimate"}, {}};
        double gmax = 0.0;
        for (const auto& a : pm.atoms) gmax = std::max(gmax, a.gamma);
        for (const auto& a : pm.atoms) tb.add({a.gamma, a.weight, 16.0 * pm.atoms.size() * eps * gmax});
        meta["form"] = "atoms";
        emit(tb, meta, o, out);
      } else {
        Table tb{{"gamma", "density", "error_estimate"}, {}};
        for (double gg : gammas) {
          const double d = pm.density(gg);
          tb.add({gg, d, 16.0 * eps * d});
        }
        meta["form"] = "density";
        meta["coef"] = pm.coef;
        meta["sigma"] = pm.sigma;
        emit(tb, meta, o, out);
      }
      return kOk;
    }

    if (apply->parsed()) {
      const auto m = KreinString::load(string_path);
      const auto A = opargs.build();
      const Eigen::VectorXd f = load_f(f_path, A.size());
      auto meta = base_meta("apply", apply);
      meta["string"] = m.to_json();
      Eigen::VectorXd value, error;
      if (apply_route == "spectral") {
        auto r = spectral_psi_apply(A, BernsteinFunction::from_string(m), f, quad_tol);
        value = r.value;
        error = Eigen::VectorXd::Constant(f.size(), r.error);
      } else if (apply_route == "phillips") {
        auto r = phillips_apply(A, levy_triple_of(m), f, quad_tol);
        value = r.value;
        error = Eigen::VectorXd::Constant(f.size(), r.error);
      } else if (apply_route == "poisson") {
        auto r = poisson_solution(A, m, f, z, quad_tol);
        value = r.value;
        error = Eigen::VectorXd::Constant(f.size(), r.error);
      } else if (apply_route == "dtw") {
        if (m.continuous()) {
          auto P = extension_solve(A, m, f, extension_grid(A, m, intervals));
          auto Pc = extension_solve(A, m, f, extension_grid(A, m, std::max<std::size_t>(intervals / 2, 2)));
          value = dtw_extract(P, A, m, f, robin);
          // Richardson estimate for a second-order scheme
          error = (value - dtw_extract(Pc, A, m, f, robin)).cwiseAbs() / 3.0;
          double res = 0.0;
          for (double r : P.residual) res = std::max(res, r);
          meta["max_node_residual"] = res;
          meta["truncation"] = P.truncation;
          meta["truncation_norm"] = P.truncation_norm;
          meta["warnings"] = P.warnings;
        } else {
          auto P = extension_solve(A, m, f);
          value = dtw_extract(P, A, m, f, robin);
          double res = 0.0;
          for (double r : P.residual) res = std::max(res, r);
          meta["max_node_residual"] = res;
          error = Eigen::VectorXd::Constant(f.size(), std::max(res, 64.0 * eps * std::max(1.0, value.lpNorm<Eigen::Infinity>())));
        }
      } else {
        if (sub_mode == "mc") {
          if (!apply->count("--seed")) throw DomainError("--mode mc needs --seed");
          SimConfig c;
          c.master_seed = seed;
          c.n_paths = paths;
          auto r = subordinate_apply(A, m, t, f, SubordinateMode::MonteCarlo, c);
          value = r.mean;
          error = r.standard_error;
          meta["n_censored"] = r.n_censored;
        } else {
          value = subordinate_apply(A, m, t, f);
          error = Eigen::VectorXd::Constant(f.size(), 64.0 * eps * f.lpNorm<Eigen::Infinity>());
        }
      }
      meta["route"] = apply_route;
      meta["max_error_estimate"] = error.size() ? error.maxCoeff() : 0.0;
      Table tb{{"index", "value", "error_estimate"}, {}};
      for (Eigen::Index i = 0; i < value.size(); ++i) tb.add({(long long)i, value[i], error[i]});
      emit(tb, meta, o, out);
      return kOk;
    }

    if (mc->parsed()) {
      Table tb{{"quantity", "estimate", "standard_error", "theory", "score", "pass"}, {}};
      bool ok = true;
      auto row = [&](std::string q, double est, double se, double th, double score, bool pass) {
        ok = ok && pass;
        tb.add({std::move(q), est, se, th, score, std::string(pass ? "pass" : "fail")});
      };
      const CLI::App* sub = mc_hit->parsed() ? mc_hit : mc_knight->parsed() ? mc_knight
                            : mc_poisson->parsed() ? mc_poisson : mc_bessel;
      auto meta = base_meta(std::string("mc ") + sub->get_name(), sub);

      auto hitting_rows = [&](const HittingSamples& hs, const std::function<double(double)>& surv) {
        std::vector<double> tau;
        for (std::size_t i = 0; i < hs.tau.size(); ++i)
          if (!hs.censored[i]) tau.push_back(hs.tau[i]);
        const double n = double(hs.tau.size());
        for (double tc : t_checks) {
          double c = 0.0;
          for (double v : hs.tau) c += v > tc ? 1.0 : 0.0;
          const double p = c / n, se = std::sqrt(std::max(p * (1 - p), 1e-300) / n), th = surv(tc);
          const double zz = (p - th) / se;
          row("survival@" + num(tc), p, se, th, zz, std::abs(zz) <= 3.0);
        }
        const double d = ks_statistic(hs, [&](double x) { return 1.0 - surv(x); }, cfg.horizon);
        const double pv = ks_pvalue(d, n);
        row("ks_distance", d, 1.0 / std::sqrt(n), 0.0, pv, pv >= 0.01);
        row("censored_fraction", hs.censored_fraction(), 0.0, 0.0, double(hs.n_censored), hs.censored_fraction() < 0.01);
        meta["warnings"] = hs.warnings;
        meta["clamp_events"] = hs.clamp_events;
      };

      if (mc_hit->parsed()) {
        const auto m = KreinString::load(string_path);
        Spectrum sp(m);
        auto run = [&](const SimConfig& c) {
          return m.get_if<AtomicString>() ? simulate_ctmc_hitting(m, z, c) : simulate_reflected_bm_timechange(m, z, c).hitting;
        };
        auto surv = [&](double x) { return sp.survival(z, x); };
        auto hs = with_rerun(run, cfg, [&](const HittingSamples& h) {
          const double d = ks_statistic(h, [&](double x) { return 1.0 - surv(x); }, cfg.horizon);
          return ks_pvalue(d, h.tau.size()) >= 0.01;
        });
        meta["string"] = m.to_json();
        meta["paths_used"] = hs.tau.size();
        hitting_rows(hs, surv);
      } else if (mc_knight->parsed()) {
        const auto m = KreinString::load(string_path);
        const bool exact = !m.get_if<LinearString>();
        auto pass = [&](const KnightResult& r) {
          if (exact) return std::abs(r.z_score) <= 3.0;
          return std::abs(r.empirical - r.theory) <= 3.0 * r.standard_error + std::sqrt(cfg.dt) + cfg.epsilon;
        };
        auto k = with_rerun([&](const SimConfig& c) { return knight_check(m, lambda, t, c); }, cfg, pass);
        meta["string"] = m.to_json();
        meta["paths_used"] = k.n;
        meta["bias_budget"] = exact ? 0.0 : std::sqrt(cfg.dt) + cfg.epsilon;
        row("laplace_inverse_local_time", k.empirical, k.standard_error, k.theory, k.z_score, pass(k));
        row("censored_fraction", double(k.n_censored) / k.n, 0.0, 0.0, double(k.n_censored),
            double(k.n_censored) / k.n < 0.01);
      } else if (mc_poisson->parsed()) {
        const auto m = KreinString::load(string_path);
        const auto A = opargs.build();
        const Eigen::VectorXd f = load_f(f_path, A.size());
        const Eigen::VectorXd th = poisson_solution(A, m, f, z).value;
        auto pass = [&](const VectorEstimate& e) {
          for (Eigen::Index i = 0; i < th.size(); ++i)
            if (std::abs(e.mean[i] - th[i]) > 3.0 * e.standard_error[i] && e.standard_error[i] > 0.0) return false;
          return true;
        };
        auto e = with_rerun([&](const SimConfig& c) { return mc_poisson_solution(A, m, f, z, c); }, cfg, pass);
        meta["string"] = m.to_json();
        meta["paths_used"] = e.n;
        for (Eigen::Index i = 0; i < th.size(); ++i) {
          const double se = e.standard_error[i], d = e.mean[i] - th[i];
          const double sc = se > 0.0 ? d / se : (d == 0.0 ? 0.0 : INFINITY);
          row("u[" + std::to_string(i) + "]", e.mean[i], se, th[i], sc, std::abs(sc) <= 3.0);
        }
        row("censored_fraction", double(e.n_censored) / e.n, 0.0, 0.0, double(e.n_censored),
            double(e.n_censored) / e.n < 0.01);
      } else {
        if (!mc_bessel->count("--step-factor")) cfg.step_factor = 0.02;
        const auto m = KreinString::bessel(sigma);
        Spectrum sp(m);
        auto surv = [&](double x) { return sp.survival(y0, x); };
        auto hs = with_rerun([&](const SimConfig& c) { return simulate_bessel_hitting(sigma, y0, c); }, cfg,
                             [&](const HittingSamples& h) {
                               const double d = ks_statistic(h, [&](double x) { return 1.0 - surv(x); }, cfg.horizon);
                               return ks_pvalue(d, h.tau.size()) >= 0.01;
                             });
        meta["string"] = m.to_json();
        meta["paths_used"] = hs.tau.size();
        meta["effective_step_factor"] = cfg.step_factor;
        hitting_rows(hs, surv);
      }
      emit(tb, meta, o, out);
      return ok ? kOk : kStatistical;
    }

    if (stability->parsed()) {
      const auto A = opargs.build();
      const Eigen::VectorXd f = load_f(f_path, A.size());
      std::vector<double> sg = sigmas;
      if (!builtin.empty()) sg = StringSequence::fractional_builtin(builtin).parameter;
      auto rows = fractional_limit_experiment(A, sg, f, lambda);
      Table tb{{"sigma", "c_sigma", "two_c", "eigen_error", "resolvent_gap", "semigroup_gap", "vague_gap", "error_estimate"}, {}};
      for (const auto& r : rows)
        tb.add({r.sigma, r.c_sigma, r.two_c, r.eigen_error, r.resolvent_gap, r.semigroup_gap, r.vague_gap,
                1e-12 * std::max(1.0, f.norm())});
      emit(tb, base_meta("stability", stability), o, out);
      return kOk;
    }

    // validate
    auto checks = validate_suite(suite, vseed, vthreads);
    Table tb{{"check", "status", "value", "threshold"}, {}};
    bool ok = true;
    for (const auto& c : checks) {
      ok = ok && c.pass;
      tb.add({c.name, std::string(c.pass ? "pass" : "fail"), c.value, c.threshold});
    }
    auto meta = base_meta("validate", validate);
    long long failed = 0;
    for (const auto& c : checks) failed += c.pass ? 0 : 1;
    meta["failed"] = failed;
    emit(tb, meta, o, out);
    return ok ? kOk : kCheckFailed;
  }, err);
}

}  // namespace krein::cli
