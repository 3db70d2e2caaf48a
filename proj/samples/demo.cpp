// Walk through the library on a three-atom string and the fractional string at 0.7.

#include <krein/krein.hpp>

#include <cstdio>

using namespace krein;

int main() {
  const auto m = KreinString::atomic({{0.5, 1.0}, {1.5, 0.25}, {3.0, 2.0}});
  std::printf("string: %s\n", m.describe().c_str());

  for (double l : {0.1, 1.0, 10.0}) std::printf("psi(%g) = %.12g\n", l, krein_psi(m, l));

  const auto pm = principal_measure(m);
  std::printf("principal measure:\n");
  for (const auto& a : pm.atoms) std::printf("  gamma %.10g  weight %.10g\n", a.gamma, a.weight);

  Spectrum sp(m);
  std::printf("hitting density from z = 2 at t = 1: %.12g\n", sp.hitting_density(1.0, 2.0));

  // psi_m(A) f three ways
  const auto A = OperatorHandle::laplacian1d(16, 1.0 / 17);
  const Eigen::VectorXd f = Eigen::VectorXd::LinSpaced(16, -1.0, 1.0);
  const auto spectral = spectral_psi_apply(A, m, f).value;
  const auto phillips = phillips_apply(A, levy_triple_of(m), f).value;
  const auto dtw = dtw_extract(extension_solve(A, m, f), A, m, f);
  std::printf("route gaps: phillips %.3g  dtw %.3g\n", (phillips - spectral).norm(), (dtw - spectral).norm());

  const auto frac = KreinString::fractional(0.7);
  std::printf("fractional 0.7: psi(2) = %.12g, Levy density at 1 = %.12g\n", krein_psi(frac, 2.0), levy_density(frac, 1.0));

  SimConfig cfg;
  cfg.master_seed = 1;
  cfg.n_paths = 50000;
  const auto k = knight_check(m, 1.0, 1.0, cfg);
  std::printf("Knight check: empirical %.5f  theory %.5f  z %.2f\n", k.empirical, k.theory, k.z_score);
}
