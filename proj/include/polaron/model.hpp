#pragma once

// Physical parameters of the qubit-resonator chain and the couplings derived from them.
//
// Units: hbar = 1. Energies are angular frequencies in rad/ns, times are in ns.
// Device frequencies quoted as f = omega / 2pi in GHz enter through a single 2pi factor.

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "polaron/bessel.hpp"
#include "polaron/error.hpp"

namespace polaron {

using cplx = std::complex<double>;

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Bessel values at pi/2 that set the dressed Josephson couplings. Evaluated once.
struct DriveBessel {
  double j0;
  double j1;

  static const DriveBessel& get() {
    static const DriveBessel values{bessel::series(0, std::numbers::pi / 2),
                                    bessel::series(1, std::numbers::pi / 2)};
    return values;
  }
};

struct DeviceParams {
  double ej_scaled = 100.0;             ///< delta_phi0^2 * E_J / (2 pi hbar), GHz
  double delta_theta = 3.5e-3;          ///< resonator flux-coupling scale
  double delta_omega_over_2pi = 0.3;    ///< rotating-frame phonon frequency, GHz
  double phi_dc = 0.972 * std::numbers::pi;  ///< dc flux, radians in [0, 2 pi)

  void validate() const {
    if (!(ej_scaled > 0.0)) throw InvalidArgument("ej_scaled must be positive");
    if (!(delta_theta > 0.0)) throw InvalidArgument("delta_theta must be positive");
    if (!(delta_omega_over_2pi > 0.0)) throw InvalidArgument("delta_omega_over_2pi must be positive");
    if (!(phi_dc >= 0.0 && phi_dc < kTwoPi)) throw InvalidArgument("phi_dc must lie in [0, 2pi)");
  }
};

struct ModelParams {
  int n_sites = 0;
  int max_phonons = 0;
  double t0 = 0.0;           ///< bare hopping integral
  double g = 0.0;            ///< dimensionless e-ph coupling
  double delta_omega = 0.0;  ///< phonon frequency
  double lambda_eff = 0.0;   ///< 2 g^2 delta_omega / t0
  double tau_ec = 0.0;       ///< 1 / t0

  /// Builds parameters directly in model units; lambda_eff and tau_ec follow from the rest.
  static ModelParams from_couplings(int n_sites, int max_phonons, double t0, double g,
                                    double delta_omega) {
    if (n_sites < 2) throw InvalidArgument("n_sites must be >= 2");
    if (max_phonons < 0) throw InvalidArgument("max_phonons must be >= 0");
    if (!(t0 > 0.0)) throw InvalidArgument("t0 must be positive");
    if (!(delta_omega > 0.0)) throw InvalidArgument("delta_omega must be positive");
    ModelParams p;
    p.n_sites = n_sites;
    p.max_phonons = max_phonons;
    p.t0 = t0;
    p.g = g;
    p.delta_omega = delta_omega;
    p.lambda_eff = 2.0 * g * g * delta_omega / t0;
    p.tau_ec = 1.0 / t0;
    return p;
  }

  ModelParams with_max_phonons(int m) const {
    ModelParams p = *this;
    if (m < 0) throw InvalidArgument("max_phonons must be >= 0");
    p.max_phonons = m;
    return p;
  }

  ModelParams with_sites(int n) const {
    ModelParams p = *this;
    if (n < 2) throw InvalidArgument("n_sites must be >= 2");
    p.n_sites = n;
    return p;
  }

  /// Coupling energy g * delta_omega, the common prefactor of both e-ph terms.
  double coupling_energy() const { return g * delta_omega; }
};

inline constexpr double kDegenerateFluxTolerance = 1e-9;

/// Bare hopping t0 = 2 * delta_phi0^2 * E_J * J0(pi/2) * (1 + cos phi_dc).
inline double hopping_from_device(const DeviceParams& dev) {
  const double one_plus_cos = 1.0 + std::cos(dev.phi_dc);
  if (std::abs(one_plus_cos) < kDegenerateFluxTolerance) {
    std::ostringstream os;
    os << "hopping integral vanishes at phi_dc = " << dev.phi_dc << " (|1 + cos phi_dc| = " << one_plus_cos
       << ")";
    throw DegenerateHopping(os.str());
  }
  return 2.0 * dev.ej_scaled * kTwoPi * DriveBessel::get().j0 * one_plus_cos;
}

/// lambda_eff written directly in device quantities; independent of delta_omega.
inline double lambda_from_device(const DeviceParams& dev) {
  const auto& b = DriveBessel::get();
  const double g = dev.ej_scaled * b.j1 * dev.delta_theta / dev.delta_omega_over_2pi;
  return g * b.j1 * dev.delta_theta / (b.j0 * (1.0 + std::cos(dev.phi_dc)));
}

inline ModelParams derive_model(const DeviceParams& dev, int n_sites, int max_phonons) {
  dev.validate();
  const double t0 = hopping_from_device(dev);
  const double delta_omega = kTwoPi * dev.delta_omega_over_2pi;
  // g * delta_omega = delta_phi0^2 E_J J1(pi/2) delta_theta
  const double g = dev.ej_scaled * kTwoPi * DriveBessel::get().j1 * dev.delta_theta / delta_omega;
  return ModelParams::from_couplings(n_sites, max_phonons, t0, g, delta_omega);
}

/// Reference time 1/t0 evaluated at a chosen flux (the time unit used for outputs).
inline double reference_time(DeviceParams dev, double phi_ref) {
  dev.phi_dc = phi_ref;
  return 1.0 / hopping_from_device(dev);
}

/// Smallest phi_dc in (0, pi) at which lambda_eff reaches `lambda`.
inline double flux_for_lambda(const DeviceParams& dev, double lambda) {
  if (!(lambda > 0.0)) throw InvalidArgument("lambda must be positive");
  const auto& b = DriveBessel::get();
  const double g = dev.ej_scaled * b.j1 * dev.delta_theta / dev.delta_omega_over_2pi;
  const double one_plus_cos = g * b.j1 * dev.delta_theta / (b.j0 * lambda);
  if (one_plus_cos >= 2.0) throw InvalidArgument("lambda below the minimum reachable value");
  return std::acos(one_plus_cos - 1.0);
}

/// Momentum-space e-ph vertex 2 i g delta_omega [sin k + sin q - sin(k + q)].
inline cplx vertex(double k, double q, const ModelParams& p) {
  return cplx(0.0, 2.0 * p.coupling_energy() * (std::sin(k) + std::sin(q) - std::sin(k + q)));
}

/// Rabi preparation time pi / (2 beta_p), stretched by 1/Z for dressed target states.
inline double preparation_time(double beta_p, double residue = 1.0) {
  if (!(beta_p > 0.0)) throw InvalidArgument("beta_p must be positive");
  if (!(residue > 0.0 && residue <= 1.0)) throw InvalidArgument("residue must lie in (0, 1]");
  return std::numbers::pi / (2.0 * beta_p) / residue;
}

}  // namespace polaron
