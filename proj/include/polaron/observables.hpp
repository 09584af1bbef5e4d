#pragma once

// Observables of a sector state psi = sum_m C_m |K, m>.
//
// All expectation values are taken in the normalized state, so a small norm drift
// from the propagator does not leak into them; the norm itself is reported separately.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "polaron/error.hpp"
#include "polaron/fockspace.hpp"

namespace polaron {

using cplx = std::complex<double>;
using StateVector = std::vector<cplx>;

inline double norm_squared(std::span<const cplx> psi) {
  double s = 0.0;
  for (const auto& c : psi) s += std::norm(c);
  return s;
}

inline double norm(std::span<const cplx> psi) { return std::sqrt(norm_squared(psi)); }

inline void check_dim(std::span<const cplx> psi, const PhononBasis& basis) {
  if (psi.size() != basis.size()) throw DimensionMismatch("state length differs from basis dimension");
}

/// Expected total phonon number sum_m (sum_n m_n) |C_m|^2.
inline double phonon_number(std::span<const cplx> psi, const PhononBasis& basis) {
  check_dim(psi, basis);
  double acc = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) acc += basis.total(i) * std::norm(psi[i]);
  return acc / norm_squared(psi);
}

/// <n_d> for the phonon mode d sites away from the excitation (d = 0..N-1).
inline std::vector<double> relative_phonon_profile(std::span<const cplx> psi, const PhononBasis& basis) {
  check_dim(psi, basis);
  std::vector<double> out(static_cast<std::size_t>(basis.n_sites()), 0.0);
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double w = std::norm(psi[i]);
    if (w == 0.0) continue;
    auto c = basis.config(i);
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += c[d] * w;
  }
  const double n2 = norm_squared(psi);
  for (auto& v : out) v /= n2;
  return out;
}

/// Probability of finding the bare Bloch state: |C_0|^2 at the zero-phonon config.
inline double survival(std::span<const cplx> psi, Index zero_index) {
  return std::norm(psi[zero_index]) / norm_squared(psi);
}

/// Quasiparticle residue of a sector eigenstate: weight of the bare Bloch state.
inline double residue(std::span<const cplx> psi, const PhononBasis& basis) {
  check_dim(psi, basis);
  return survival(psi, zero_phonon_index(basis));
}

struct QuadratureMoments {
  double x_mean = 0.0;
  double p_mean = 0.0;
  double x2 = 0.0;      ///< <x_r^2>
  double p2 = 0.0;      ///< <p_r^2>
  double n_site = 0.0;  ///< <a_r^dagger a_r>, from the diagonal occupation sum
  double s_x = 0.0;
  double s_p = 0.0;

  /// |<x^2> + <p^2> - (2 <a^dagger a> + 1)|
  double identity_defect() const { return std::abs(x2 + p2 - (2.0 * n_site + 1.0)); }
};

/// Single-site quadrature moments for x_r = (a_r + a_r^dagger)/sqrt2, p_r = -i(a_r - a_r^dagger)/sqrt2.
///
/// Each phonon operator A at site r is averaged over the N relative positions
/// (1/N sum_n <T_n m'|A|T_n m>). Second moments are the squared norms
/// ||(a_d +- a_d^dagger) psi||^2 = ||a psi||^2 + ||a^dagger psi||^2 +- 2 Re <a psi|a^dagger psi>,
/// with a^dagger psi taken in the untruncated space (components pushed above the cap M
/// count). n_site comes from the diagonal occupation sum instead, so the identity
/// <x^2> + <p^2> = 2 n_site + 1 checks the ladder bookkeeping.
class QuadratureEvaluator {
 public:
  QuadratureEvaluator(const PhononBasis& basis, const LadderTable& ladder) : basis_(&basis), ladder_(&ladder) {}

  QuadratureMoments operator()(std::span<const cplx> psi) {
    check_dim(psi, *basis_);
    const int n = basis_->n_sites();
    const std::size_t dim = psi.size();
    const double n2 = norm_squared(psi);

    cplx mean_a = 0.0;    // sum_d <a_d>
    double lowered = 0.0; // sum_d ||a_d psi||^2
    double raised = 0.0;  // sum_d ||a_d^dagger psi||^2
    cplx cross = 0.0;     // sum_d <a_d psi | a_d^dagger psi>
    for (std::size_t i = 0; i < dim; ++i) {
      const cplx ci = psi[i];
      const double wi = std::norm(ci);
      auto occ = basis_->config(i);
      for (int d = 0; d < n; ++d) {
        const double amp = std::sqrt(double(occ[d] + 1));
        raised += amp * amp * wi;
        const Index up = ladder_->raise(i, d);
        if (up == kNoIndex) continue;
        const cplx lowered_i = amp * psi[up];  // (a_d psi)_i
        lowered += std::norm(lowered_i);
        mean_a += std::conj(ci) * lowered_i;
        // (a_d^dagger psi)_up = amp * c_i, paired with (a_d psi)_up
        const Index up2 = ladder_->raise(up, d);
        if (up2 != kNoIndex) cross += std::conj(std::sqrt(double(occ[d] + 2)) * psi[up2]) * (amp * ci);
      }
    }
    const double scale = double(n) * n2;
    mean_a /= scale;

    QuadratureMoments q;
    q.x_mean = std::numbers::sqrt2 * mean_a.real();
    q.p_mean = std::numbers::sqrt2 * mean_a.imag();
    q.x2 = 0.5 * (lowered + raised + 2.0 * cross.real()) / scale;
    q.p2 = 0.5 * (lowered + raised - 2.0 * cross.real()) / scale;
    q.n_site = phonon_number(psi, *basis_) / n;
    q.s_x = q.x2 - q.x_mean * q.x_mean;
    q.s_p = q.p2 - q.p_mean * q.p_mean;
    return q;
  }

 private:
  const PhononBasis* basis_;
  const LadderTable* ladder_;
};

inline QuadratureMoments quadrature_variances(std::span<const cplx> psi, const PhononBasis& basis,
                                              const LadderTable& ladder) {
  QuadratureEvaluator eval(basis, ladder);
  return eval(psi);
}

using ReducedDensityMatrix = Eigen::MatrixXcd;

/// Translation overlaps O_s = <psi|T_s|psi> = sum_m conj(C_{T_s m}) C_m, s = 0..N-1,
/// normalized so that O_0 = 1.
inline std::vector<cplx> translation_overlaps(std::span<const cplx> psi, const LadderTable& ladder) {
  if (psi.size() != ladder.size()) throw DimensionMismatch("state length differs from basis dimension");
  const int n = ladder.n_sites();
  const std::size_t dim = psi.size();
  std::vector<Index> target(dim);
  for (std::size_t i = 0; i < dim; ++i) target[i] = static_cast<Index>(i);
  std::vector<cplx> out(static_cast<std::size_t>(n));
  const double n2 = norm_squared(psi);
  for (int s = 0; s < n; ++s) {
    cplx acc = 0.0;
    for (std::size_t i = 0; i < dim; ++i) acc += std::conj(psi[target[i]]) * psi[i];
    out[static_cast<std::size_t>(s)] = acc / n2;
    for (auto& t : target) t = ladder.shift(t);
  }
  return out;
}

/// rho_e(n, n') = N^{-1} e^{i k0 (n - n')} <psi|T_{n-n'}|psi>.
inline ReducedDensityMatrix reduced_density(std::span<const cplx> psi, double k0, const LadderTable& ladder) {
  const int n = ladder.n_sites();
  const auto overlaps = translation_overlaps(psi, ladder);
  ReducedDensityMatrix rho(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const int s = ((a - b) % n + n) % n;
      rho(a, b) = std::polar(1.0 / n, k0 * (a - b)) * overlaps[static_cast<std::size_t>(s)];
    }
  const double tr = rho.trace().real();
  if (std::abs(tr - 1.0) > 1e-10) {
    std::ostringstream os;
    os << "reduced density trace " << tr << " differs from 1";
    throw TraceViolation(os.str());
  }
  return rho;
}

inline constexpr double kSpectrumClamp = 1e-12;
inline constexpr double kSpectrumFailure = 1e-9;

/// Eigenvalues of rho, clipped into [0, 1].
inline std::vector<double> density_spectrum(const ReducedDensityMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
  std::vector<double> xi(static_cast<std::size_t>(rho.rows()));
  for (Eigen::Index i = 0; i < rho.rows(); ++i) {
    double v = es.eigenvalues()(i);
    if (v < -kSpectrumFailure) {
      std::ostringstream os;
      os << "reduced density eigenvalue " << v << " is negative";
      throw NonPhysicalSpectrum(os.str());
    }
    xi[static_cast<std::size_t>(i)] = std::clamp(v, 0.0, 1.0);
  }
  return xi;
}

/// Von Neumann entropy -sum xi ln xi, with 0 ln 0 = 0.
inline double entanglement_entropy(const ReducedDensityMatrix& rho) {
  double s = 0.0;
  for (double xi : density_spectrum(rho))
    if (xi > 0.0) s -= xi * std::log(xi);
  return s;
}

/// First time the piecewise-linear interpolant of `values` reaches `target` from below.
inline std::optional<double> formation_time(std::span<const double> times, std::span<const double> values,
                                            double target) {
  if (times.size() != values.size()) throw DimensionMismatch("time and value series differ in length");
  if (times.empty()) return std::nullopt;
  if (values[0] >= target) return times[0];
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (values[i] >= target) {
      const double v0 = values[i - 1];
      const double v1 = values[i];
      const double f = (target - v0) / (v1 - v0);
      return times[i - 1] + f * (times[i] - times[i - 1]);
    }
  }
  return std::nullopt;
}

struct ObservableRecord {
  double t_ns = 0.0;
  double t_over_tau = 0.0;
  double n_ph = 0.0;
  double survival = 0.0;
  double s_x = 0.0;
  double s_p = 0.0;
  double entropy = 0.0;
  double norm = 0.0;
  double identity_defect = 0.0;
};

/// Evaluates the full observable record for one snapshot of a k0-sector state.
class SnapshotEvaluator {
 public:
  SnapshotEvaluator(const PhononBasis& basis, const LadderTable& ladder, double k0)
      : basis_(&basis), ladder_(&ladder), k0_(k0), zero_(zero_phonon_index(basis)), quad_(basis, ladder) {}

  ObservableRecord operator()(std::span<const cplx> psi, double t_ns, double tau) {
    ObservableRecord r;
    r.t_ns = t_ns;
    r.t_over_tau = t_ns / tau;
    r.norm = norm(psi);
    r.n_ph = phonon_number(psi, *basis_);
    r.survival = survival(psi, zero_);
    const auto q = quad_(psi);
    r.s_x = q.s_x;
    r.s_p = q.s_p;
    r.identity_defect = q.identity_defect();
    r.entropy = entanglement_entropy(reduced_density(psi, k0_, *ladder_));
    return r;
  }

 private:
  const PhononBasis* basis_;
  const LadderTable* ladder_;
  double k0_;
  Index zero_;
  QuadratureEvaluator quad_;
};

}  // namespace polaron
