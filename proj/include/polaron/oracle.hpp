#pragma once

// Brute-force reference over the full real-space space |n>_e (x) |m>_ph, with m the
// absolute (site-indexed) phonon occupations. Everything here is dense and meant for
// tiny lattices; it is the yardstick for the sector code.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "polaron/chebyshev.hpp"
#include "polaron/error.hpp"
#include "polaron/fockspace.hpp"
#include "polaron/hamiltonian.hpp"
#include "polaron/model.hpp"
#include "polaron/observables.hpp"

namespace polaron::oracle {

inline constexpr std::size_t kDenseLimit = 20000;

struct DenseSystem {
  ModelParams params;
  std::shared_ptr<const PhononBasis> basis;
  Eigen::MatrixXcd hamiltonian;

  std::size_t dimension() const { return static_cast<std::size_t>(hamiltonian.rows()); }
  Eigen::Index index(int site, std::size_t config) const {
    return static_cast<Eigen::Index>(static_cast<std::size_t>(site) * basis->size() + config);
  }
};

namespace detail {

// adds coeff * (a_r + a_r^dagger) applied to |m>, targeted at excitation site `to`
inline void add_displacement(DenseSystem& sys, int from, int to, std::size_t col_cfg, int r, cplx coeff) {
  const auto& basis = *sys.basis;
  PhononConfig m = basis.config_vector(col_cfg);
  const int total = basis.total(col_cfg);
  const int occ = m[static_cast<std::size_t>(r)];
  const Eigen::Index col = sys.index(from, col_cfg);
  if (occ > 0) {
    m[static_cast<std::size_t>(r)] = occ - 1;
    sys.hamiltonian(sys.index(to, basis.index_of(m)), col) += coeff * std::sqrt(double(occ));
  }
  if (total < basis.max_phonons()) {
    m[static_cast<std::size_t>(r)] = occ + 1;
    sys.hamiltonian(sys.index(to, basis.index_of(m)), col) += coeff * std::sqrt(double(occ + 1));
  }
}

}  // namespace detail

/// Real-space Hamiltonian
///   -t0 sum_n (c_n^dag c_{n+1} + h.c.) + dw sum_n a_n^dag a_n
///   + g dw sum_n [(c_n^dag c_{n+1} + h.c.)(x_{n+1} - x_n) - c_n^dag c_n (x_{n+1} - x_{n-1})]
/// with periodic site labels.
inline DenseSystem build_dense(const ModelParams& params) {
  auto basis = std::make_shared<const PhononBasis>(params.n_sites, params.max_phonons);
  const int n = params.n_sites;
  const std::size_t dim = static_cast<std::size_t>(n) * basis->size();
  if (dim > kDenseLimit) {
    std::ostringstream os;
    os << "dense oracle dimension " << dim << " exceeds " << kDenseLimit;
    throw SizeGuard(os.str());
  }
  DenseSystem sys{params, basis, Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))};
  const double gdw = params.coupling_energy();
  for (int site = 0; site < n; ++site) {
    const int right = (site + 1) % n;
    const int left = (site + n - 1) % n;
    for (std::size_t c = 0; c < basis->size(); ++c) {
      const Eigen::Index col = sys.index(site, c);
      sys.hamiltonian(col, col) += params.delta_omega * basis->total(c);
      // excitation on `site` hops to either neighbour
      for (int to : {left, right}) {
        sys.hamiltonian(sys.index(to, c), col) += -params.t0;
        // bond (lo, lo + 1) carries x_{lo+1} - x_lo
        const int lo = (to == right) ? site : to;
        const int hi = (lo + 1) % n;
        detail::add_displacement(sys, site, to, c, hi, gdw);
        detail::add_displacement(sys, site, to, c, lo, -gdw);
      }
      // breathing: -g dw (x_{n+1} - x_{n-1})
      detail::add_displacement(sys, site, site, c, right, -gdw);
      detail::add_displacement(sys, site, site, c, left, gdw);
    }
  }
  return sys;
}

/// Total lattice translation |n, m> -> |n + 1, T_1 m>.
inline Eigen::MatrixXcd translation_operator(const DenseSystem& sys) {
  const auto& basis = *sys.basis;
  const int n = basis.n_sites();
  const auto dim = static_cast<Eigen::Index>(sys.dimension());
  Eigen::MatrixXcd t = Eigen::MatrixXcd::Zero(dim, dim);
  for (int site = 0; site < n; ++site)
    for (std::size_t c = 0; c < basis.size(); ++c) {
      const auto moved = translate(basis.config_vector(c), 1);
      t(sys.index((site + 1) % n, basis.index_of(moved)), sys.index(site, c)) = 1.0;
    }
  return t;
}

/// Columns are the momentum states |K, m> = N^{-1/2} sum_j e^{iKj} |j> (x) |T_j m>.
inline Eigen::MatrixXcd sector_embedding(const DenseSystem& sys, int k_index) {
  const auto& basis = *sys.basis;
  const int n = basis.n_sites();
  const double k = KSector::momentum_value(k_index, n);
  Eigen::MatrixXcd v = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(sys.dimension()),
                                              static_cast<Eigen::Index>(basis.size()));
  const double amp = 1.0 / std::sqrt(double(n));
  for (std::size_t c = 0; c < basis.size(); ++c) {
    const auto m = basis.config_vector(c);
    for (int j = 0; j < n; ++j)
      v(sys.index(j, basis.index_of(translate(m, j))), static_cast<Eigen::Index>(c)) = std::polar(amp, k * j);
  }
  return v;
}

inline Eigen::MatrixXcd momentum_projector(const DenseSystem& sys, int k_index) {
  const auto v = sector_embedding(sys, k_index);
  return v * v.adjoint();
}

/// ||[H, T]||_F, zero when total quasimomentum is conserved.
inline double commutator_norm(const DenseSystem& sys) {
  const auto t = translation_operator(sys);
  return (sys.hamiltonian * t - t * sys.hamiltonian).norm();
}

/// Spectrum of P_K H P_K on the range of P_K, ascending.
inline std::vector<double> block_spectrum(const DenseSystem& sys, int k_index) {
  const auto v = sector_embedding(sys, k_index);
  const Eigen::MatrixXcd block = v.adjoint() * sys.hamiltonian * v;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(block, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size()};
}

struct Diagonalized {
  Eigen::VectorXd values;
  Eigen::MatrixXcd vectors;
};

inline Diagonalized diagonalize(const Eigen::MatrixXcd& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  return {es.eigenvalues(), es.eigenvectors()};
}

/// V e^{-i Lambda t} V^dagger psi0.
inline Eigen::VectorXcd exact_evolve(const Diagonalized& eig, const Eigen::VectorXcd& psi0, double t) {
  Eigen::VectorXcd coeffs = eig.vectors.adjoint() * psi0;
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) coeffs(i) *= std::polar(1.0, -eig.values(i) * t);
  return eig.vectors * coeffs;
}

/// rho(n, n') = sum_m psi(n, m) conj(psi(n', m)).
inline Eigen::MatrixXcd exact_partial_trace(const Eigen::VectorXcd& state, const DenseSystem& sys) {
  const int n = sys.basis->n_sites();
  const std::size_t d = sys.basis->size();
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      cplx acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) acc += state(sys.index(a, c)) * std::conj(state(sys.index(b, c)));
      rho(a, b) = acc;
    }
  return rho;
}

inline Eigen::VectorXcd embed(const DenseSystem& sys, int k_index, std::span<const cplx> sector_state) {
  const Eigen::Map<const Eigen::VectorXcd> amp(sector_state.data(), static_cast<Eigen::Index>(sector_state.size()));
  return sector_embedding(sys, k_index) * amp;
}

/// Dense copy of a sparse sector matrix.
inline Eigen::MatrixXcd to_dense(const CsrMatrix& m) {
  const auto d = static_cast<Eigen::Index>(m.dim);
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(d, d);
  for (std::size_t i = 0; i < m.dim; ++i)
    for (std::uint64_t p = m.row_ptr[i]; p < m.row_ptr[i + 1]; ++p)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(m.col[p])) = m.value(p);
  return out;
}

inline std::vector<double> sector_spectrum(const KSectorHamiltonian& h) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(to_dense(h.matrix()), Eigen::EigenvaluesOnly);
  return {es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size()};
}

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct SuiteOptions {
  double dt = 0.05;  ///< in units of 1/t0
  std::size_t steps = 50;
  int k0_index = 1;
  double peierls_sign = 1.0;
};

/// Sector code against the dense reference on one small instance.
inline std::vector<Check> run_suite(const ModelParams& params, const SuiteOptions& opts = {}) {
  std::vector<Check> out;
  auto record = [&](std::string name, double value, double tol) {
    out.push_back({std::move(name), value, tol, value <= tol});
  };
  const std::string tag = "N=" + std::to_string(params.n_sites) + ",M=" + std::to_string(params.max_phonons);
  const auto sys = build_dense(params);
  const int n = params.n_sites;

  record(tag + " hermiticity", (sys.hamiltonian - sys.hamiltonian.adjoint()).norm(), 1e-13);
  record(tag + " [H,T] commutator", commutator_norm(sys), 1e-10);

  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(sys.hamiltonian.rows(), sys.hamiltonian.cols());
  for (int k = 0; k < n; ++k) sum += momentum_projector(sys, k);
  record(tag + " projector completeness",
         (sum - Eigen::MatrixXcd::Identity(sum.rows(), sum.cols())).cwiseAbs().maxCoeff(), 1e-12);

  SectorBuildOptions bopts;
  bopts.peierls_sign = opts.peierls_sign;
  double spec_err = 0.0;
  std::vector<KSectorHamiltonian> sectors;
  for (int k = 0; k < n; ++k) {
    sectors.push_back(build_sector(params, KSector::make(k, sys.basis), bopts));
    const auto a = sector_spectrum(sectors.back());
    const auto b = block_spectrum(sys, k);
    for (std::size_t i = 0; i < a.size(); ++i) spec_err = std::max(spec_err, std::abs(a[i] - b[i]));
  }
  record(tag + " block spectra", spec_err, 1e-10);

  // Chebyshev trajectory of the bare Bloch state against the exact exponential
  const int k0 = ((opts.k0_index % n) + n) % n;
  const auto& h = sectors[static_cast<std::size_t>(k0)];
  const auto spectrum = sector_spectrum(h);
  const RescaledOperator op(h, spectrum.front(), spectrum.back(), 1e-3);
  const double dt = opts.dt / std::max(params.t0, 1e-12);
  const auto pl = plan(op, dt, 1e-14);
  StateVector psi(h.dim(), cplx{});
  psi[zero_phonon_index(*sys.basis)] = 1.0;
  const auto eig = diagonalize(sys.hamiltonian);
  const Eigen::VectorXcd start = embed(sys, k0, psi);
  double traj_err = 0.0;
  double rdm_err = 0.0;
  const LadderTable ladder(*sys.basis);
  const double kval = KSector::momentum_value(k0, n);
  evolve(pl, psi, opts.steps, [&](std::size_t s, double t, std::span<const cplx> state) {
    const Eigen::VectorXcd exact = exact_evolve(eig, start, t);
    const Eigen::VectorXcd mine = embed(sys, k0, state);
    traj_err = std::max(traj_err, (exact - mine).cwiseAbs().maxCoeff());
    if (s % 10 == 0) {
      const auto rho = reduced_density(state, kval, ladder);
      rdm_err = std::max(rdm_err, (rho - exact_partial_trace(exact, sys)).cwiseAbs().maxCoeff());
    }
  });
  record(tag + " chebyshev vs exact (" + std::to_string(opts.steps) + " steps)", traj_err, 1e-9);
  record(tag + " reduced density vs partial trace", rdm_err, 1e-10);
  return out;
}

}  // namespace polaron::oracle
