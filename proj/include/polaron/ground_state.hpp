#pragma once

// Ground-state scans over total-quasimomentum sectors, the K_gs = 0 -> +-K_gs
// transition locator, and the (N, M) truncation convergence sweep.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <sstream>
#include <vector>

#include "polaron/eigensolver.hpp"
#include "polaron/error.hpp"
#include "polaron/fockspace.hpp"
#include "polaron/hamiltonian.hpp"
#include "polaron/model.hpp"
#include "polaron/observables.hpp"
#include "polaron/parallel.hpp"

namespace polaron {

inline constexpr double kDegeneracyTolerance = 1e-9;

struct SectorGroundState {
  int k_index = 0;
  double k_value = 0.0;
  double energy = 0.0;
  double phonon_number = 0.0;
  double residue = 0.0;  ///< Z_k
  double residual = 0.0;
  std::size_t iterations = 0;
  std::vector<double> relative_profile;  ///< <n_d> for d = 0..N-1
};

struct GroundStateSummary {
  int k_index = 0;
  double k_gs = 0.0;
  double energy = 0.0;
  double phonon_number = 0.0;
  double residue = 0.0;
  bool degenerate = false;
  std::vector<SectorGroundState> sectors;  ///< one entry per scanned K, ascending k_index

  const SectorGroundState& ground_sector() const {
    for (const auto& s : sectors)
      if (s.k_index == k_index) return s;
    throw Error("ground sector missing from scan");
  }
};

/// Lanczos settings for a lowest-pair-only solve.
inline LanczosOptions lowest_only(double tol = 1e-9) {
  LanczosOptions o;
  o.tol = tol;
  o.which = Spectrum::Lowest;
  return o;
}

struct ScanOptions {
  LanczosOptions lanczos = lowest_only();
  int workers = 1;
  /// Scan only 0 <= j <= N/2 and mirror the rest (E(K) = E(-K) by time reversal).
  bool use_reflection = false;
};

inline SectorGroundState solve_sector(const ModelParams& params, const KSector& sector, const LanczosOptions& lopts) {
  const auto h = build_sector(params, sector);
  const auto res = extremal_eigs(h, lopts);
  SectorGroundState out;
  out.k_index = sector.k_index;
  out.k_value = sector.k_value;
  out.energy = res.e_min;
  out.residual = res.residual;
  out.iterations = res.iterations;
  out.phonon_number = phonon_number(res.ground_vector, *sector.basis);
  out.residue = residue(res.ground_vector, *sector.basis);
  out.relative_profile = relative_phonon_profile(res.ground_vector, *sector.basis);
  return out;
}

inline GroundStateSummary summarize(std::vector<SectorGroundState> sectors, int n_sites) {
  std::sort(sectors.begin(), sectors.end(), [](const auto& a, const auto& b) { return a.k_index < b.k_index; });
  GroundStateSummary s;
  std::size_t best = 0;
  for (std::size_t i = 1; i < sectors.size(); ++i)
    if (sectors[i].energy < sectors[best].energy) best = i;
  int j = sectors[best].k_index;
  const double e = sectors[best].energy;
  if (j != 0) {
    const int partner = (n_sites - j) % n_sites;
    for (const auto& other : sectors)
      if (other.k_index == partner && partner != j &&
          std::abs(other.energy - e) < kDegeneracyTolerance * std::max(1.0, std::abs(e)))
        s.degenerate = true;
    // report the K > 0 member of a +-K pair
    if (s.degenerate) j = std::min(j, partner);
  }
  s.k_index = j;
  s.sectors = std::move(sectors);
  const auto& g = s.ground_sector();
  s.k_gs = g.k_value;
  s.energy = g.energy;
  s.phonon_number = g.phonon_number;
  s.residue = g.residue;
  return s;
}

inline GroundStateSummary ground_scan(const ModelParams& params, const ScanOptions& opts = {}) {
  auto basis = std::make_shared<const PhononBasis>(params.n_sites, params.max_phonons);
  const int n = params.n_sites;
  const int last = opts.use_reflection ? n / 2 : n - 1;
  std::vector<SectorGroundState> sectors(static_cast<std::size_t>(last + 1));
  parallel_jobs(sectors.size(), opts.workers, [&](std::size_t j) {
    sectors[j] = solve_sector(params, KSector::make(static_cast<int>(j), basis), opts.lanczos);
  });
  if (opts.use_reflection)
    for (int j = last + 1; j < n; ++j) {
      auto mirror = sectors[static_cast<std::size_t>(n - j)];
      mirror.k_index = j;
      mirror.k_value = KSector::momentum_value(j, n);
      std::reverse(mirror.relative_profile.begin() + 1, mirror.relative_profile.end());
      sectors.push_back(std::move(mirror));
    }
  return summarize(std::move(sectors), n);
}

struct CriticalPoint {
  double phi_dc = 0.0;
  double lambda_eff = 0.0;
  int k_index_above = 0;  ///< ground-state sector just past the switch
  std::vector<std::pair<double, double>> trace;  ///< (lambda_eff, E_min(K != 0) - E_min(K = 0))
};

/// Energy gap min_{K != 0} E_0(K) - E_0(K = 0); negative once a finite-K sector wins.
inline double sector_competition(const DeviceParams& dev, int n_sites, int max_phonons, const ScanOptions& opts,
                                 int* winner = nullptr) {
  const auto params = derive_model(dev, n_sites, max_phonons);
  ScanOptions o = opts;
  o.use_reflection = true;
  const auto scan = ground_scan(params, o);
  double e0 = 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : scan.sectors) {
    if (s.k_index == 0) {
      e0 = s.energy;
    } else if (s.energy < best) {
      best = s.energy;
      if (winner) *winner = std::min(s.k_index, n_sites - s.k_index);
    }
  }
  return best - e0;
}

/// Bisects the flux for the level crossing between the K = 0 ground state and the
/// lowest finite-K sector. phi_lo must sit on the K = 0 side, phi_hi past the switch.
inline CriticalPoint locate_critical(DeviceParams dev, int n_sites, int max_phonons, double phi_lo, double phi_hi,
                                     double lambda_tol = 1e-4, const ScanOptions& opts = {}) {
  CriticalPoint cp;
  auto eval = [&](double phi, int* winner) {
    dev.phi_dc = phi;
    const double gap = sector_competition(dev, n_sites, max_phonons, opts, winner);
    cp.trace.emplace_back(lambda_from_device(dev), gap);
    return gap;
  };
  int winner = 0;
  const double g_lo = eval(phi_lo, nullptr);
  const double g_hi = eval(phi_hi, &winner);
  if (!(g_lo > 0.0) || !(g_hi < 0.0)) {
    std::ostringstream os;
    os << "flux bracket does not contain the ground-state switch (gap " << g_lo << " -> " << g_hi << ")";
    throw SweepExhausted(os.str());
  }
  auto lam = [&](double phi) {
    DeviceParams d = dev;
    d.phi_dc = phi;
    return lambda_from_device(d);
  };
  while (lam(phi_hi) - lam(phi_lo) > lambda_tol) {
    const double mid = 0.5 * (phi_lo + phi_hi);
    int w = 0;
    if (eval(mid, &w) > 0.0) {
      phi_lo = mid;
    } else {
      phi_hi = mid;
      winner = w;
    }
  }
  cp.phi_dc = 0.5 * (phi_lo + phi_hi);
  cp.lambda_eff = lam(cp.phi_dc);
  cp.k_index_above = winner;
  return cp;
}

struct SweepSchedule {
  std::vector<int> n_values{5, 7, 9, 11};
  int m_start = 2;
  int m_step = 2;
  int m_max = 20;
};

struct SweepPoint {
  int n_sites = 0;
  int max_phonons = 0;
  double energy = 0.0;
  double phonon_number = 0.0;
};

struct ConvergenceResult {
  int n_sites = 0;
  int max_phonons = 0;
  GroundStateSummary summary;
  std::vector<SweepPoint> trace;
};

namespace detail {

/// Largest relative change between two ground states in energy and in the phonon cloud
/// <n_d> around the excitation (distances common to both lattices). Cloud changes are
/// measured relative to the total phonon number.
inline double ground_change(const GroundStateSummary& a, int n_a, const GroundStateSummary& b, int n_b) {
  double err = std::abs(a.energy - b.energy) / std::max(std::abs(b.energy), 1e-300);
  const auto& pa = a.ground_sector().relative_profile;
  const auto& pb = b.ground_sector().relative_profile;
  const double scale = std::max({a.phonon_number, b.phonon_number, 1e-12});
  const int reach = (std::min(n_a, n_b) - 1) / 2;
  for (int d = -reach; d <= reach; ++d) {
    const double va = pa[static_cast<std::size_t>((d + n_a) % n_a)];
    const double vb = pb[static_cast<std::size_t>((d + n_b) % n_b)];
    err = std::max(err, std::abs(va - vb) / scale);
  }
  return err;
}

}  // namespace detail

/// Smallest (N, M) on the schedule whose ground state changes by at most
/// `target_rel_err` when either N or M is advanced by one schedule step.
inline ConvergenceResult convergence_sweep(const DeviceParams& dev, double target_rel_err,
                                           const SweepSchedule& schedule = {}, const ScanOptions& opts = {}) {
  if (!(target_rel_err > 0.0)) throw InvalidArgument("target_rel_err must be positive");
  ConvergenceResult out;
  std::vector<std::pair<std::pair<int, int>, GroundStateSummary>> cache;
  auto solve = [&](int n, int m) -> const GroundStateSummary& {
    for (const auto& [key, val] : cache)
      if (key.first == n && key.second == m) return val;
    ScanOptions o = opts;
    o.use_reflection = true;
    auto s = ground_scan(derive_model(dev, n, m), o);
    out.trace.push_back({n, m, s.energy, s.phonon_number});
    cache.emplace_back(std::make_pair(n, m), std::move(s));
    return cache.back().second;
  };

  const auto& ns = schedule.n_values;
  for (std::size_t ni = 0; ni + 1 < ns.size(); ++ni) {
    const int n = ns[ni];
    for (int m = schedule.m_start; m + schedule.m_step <= schedule.m_max; m += schedule.m_step) {
      const GroundStateSummary here = solve(n, m);
      const double dm = detail::ground_change(here, n, solve(n, m + schedule.m_step), n);
      if (dm > target_rel_err) continue;
      const double dn = detail::ground_change(here, n, solve(ns[ni + 1], m), ns[ni + 1]);
      if (dn > target_rel_err) break;  // M converged at this N; the lattice is too short
      out.n_sites = n;
      out.max_phonons = m;
      out.summary = here;
      return out;
    }
  }
  std::ostringstream os;
  os << "no (N, M) on the schedule reached relative change " << target_rel_err;
  throw SweepExhausted(os.str());
}

}  // namespace polaron
