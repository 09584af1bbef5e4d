#pragma once

// Interaction quench: the bare Bloch state |k0> (zero phonons) evolved under the
// coupled Hamiltonian of its own K-sector.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "polaron/chebyshev.hpp"
#include "polaron/eigensolver.hpp"
#include "polaron/error.hpp"
#include "polaron/fockspace.hpp"
#include "polaron/hamiltonian.hpp"
#include "polaron/model.hpp"
#include "polaron/observables.hpp"

namespace polaron {

/// Loads the sector matrix from `cache_dir` when present, otherwise builds it (and
/// stores it there if a directory was given).
inline KSectorHamiltonian obtain_sector(const ModelParams& params, const KSector& sector, int workers = 1,
                                        const std::string& cache_dir = {}) {
  if (cache_dir.empty()) {
    SectorBuildOptions o;
    o.workers = workers;
    return build_sector(params, sector, o);
  }
  namespace fs = std::filesystem;
  // the file name carries everything the matrix depends on
  char name[160];
  std::snprintf(name, sizeof name, "sector_N%d_M%d_K%d_t%.12g_g%.12g_w%.12g.csr", params.n_sites,
                params.max_phonons, sector.k_index, params.t0, params.g, params.delta_omega);
  const fs::path path = fs::path(cache_dir) / name;
  if (fs::exists(path)) {
    auto h = load_sector(path.string(), params, sector);
    h.set_workers(workers);
    return h;
  }
  SectorBuildOptions o;
  o.workers = workers;
  auto h = build_sector(params, sector, o);
  fs::create_directories(cache_dir);
  save_sector(path.string(), h);
  return h;
}

struct QuenchOptions {
  double tau = 1.0;           ///< time unit in ns
  double t_final = 100.0;     ///< in units of tau
  double dt = 0.05;           ///< in units of tau
  double tail_tol = 1e-12;
  std::optional<int> fixed_order;
  double alpha_c = 1e-3;
  std::size_t stride = 1;     ///< record every `stride` steps
  double bounds_tol = 1e-7;
  std::uint64_t seed = 20240901;
  bool track_energy = true;
  int workers = 1;
  std::string cache_dir;
  /// Ends the run early once it returns true for a recorded snapshot.
  std::function<bool(const ObservableRecord&)> stop_when;
};

struct QuenchResult {
  std::vector<ObservableRecord> records;
  std::size_t steps = 0;
  int n_cheb = 0;
  double e_min = 0.0;
  double e_max = 0.0;
  std::size_t dimension = 0;
  double max_norm_drift = 0.0;
  double max_identity_defect = 0.0;
  double max_energy_drift = 0.0;  ///< relative to |<H>(0)| (absolute when that vanishes)
  bool stopped_early = false;
};

using RecordObserver = std::function<void(const ObservableRecord&)>;

inline QuenchResult run_quench(const ModelParams& params, int k0_index, const QuenchOptions& opts,
                               const RecordObserver& on_record = {}) {
  if (!(opts.tau > 0.0) || !(opts.dt > 0.0) || opts.t_final < 0.0) throw InvalidArgument("bad quench time grid");
  if (opts.stride == 0) throw InvalidArgument("observable stride must be positive");
  const int n = params.n_sites;
  if (k0_index < 0 || k0_index >= n) throw InvalidArgument("k0 index outside [0, N)");

  auto basis = std::make_shared<const PhononBasis>(params.n_sites, params.max_phonons);
  const LadderTable ladder(*basis);
  const KSector sector = KSector::make(k0_index, basis);
  const auto h = obtain_sector(params, sector, opts.workers, opts.cache_dir);

  QuenchResult out;
  out.dimension = h.dim();
  const auto bounds = spectral_bounds(h, opts.bounds_tol, 3000, opts.seed);
  out.e_min = bounds.lower;
  out.e_max = bounds.upper;
  const RescaledOperator op(h, bounds.lower, bounds.upper, opts.alpha_c);
  const double dt_ns = opts.dt * opts.tau;
  const auto pl = plan(op, dt_ns, opts.tail_tol, opts.fixed_order);
  out.n_cheb = pl.n_cheb;
  out.steps = static_cast<std::size_t>(std::llround(opts.t_final / opts.dt));

  StateVector psi(h.dim(), cplx{});
  psi[zero_phonon_index(*basis)] = 1.0;

  SnapshotEvaluator snapshot(*basis, ladder, sector.k_value);
  std::vector<cplx> hpsi(opts.track_energy ? h.dim() : 0);
  double e0 = 0.0;
  auto energy = [&](std::span<const cplx> state) {
    h.apply(state, hpsi);
    return linalg::dot(state, hpsi).real() / norm_squared(state);
  };
  auto emit = [&](std::span<const cplx> state, double t_ns) {
    const auto rec = snapshot(state, t_ns, opts.tau);
    out.max_identity_defect = std::max(out.max_identity_defect, rec.identity_defect);
    if (opts.track_energy) {
      const double drift = std::abs(energy(state) - e0);
      out.max_energy_drift = std::max(out.max_energy_drift, std::abs(e0) > 1e-300 ? drift / std::abs(e0) : drift);
    }
    out.records.push_back(rec);
    if (on_record) on_record(rec);
  };
  if (opts.track_energy) e0 = energy(psi);
  emit(psi, 0.0);

  bool stop = opts.stop_when && opts.stop_when(out.records.back());
  ChebyshevStepper stepper(pl);
  for (std::size_t step_index = 1; step_index <= out.steps && !stop; ++step_index) {
    const double nrm = stepper.advance(psi);
    out.max_norm_drift = std::max(out.max_norm_drift, std::abs(nrm - 1.0));
    check_unitarity(nrm, 1.0, step_index);
    if (step_index % opts.stride == 0 || step_index == out.steps) {
      emit(psi, static_cast<double>(step_index) * dt_ns);
      stop = opts.stop_when && opts.stop_when(out.records.back());
    }
  }
  out.stopped_early = stop;
  return out;
}

/// Formation time in units of tau: first crossing of n_ph(t) with `reference`.
inline std::optional<double> formation_time(const std::vector<ObservableRecord>& records, double reference) {
  std::vector<double> t;
  std::vector<double> v;
  t.reserve(records.size());
  v.reserve(records.size());
  for (const auto& r : records) {
    t.push_back(r.t_over_tau);
    v.push_back(r.n_ph);
  }
  return formation_time(std::span<const double>(t), std::span<const double>(v), reference);
}

}  // namespace polaron
