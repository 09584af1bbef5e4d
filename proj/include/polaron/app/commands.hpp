#pragma once

// The experiment runner behind the `polaron` executable. Each command reads a resolved
// RunConfig, writes its data files into output_dir and returns an exit status.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "polaron/app/config.hpp"
#include "polaron/error.hpp"
#include "polaron/ground_state.hpp"
#include "polaron/model.hpp"
#include "polaron/oracle.hpp"
#include "polaron/parallel.hpp"
#include "polaron/quench.hpp"

namespace polaron::app {

inline constexpr const char* kVersion = "1.0.0";

enum ExitCode : int { kOk = 0, kScientificFailure = 1, kUsage = 2 };

using json = nlohmann::ordered_json;

inline int resolve_workers(const RunConfig& cfg) { return cfg.workers > 0 ? cfg.workers : workers_from_env(1); }

/// Time unit tau_ec in ns.
inline double time_unit(const RunConfig& cfg) { return reference_time(cfg.device(), cfg.tau_phi_dc); }

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline json model_json(const ModelParams& p, double tau_ns) {
  json j;
  j["n_sites"] = p.n_sites;
  j["max_phonons"] = p.max_phonons;
  j["t0_rad_per_ns"] = p.t0;
  j["g"] = p.g;
  j["delta_omega_rad_per_ns"] = p.delta_omega;
  j["lambda_eff"] = p.lambda_eff;
  j["tau_ec_ns"] = tau_ns;
  return j;
}

inline json base_metadata(const RunConfig& cfg, const std::string& command) {
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["config"] = to_json(cfg);
  return j;
}

/// CSV with a single '#'-prefixed JSON metadata line, then the column header.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const json& meta, const std::vector<std::string>& columns)
      : path_(path), os_(path, std::ios::trunc) {
    if (!os_) throw Error("cannot open " + path.string() + " for writing");
    os_ << "# " << meta.dump() << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
    os_ << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
    os_ << '\n';
  }

  void close() {
    os_.close();
    if (!os_) throw Error("write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream os_;
};

inline std::filesystem::path prepare_output(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Wall-clock facts live beside the data file so the CSV itself stays byte-reproducible.
inline void write_sidecar(const std::filesystem::path& path, const json& extra, double seconds) {
  json j = extra;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  j["finished_utc"] = stamp;
  j["wall_seconds"] = seconds;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << j.dump(2) << '\n';
}

inline ScanOptions scan_options(const RunConfig& cfg, int workers) {
  ScanOptions o;
  o.lanczos.tol = cfg.lanczos_tol;
  o.lanczos.basis_cap = static_cast<std::size_t>(cfg.basis_cap);
  o.lanczos.seed = cfg.rng_seed;
  o.workers = workers;
  o.use_reflection = true;
  return o;
}

inline double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------- ground

inline json summary_json(const GroundStateSummary& s) {
  json j;
  j["k_gs_index"] = s.k_index;
  j["k_gs"] = s.k_gs;
  j["e_gs"] = s.energy;
  j["nbar_ph"] = s.phonon_number;
  j["z_gs"] = s.residue;
  j["degenerate"] = s.degenerate;
  return j;
}

inline int cmd_ground(const RunConfig& cfg, std::ostream& out = std::cout) {
  const auto start = std::chrono::steady_clock::now();
  const auto dir = prepare_output(cfg);
  const int workers = resolve_workers(cfg);
  const double tau = time_unit(cfg);
  const auto opts = scan_options(cfg, workers);
  const DeviceParams dev = cfg.device();
  const int m = cfg.ground_max_phonons;

  const auto params = derive_model(dev, cfg.n_sites, m);
  const auto scan = ground_scan(params, opts);
  json meta = base_metadata(cfg, "ground");
  meta["model"] = model_json(params, tau);
  meta["summary"] = summary_json(scan);
  {
    CsvWriter csv(dir / "ground.csv", meta, {"k_index", "k", "energy", "n_ph", "residue", "residual"});
    for (const auto& s : scan.sectors)
      csv.row({std::to_string(s.k_index), fmt(s.k_value), fmt(s.energy), fmt(s.phonon_number), fmt(s.residue),
               fmt(s.residual)});
    csv.close();
  }
  out << "lambda_eff " << fmt(params.lambda_eff) << "  K_gs " << fmt(scan.k_gs) << " (j=" << scan.k_index << ")"
      << (scan.degenerate ? " +-pair" : "") << "  E_gs " << fmt(scan.energy) << "  Nbar_ph "
      << fmt(scan.phonon_number) << "  Z_gs " << fmt(scan.residue) << '\n';

  json result;
  result["summary"] = summary_json(scan);
  if (cfg.phi_steps > 0) {
    // flux grid, endpoints included
    json switch_at = nullptr;
    std::vector<std::pair<double, GroundStateSummary>> points;
    for (int i = 0; i <= cfg.phi_steps; ++i) {
      DeviceParams d = dev;
      d.phi_dc = cfg.phi_min + (cfg.phi_max - cfg.phi_min) * i / cfg.phi_steps;
      points.emplace_back(d.phi_dc, ground_scan(derive_model(d, cfg.n_sites, m), opts));
    }
    json sweep_meta = base_metadata(cfg, "ground");
    CsvWriter csv(dir / "ground_sweep.csv", sweep_meta,
                  {"phi_over_pi", "lambda_eff", "k_gs_index", "k_gs", "energy", "n_ph", "residue", "degenerate"});
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& [phi, s] = points[i];
      DeviceParams d = dev;
      d.phi_dc = phi;
      const double lam = lambda_from_device(d);
      csv.row({fmt(phi / std::numbers::pi), fmt(lam), std::to_string(s.k_index), fmt(s.k_gs), fmt(s.energy),
               fmt(s.phonon_number), fmt(s.residue), s.degenerate ? "1" : "0"});
      if (i > 0 && switch_at.is_null() && points[i - 1].second.k_index == 0 && s.k_index != 0) {
        DeviceParams lo = dev;
        lo.phi_dc = points[i - 1].first;
        switch_at = {{"phi_lo_over_pi", points[i - 1].first / std::numbers::pi},
                     {"phi_hi_over_pi", phi / std::numbers::pi},
                     {"lambda_lo", lambda_from_device(lo)},
                     {"lambda_hi", lam}};
      }
    }
    csv.close();
    result["grid_switch"] = switch_at;
    if (switch_at.is_null()) {
      out << "no K_gs = 0 -> +-K_gs switch on the flux grid\n";
    } else {
      out << "switch between lambda_eff " << fmt(switch_at["lambda_lo"].get<double>()) << " and "
          << fmt(switch_at["lambda_hi"].get<double>()) << '\n';
    }
  }
  if (cfg.locate_critical) {
    double lo = cfg.phi_min;
    double hi = cfg.phi_max;
    if (result.contains("grid_switch") && !result["grid_switch"].is_null()) {
      lo = result["grid_switch"]["phi_lo_over_pi"].get<double>() * std::numbers::pi;
      hi = result["grid_switch"]["phi_hi_over_pi"].get<double>() * std::numbers::pi;
    }
    const auto cp = locate_critical(dev, cfg.n_sites, m, lo, hi, cfg.lambda_tol, opts);
    result["critical"] = {{"phi_dc_over_pi", cp.phi_dc / std::numbers::pi},
                          {"lambda_c", cp.lambda_eff},
                          {"lambda_tol", cfg.lambda_tol},
                          {"k_index_above", cp.k_index_above}};
    out << "lambda_c " << fmt(cp.lambda_eff) << " at phi_dc " << fmt(cp.phi_dc / std::numbers::pi) << " pi\n";
  }
  write_sidecar(dir / "ground.run.json", result, elapsed(start));
  return kOk;
}

// ---------------------------------------------------------------- quench

inline QuenchOptions quench_options(const RunConfig& cfg, int workers) {
  QuenchOptions q;
  q.tau = time_unit(cfg);
  q.t_final = cfg.t_final;
  q.dt = cfg.dt;
  q.tail_tol = cfg.tail_tol;
  if (cfg.fixed_order > 0) q.fixed_order = cfg.fixed_order;
  q.alpha_c = cfg.alpha_c;
  q.stride = static_cast<std::size_t>(cfg.observable_stride);
  q.seed = cfg.rng_seed;
  q.workers = workers;
  q.cache_dir = cfg.cache_dir;
  return q;
}

/// Ground-state phonon number used as the formation threshold, with the sector ground
/// state of k0 (its overlap with the bare state is the initial ground-state weight).
struct FormationReference {
  double nbar = 0.0;
  int k_gs_index = 0;
  double initial_weight = 0.0;  ///< |<k0 ground | bare k0>|^2
};

inline FormationReference formation_reference(const RunConfig& cfg, const DeviceParams& dev, int k0_index,
                                              int workers) {
  const auto params = derive_model(dev, cfg.n_sites, cfg.ground_max_phonons);
  const auto scan = ground_scan(params, scan_options(cfg, workers));
  FormationReference ref;
  ref.k_gs_index = scan.k_index;
  const auto& at_k0 = scan.sectors[static_cast<std::size_t>(k0_index)];
  ref.nbar = cfg.nbar_at == "k0" ? at_k0.phonon_number : scan.phonon_number;
  ref.initial_weight = at_k0.residue;
  return ref;
}

inline json tau_sp_json(const std::optional<double>& t) {
  if (t) return *t;
  return "not_reached";
}

inline int cmd_quench(const RunConfig& cfg, std::ostream& out = std::cout) {
  const auto start = std::chrono::steady_clock::now();
  const auto dir = prepare_output(cfg);
  const int workers = resolve_workers(cfg);
  const DeviceParams dev = cfg.device();
  const auto params = derive_model(dev, cfg.n_sites, cfg.max_phonons);
  const auto qopts = quench_options(cfg, workers);

  const auto ref = formation_reference(cfg, dev, cfg.k0_index, workers);
  const auto res = run_quench(params, cfg.k0_index, qopts);
  const auto tau_sp = formation_time(res.records, ref.nbar);

  json meta = base_metadata(cfg, "quench");
  meta["model"] = model_json(params, qopts.tau);
  meta["k0"] = KSector::momentum_value(cfg.k0_index, cfg.n_sites);
  meta["dimension"] = res.dimension;
  meta["spectral_bounds"] = {res.e_min, res.e_max};
  meta["chebyshev_order"] = res.n_cheb;
  meta["steps"] = res.steps;
  meta["nbar_reference"] = ref.nbar;
  meta["k_gs_index"] = ref.k_gs_index;
  meta["initial_ground_weight"] = ref.initial_weight;
  meta["tau_sp_over_tau_ec"] = tau_sp_json(tau_sp);
  meta["max_norm_drift"] = res.max_norm_drift;
  meta["max_identity_defect"] = res.max_identity_defect;
  meta["max_relative_energy_drift"] = res.max_energy_drift;

  CsvWriter csv(dir / "quench.csv", meta,
                {"t_ns", "t_over_tau_ec", "n_ph", "survival", "s_x", "s_p", "entropy", "norm"});
  for (const auto& r : res.records)
    csv.row({fmt(r.t_ns), fmt(r.t_over_tau), fmt(r.n_ph), fmt(r.survival), fmt(r.s_x), fmt(r.s_p), fmt(r.entropy),
             fmt(r.norm)});
  csv.close();
  write_sidecar(dir / "quench.run.json", {{"data", "quench.csv"}, {"workers", workers}}, elapsed(start));

  out << "D = " << res.dimension << ", N_C = " << res.n_cheb << ", " << res.steps << " steps, max |norm-1| "
      << fmt(res.max_norm_drift) << '\n';
  out << "Nbar_ref " << fmt(ref.nbar) << "  tau_sp/tau_ec "
      << (tau_sp ? fmt(*tau_sp) : std::string("not reached")) << "  ground weight " << fmt(ref.initial_weight)
      << '\n';
  return kOk;
}

// ---------------------------------------------------------------- sweep

struct SweepRow {
  int k0_index = 0;
  double phi_dc = 0.0;
  double lambda_eff = 0.0;
  std::optional<double> tau_sp;
  double nbar = 0.0;
  int k_gs_index = 0;
  std::string status = "ok";
};

/// Formation times over the sweep_phi x sweep_k0 grid; each quench stops once n_ph
/// reaches the threshold. Failing points are recorded and the sweep carries on.
inline std::vector<SweepRow> formation_sweep(const RunConfig& cfg, int workers) {
  const auto phis = cfg.sweep_phi_list();
  const auto k0s = cfg.sweep_k0_list();
  std::vector<SweepRow> rows;
  for (double phi : phis)
    for (int k : k0s) {
      SweepRow r;
      r.k0_index = k;
      r.phi_dc = phi;
      rows.push_back(r);
    }

  std::vector<std::optional<FormationReference>> refs(phis.size());
  std::vector<std::string> ref_errors(phis.size());
  parallel_jobs(phis.size(), workers, [&](std::size_t i) {
    DeviceParams d = cfg.device();
    d.phi_dc = phis[i];
    try {
      refs[i] = formation_reference(cfg, d, 0, 1);
    } catch (const std::exception& e) {
      ref_errors[i] = e.what();
    }
  });

  parallel_jobs(rows.size(), workers, [&](std::size_t i) {
    auto& row = rows[i];
    const std::size_t pi_index = i / k0s.size();
    DeviceParams d = cfg.device();
    d.phi_dc = row.phi_dc;
    try {
      row.lambda_eff = lambda_from_device(d);
      if (!refs[pi_index]) throw Error(ref_errors[pi_index]);
      const auto& ref = *refs[pi_index];
      row.k_gs_index = ref.k_gs_index;
      row.nbar = ref.nbar;
      if (cfg.nbar_at == "k0") {
        RunConfig c = cfg;
        c.phi_dc = row.phi_dc;
        row.nbar = formation_reference(c, d, row.k0_index, 1).nbar;
      }
      auto q = quench_options(cfg, 1);
      const double target = row.nbar;
      q.stop_when = [target](const ObservableRecord& r) { return r.n_ph >= target; };
      q.track_energy = false;
      const auto res = run_quench(derive_model(d, cfg.n_sites, cfg.max_phonons), row.k0_index, q);
      row.tau_sp = formation_time(res.records, target);
      if (!row.tau_sp) row.status = "not_reached";
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
  });
  return rows;
}

inline int cmd_sweep(const RunConfig& cfg, std::ostream& out = std::cout) {
  const auto start = std::chrono::steady_clock::now();
  const auto dir = prepare_output(cfg);
  const int workers = resolve_workers(cfg);
  const auto rows = formation_sweep(cfg, workers);

  json meta = base_metadata(cfg, "sweep");
  meta["tau_ec_ns"] = time_unit(cfg);
  CsvWriter csv(dir / "formation.csv", meta,
                {"k0_index", "k0", "phi_over_pi", "lambda_eff", "tau_sp_over_tau_ec", "nbar_ref", "k_gs_index",
                 "status"});
  int errors = 0;
  for (const auto& r : rows) {
    csv.row({std::to_string(r.k0_index), fmt(KSector::momentum_value(r.k0_index, cfg.n_sites)),
             fmt(r.phi_dc / std::numbers::pi), fmt(r.lambda_eff), r.tau_sp ? fmt(*r.tau_sp) : "nan", fmt(r.nbar),
             std::to_string(r.k_gs_index), "\"" + r.status + "\""});
    out << "phi " << fmt(r.phi_dc / std::numbers::pi) << "pi  k0 j=" << r.k0_index << "  tau_sp/tau_ec "
        << (r.tau_sp ? fmt(*r.tau_sp) : r.status) << '\n';
    if (r.status.rfind("error", 0) == 0) ++errors;
  }
  csv.close();
  write_sidecar(dir / "formation.run.json", {{"data", "formation.csv"}, {"workers", workers}, {"errors", errors}},
                elapsed(start));
  return errors ? kScientificFailure : kOk;
}

// ---------------------------------------------------------------- verify / oracle-check

inline void print_checks(const std::vector<oracle::Check>& checks, std::ostream& out) {
  for (const auto& c : checks) {
    char line[200];
    std::snprintf(line, sizeof line, "%-4s %-52s %12.3e  (tol %.0e)\n", c.pass ? "ok" : "FAIL", c.name.c_str(),
                  c.value, c.tolerance);
    out << line;
  }
}

inline std::vector<oracle::Check> oracle_checks(const RunConfig& cfg, double peierls_sign) {
  std::vector<oracle::Check> all;
  for (int n : {4, 5}) {
    oracle::SuiteOptions o;
    o.peierls_sign = peierls_sign;
    auto part = oracle::run_suite(derive_model(cfg.device(), n, 2), o);
    all.insert(all.end(), part.begin(), part.end());
  }
  return all;
}

inline bool all_pass(const std::vector<oracle::Check>& checks) {
  for (const auto& c : checks)
    if (!c.pass) return false;
  return true;
}

inline int cmd_oracle_check(const RunConfig& cfg, bool mutate_peierls, std::ostream& out = std::cout) {
  if (mutate_peierls) out << "(Peierls term sign flipped in the sector code)\n";
  const auto checks = oracle_checks(cfg, mutate_peierls ? -1.0 : 1.0);
  print_checks(checks, out);
  const bool ok = all_pass(checks);
  out << (ok ? "all checks passed\n" : "oracle mismatch\n");
  return ok ? kOk : kScientificFailure;
}

/// Oracle suite plus the property batteries on a short run of the configured model
/// (M capped at 10, at most 10 tau_ec).
inline int cmd_verify(const RunConfig& cfg, std::ostream& out = std::cout) {
  auto checks = oracle_checks(cfg, 1.0);
  const int workers = resolve_workers(cfg);
  const int m = std::min(cfg.max_phonons, 10);
  const auto params = derive_model(cfg.device(), cfg.n_sites, m);
  const std::string tag = "N=" + std::to_string(cfg.n_sites) + ",M=" + std::to_string(m);

  auto basis = std::make_shared<const PhononBasis>(cfg.n_sites, m);
  double herm = 0.0;
  for (int k = 0; k <= cfg.n_sites / 2; ++k) {
    SectorBuildOptions b;
    b.workers = workers;
    const auto h = build_sector(params, KSector::make(k, basis), b);
    herm = std::max(herm, hermiticity_defect(h.matrix()) / std::max(h.matrix().max_abs(), 1e-300));
  }
  checks.push_back({tag + " sector hermiticity (relative)", herm, 1e-12, herm <= 1e-12});

  RunConfig c = cfg;
  c.max_phonons = m;
  c.t_final = std::min(cfg.t_final, 10.0);
  auto q = quench_options(c, workers);
  const auto res = run_quench(params, cfg.k0_index, q);
  double s_max = 0.0;
  for (const auto& r : res.records) s_max = std::max(s_max, r.entropy);
  const double s0 = res.records.front().entropy;
  checks.push_back({tag + " unitarity max |norm-1|", res.max_norm_drift, 1e-6, res.max_norm_drift < 1e-6});
  checks.push_back(
      {tag + " x^2+p^2 = 2n+1 identity", res.max_identity_defect, 1e-7, res.max_identity_defect <= 1e-7});
  checks.push_back({tag + " entropy S_E(0)", std::abs(s0), 1e-10, std::abs(s0) <= 1e-10});
  const double excess = std::max(0.0, s_max - std::log(static_cast<double>(cfg.n_sites)));
  checks.push_back({tag + " entropy above ln N", excess, 1e-12, excess <= 1e-12});

  print_checks(checks, out);
  const bool ok = all_pass(checks);
  out << (ok ? "verify: all checks passed\n" : "verify: FAILED\n");
  return ok ? kOk : kScientificFailure;
}

}  // namespace polaron::app
