// Acceptance run: one PASS/FAIL line per criterion 1-10.
//
//   polaron_acceptance [--only 1,3,...] [--known-failures 6,7,...]
//
// Exit status is 0 when every criterion outside --known-failures passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "polaron/chebyshev.hpp"
#include "polaron/eigensolver.hpp"
#include "polaron/fockspace.hpp"
#include "polaron/ground_state.hpp"
#include "polaron/hamiltonian.hpp"
#include "polaron/model.hpp"
#include "polaron/observables.hpp"
#include "polaron/oracle.hpp"
#include "polaron/quench.hpp"

namespace {

using namespace polaron;
constexpr double kPi = std::numbers::pi;
constexpr int kSites = 9;
constexpr int kGroundCap = 10;
constexpr double kDt = 0.1;  // tau_ec units

DeviceParams device(double mhz, double phi_over_pi) {
  DeviceParams d;
  d.delta_omega_over_2pi = mhz * 1e-3;
  d.phi_dc = phi_over_pi * kPi;
  return d;
}

// time unit: 1/t0 at the reference flux 0.972 pi
double tau_ec(const DeviceParams& d) { return reference_time(d, 0.972 * kPi); }

std::string num(double v, int digits = 4) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

ScanOptions scan_opts() {
  ScanOptions o;
  o.use_reflection = true;
  return o;
}

// ground scans are shared between criteria
std::map<std::pair<double, double>, GroundStateSummary>& scan_cache() {
  static std::map<std::pair<double, double>, GroundStateSummary> cache;
  return cache;
}

const GroundStateSummary& ground(double mhz, double phi_over_pi) {
  auto& cache = scan_cache();
  const auto key = std::make_pair(mhz, phi_over_pi);
  auto it = cache.find(key);
  if (it == cache.end())
    it = cache.emplace(key, ground_scan(derive_model(device(mhz, phi_over_pi), kSites, kGroundCap), scan_opts())).first;
  return it->second;
}

struct Production {
  double max_norm_drift = 0.0;
  double max_identity_defect = 0.0;
  std::size_t runs = 0;
};

Production& production() {
  static Production p;
  return p;
}

QuenchResult quench(double mhz, double phi_over_pi, int m, int k0, double t_final,
                    std::function<bool(const ObservableRecord&)> stop = {}) {
  const auto dev = device(mhz, phi_over_pi);
  QuenchOptions o;
  o.tau = tau_ec(dev);
  o.t_final = t_final;
  o.dt = kDt;
  o.track_energy = false;
  o.stop_when = std::move(stop);
  auto r = run_quench(derive_model(dev, kSites, m), k0, o);
  auto& prod = production();
  prod.max_norm_drift = std::max(prod.max_norm_drift, r.max_norm_drift);
  prod.max_identity_defect = std::max(prod.max_identity_defect, r.max_identity_defect);
  ++prod.runs;
  return r;
}

// 1. flux bisection for the K_gs = 0 -> +-K_gs switch
Outcome critical_coupling() {
  struct Case {
    double mhz, lo, hi, target;
  };
  const Case cases[] = {{300, 0.9720, 0.9728, 0.72}, {200, 0.9678, 0.9686, 0.83}};
  Outcome out{true, ""};
  for (const auto& c : cases) {
    const auto cp = locate_critical(device(c.mhz, 0.0), kSites, kGroundCap, c.lo * kPi, c.hi * kPi, 1e-4, scan_opts());
    const bool ok = std::abs(cp.lambda_eff - c.target) <= 0.02;
    out.pass = out.pass && ok;
    out.detail += std::to_string(int(c.mhz)) + " MHz lambda_c=" + num(cp.lambda_eff) + " (phi=" +
                  num(cp.phi_dc / kPi, 5) + "pi, K_gs above: j=" + std::to_string(cp.k_index_above) +
                  ", target " + num(c.target, 2) + "+-0.02)  ";
  }
  return out;
}

// 2. Nbar_ph of the ground state with K_gs saturated at the grid point nearest pi/2
Outcome phonon_number_range() {
  struct Case {
    double mhz;
    std::vector<double> phis;
    double lo, hi;
  };
  const Case cases[] = {{300, {0.975, 0.977, 0.980}, 1.8 - 0.1, 2.0 + 0.1},
                        {200, {0.970, 0.972, 0.975}, 3.9 - 0.1, 5.1 + 0.1}};
  Outcome out{true, ""};
  for (const auto& c : cases) {
    out.detail += std::to_string(int(c.mhz)) + " MHz:";
    for (double phi : c.phis) {
      const auto& s = ground(c.mhz, phi);
      DeviceParams d = device(c.mhz, phi);
      const bool ok = s.k_index != 0 && s.phonon_number >= c.lo && s.phonon_number <= c.hi;
      out.pass = out.pass && ok;
      out.detail += " lambda=" + num(lambda_from_device(d), 3) + " j=" + std::to_string(s.k_index) +
                    " Nbar=" + num(s.phonon_number, 3);
    }
    out.detail += " (window [" + num(c.lo, 1) + "," + num(c.hi, 1) + "])  ";
  }
  return out;
}

// 3. k0 = 0 is an exact eigenstate
Outcome sentinel() {
  const auto r = quench(300, 0.972, kGroundCap, 0, 100.0);
  double ds = 0.0;
  double dn = 0.0;
  for (const auto& rec : r.records) {
    ds = std::max(ds, std::abs(rec.survival - 1.0));
    dn = std::max(dn, std::abs(rec.n_ph));
  }
  return {ds <= 1e-10 && dn <= 1e-10, "M=" + std::to_string(kGroundCap) + ", 100 tau: max|survival-1|=" + sci(ds) +
                                          " max|n_ph|=" + sci(dn) + " over " + std::to_string(r.records.size()) +
                                          " records"};
}

// 4. dense oracle equivalence
Outcome oracle_equivalence() {
  Outcome out{true, ""};
  for (int n : {4, 5}) {
    const auto p = derive_model(device(300, 0.975), n, 2);
    const auto sys_dim = n * PhononBasis(n, 2).size();
    double spec = 0.0, traj = 0.0, rdm = 0.0;
    for (const auto& c : oracle::run_suite(p)) {
      out.pass = out.pass && c.pass;
      if (c.name.find("block spectra") != std::string::npos) spec = c.value;
      if (c.name.find("chebyshev") != std::string::npos) traj = c.value;
      if (c.name.find("reduced density") != std::string::npos) rdm = c.value;
    }
    out.detail += "N=" + std::to_string(n) + " (dim " + std::to_string(sys_dim) + "): spectra " + sci(spec) +
                  ", trajectory " + sci(traj) + ", rdm " + sci(rdm) + "  ";
  }
  return out;
}

// 6. entropy: bounds and the maximum, extrapolated over the phonon cap
Outcome entropy() {
  const std::vector<int> caps{12, 14, 16};
  struct Case {
    double mhz, target;
  };
  const Case cases[] = {{300, 2.115}, {200, 2.141}};
  const double bound = std::log(double(kSites));
  Outcome out{true, ""};
  for (const auto& c : cases) {
    std::vector<double> maxima;
    double s0 = 0.0;
    double over = 0.0;
    for (int m : caps) {
      const auto r = quench(c.mhz, 0.975, m, 2, 20.0);
      double smax = 0.0;
      for (const auto& rec : r.records) {
        smax = std::max(smax, rec.entropy);
        over = std::max(over, rec.entropy - bound);
      }
      s0 = std::max(s0, std::abs(r.records.front().entropy));
      maxima.push_back(smax);
    }
    // Aitken extrapolation when the three maxima converge monotonically
    double limit = maxima.back();
    const double d1 = maxima[1] - maxima[0];
    const double d2 = maxima[2] - maxima[1];
    if (d1 * d2 > 0.0 && std::abs(d2) < std::abs(d1)) limit = maxima[2] - d2 * d2 / (d2 - d1);
    const bool ok = s0 <= 1e-10 && over <= 0.0 && std::abs(limit - c.target) <= 0.05;
    out.pass = out.pass && ok;
    out.detail += std::to_string(int(c.mhz)) + " MHz: max S_E(M=12,14,16)=" + num(maxima[0]) + "," +
                  num(maxima[1]) + "," + num(maxima[2]) + " -> " + num(limit) + " (target " + num(c.target, 3) +
                  "+-0.05), S_E(0)=" + sci(s0) + ", max S_E-ln9=" + sci(over) + "  ";
  }
  return out;
}

// 7. quadrature anti-squeezing
Outcome squeezing() {
  const int m = 12;
  const auto r = quench(300, 0.972, m, 2, 30.0);
  double sx = 0.0;
  double at = 0.0;
  double worst_gap = std::numeric_limits<double>::infinity();
  for (const auto& rec : r.records) {
    if (rec.s_x > sx) {
      sx = rec.s_x;
      at = rec.t_over_tau;
    }
    worst_gap = std::min(worst_gap, rec.s_x - rec.s_p);
  }
  const double db = 10.0 * std::log10(2.0 * sx);
  const bool ok = std::abs(sx - 12.0) <= 1.0 && std::abs(db - 13.8) <= 0.4 && worst_gap >= 0.0;
  // any state of the truncated space has S_x <= <x_r^2> <= 2M/N + 1
  return {ok, "M=" + std::to_string(m) + ", 30 tau: max S_x=" + num(sx, 3) + " at t=" + num(at, 2) +
                  " tau (target 12+-1), 10log10(2S_x)=" + num(db, 2) + " dB (target 13.8+-0.4), min(S_x-S_p)=" +
                  sci(worst_gap) + ", truncation bound 2M/N+1=" + num(2.0 * m / kSites + 1.0, 2)};
}

std::optional<double> formation(double mhz, double phi_over_pi, int k0) {
  const double nbar = ground(mhz, phi_over_pi).phonon_number;
  const auto r = quench(mhz, phi_over_pi, kGroundCap, k0, 30.0,
                        [nbar](const ObservableRecord& rec) { return rec.n_ph >= nbar; });
  return formation_time(r.records, nbar);
}

// 8. formation times over the k0 grid and the 200 MHz flux series
Outcome formation_times() {
  struct Series {
    double mhz, phi;
  };
  const Series grid[] = {{300, 0.975}, {200, 0.972}, {200, 0.975}};
  Outcome out{true, ""};
  bool in_range = true, weak = true, upturn = true;
  for (const auto& s : grid) {
    std::vector<double> tau;
    out.detail += std::to_string(int(s.mhz)) + "MHz/" + num(s.phi, 3) + "pi tau_sp(j=1..4)=";
    for (int j = 1; j <= 4; ++j) {
      const auto t = formation(s.mhz, s.phi, j);
      tau.push_back(t ? *t : std::numeric_limits<double>::infinity());
      out.detail += (t ? num(*t, 2) : std::string("none")) + (j < 4 ? "," : "");
      in_range = in_range && t && *t > 1.0 && *t < 10.0;
    }
    // j = 2 is the grid point nearest pi/2, j = 4 nearest pi
    const double hi = *std::max_element(tau.begin() + 1, tau.end());
    const double lo = *std::min_element(tau.begin() + 1, tau.end());
    const double spread = (hi - lo) / lo;
    const double ratio = tau[0] / tau[1];
    weak = weak && spread < 0.25;
    upturn = upturn && ratio > 2.0;
    out.detail += " spread=" + num(100 * spread, 1) + "% upturn=" + num(ratio, 2) + "x; ";
  }
  // saturation versus lambda at 200 MHz
  const std::vector<double> phis{0.970, 0.972, 0.975, 0.978, 0.981};
  bool saturates = true;
  for (int j : {2, 3}) {
    std::vector<double> tau;
    out.detail += "200MHz j=" + std::to_string(j) + " tau_sp(lambda=";
    for (double phi : phis) out.detail += num(lambda_from_device(device(200, phi)), 2) + (phi < 0.981 ? "," : "");
    out.detail += ")=";
    for (double phi : phis) {
      const auto t = formation(200, phi, j);
      tau.push_back(t ? *t : std::numeric_limits<double>::infinity());
      out.detail += (t ? num(*t, 3) : std::string("none")) + (phi < 0.981 ? "," : "");
    }
    for (std::size_t i = 1; i < tau.size(); ++i) saturates = saturates && tau[i] <= tau[i - 1];
    const double last_change = std::abs(tau.back() - tau[tau.size() - 2]) / tau[tau.size() - 2];
    saturates = saturates && last_change < 0.05;
    out.detail += " last step " + num(100 * last_change, 1) + "%; ";
  }
  out.pass = in_range && weak && upturn && saturates;
  out.detail = std::string("range(1,10):") + (in_range ? "ok" : "no") + " weak<25%:" + (weak ? "ok" : "no") +
               " upturn>2x:" + (upturn ? "ok" : "no") + " saturation:" + (saturates ? "ok" : "no") + " | " +
               out.detail;
  return out;
}

// 9. ground-state weight of the bare k0 ~ pi/2 state
Outcome initial_weight() {
  const auto& s = ground(300, 0.972);
  const double z = s.sectors[2].residue;
  // the same weight at exactly K = pi/2 needs N divisible by 4
  const auto p8 = derive_model(device(300, 0.972), 8, kGroundCap);
  auto basis8 = std::make_shared<const PhononBasis>(8, kGroundCap);
  const auto g8 = solve_sector(p8, KSector::make(2, basis8), lowest_only());
  return {std::abs(z - 0.16) <= 0.02, "N=9 k0=4pi/9 (grid-nearest pi/2): Z=" + num(z) +
                                          " (target 0.16+-0.02); diagnostic N=8 k0=pi/2 exactly: Z=" +
                                          num(g8.residue)};
}

// 10. property battery
Outcome properties() {
  std::vector<std::string> failed;
  auto check = [&](bool ok, const std::string& name) {
    if (!ok) failed.push_back(name);
  };

  // basis counting against the recursion D(N, M) = sum_k D(N - 1, M - k)
  std::function<std::uint64_t(int, int)> count = [&](int n, int m) -> std::uint64_t {
    if (n == 0) return 1;
    std::uint64_t s = 0;
    for (int k = 0; k <= m; ++k) s += count(n - 1, m - k);
    return s;
  };
  bool counts = true;
  for (int n = 2; n <= 9; ++n)
    for (int m = 0; m <= 8; ++m) counts = counts && PhononBasis(n, m).size() == count(n, m);
  check(counts, "basis counting");

  // translation group law
  const PhononBasis b6(kSites, 4);
  bool group = true;
  for (std::size_t i = 0; i < b6.size(); i += 7) {
    const auto m = b6.config_vector(i);
    for (int s = 0; s < kSites; ++s)
      for (int t = 0; t < kSites; ++t) group = group && translate(translate(m, s), t) == translate(m, s + t);
    group = group && translate(m, kSites) == m;
  }
  check(group, "translation group law");

  // Hermiticity of every sector
  const auto p = derive_model(device(300, 0.975), kSites, 6);
  auto basis = std::make_shared<const PhononBasis>(kSites, 6);
  double herm = 0.0;
  for (int k = 0; k < kSites; ++k)
    herm = std::max(herm, hermiticity_defect(build_sector(p, KSector::make(k, basis)).matrix()));
  check(herm < 1e-13, "hermiticity");

  // global-phase invariance of the observables
  const LadderTable ladder(*basis);
  SnapshotEvaluator eval(*basis, ladder, KSector::momentum_value(2, kSites));
  auto psi = linalg::random_unit_vector(basis->size(), 17);
  const auto a = eval(psi, 0.0, 1.0);
  for (auto& c : psi) c *= std::polar(1.0, 1.234);
  const auto r = eval(psi, 0.0, 1.0);
  const double phase_err = std::max({std::abs(a.n_ph - r.n_ph), std::abs(a.survival - r.survival),
                                     std::abs(a.s_x - r.s_x), std::abs(a.s_p - r.s_p),
                                     std::abs(a.entropy - r.entropy)});
  check(phase_err < 1e-12, "global phase");

  // variational monotonicity of E_gs in M
  bool mono = true;
  double last = std::numeric_limits<double>::infinity();
  for (int m = 0; m <= 8; ++m) {
    const auto s = ground_scan(derive_model(device(300, 0.975), 7, m), scan_opts());
    mono = mono && s.energy <= last + 1e-10;
    last = s.energy;
  }
  check(mono, "variational monotonicity");

  // semigroup: U(dt) U(dt) = U(2 dt)
  const auto h = build_sector(p, KSector::make(2, basis));
  const auto bounds = spectral_bounds(h, 1e-8);
  const RescaledOperator op(h, bounds.lower, bounds.upper, 1e-3);
  const double dt = 0.05 * p.tau_ec;
  const auto twice = evolve(plan(op, dt), psi, 2);
  const auto once = evolve(plan(op, 2 * dt), psi, 1);
  double semi = 0.0;
  for (std::size_t i = 0; i < once.size(); ++i) semi = std::max(semi, std::abs(twice[i] - once[i]));
  check(semi < 1e-11, "semigroup");

  std::string detail = "hermiticity " + sci(herm) + ", phase " + sci(phase_err) + ", semigroup " + sci(semi) +
                       ", counting/group law/monotonicity " + (counts && group && mono ? "ok" : "broken");
  for (const auto& f : failed) detail += "; failed: " + f;
  return {failed.empty(), detail};
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  std::set<int> known;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      only = parse_list(argv[++i]);
    } else if (arg == "--known-failures" && i + 1 < argc) {
      known = parse_list(argv[++i]);
    } else {
      std::cerr << "usage: polaron_acceptance [--only LIST] [--known-failures LIST]\n";
      return 2;
    }
  }
  auto wanted = [&](int id) { return only.empty() || only.count(id); };

  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  // criterion 5 reads the runs made by 3, 6, 7 and 8, so it goes last
  const std::vector<Entry> entries = {
      {10, "property battery", properties},
      {4, "oracle equivalence", oracle_equivalence},
      {1, "critical coupling", critical_coupling},
      {2, "ground-state phonon number", phonon_number_range},
      {9, "initial-state decomposition", initial_weight},
      {3, "eigenstate sentinel", sentinel},
      {8, "formation times", formation_times},
      {7, "squeezing", squeezing},
      {6, "entropy", entropy},
      {5, "unitarity and consistency",
       [] {
         const auto& p = production();
         const bool ok = p.runs > 0 && p.max_norm_drift < 1e-4 && p.max_identity_defect <= 1e-7;
         return Outcome{ok, std::to_string(p.runs) + " quench runs: max |norm-1|=" + sci(p.max_norm_drift) +
                                " (budget 1e-4, target 1e-6" +
                                (p.max_norm_drift < 1e-6 ? " met" : " missed") +
                                "), max identity defect=" + sci(p.max_identity_defect) + " (tol 1e-7)"};
       }},
  };

  std::map<int, std::string> lines;
  int unexpected = 0;
  for (const auto& e : entries) {
    if (!wanted(e.id)) continue;
    if (e.id == 5 && !(wanted(3) || wanted(6) || wanted(7) || wanted(8))) {
      std::cout << "criterion 5 needs at least one of 3, 6, 7, 8\n";
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = e.run();
    } catch (const std::exception& ex) {
      o = {false, std::string("error: ") + ex.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool expected_fail = known.count(e.id) > 0;
    std::ostringstream line;
    line << "CRITERION " << e.id << " " << (o.pass ? "PASS" : "FAIL") << " [" << e.name << "] " << o.detail << " ("
         << num(secs, 1) << " s)" << (!o.pass && expected_fail ? " [known failure]" : "");
    std::cout << line.str() << std::endl;
    lines[e.id] = line.str();
    if (!o.pass && !expected_fail) ++unexpected;
  }
  std::cout << "\nsummary (criterion order):\n";
  for (const auto& [id, l] : lines) std::cout << l.substr(0, l.find(" [")) << '\n';
  return unexpected ? 1 : 0;
}
