#pragma once

// Chebyshev expansion of the sector propagator
//
//   e^{-i H dt} = e^{-i b dt} [c_0 + 2 sum_{p>=1} c_p T_p(H~)],   c_p = (-i)^p J_p(a dt),
//
// with H~ = (H - b)/a from RescaledOperator.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <vector>

#include "polaron/bessel.hpp"
#include "polaron/error.hpp"
#include "polaron/hamiltonian.hpp"
#include "polaron/observables.hpp"

namespace polaron {

inline constexpr double kUnitarityBudget = 1e-4;
inline constexpr int kMinChebyshevOrder = 4;
inline constexpr int kMaxChebyshevOrder = 100000;

struct PropagatorPlan {
  const RescaledOperator* op = nullptr;
  double dt = 0.0;
  int n_cheb = 0;
  std::vector<cplx> coeffs;  ///< p = 0..n_cheb
  cplx phase{1.0, 0.0};
};

/// Smallest order whose Bessel tail |J_N(a dt)| drops below tail_tol (at least 4),
/// or exactly `fixed_order` when given.
inline PropagatorPlan plan(const RescaledOperator& op, double dt, double tail_tol = 1e-12,
                           std::optional<int> fixed_order = std::nullopt) {
  if (!(dt > 0.0)) throw InvalidArgument("time step must be positive");
  if (!(tail_tol > 0.0)) throw InvalidArgument("tail tolerance must be positive");
  const double x = op.a_scale() * dt;

  int order = 0;
  if (fixed_order) {
    if (*fixed_order < 1) throw InvalidArgument("Chebyshev order must be at least 1");
    order = *fixed_order;
  } else {
    // J_p(x) only starts its tail decay for p > x
    int guess = std::max(kMinChebyshevOrder, static_cast<int>(std::ceil(x)) + 8);
    while (true) {
      const auto j = bessel::miller(guess, x);
      int first = -1;
      for (int p = kMinChebyshevOrder; p <= guess; ++p)
        if (p > x && std::abs(j[static_cast<std::size_t>(p)]) < tail_tol) {
          first = p;
          break;
        }
      if (first >= 0) {
        order = first;
        break;
      }
      if (guess > kMaxChebyshevOrder) throw InvalidArgument("time step too large for the Chebyshev expansion");
      guess *= 2;
    }
  }

  PropagatorPlan pl;
  pl.op = &op;
  pl.dt = dt;
  pl.n_cheb = order;
  const auto j = bessel::miller(order, x);
  pl.coeffs.resize(static_cast<std::size_t>(order) + 1);
  cplx unit(1.0, 0.0);
  for (int p = 0; p <= order; ++p) {
    pl.coeffs[static_cast<std::size_t>(p)] = unit * j[static_cast<std::size_t>(p)];
    unit *= cplx(0.0, -1.0);
  }
  pl.phase = std::polar(1.0, -op.b_shift() * dt);
  return pl;
}

/// Work buffers for repeated steps; three state-sized vectors in total.
class ChebyshevStepper {
 public:
  explicit ChebyshevStepper(const PropagatorPlan& plan)
      : plan_(&plan), acc_(plan.op->dim()), prev_(plan.op->dim()), cur_(plan.op->dim()) {}

  /// psi <- U(dt) psi. Returns the output norm.
  double advance(std::span<cplx> psi) {
    const auto& op = *plan_->op;
    const auto& c = plan_->coeffs;
    if (psi.size() != op.dim()) throw DimensionMismatch("state length differs from operator dimension");

    std::copy(psi.begin(), psi.end(), prev_.begin());
    for (std::size_t i = 0; i < psi.size(); ++i) acc_[i] = c[0] * prev_[i];
    if (plan_->n_cheb >= 1) {
      op.apply(prev_, cur_);
      const cplx c1 = 2.0 * c[1];
      for (std::size_t i = 0; i < psi.size(); ++i) acc_[i] += c1 * cur_[i];
    }
    for (int p = 2; p <= plan_->n_cheb; ++p) {
      op.recurrence(cur_, prev_);  // prev_ now holds v_p
      prev_.swap(cur_);
      const cplx cp = 2.0 * c[static_cast<std::size_t>(p)];
      for (std::size_t i = 0; i < psi.size(); ++i) acc_[i] += cp * cur_[i];
    }
    const cplx ph = plan_->phase;
    double n2 = 0.0;
    for (std::size_t i = 0; i < psi.size(); ++i) {
      psi[i] = ph * acc_[i];
      n2 += std::norm(psi[i]);
    }
    return std::sqrt(n2);
  }

 private:
  const PropagatorPlan* plan_;
  std::vector<cplx> acc_;
  std::vector<cplx> prev_;
  std::vector<cplx> cur_;
};

inline void check_unitarity(double out_norm, double in_norm, std::size_t step_index) {
  const double drift = std::abs(out_norm - in_norm);
  if (!(drift <= kUnitarityBudget)) {
    std::ostringstream os;
    os << "norm drifted to " << out_norm << " at step " << step_index;
    throw UnitarityViolation(os.str(), step_index, out_norm);
  }
}

/// One propagation step of a normalized state.
inline StateVector step(const PropagatorPlan& plan, std::span<const cplx> psi) {
  StateVector out(psi.begin(), psi.end());
  ChebyshevStepper stepper(plan);
  const double n_out = stepper.advance(out);
  check_unitarity(n_out, norm(psi), 0);
  return out;
}

struct EvolutionLog {
  std::vector<double> norm_drift;  ///< |norm - norm(psi0)| after each step
  double max_drift = 0.0;
};

using StepObserver = std::function<void(std::size_t step_index, double t, std::span<const cplx> psi)>;

/// Applies `n_steps` steps; the observer sees the state after each one (step index from 1).
inline StateVector evolve(const PropagatorPlan& plan, std::span<const cplx> psi0, std::size_t n_steps,
                          const StepObserver& observer = {}, EvolutionLog* log = nullptr) {
  StateVector psi(psi0.begin(), psi0.end());
  if (n_steps == 0) return psi;
  const double n0 = norm(psi0);
  ChebyshevStepper stepper(plan);
  for (std::size_t s = 1; s <= n_steps; ++s) {
    const double n = stepper.advance(psi);
    const double drift = std::abs(n - n0);
    if (log) {
      log->norm_drift.push_back(drift);
      log->max_drift = std::max(log->max_drift, drift);
    }
    check_unitarity(n, n0, s);
    if (observer) observer(s, static_cast<double>(s) * plan.dt, psi);
  }
  return psi;
}

}  // namespace polaron
