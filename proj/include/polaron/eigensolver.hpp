#pragma once

// Lanczos eigensolver for the extremal eigenpairs of a Hermitian sector operator.
//
// The Krylov basis is fully reorthogonalized (classical Gram-Schmidt, second pass on demand) and
// the projected matrix is kept as a dense Hermitian block. When the basis reaches
// its cap the iteration restarts thick: the wanted Ritz vectors are kept and the
// projected block becomes diag(theta) bordered by the residual couplings.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "polaron/error.hpp"
#include "polaron/fockspace.hpp"
#include "polaron/hamiltonian.hpp"
#include "polaron/model.hpp"
#include "polaron/observables.hpp"
#include "polaron/parallel.hpp"

namespace polaron {

template <typename Op>
concept HermitianOperator = requires(const Op& op, std::span<const cplx> x, std::span<cplx> y) {
  { op.dim() } -> std::convertible_to<std::size_t>;
  op.apply(x, y);
};

namespace linalg {

inline cplx dot(std::span<const cplx> a, std::span<const cplx> b) {
  double re = 0.0;
  double im = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    // conj(a) * b
    re += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
    im += a[i].real() * b[i].imag() - a[i].imag() * b[i].real();
  }
  return {re, im};
}

inline void axpy(cplx alpha, std::span<const cplx> x, std::span<cplx> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(std::span<cplx> x, double s) {
  for (auto& v : x) v *= s;
}

inline std::vector<cplx> random_unit_vector(std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<cplx> v(dim);
  for (auto& c : v) c = {dist(rng), dist(rng)};
  scale(v, 1.0 / norm(v));
  return v;
}

}  // namespace linalg

enum class Spectrum { Lowest, Both };

struct LanczosOptions {
  double tol = 1e-9;                 ///< residual norm ||H v - E v|| required of each wanted pair
  std::size_t max_iter = 5000;       ///< operator applications
  std::size_t basis_cap = 200;       ///< vectors kept before a thick restart
  Spectrum which = Spectrum::Both;
  std::uint64_t seed = 20240901;
  std::optional<std::vector<cplx>> start;  ///< initial vector (random if absent)
};

struct LanczosResult {
  double e_min = 0.0;
  double e_max = 0.0;
  StateVector ground_vector;
  std::size_t iterations = 0;         ///< operator applications used
  std::size_t ground_iterations = 0;  ///< applications until the lowest pair converged
  double residual = 0.0;              ///< ||H v - e_min v|| of the returned ground vector
  double residual_max = 0.0;          ///< Ritz residual estimate of the e_max pair
  std::uint64_t seed = 0;
};

template <HermitianOperator Op>
LanczosResult extremal_eigs(const Op& op, const LanczosOptions& opts = {}) {
  const std::size_t dim = op.dim();
  if (dim == 0) throw DimensionMismatch("empty operator");
  if (!(opts.tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  const bool want_max = opts.which == Spectrum::Both;
  const std::size_t cap = std::min(std::max<std::size_t>(opts.basis_cap, 8), std::max<std::size_t>(dim, 1));
  const auto rows = static_cast<Eigen::Index>(dim);

  LanczosResult result;
  result.seed = opts.seed;

  // Krylov basis as contiguous columns; the first k are live
  Eigen::MatrixXcd basis(rows, static_cast<Eigen::Index>(cap + 1));
  Eigen::MatrixXcd proj = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(cap + 1), static_cast<Eigen::Index>(cap + 1));
  Eigen::Index k = 0;

  std::uint64_t reseed = opts.seed;
  auto column = [&](Eigen::Index c) { return std::span<cplx>(basis.col(c).data(), dim); };
  if (opts.start) {
    if (opts.start->size() != dim) throw DimensionMismatch("start vector length differs from operator dimension");
    const double nv = norm(*opts.start);
    if (!(nv > 0.0)) throw InvalidArgument("start vector is zero");
    for (std::size_t i = 0; i < dim; ++i) basis(static_cast<Eigen::Index>(i), 0) = (*opts.start)[i] / nv;
  } else {
    const auto v = linalg::random_unit_vector(dim, reseed);
    std::copy(v.begin(), v.end(), basis.col(0).data());
  }
  k = 1;

  Eigen::VectorXcd w(rows);
  std::span<cplx> wspan(w.data(), dim);
  double best_residual = std::numeric_limits<double>::infinity();
  bool ground_done = false;

  // Classical Gram-Schmidt against the live columns, repeated once when the first
  // pass cancels most of the vector. Returns the coefficients.
  auto orthogonalize = [&](Eigen::VectorXcd& vec) {
    const auto live = basis.leftCols(k);
    const double before = vec.norm();
    Eigen::VectorXcd coeff = live.adjoint() * vec;
    vec.noalias() -= live * coeff;
    if (vec.norm() < 0.7071 * before) {
      const Eigen::VectorXcd again = live.adjoint() * vec;
      vec.noalias() -= live * again;
      coeff += again;
    }
    return coeff;
  };

  while (true) {
    const Eigen::Index last = k - 1;
    op.apply(column(last), wspan);
    ++result.iterations;
    const Eigen::VectorXcd coeff = orthogonalize(w);
    for (Eigen::Index i = 0; i < k; ++i) {
      if (i == last) {
        proj(i, i) = coeff(i).real();
      } else {
        proj(i, last) = coeff(i);
        proj(last, i) = std::conj(coeff(i));
      }
    }
    const double beta = w.norm();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(proj.topLeftCorner(k, k));
    const Eigen::VectorXd theta = es.eigenvalues();
    const Eigen::MatrixXcd s = es.eigenvectors();
    const double res_low = beta * std::abs(s(k - 1, 0));
    const double res_high = beta * std::abs(s(k - 1, k - 1));
    const bool exhausted = static_cast<std::size_t>(k) == dim;
    const bool low_ok = res_low < opts.tol || exhausted;
    const bool high_ok = !want_max || res_high < opts.tol || exhausted;
    best_residual = std::min(best_residual, std::max(res_low, want_max ? res_high : 0.0));
    if (low_ok && !ground_done) {
      ground_done = true;
      result.ground_iterations = result.iterations;
    }

    if (low_ok && high_ok) {
      result.e_max = theta(k - 1);
      result.residual_max = res_high;
      Eigen::VectorXcd g = basis.leftCols(k) * s.col(0);
      g /= g.norm();
      // true residual of the returned vector
      Eigen::VectorXcd hg(rows);
      op.apply(std::span<const cplx>(g.data(), dim), std::span<cplx>(hg.data(), dim));
      ++result.iterations;
      const cplx rq = g.dot(hg);
      result.e_min = rq.real();
      hg -= rq * g;
      result.residual = hg.norm();
      result.ground_vector.assign(g.data(), g.data() + dim);
      return result;
    }

    if (result.iterations >= opts.max_iter) {
      std::ostringstream os;
      os << "Lanczos did not converge in " << result.iterations << " applications (residual " << best_residual << ")";
      throw NoConvergence(os.str(), result.iterations, best_residual);
    }

    // next basis direction: the residual, or a fresh random vector after an invariant subspace
    const bool breakdown = beta < 1e-13 * std::max(1.0, std::abs(theta(k - 1)) + std::abs(theta(0)));
    double coupling = beta;
    if (breakdown) {
      const auto r = linalg::random_unit_vector(dim, ++reseed);
      std::copy(r.begin(), r.end(), w.data());
      orthogonalize(w);
      w /= w.norm();
      coupling = 0.0;
    } else {
      w /= beta;
    }

    if (static_cast<std::size_t>(k) < cap) {
      proj(k, last) = coupling;
      proj(last, k) = coupling;
      basis.col(k) = w;
      ++k;
      continue;
    }

    // thick restart: keep the lowest (and highest) Ritz vectors
    std::vector<Eigen::Index> keep;
    const Eigen::Index n_low = want_max ? static_cast<Eigen::Index>(cap / 2) - 2 : static_cast<Eigen::Index>(cap / 2);
    for (Eigen::Index i = 0; i < std::max<Eigen::Index>(n_low, 1); ++i) keep.push_back(i);
    if (want_max) {
      keep.push_back(k - 2);
      keep.push_back(k - 1);
    }
    const auto nk = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXcd sel(k, nk);
    for (Eigen::Index i = 0; i < nk; ++i) sel.col(i) = s.col(keep[static_cast<std::size_t>(i)]);
    const Eigen::MatrixXcd ritz = basis.leftCols(k) * sel;
    basis.leftCols(nk) = ritz;
    proj.setZero();
    for (Eigen::Index i = 0; i < nk; ++i) {
      proj(i, i) = theta(keep[static_cast<std::size_t>(i)]);
      // H y_i = theta_i y_i + beta s_{last,i} v_next
      const cplx c = coupling * sel(k - 1, i);
      proj(nk, i) = c;
      proj(i, nk) = std::conj(c);
    }
    basis.col(nk) = w;
    k = nk + 1;
  }
}

/// Lanczos tridiagonal (alpha, beta) of `steps` iterations with full reorthogonalization.
template <HermitianOperator Op>
std::pair<std::vector<double>, std::vector<double>> lanczos_tridiagonal(const Op& op, std::span<const cplx> start,
                                                                        std::size_t steps) {
  const std::size_t dim = op.dim();
  std::vector<std::vector<cplx>> v;
  std::vector<cplx> q(start.begin(), start.end());
  linalg::scale(q, 1.0 / norm(q));
  v.push_back(q);
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<cplx> w(dim);
  for (std::size_t j = 0; j < steps && j < dim; ++j) {
    op.apply(v[j], w);
    const double a = linalg::dot(v[j], w).real();
    alpha.push_back(a);
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : v) linalg::axpy(-linalg::dot(b, w), b, w);
    const double nb = norm(w);
    if (j + 1 == steps || nb < 1e-13) break;
    beta.push_back(nb);
    linalg::scale(w, 1.0 / nb);
    v.push_back(w);
  }
  return {alpha, beta};
}

/// Eigenvalues of the symmetric tridiagonal matrix (alpha, beta), ascending.
inline std::vector<double> tridiagonal_eigenvalues(std::span<const double> alpha, std::span<const double> beta) {
  const auto n = static_cast<Eigen::Index>(alpha.size());
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) t(i, i) = alpha[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 0; i + 1 < n; ++i) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().data(), es.eigenvalues().data() + n};
}

struct SpectralBounds {
  double lower = 0.0;  ///< below every eigenvalue (Ritz value minus residual bound)
  double upper = 0.0;
  std::size_t iterations = 0;
};

/// Extremal-eigenvalue brackets from the plain three-term recurrence, storing no
/// Krylov basis. Meant for sectors too large for extremal_eigs; only the ends matter.
template <HermitianOperator Op>
SpectralBounds spectral_bounds(const Op& op, double tol = 1e-6, std::size_t max_iter = 2000,
                               std::uint64_t seed = 20240901) {
  const std::size_t dim = op.dim();
  std::vector<cplx> prev(dim, cplx{});
  std::vector<cplx> cur = linalg::random_unit_vector(dim, seed);
  std::vector<cplx> w(dim);
  std::vector<double> alpha;
  std::vector<double> beta;
  double b_prev = 0.0;
  SpectralBounds out;
  for (std::size_t j = 0; j < max_iter; ++j) {
    op.apply(cur, w);
    ++out.iterations;
    const double a = linalg::dot(cur, w).real();
    alpha.push_back(a);
    for (std::size_t i = 0; i < dim; ++i) w[i] -= a * cur[i] + b_prev * prev[i];
    const double b = norm(w);
    const bool last = b < 1e-13 || j + 1 == max_iter || alpha.size() == dim;

    if (last || (j + 1) % 10 == 0) {
      const auto n = static_cast<Eigen::Index>(alpha.size());
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i) t(i, i) = alpha[static_cast<std::size_t>(i)];
      for (Eigen::Index i = 0; i + 1 < n; ++i) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
      const double r_lo = b * std::abs(es.eigenvectors()(n - 1, 0));
      const double r_hi = b * std::abs(es.eigenvectors()(n - 1, n - 1));
      out.lower = es.eigenvalues()(0) - r_lo;
      out.upper = es.eigenvalues()(n - 1) + r_hi;
      if (last || (r_lo < tol && r_hi < tol)) return out;
    }
    beta.push_back(b);
    b_prev = b;
    prev.swap(cur);
    cur = w;
    linalg::scale(cur, 1.0 / b);
  }
  return out;
}

}  // namespace polaron
