#pragma once

// Bessel functions of the first kind, integer order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace polaron::bessel {

/// J_n(x) from the ascending power series. Intended for moderate |x| (< ~10),
/// where the alternating terms do not cancel catastrophically.
inline double series(int n, double x) {
  if (n < 0) {
    const double v = series(-n, x);
    return (n % 2 == 0) ? v : -v;
  }
  const double half = 0.5 * x;
  // leading term (x/2)^n / n!
  double term = 1.0;
  for (int i = 1; i <= n; ++i) term *= half / i;
  double sum = term;
  const double h2 = half * half;
  for (int k = 1; k < 500; ++k) {
    term *= -h2 / (static_cast<double>(k) * static_cast<double>(k + n));
    sum += term;
    if (std::abs(term) <= 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

/// J_0(x), ..., J_{max_order}(x) by Miller's downward recurrence, normalized with
/// the Neumann identity 1 = J_0 + 2 * sum_k J_{2k}.
inline std::vector<double> miller(int max_order, double x) {
  std::vector<double> out(static_cast<std::size_t>(max_order) + 1, 0.0);
  if (x == 0.0) {
    out[0] = 1.0;
    return out;
  }
  const double ax = std::abs(x);
  const int top = std::max(max_order, static_cast<int>(ax));
  int start = top + 20 + static_cast<int>(std::sqrt(40.0 * (top + 1)));
  if (start % 2) ++start;

  std::vector<double> j(static_cast<std::size_t>(start) + 2, 0.0);
  j[static_cast<std::size_t>(start) + 1] = 0.0;
  j[static_cast<std::size_t>(start)] = 1e-300;
  for (int k = start; k >= 1; --k) {
    const auto uk = static_cast<std::size_t>(k);
    j[uk - 1] = (2.0 * k / ax) * j[uk] - j[uk + 1];
    if (std::abs(j[uk - 1]) > 1e250) {
      for (std::size_t i = uk - 1; i <= static_cast<std::size_t>(start); ++i) j[i] *= 1e-250;
    }
  }
  double norm = j[0];
  for (int k = 2; k <= start; k += 2) norm += 2.0 * j[static_cast<std::size_t>(k)];
  for (int p = 0; p <= max_order; ++p) {
    double v = j[static_cast<std::size_t>(p)] / norm;
    if (x < 0.0 && (p % 2)) v = -v;
    out[static_cast<std::size_t>(p)] = v;
  }
  return out;
}

}  // namespace polaron::bessel
