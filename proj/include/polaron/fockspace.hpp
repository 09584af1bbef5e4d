#pragma once

// Truncated phonon Fock space: all occupation vectors (m_1..m_N) with sum <= M,
// stored in lexicographic order and indexed by combinatorial ranking.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <span>
#include <sstream>
#include <vector>

#include "polaron/error.hpp"

namespace polaron {

using Index = std::uint32_t;
using Occupation = std::uint8_t;
using PhononConfig = std::vector<int>;

inline constexpr int kMaxSites = 32;
inline constexpr Index kNoIndex = std::numeric_limits<Index>::max();

/// binomial(n, k) with overflow detection; returns false if the value exceeds UINT64_MAX.
inline bool checked_binomial(std::uint64_t n, std::uint64_t k, std::uint64_t& out) {
  if (k > n) {
    out = 0;
    return true;
  }
  k = std::min(k, n - k);
  unsigned __int128 acc = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    acc = acc * (n - k + i) / i;
    if (acc > std::numeric_limits<std::uint64_t>::max()) return false;
  }
  out = static_cast<std::uint64_t>(acc);
  return true;
}

/// Occupation at 0-based site r after translating by n: m_{(r - n) mod N}.
/// The content of site j moves to site j + n; translate(m, 0) is the identity.
template <typename T>
inline void translate_into(std::span<const T> m, int n, std::span<T> out) {
  const int sites = static_cast<int>(m.size());
  const int shift = ((n % sites) + sites) % sites;
  for (int r = 0; r < sites; ++r) {
    int s = r - shift;
    if (s < 0) s += sites;
    out[static_cast<std::size_t>(r)] = m[static_cast<std::size_t>(s)];
  }
}

inline PhononConfig translate(std::span<const int> m, int n) {
  PhononConfig out(m.size());
  translate_into<int>(m, n, out);
  return out;
}

class PhononBasis {
 public:
  PhononBasis(int n_sites, int max_phonons) : n_(n_sites), m_(max_phonons) {
    if (n_sites < 2 || n_sites > kMaxSites) throw InvalidArgument("n_sites must lie in [2, 32]");
    if (max_phonons < 0 || max_phonons > std::numeric_limits<Occupation>::max())
      throw InvalidArgument("max_phonons must lie in [0, 255]");

    std::uint64_t dim = 0;
    if (!checked_binomial(static_cast<std::uint64_t>(m_ + n_), static_cast<std::uint64_t>(n_), dim) ||
        dim >= kNoIndex) {
      std::ostringstream os;
      os << "phonon basis (N=" << n_ << ", M=" << m_ << ") exceeds the 32-bit index range";
      throw CapacityExceeded(os.str());
    }
    size_ = static_cast<std::size_t>(dim);

    // prefix_[r][R] = binomial(R + r + 1, r + 1): number of configs on r+1 sites with sum <= R
    prefix_.assign(static_cast<std::size_t>(n_) * static_cast<std::size_t>(m_ + 1), 0);
    for (int r = 0; r < n_; ++r)
      for (int budget = 0; budget <= m_; ++budget) {
        std::uint64_t v = 0;
        checked_binomial(static_cast<std::uint64_t>(budget + r + 1), static_cast<std::uint64_t>(r + 1), v);
        prefix_[static_cast<std::size_t>(r * (m_ + 1) + budget)] = v;
      }

    data_.resize(size_ * static_cast<std::size_t>(n_));
    std::vector<int> cur(static_cast<std::size_t>(n_), 0);
    int total = 0;
    for (std::size_t i = 0; i < size_; ++i) {
      for (int s = 0; s < n_; ++s) data_[i * n_ + s] = static_cast<Occupation>(cur[s]);
      // lexicographic successor among configs with total <= M
      if (total < m_) {
        ++cur[n_ - 1];
        ++total;
      } else {
        int j = n_ - 1;
        while (j >= 0 && cur[j] == 0) --j;
        if (j <= 0) break;  // last config reached
        total -= cur[j] - 1;
        cur[j] = 0;
        ++cur[j - 1];
      }
    }
  }

  int n_sites() const { return n_; }
  int max_phonons() const { return m_; }
  std::size_t size() const { return size_; }

  std::span<const Occupation> config(std::size_t i) const {
    return {data_.data() + i * static_cast<std::size_t>(n_), static_cast<std::size_t>(n_)};
  }

  PhononConfig config_vector(std::size_t i) const {
    auto c = config(i);
    return PhononConfig(c.begin(), c.end());
  }

  int total(std::size_t i) const {
    int t = 0;
    for (auto v : config(i)) t += v;
    return t;
  }

  /// Lexicographic rank of `m`, or kNoIndex when m is outside the truncated space.
  template <typename T>
  Index index_of(std::span<const T> m) const {
    if (static_cast<int>(m.size()) != n_) throw DimensionMismatch("config length differs from n_sites");
    std::uint64_t rank = 0;
    int budget = m_;
    for (int i = 0; i < n_; ++i) {
      const int v = static_cast<int>(m[static_cast<std::size_t>(i)]);
      if (v < 0 || v > budget) return kNoIndex;
      if (v > 0) {
        const int rest = n_ - i - 1;
        // configs sharing the prefix with a smaller entry at position i
        const std::size_t row = static_cast<std::size_t>(rest * (m_ + 1));
        rank += prefix_[row + budget] - prefix_[row + budget - v];
      }
      budget -= v;
    }
    return static_cast<Index>(rank);
  }

  Index index_of(const PhononConfig& m) const { return index_of<int>(std::span<const int>(m)); }

 private:
  int n_;
  int m_;
  std::size_t size_ = 0;
  std::vector<std::uint64_t> prefix_;
  std::vector<Occupation> data_;
};

/// Index of the phonon vacuum; rank 0 under lexicographic order.
inline Index zero_phonon_index(const PhononBasis& basis) {
  std::vector<int> zero(static_cast<std::size_t>(basis.n_sites()), 0);
  return basis.index_of(PhononConfig(zero));
}

/// Neighbour tables over the basis: index of m + e_d and of T_1 m for every config.
/// Assembly and the observables walk these instead of re-ranking configs.
class LadderTable {
 public:
  explicit LadderTable(const PhononBasis& basis)
      : n_(basis.n_sites()), size_(basis.size()) {
    raise_.assign(size_ * static_cast<std::size_t>(n_), kNoIndex);
    shift_.assign(size_, kNoIndex);
    std::vector<int> buf(static_cast<std::size_t>(n_));
    std::vector<int> shifted(static_cast<std::size_t>(n_));
    for (std::size_t i = 0; i < size_; ++i) {
      auto c = basis.config(i);
      for (int s = 0; s < n_; ++s) buf[s] = c[s];
      if (basis.total(i) < basis.max_phonons()) {
        for (int d = 0; d < n_; ++d) {
          ++buf[d];
          raise_[i * n_ + d] = basis.index_of<int>(buf);
          --buf[d];
        }
      }
      translate_into<int>(buf, 1, shifted);
      shift_[i] = basis.index_of<int>(shifted);
    }
    unshift_.assign(size_, kNoIndex);
    for (std::size_t i = 0; i < size_; ++i) unshift_[shift_[i]] = static_cast<Index>(i);
  }

  /// index of m_i + e_d, kNoIndex if that exceeds the truncation
  Index raise(std::size_t i, int d) const { return raise_[i * n_ + d]; }
  /// index of T_1 m_i
  Index shift(std::size_t i) const { return shift_[i]; }
  /// index of T_{-1} m_i
  Index unshift(std::size_t i) const { return unshift_[i]; }

  int n_sites() const { return n_; }
  std::size_t size() const { return size_; }

 private:
  int n_;
  std::size_t size_;
  std::vector<Index> raise_;
  std::vector<Index> shift_;
  std::vector<Index> unshift_;
};

/// One total-quasimomentum block; its basis is labelled by phonon configs measured
/// from the excitation site, so the block dimension equals the phonon-space dimension.
struct KSector {
  int k_index = 0;
  double k_value = 0.0;
  std::shared_ptr<const PhononBasis> basis;

  static KSector make(int k_index, std::shared_ptr<const PhononBasis> basis) {
    const int n = basis->n_sites();
    if (k_index < 0 || k_index >= n) throw InvalidArgument("k_index must lie in [0, N)");
    KSector s;
    s.k_index = k_index;
    s.k_value = momentum_value(k_index, n);
    s.basis = std::move(basis);
    return s;
  }

  /// 2 pi j / N folded into (-pi, pi]
  static double momentum_value(int k_index, int n_sites) {
    double k = 2.0 * std::numbers::pi * k_index / n_sites;
    if (k > std::numbers::pi + 1e-12) k -= 2.0 * std::numbers::pi;
    return k;
  }

  std::size_t dimension() const { return basis->size(); }
};

}  // namespace polaron
