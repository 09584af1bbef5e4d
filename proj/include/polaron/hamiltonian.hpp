#pragma once

// Sector Hamiltonian H = H_f + H_e-ph in the momentum-projected basis
//
//   |K, m> = N^{-1/2} sum_j e^{iKj} |j>_e (x) |T_j m>_ph ,
//
// where m lists phonon occupations measured from the excitation site (m_0 sits
// on the excitation). A real-space term is applied to the reference state and the
// lattice is translated back so the excitation returns to the reference site:
// a hop to the left (right) shifts phonons by T_1 (T_{-1}) and picks up e^{iK} (e^{-iK}).
//
//   H|K,m> = dw * sum(m) |K,m>
//          - g dw (x_1 - x_{N-1}) |K,m>                           breathing mode
//          - t0 [e^{iK} |K,T_1 m> + e^{-iK} |K,T_{-1} m>]          hopping
//          + g dw [e^{iK} T_1 (x_0 - x_{N-1}) + e^{-iK} T_{-1} (x_1 - x_0)] |K,m>   Peierls
//
// with x_d = a_d + a_d^dagger acting on relative site d. Raising operators that would
// exceed the phonon cap M are dropped.

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <span>
#include <sstream>
#include <utility>
#include <vector>

#include "polaron/error.hpp"
#include "polaron/fockspace.hpp"
#include "polaron/model.hpp"
#include "polaron/parallel.hpp"
#include "polaron/sparse.hpp"

namespace polaron {

struct SectorBuildOptions {
  /// Multiplies the Peierls term. Only ever changed by mutation tests.
  double peierls_sign = 1.0;
  int workers = 1;
  double hermiticity_tolerance = 1e-12;
};

namespace detail {

/// Visits every term of H|K,m> for one basis config: emit(config_index, amplitude).
class SectorTermGenerator {
 public:
  SectorTermGenerator(const ModelParams& p, const KSector& sector, double peierls_sign)
      : basis_(*sector.basis),
        n_(basis_.n_sites()),
        max_(basis_.max_phonons()),
        t0_(p.t0),
        dw_(p.delta_omega),
        gdw_(p.coupling_energy()),
        peierls_(peierls_sign * p.coupling_energy()),
        phase_(std::polar(1.0, sector.k_value)),
        m_(static_cast<std::size_t>(n_)),
        work_(static_cast<std::size_t>(n_)),
        moved_(static_cast<std::size_t>(n_)) {}

  template <typename Emit>
  void apply(std::size_t column, Emit&& emit) {
    auto c = basis_.config(column);
    int total = 0;
    for (int s = 0; s < n_; ++s) {
      m_[s] = c[s];
      total += c[s];
    }

    emit(static_cast<Index>(column), cplx(dw_ * total, 0.0));

    // breathing mode: -g dw (x_1 - x_{N-1})
    ladder(1, total, cplx(-gdw_, 0.0), 0, emit);
    ladder(n_ - 1, total, cplx(gdw_, 0.0), 0, emit);

    // hopping
    emit(shifted(m_, 1), -t0_ * phase_);
    emit(shifted(m_, -1), -t0_ * std::conj(phase_));

    // Peierls: e^{iK} T_1 (x_0 - x_{N-1}) + e^{-iK} T_{-1} (x_1 - x_0)
    const cplx left = peierls_ * phase_;
    const cplx right = peierls_ * std::conj(phase_);
    ladder(0, total, left, 1, emit);
    ladder(n_ - 1, total, -left, 1, emit);
    ladder(1, total, right, -1, emit);
    ladder(0, total, -right, -1, emit);
  }

 private:
  Index shifted(std::span<const int> m, int n) {
    translate_into<int>(m, n, moved_);
    return basis_.index_of<int>(moved_);
  }

  // emits coeff * T_shift (a_d + a_d^dagger) |m>
  template <typename Emit>
  void ladder(int d, int total, cplx coeff, int shift, Emit& emit) {
    std::copy(m_.begin(), m_.end(), work_.begin());
    const int occ = m_[d];
    if (occ > 0) {
      work_[d] = occ - 1;
      emit(shift == 0 ? basis_.index_of<int>(work_) : shifted(work_, shift), coeff * std::sqrt(double(occ)));
    }
    if (total < max_) {
      work_[d] = occ + 1;
      emit(shift == 0 ? basis_.index_of<int>(work_) : shifted(work_, shift),
           coeff * std::sqrt(double(occ + 1)));
    }
  }

  const PhononBasis& basis_;
  int n_;
  int max_;
  double t0_;
  double dw_;
  double gdw_;
  double peierls_;
  cplx phase_;
  std::vector<int> m_;
  std::vector<int> work_;
  std::vector<int> moved_;
};

}  // namespace detail

class KSectorHamiltonian {
 public:
  KSectorHamiltonian(KSector sector, ModelParams params, CsrMatrix matrix)
      : sector_(std::move(sector)), params_(params), matrix_(std::move(matrix)) {}

  const KSector& sector() const { return sector_; }
  const ModelParams& params() const { return params_; }
  const CsrMatrix& matrix() const { return matrix_; }
  std::size_t dim() const { return matrix_.dim; }
  void set_workers(int w) { matrix_.workers = std::max(1, w); }

  void apply(std::span<const cplx> x, std::span<cplx> y) const { matrix_.multiply(x, y); }

  cplx entry(std::size_t i, std::size_t j) const { return matrix_.entry(i, j); }

 private:
  KSector sector_;
  ModelParams params_;
  CsrMatrix matrix_;
};

/// Largest |H_ij - conj(H_ji)| over stored entries (a missing partner counts in full).
inline double hermiticity_defect(const CsrMatrix& m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < m.dim; ++i)
    for (std::uint64_t p = m.row_ptr[i]; p < m.row_ptr[i + 1]; ++p) {
      const std::size_t j = m.col[p];
      worst = std::max(worst, std::abs(m.value(p) - std::conj(m.entry(j, i))));
    }
  return worst;
}

inline KSectorHamiltonian build_sector(const ModelParams& params, const KSector& sector,
                                       const SectorBuildOptions& opts = {}) {
  const PhononBasis& basis = *sector.basis;
  if (basis.n_sites() != params.n_sites || basis.max_phonons() != params.max_phonons)
    throw DimensionMismatch("sector basis does not match model (N, M)");
  const std::size_t dim = basis.size();
  const int workers = std::max(1, opts.workers);

  // rows are generated independently per block, then stitched
  struct Block {
    std::vector<std::uint64_t> counts;
    std::vector<Index> col;
    std::vector<cplx> val;
  };
  const std::size_t n_blocks = static_cast<std::size_t>(workers);
  std::vector<Block> blocks(n_blocks);

  parallel_jobs(n_blocks, workers, [&](std::size_t b) {
    const std::size_t begin = dim * b / n_blocks;
    const std::size_t end = dim * (b + 1) / n_blocks;
    Block& out = blocks[b];
    out.counts.reserve(end - begin);
    out.col.reserve((end - begin) * 12);
    out.val.reserve((end - begin) * 12);
    detail::SectorTermGenerator gen(params, sector, opts.peierls_sign);
    std::vector<std::pair<Index, cplx>> row;
    for (std::size_t i = begin; i < end; ++i) {
      row.clear();
      // H is Hermitian: row i holds conj of the amplitudes in H|K,m_i>
      gen.apply(i, [&](Index j, cplx amp) {
        if (j == kNoIndex) throw TruncationInconsistency("translated config left the truncated basis");
        row.emplace_back(j, std::conj(amp));
      });
      std::stable_sort(row.begin(), row.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      std::uint64_t kept = 0;
      for (std::size_t r = 0; r < row.size();) {
        const Index j = row[r].first;
        cplx sum = 0.0;
        for (; r < row.size() && row[r].first == j; ++r) sum += row[r].second;
        if (sum != cplx(0.0, 0.0)) {
          out.col.push_back(j);
          out.val.push_back(sum);
          ++kept;
        }
      }
      out.counts.push_back(kept);
    }
  });

  CsrMatrix m;
  m.dim = dim;
  m.workers = workers;
  m.row_ptr.resize(dim + 1);
  m.row_ptr[0] = 0;
  std::size_t total_nnz = 0;
  for (const auto& b : blocks) total_nnz += b.col.size();
  m.col.reserve(total_nnz);
  m.val.reserve(total_nnz);
  std::size_t row = 0;
  for (auto& b : blocks) {
    for (auto c : b.counts) {
      m.row_ptr[row + 1] = m.row_ptr[row] + c;
      ++row;
    }
    m.col.insert(m.col.end(), b.col.begin(), b.col.end());
    m.val.insert(m.val.end(), b.val.begin(), b.val.end());
    b = Block{};
  }

  const double scale = std::max(1.0, m.max_abs());
  const double defect = hermiticity_defect(m);
  if (defect > opts.hermiticity_tolerance * scale) {
    std::ostringstream os;
    os << "sector matrix not Hermitian: defect " << defect << " at scale " << scale;
    throw TruncationInconsistency(os.str());
  }
  m.compress();
  return KSectorHamiltonian(sector, params, std::move(m));
}

/// Sector Hamiltonian mapped onto (-1, 1): H~ = (H - b) / a, with
/// a = (E_max - E_min + eps) / 2, b = (E_max + E_min) / 2, eps = alpha_c (E_max - E_min).
class RescaledOperator {
 public:
  RescaledOperator(const KSectorHamiltonian& base, double e_min, double e_max, double alpha_c)
      : base_(&base), e_min_(e_min), e_max_(e_max) {
    const double width = e_max - e_min;
    if (!(width >= 1e-12)) throw DegenerateSpectrum("spectral width below 1e-12");
    if (!(alpha_c > 0.0)) throw InvalidArgument("alpha_c must be positive");
    epsilon_ = alpha_c * width;
    a_ = (width + epsilon_) / 2.0;
    b_ = (e_max + e_min) / 2.0;
  }

  const KSectorHamiltonian& base() const { return *base_; }
  double a_scale() const { return a_; }
  double b_shift() const { return b_; }
  double epsilon_pad() const { return epsilon_; }
  double e_min() const { return e_min_; }
  double e_max() const { return e_max_; }
  std::size_t dim() const { return base_->dim(); }

  void apply(std::span<const cplx> x, std::span<cplx> y) const {
    base_->matrix().affine_multiply(x, y, 1.0 / a_, b_, 0.0);
  }

  /// y <- 2 H~ x - y, the Chebyshev recurrence update done in place.
  void recurrence(std::span<const cplx> x, std::span<cplx> y) const {
    base_->matrix().affine_multiply(x, y, 2.0 / a_, b_, -1.0);
  }

 private:
  const KSectorHamiltonian* base_;
  double e_min_;
  double e_max_;
  double epsilon_ = 0.0;
  double a_ = 1.0;
  double b_ = 0.0;
};

inline RescaledOperator rescale(const KSectorHamiltonian& h, double e_min, double e_max, double alpha_c) {
  return RescaledOperator(h, e_min, e_max, alpha_c);
}

inline std::vector<cplx> matvec(const KSectorHamiltonian& h, std::span<const cplx> x) {
  std::vector<cplx> y(h.dim());
  h.apply(x, y);
  return y;
}

inline std::vector<cplx> matvec(const RescaledOperator& h, std::span<const cplx> x) {
  std::vector<cplx> y(h.dim());
  h.apply(x, y);
  return y;
}

/// Dumps a sector matrix in the binary cache layout of write_csr.
inline void save_sector(const std::string& path, const KSectorHamiltonian& h) {
  CsrFileHeader header;
  header.n_sites = static_cast<std::uint32_t>(h.params().n_sites);
  header.max_phonons = static_cast<std::uint32_t>(h.params().max_phonons);
  header.k_index = static_cast<std::uint32_t>(h.sector().k_index);
  write_csr(path, header, h.matrix());
}

inline KSectorHamiltonian load_sector(const std::string& path, const ModelParams& params, const KSector& sector) {
  CsrFileHeader header;
  CsrMatrix m = read_csr(path, header);
  if (static_cast<int>(header.n_sites) != params.n_sites || static_cast<int>(header.max_phonons) != params.max_phonons ||
      static_cast<int>(header.k_index) != sector.k_index)
    throw DimensionMismatch("cached matrix header does not match the requested sector");
  return KSectorHamiltonian(sector, params, std::move(m));
}

}  // namespace polaron
