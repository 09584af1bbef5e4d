#pragma once

// Row-compressed complex sparse matrix and its multiply kernels.

#include <algorithm>
#include <bit>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "polaron/error.hpp"
#include "polaron/fockspace.hpp"
#include "polaron/parallel.hpp"

namespace polaron {

using cplx = std::complex<double>;

/// Row-compressed matrix. Values live either in `val`, or, once compress() succeeded,
/// as one-byte codes into `table` (the sector matrices have only ~100 distinct entries,
/// and the narrower stream makes the memory-bound multiply almost twice as fast).
struct CsrMatrix {
  std::size_t dim = 0;
  std::vector<std::uint64_t> row_ptr;  // dim + 1
  std::vector<Index> col;
  std::vector<cplx> val;
  std::vector<std::uint8_t> code;
  std::vector<cplx> table;
  int workers = 1;

  std::size_t nnz() const { return col.size(); }
  bool compact() const { return !table.empty(); }

  cplx value(std::size_t p) const { return compact() ? table[code[p]] : val[p]; }

  std::size_t row_nnz(std::size_t i) const { return static_cast<std::size_t>(row_ptr[i + 1] - row_ptr[i]); }

  /// Stored value at (i, j), zero if absent. Columns are sorted within each row.
  cplx entry(std::size_t i, std::size_t j) const {
    const auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    const auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    const auto it = std::lower_bound(first, last, static_cast<Index>(j));
    if (it == last || *it != j) return {};
    return value(static_cast<std::size_t>(it - col.begin()));
  }

  bool has_entry(std::size_t i, std::size_t j) const {
    const auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    const auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    return std::binary_search(first, last, static_cast<Index>(j));
  }

  double max_abs() const {
    double m = 0.0;
    if (compact()) {
      for (const auto& v : table) m = std::max(m, std::abs(v));
    } else {
      for (const auto& v : val) m = std::max(m, std::abs(v));
    }
    return m;
  }

  /// Switches to coded storage when there are at most 256 distinct values (bitwise).
  bool compress() {
    if (compact()) return true;
    std::map<std::pair<double, double>, std::uint8_t> seen;
    std::vector<cplx> distinct;
    std::vector<std::uint8_t> codes(val.size());
    for (std::size_t p = 0; p < val.size(); ++p) {
      const auto key = std::make_pair(val[p].real(), val[p].imag());
      auto it = seen.find(key);
      if (it == seen.end()) {
        if (distinct.size() == 256) return false;
        it = seen.emplace(key, static_cast<std::uint8_t>(distinct.size())).first;
        distinct.push_back(val[p]);
      }
      codes[p] = it->second;
    }
    if (distinct.empty()) return false;
    code = std::move(codes);
    table = std::move(distinct);
    val = {};
    return true;
  }

  /// y = scale * (A x - shift * x) + keep * y, row by row.
  /// With keep != 0 the output may alias nothing but y itself; x must not alias y.
  void affine_multiply(std::span<const cplx> x, std::span<cplx> y, double scale, double shift,
                       double keep) const {
    if (x.size() != dim || y.size() != dim) throw DimensionMismatch("vector length differs from matrix dimension");
    if (compact()) {
      multiply_rows(x, y, scale, shift, keep, [this](std::uint64_t p) { return table[code[p]]; });
    } else {
      multiply_rows(x, y, scale, shift, keep, [this](std::uint64_t p) { return val[p]; });
    }
  }

  void multiply(std::span<const cplx> x, std::span<cplx> y) const { affine_multiply(x, y, 1.0, 0.0, 0.0); }

 private:
  template <typename Value>
  void multiply_rows(std::span<const cplx> x, std::span<cplx> y, double scale, double shift, double keep,
                     Value&& value_at) const {
    parallel_blocks(dim, workers, [&](std::size_t begin, std::size_t end) {
      const cplx* xs = x.data();
      for (std::size_t i = begin; i < end; ++i) {
        double re = 0.0;
        double im = 0.0;
        for (std::uint64_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
          const cplx a = value_at(p);
          const cplx b = xs[col[p]];
          re += a.real() * b.real() - a.imag() * b.imag();
          im += a.real() * b.imag() + a.imag() * b.real();
        }
        cplx r(re, im);
        r -= shift * xs[i];
        r *= scale;
        y[i] = (keep == 0.0) ? r : r + keep * y[i];
      }
    });
  }
};

namespace detail {

template <typename T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  os.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char bytes[sizeof(T)];
  is.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!is) throw Error("truncated sparse-matrix file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace detail

/// Header of the binary matrix dump.
struct CsrFileHeader {
  std::uint32_t n_sites = 0;
  std::uint32_t max_phonons = 0;
  std::uint32_t k_index = 0;
  std::uint64_t nnz = 0;
};

/// Little-endian layout:
///   u32 N, u32 M, u32 K-index, u64 nnz,
///   u64 row_ptr[D + 1], u32 col[nnz], f64 (re, im)[nnz]   with D = binomial(M + N, N).
inline void write_csr(const std::string& path, const CsrFileHeader& header, const CsrMatrix& m) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path + " for writing");
  detail::write_le(os, header.n_sites);
  detail::write_le(os, header.max_phonons);
  detail::write_le(os, header.k_index);
  detail::write_le(os, static_cast<std::uint64_t>(m.nnz()));
  for (auto p : m.row_ptr) detail::write_le(os, p);
  for (auto c : m.col) detail::write_le(os, c);
  for (std::size_t p = 0; p < m.nnz(); ++p) {
    const cplx v = m.value(p);
    detail::write_le(os, v.real());
    detail::write_le(os, v.imag());
  }
  if (!os) throw Error("write failed for " + path);
}

inline CsrMatrix read_csr(const std::string& path, CsrFileHeader& header) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  header.n_sites = detail::read_le<std::uint32_t>(is);
  header.max_phonons = detail::read_le<std::uint32_t>(is);
  header.k_index = detail::read_le<std::uint32_t>(is);
  header.nnz = detail::read_le<std::uint64_t>(is);
  std::uint64_t dim = 0;
  if (!checked_binomial(header.max_phonons + header.n_sites, header.n_sites, dim) || dim >= kNoIndex)
    throw CapacityExceeded("matrix file dimension out of range");
  CsrMatrix m;
  m.dim = static_cast<std::size_t>(dim);
  m.row_ptr.resize(m.dim + 1);
  for (auto& p : m.row_ptr) p = detail::read_le<std::uint64_t>(is);
  if (m.row_ptr.front() != 0 || m.row_ptr.back() != header.nnz) throw Error("corrupt row pointer in " + path);
  m.col.resize(header.nnz);
  for (auto& c : m.col) {
    c = detail::read_le<Index>(is);
    if (c >= m.dim) throw Error("column index out of range in " + path);
  }
  m.val.resize(header.nnz);
  for (auto& v : m.val) {
    const double re = detail::read_le<double>(is);
    const double im = detail::read_le<double>(is);
    v = {re, im};
  }
  m.compress();
  return m;
}

}  // namespace polaron
