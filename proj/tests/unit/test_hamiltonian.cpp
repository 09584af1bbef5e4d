#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <memory>

#include "polaron/eigensolver.hpp"
#include "polaron/hamiltonian.hpp"
#include "polaron/model.hpp"
#include "polaron/oracle.hpp"

namespace {

using namespace polaron;

ModelParams small_model(int n, int m, double phi_over_pi = 0.975) {
  DeviceParams dev;
  dev.phi_dc = phi_over_pi * std::numbers::pi;
  return derive_model(dev, n, m);
}

TEST(BuildSector, HermitianInEverySector) {
  const auto p = small_model(7, 4);
  auto basis = std::make_shared<const PhononBasis>(7, 4);
  for (int k = 0; k < 7; ++k) {
    const auto h = build_sector(p, KSector::make(k, basis));
    EXPECT_LT(hermiticity_defect(h.matrix()), 1e-13) << "k=" << k;
    EXPECT_EQ(h.dim(), basis->size());
  }
}

TEST(BuildSector, OppositeMomentaShareSpectrum) {
  const auto p = small_model(5, 3);
  auto basis = std::make_shared<const PhononBasis>(5, 3);
  for (int k = 1; k <= 2; ++k) {
    const auto a = oracle::sector_spectrum(build_sector(p, KSector::make(k, basis)));
    const auto b = oracle::sector_spectrum(build_sector(p, KSector::make(5 - k, basis)));
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-10);
  }
}

TEST(BuildSector, ZeroMomentumBareStateIsEigenstate) {
  const auto p = small_model(9, 3);
  auto basis = std::make_shared<const PhononBasis>(9, 3);
  const auto h = build_sector(p, KSector::make(0, basis));
  std::vector<cplx> x(h.dim(), cplx{});
  x[zero_phonon_index(*basis)] = 1.0;
  const auto y = matvec(h, x);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const cplx expect = i == zero_phonon_index(*basis) ? cplx(-2.0 * p.t0) : cplx{};
    EXPECT_LT(std::abs(y[i] - expect), 1e-12) << i;
  }
}

TEST(BuildSector, UncoupledZeroPhononLevelsFollowTheBand) {
  const auto p = ModelParams::from_couplings(5, 2, 1.3, 0.0, 0.7);
  auto basis = std::make_shared<const PhononBasis>(5, 2);
  for (int k = 0; k < 5; ++k) {
    const auto sector = KSector::make(k, basis);
    const auto h = build_sector(p, sector);
    std::vector<cplx> x(h.dim(), cplx{});
    x[zero_phonon_index(*basis)] = 1.0;
    const auto y = matvec(h, x);
    EXPECT_NEAR(y[0].real(), -2.0 * p.t0 * std::cos(sector.k_value), 1e-12);
    for (std::size_t i = 1; i < y.size(); ++i) EXPECT_EQ(y[i], cplx{});
  }
}

TEST(BuildSector, CompactStorageMatchesPlainValues) {
  const auto p = small_model(6, 4);
  auto basis = std::make_shared<const PhononBasis>(6, 4);
  const auto h = build_sector(p, KSector::make(2, basis));
  ASSERT_TRUE(h.matrix().compact());
  CsrMatrix plain = h.matrix();
  plain.val.resize(plain.nnz());
  for (std::size_t i = 0; i < plain.nnz(); ++i) plain.val[i] = h.matrix().value(i);
  plain.table.clear();
  plain.code.clear();
  const auto x = linalg::random_unit_vector(h.dim(), 7);
  std::vector<cplx> a(h.dim());
  std::vector<cplx> b(h.dim());
  h.matrix().multiply(x, a);
  plain.multiply(x, b);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
}

TEST(BuildSector, ParallelBuildIsIdentical) {
  const auto p = small_model(6, 4);
  auto basis = std::make_shared<const PhononBasis>(6, 4);
  SectorBuildOptions four;
  four.workers = 4;
  const auto a = build_sector(p, KSector::make(3, basis));
  const auto b = build_sector(p, KSector::make(3, basis), four);
  ASSERT_EQ(a.matrix().nnz(), b.matrix().nnz());
  EXPECT_EQ(a.matrix().row_ptr, b.matrix().row_ptr);
  EXPECT_EQ(a.matrix().col, b.matrix().col);
  for (std::size_t i = 0; i < a.matrix().nnz(); ++i) EXPECT_EQ(a.matrix().value(i), b.matrix().value(i));
}

TEST(BuildSector, BasisMismatchRejected) {
  const auto p = small_model(6, 4);
  auto basis = std::make_shared<const PhononBasis>(6, 3);
  EXPECT_THROW(build_sector(p, KSector::make(0, basis)), DimensionMismatch);
}

TEST(SectorCache, RoundTrip) {
  const auto p = small_model(5, 3);
  auto basis = std::make_shared<const PhononBasis>(5, 3);
  const auto sector = KSector::make(2, basis);
  const auto h = build_sector(p, sector);
  const auto path = std::filesystem::temp_directory_path() / "polaron_cache_roundtrip.csr";
  save_sector(path.string(), h);
  const auto back = load_sector(path.string(), p, sector);
  EXPECT_EQ(back.matrix().row_ptr, h.matrix().row_ptr);
  EXPECT_EQ(back.matrix().col, h.matrix().col);
  for (std::size_t i = 0; i < h.matrix().nnz(); ++i) EXPECT_EQ(back.matrix().value(i), h.matrix().value(i));
  EXPECT_THROW(load_sector(path.string(), p, KSector::make(1, basis)), DimensionMismatch);
  std::filesystem::remove(path);
}

TEST(Rescaled, MapsSpectrumInsideUnitInterval) {
  const auto p = small_model(5, 3);
  auto basis = std::make_shared<const PhononBasis>(5, 3);
  const auto h = build_sector(p, KSector::make(1, basis));
  const auto spec = oracle::sector_spectrum(h);
  const RescaledOperator op(h, spec.front(), spec.back(), 1e-3);
  const Eigen::MatrixXcd d = oracle::to_dense(h.matrix());
  Eigen::MatrixXcd scaled = (d - op.b_shift() * Eigen::MatrixXcd::Identity(d.rows(), d.cols())) / op.a_scale();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(scaled, Eigen::EigenvaluesOnly);
  EXPECT_GT(es.eigenvalues().minCoeff(), -1.0);
  EXPECT_LT(es.eigenvalues().maxCoeff(), 1.0);
  EXPECT_THROW(RescaledOperator(h, 1.0, 1.0, 1e-3), DegenerateSpectrum);
}

}  // namespace
