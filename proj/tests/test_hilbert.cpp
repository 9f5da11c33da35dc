#include "cra/hilbert.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

namespace {

using cra::FockSpace;
using cra::SiteOp;

double max_abs(const cra::SparseMatrix& m) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < m.outerSize(); ++k) {
    for (cra::SparseMatrix::InnerIterator it(m, k); it; ++it) {
      worst = std::max(worst, std::abs(it.value()));
    }
  }
  return worst;
}

// Orbit count by explicit enumeration of label tuples and canonical rotation.
std::size_t brute_force_orbits(int sites, int local) {
  std::set<std::vector<int>> canon;
  std::vector<int> digits(static_cast<std::size_t>(sites), 0);
  for (;;) {
    std::vector<int> best = digits;
    auto rot = digits;
    for (int r = 1; r < sites; ++r) {
      std::rotate(rot.begin(), rot.begin() + 1, rot.end());
      best = std::min(best, rot);
    }
    canon.insert(best);
    int j = 0;
    while (j < sites && ++digits[static_cast<std::size_t>(j)] == local) {
      digits[static_cast<std::size_t>(j)] = 0;
      ++j;
    }
    if (j == sites) break;
  }
  return canon.size();
}

TEST(FockSpace, Dimensions) {
  EXPECT_EQ(FockSpace(2, 3, false).dim(), 16u);
  EXPECT_EQ(FockSpace(2, 1, true).dim(), 16u);
  EXPECT_EQ(FockSpace(7, 3, false).dim(), 16384u);
  EXPECT_EQ(FockSpace(2, 1, true).local_dim(), 4);
}

TEST(FockSpace, RejectsOversizedSpaces) {
  EXPECT_THROW(FockSpace(11, 3, false), cra::SizingError);  // 4^11 > 10^6
  EXPECT_THROW(FockSpace(4, 3, false, 100), cra::SizingError);
  EXPECT_NO_THROW(FockSpace(4, 3, false, 256));
  EXPECT_THROW(FockSpace(0, 3, false), cra::InvalidArgument);
  EXPECT_THROW(FockSpace(2, 0, false), cra::InvalidArgument);
}

TEST(FockSpace, IndexMapIsBijection) {
  for (auto [m, n, tls] : {std::tuple{2, 3, false}, {3, 2, true}, {4, 1, false}, {1, 4, true}}) {
    FockSpace s(m, n, tls);
    for (std::size_t i = 0; i < s.dim(); ++i) {
      const auto lab = s.label(i);
      ASSERT_EQ(s.index(lab), i);
    }
  }
}

TEST(FockSpace, OrderingIsSiteMajorPhotonFastest) {
  FockSpace s(2, 1, true);
  // Local index = tls * 2 + photons; site 0 most significant.
  EXPECT_EQ(s.label(1)[1], (cra::SiteLabel{1, 0}));
  EXPECT_EQ(s.label(2)[1], (cra::SiteLabel{0, 1}));
  EXPECT_EQ(s.label(4)[0], (cra::SiteLabel{1, 0}));
}

TEST(FockSpace, BondCounts) {
  EXPECT_TRUE(FockSpace(1, 2, false).bonds().empty());
  EXPECT_EQ(FockSpace(2, 2, false).bonds().size(), 1u);
  for (int m = 3; m <= 7; ++m) EXPECT_EQ(FockSpace(m, 1, false).bonds().size(), std::size_t(m));
}

TEST(SiteOperator, AnnihilatorEntries) {
  FockSpace s(1, 2, false);
  const auto a = cra::site_operator(s, 0, SiteOp::annihilate).dense();
  EXPECT_DOUBLE_EQ(a(0, 1).real(), 1.0);
  EXPECT_DOUBLE_EQ(a(1, 2).real(), std::sqrt(2.0));
  EXPECT_DOUBLE_EQ(a.cwiseAbs().sum(), 1.0 + std::sqrt(2.0));
}

TEST(SiteOperator, CommutatorBelowTruncation) {
  FockSpace s(2, 3, false);
  for (int site = 0; site < 2; ++site) {
    const auto a = cra::site_operator(s, site, SiteOp::annihilate).dense();
    const auto ad = cra::site_operator(s, site, SiteOp::create).dense();
    const cra::DenseMatrix comm = a * ad - ad * a;
    for (std::size_t i = 0; i < s.dim(); ++i) {
      const auto ii = Eigen::Index(i);
      const double expect = s.photons(i, site) < s.n_max() ? 1.0 : -double(s.n_max());
      EXPECT_NEAR(comm(ii, ii).real(), expect, 1e-14);
    }
    EXPECT_NEAR((comm - cra::DenseMatrix(comm.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 0.0, 0.0);
  }
}

TEST(SiteOperator, DifferentSitesCommuteExactly) {
  FockSpace s(3, 2, true);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      const cra::SparseMatrix a = cra::site_operator(s, i, SiteOp::annihilate).matrix();
      const cra::SparseMatrix ad = cra::site_operator(s, j, SiteOp::create).matrix();
      const cra::SparseMatrix c = a * ad - ad * a;
      EXPECT_EQ(max_abs(c), 0.0);
    }
  }
}

TEST(SiteOperator, SigmaMinusIsLoweringTimesPhotonIdentity) {
  FockSpace s(1, 2, true);
  const auto sm = cra::site_operator(s, 0, SiteOp::sigma_minus).dense();
  // |n, e> has local index 3 + n, |n, g> has index n.
  cra::DenseMatrix expect = cra::DenseMatrix::Zero(6, 6);
  for (int n = 0; n <= 2; ++n) expect(n, 3 + n) = 1.0;
  EXPECT_EQ((sm - expect).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(cra::site_operator(FockSpace(1, 2, false), 0, SiteOp::sigma_plus),
               cra::InvalidArgument);
  EXPECT_THROW(cra::site_operator(s, 1, SiteOp::number), cra::InvalidArgument);
}

TEST(Translation, IsPermutationOfOrderM) {
  for (int m : {2, 3, 4, 5}) {
    FockSpace s(m, 2, m < 4);
    const auto t = cra::translation_operator(s);
    cra::SparseMatrix p = cra::identity(s);
    for (int k = 0; k < m; ++k) {
      p = cra::SparseMatrix(t * p);
      if (k < m - 1) EXPECT_GT(max_abs(p - cra::identity(s)), 0.5);
    }
    EXPECT_EQ(max_abs(p - cra::identity(s)), 0.0);
    // Exactly one unit entry per column.
    EXPECT_EQ(t.nonZeros(), std::ptrdiff_t(s.dim()));
  }
}

TEST(MomentumBasis, DimerTwoLevelSector) {
  FockSpace s(2, 1, false);
  const auto b = cra::build_momentum_basis(s);
  ASSERT_EQ(b.sector_dim(), 3u);
  const cra::DenseMatrix p(b.isometry());
  EXPECT_DOUBLE_EQ(p(0, 0).real(), 1.0);
  EXPECT_NEAR(p(1, 1).real(), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(p(2, 1).real(), 1.0 / std::sqrt(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(p(3, 2).real(), 1.0);
}

TEST(MomentumBasis, SectorDimensionsMatchOrbitCounts) {
  const std::size_t d3 = cra::build_momentum_basis(FockSpace(3, 3, false)).sector_dim();
  const std::size_t d7 = cra::build_momentum_basis(FockSpace(7, 3, false)).sector_dim();
  EXPECT_EQ(d3, brute_force_orbits(3, 4));
  EXPECT_EQ(d7, brute_force_orbits(7, 4));
  // Burnside: (4^3 + 2 * 4) / 3 and (4^7 + 6 * 4) / 7.
  EXPECT_EQ(d3, 24u);
  EXPECT_EQ(d7, 2344u);
}

TEST(MomentumBasis, OrthonormalAndIdempotent) {
  for (auto [m, n] : {std::pair{3, 2}, {4, 2}, {5, 1}}) {
    FockSpace s(m, n, false);
    const auto b = cra::build_momentum_basis(s);
    const cra::DenseMatrix p(b.isometry());
    const cra::DenseMatrix gram = p.adjoint() * p;
    EXPECT_LT((gram - cra::DenseMatrix::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff(),
              1e-12);
    const cra::DenseMatrix proj = p * p.adjoint();
    EXPECT_LT((proj * proj - proj).cwiseAbs().maxCoeff(), 1e-12);
    // The sector is exactly the +1 eigenspace of T.
    const cra::DenseMatrix t(cra::translation_operator(s));
    EXPECT_LT((t * p - p).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(MomentumBasis, RoundTripOfInvariantVectors) {
  FockSpace s(4, 2, false);
  const auto b = cra::build_momentum_basis(s);
  std::mt19937 rng(7);
  std::normal_distribution<double> nd;
  for (int trial = 0; trial < 5; ++trial) {
    // Translation-invariant vector: random amplitude per orbit.
    cra::Vector v = cra::Vector::Zero(s.size());
    for (std::size_t r : b.representatives()) {
      const cra::cplx amp(nd(rng), nd(rng));
      std::size_t idx = r;
      do {
        v[Eigen::Index(idx)] = amp;
        idx = s.translate(idx);
      } while (idx != r);
    }
    const cra::Vector back = b.to_full(b.to_sector(v));
    EXPECT_LT((back - v).cwiseAbs().maxCoeff(), 1e-12);
  }
  const cra::Vector uniform = cra::Vector::Ones(s.size());
  EXPECT_LT((b.to_full(b.to_sector(uniform)) - uniform).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FixPhase, FirstNonzeroComponentRealPositive) {
  cra::Vector v(3);
  v << 0.0, cra::cplx(0.0, -2.0), cra::cplx(1.0, 1.0);
  cra::fix_phase(v);
  EXPECT_NEAR(v[1].real(), 2.0, 1e-15);
  EXPECT_EQ(v[1].imag(), 0.0);
  EXPECT_NEAR(std::abs(v[2]), std::sqrt(2.0), 1e-15);
}

}  // namespace
