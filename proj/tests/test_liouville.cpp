#include "cra/liouville.hpp"
#include "cra/models.hpp"
#include "cra/ness.hpp"
#include "cra/observables.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <random>

namespace {

using cra::BHParams;
using cra::FockSpace;

BHParams bh(int m, double J, double U, double omega, std::optional<double> dc = {}) {
  BHParams p;
  p.sites = m;
  p.J = J;
  p.U = U;
  p.omega = omega;
  p.detuning = dc;
  return p;
}

cra::DensityMatrix random_state(Eigen::Index d, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  cra::DenseMatrix g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = cra::cplx(n(rng), n(rng));
  cra::DenseMatrix rho = g * g.adjoint();
  rho /= rho.trace();
  return cra::DensityMatrix(rho);
}

TEST(Liouvillian, ActionMatchesMatrixFormula) {
  FockSpace s(2, 2, false);
  const auto h = cra::bh_hamiltonian(bh(2, 1.1, 0.7, 0.3), s);
  const auto l = cra::photon_loss_liouvillian(h, s, 0.8);
  const auto rho = random_state(Eigen::Index(s.dim()), 3);
  const cra::DenseMatrix hd = h.dense();
  cra::DenseMatrix expect = -cra::kI * (hd * rho.matrix() - rho.matrix() * hd);
  for (int j = 0; j < 2; ++j) {
    const cra::DenseMatrix a = cra::site_operator(s, j, cra::SiteOp::annihilate).dense();
    const cra::DenseMatrix ada = a.adjoint() * a;
    expect += 0.8 * (a * rho.matrix() * a.adjoint() -
                     0.5 * (ada * rho.matrix() + rho.matrix() * ada));
  }
  EXPECT_LT((l.apply(rho.matrix()) - expect).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Liouvillian, TracePreservingAndHermiticityPreserving) {
  FockSpace s(3, 2, false);
  const auto l = cra::photon_loss_liouvillian(cra::bh_hamiltonian(bh(3, 1, 2, 0.5), s), s, 1);
  for (unsigned seed : {1u, 2u}) {
    const auto rho = random_state(Eigen::Index(s.dim()), seed);
    const cra::DenseMatrix out = l.apply(rho.matrix());
    EXPECT_LT(std::abs(out.trace()), 1e-12);
    EXPECT_LT((out - out.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Liouvillian, PureDecaySpectrum) {
  // Single mode, no Hamiltonian: eigenvalues -gamma (m + n) / 2 for |m><n|.
  FockSpace s(1, 3, false);
  const auto h = cra::bh_hamiltonian(bh(1, 0, 0, 0, 0.0), s);
  const auto l = cra::photon_loss_liouvillian(h, s, 1.0);
  Eigen::ComplexEigenSolver<cra::DenseMatrix> es{cra::DenseMatrix(l.matrix())};
  std::vector<double> re;
  for (auto v : es.eigenvalues()) {
    EXPECT_NEAR(v.imag(), 0.0, 1e-12);
    re.push_back(v.real());
  }
  std::sort(re.begin(), re.end());
  std::vector<double> expect;
  for (int m = 0; m <= 3; ++m)
    for (int n = 0; n <= 3; ++n) expect.push_back(-0.5 * (m + n));
  std::sort(expect.begin(), expect.end());
  for (std::size_t i = 0; i < re.size(); ++i) EXPECT_NEAR(re[i], expect[i], 1e-12);
}

TEST(SteadyState, UndrivenIsVacuum) {
  FockSpace s(2, 3, false);
  const auto l = cra::photon_loss_liouvillian(cra::bh_hamiltonian(bh(2, 1, 1, 0), s), s, 1);
  const auto rho = cra::steady_state(l);
  EXPECT_NEAR(rho.matrix()(0, 0).real(), 1.0, 1e-12);
  EXPECT_NEAR(rho.matrix().cwiseAbs().sum(), 1.0, 1e-12);
}

TEST(SteadyState, LinearCavityIsCoherent) {
  FockSpace s(1, 10, false);
  for (double omega : {0.05, 0.2}) {
    const auto l =
        cra::photon_loss_liouvillian(cra::bh_hamiltonian(bh(1, 0, 0, omega, 0.0), s), s, 1);
    const auto rho = cra::steady_state(l);
    EXPECT_NEAR(cra::mean_photons(rho, s, 0), 4 * omega * omega, 1e-10);
    EXPECT_NEAR(cra::g2_local(rho, s, 0), 1.0, 1e-7);
    const auto a = cra::site_operator(s, 0, cra::SiteOp::annihilate);
    const cra::cplx alpha = cra::expectation(rho, a);
    EXPECT_NEAR(alpha.real(), 0.0, 1e-12);
    EXPECT_NEAR(alpha.imag(), -2 * omega, 1e-10);
  }
}

TEST(SteadyState, PhysicalInvariants) {
  FockSpace s(2, 4, false);
  const auto h = cra::bh_hamiltonian(bh(2, 10, 5, 0.3), s);
  const auto l = cra::photon_loss_liouvillian(h, s, 1);
  const auto rho = cra::steady_state(l);
  EXPECT_NEAR(rho.trace().real(), 1.0, 1e-12);
  EXPECT_LT(rho.hermiticity_defect(), 1e-12);
  EXPECT_GT(rho.min_eigenvalue(), -1e-10);
  EXPECT_LT(l.apply(rho.matrix()).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_NEAR(cra::mean_photons(rho, s, 0), cra::mean_photons(rho, s, 1), 1e-10);
  EXPECT_NEAR(cra::g2_local(rho, s, 0), cra::g2_local(rho, s, 1), 1e-8);
}

TEST(SteadyState, SolverPathsAgree) {
  FockSpace s(2, 4, false);
  const auto l = cra::photon_loss_liouvillian(cra::bh_hamiltonian(bh(2, 2, 3, 0.7), s), s, 1);
  using M = cra::SteadyStateOptions::Method;
  cra::SteadyStateOptions o;
  o.method = M::dense;
  const auto dense = cra::steady_state(l, o);
  o.method = M::sparse;
  const auto sparse = cra::steady_state(l, o);
  o.method = M::iterative;
  const auto iter = cra::steady_state(l, o);
  EXPECT_LT(trace_distance(dense, sparse), 1e-10);
  EXPECT_LT(trace_distance(dense, iter), 1e-9);
}

TEST(SteadyState, ThreeSiteRingIsSiteUniform) {
  FockSpace s(3, 3, false);
  const auto l = cra::photon_loss_liouvillian(cra::bh_hamiltonian(bh(3, 1, 2, 0.5), s), s, 1);
  const auto rho = cra::steady_state(l);
  for (int j = 1; j < 3; ++j) {
    EXPECT_NEAR(cra::mean_photons(rho, s, j), cra::mean_photons(rho, s, 0), 1e-10);
    EXPECT_NEAR(cra::g2_local(rho, s, j), cra::g2_local(rho, s, 0), 1e-8);
  }
}

TEST(SteadyState, DegenerateNullSpaceIsReported) {
  FockSpace s(1, 2, false);
  const auto h = cra::bh_hamiltonian(bh(1, 0, 1, 0, 0.5), s);
  const auto l = cra::photon_loss_liouvillian(h, s, 0.0);
  EXPECT_EQ(cra::null_space_dimension(l), 3);
  EXPECT_THROW(cra::steady_state(l), cra::DegeneracyError);
  const auto lossy = cra::photon_loss_liouvillian(h, s, 1.0);
  EXPECT_EQ(cra::null_space_dimension(lossy), 1);
}

TEST(Expv, MatchesDenseExponential) {
  FockSpace s(2, 2, false);
  const auto l = cra::photon_loss_liouvillian(cra::bh_hamiltonian(bh(2, 3, 1, 0.8), s), s, 1);
  const cra::DenseMatrix dense(l.matrix());
  const auto rho0 = random_state(Eigen::Index(s.dim()), 7);
  const cra::Vector v = cra::vectorize(rho0.matrix());
  for (double t : {0.0, 0.01, 1.0, 7.5}) {
    const cra::DenseMatrix e = (dense * t).exp();
    const cra::Vector expect = e * v;
    const cra::Vector got = cra::expv(l.matrix(), t, v);
    EXPECT_LT((got - expect).norm(), 1e-8 * std::max(1.0, t)) << "t=" << t;
  }
}

TEST(Evolve, FreeDecayOfPhotonNumber) {
  FockSpace s(1, 3, false);
  const auto l =
      cra::photon_loss_liouvillian(cra::bh_hamiltonian(bh(1, 0, 0.4, 0, 1.0), s), s, 1);
  cra::Vector psi = cra::Vector::Zero(4);
  psi[1] = 1.0;
  const auto rho0 = cra::DensityMatrix::pure(psi);
  for (double t : {0.5, 2.0, 6.0}) {
    const auto rho = cra::evolve(rho0, l, t);
    EXPECT_NEAR(cra::mean_photons(rho, s, 0), std::exp(-t), 1e-9);
    EXPECT_NEAR(rho.trace().real(), 1.0, 1e-10);
  }
}

TEST(Evolve, RelaxesToSteadyState) {
  FockSpace s(2, 4, false);
  const auto l = cra::photon_loss_liouvillian(
      cra::bh_hamiltonian(bh(2, 10, 5, 0.3), s), s, 1);
  cra::Vector vac = cra::Vector::Zero(Eigen::Index(s.dim()));
  vac[0] = 1.0;
  const auto late = cra::evolve(cra::DensityMatrix::pure(vac), l, 50.0);
  EXPECT_LT(trace_distance(late, cra::steady_state(l)), 1e-6);
}

TEST(Ness, SolveUsesResolvedDetuning) {
  const auto ness = cra::solve_ness(bh(2, 1, 1, 0.1), 3);
  EXPECT_NEAR(ness.detuning, (std::sqrt(5.0) - 1) / 2, 1e-14);
  EXPECT_EQ(ness.space.dim(), 16u);
  EXPECT_NEAR(ness.rho.trace().real(), 1.0, 1e-12);
}

}  // namespace
