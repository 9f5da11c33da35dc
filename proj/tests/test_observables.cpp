#include "cra/models.hpp"
#include "cra/ness.hpp"
#include "cra/observables.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

namespace {

using cra::cplx;
using cra::FockSpace;

cra::Vector fock(const FockSpace& s, int n) {
  cra::Vector v = cra::Vector::Zero(Eigen::Index(s.dim()));
  v[n] = 1.0;
  return v;
}

cra::Vector coherent(const FockSpace& s, cplx alpha) {
  cra::Vector v(Eigen::Index(s.dim()));
  double log_fact = 0.0;
  for (int n = 0; n <= s.n_max(); ++n) {
    if (n > 0) log_fact += std::log(double(n));
    v[n] = std::pow(alpha, n) * std::exp(-0.5 * log_fact);
  }
  return v / v.norm();
}

TEST(Expectation, BasicValues) {
  FockSpace s(1, 40, false);
  const auto n = cra::site_operator(s, 0, cra::SiteOp::number);
  const auto a = cra::site_operator(s, 0, cra::SiteOp::annihilate);
  EXPECT_EQ(cra::expectation(cra::DensityMatrix::pure(fock(s, 0)), n), cplx(0.0));
  const cplx alpha(1.2, -0.7);
  const auto rho = cra::DensityMatrix::pure(coherent(s, alpha));
  EXPECT_LT(std::abs(cra::expectation(rho, a) - alpha), 1e-12);
  EXPECT_LT(std::abs(cra::expectation(rho, n).imag()), 1e-12);
  EXPECT_THROW(cra::expectation(rho, cra::site_operator(FockSpace(1, 3, false), 0,
                                                        cra::SiteOp::number)),
               cra::InvalidArgument);
}

TEST(G2Local, FockAndCoherentStates) {
  FockSpace s(1, 40, false);
  EXPECT_EQ(cra::g2_local(cra::DensityMatrix::pure(fock(s, 1)), s, 0), 0.0);
  EXPECT_NEAR(cra::g2_local(cra::DensityMatrix::pure(fock(s, 2)), s, 0), 0.5, 1e-15);
  for (cplx alpha : {cplx(0.01), cplx(0.5, 0.5), cplx(-2.0, 1.0)}) {
    EXPECT_NEAR(cra::g2_local(cra::DensityMatrix::pure(coherent(s, alpha)), s, 0), 1.0, 1e-8);
    EXPECT_NEAR(cra::g2_local(coherent(s, alpha), s, 0), 1.0, 1e-8);
  }
}

TEST(G2Local, ThermalStateIsTwo) {
  FockSpace s(1, 200, false);
  const double nbar = 0.8;
  cra::DenseMatrix rho = cra::DenseMatrix::Zero(201, 201);
  for (int n = 0; n <= 200; ++n) rho(n, n) = std::pow(nbar / (1 + nbar), n) / (1 + nbar);
  EXPECT_NEAR(cra::g2_local(cra::DensityMatrix(rho), s, 0), 2.0, 1e-10);
}

TEST(G2Local, VacuumIsAnError) {
  FockSpace s(2, 2, false);
  EXPECT_THROW(cra::g2_local(cra::DensityMatrix::pure(fock(s, 0)), s, 1),
               cra::UndefinedObservable);
  EXPECT_THROW(cra::g2_local(fock(s, 0), s, 0), cra::UndefinedObservable);
}

TEST(NumberVariance, ReferenceStates) {
  FockSpace s(1, 40, false);
  EXPECT_NEAR(cra::number_variance(cra::DensityMatrix::pure(fock(s, 1)), s, 0), 0.0, 1e-15);
  const cplx alpha(0.9, 0.3);
  EXPECT_NEAR(cra::number_variance(cra::DensityMatrix::pure(coherent(s, alpha)), s, 0),
              std::norm(alpha), 1e-10);

  // Two-photon ground state of the U = 0 dimer: (|20> + |02> + sqrt2 |11>) / 2.
  FockSpace d(2, 2, false);
  cra::BHParams p;
  p.J = 1.0;
  p.U = 0.0;
  p.detuning = 0.0;
  const auto blk = cra::excitation_block(cra::bh_hamiltonian(p, d), d, 2);
  Eigen::SelfAdjointEigenSolver<cra::DenseMatrix> es(blk.block);
  cra::Vector psi = cra::Vector::Zero(Eigen::Index(d.dim()));
  for (std::size_t i = 0; i < blk.basis.size(); ++i) {
    psi[Eigen::Index(blk.basis[i])] = es.eigenvectors()(Eigen::Index(i), 0);
  }
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(cra::mean_photons(psi, d, j), 1.0, 1e-12);
    EXPECT_NEAR(cra::number_variance(psi, d, j), 0.5, 1e-12);
  }
}

TEST(Autocorrelation, MatchesDenseRegressionOracle) {
  FockSpace s(2, 2, false);
  cra::BHParams p;
  p.J = 2;
  p.U = 1;
  p.omega = 0.6;
  const auto ness = cra::solve_ness(p, 2);
  const auto series = cra::autocorrelation(ness.rho, ness.liouvillian, ness.space, 1, 4.0, 9);
  EXPECT_NEAR(series.values[0].imag(), 0.0, 1e-12);
  EXPECT_NEAR(series.values[0].real(), cra::mean_photons(ness.rho, s, 1), 1e-12);
  const cra::DenseMatrix l(ness.liouvillian.matrix());
  const cra::DenseMatrix a = cra::site_operator(s, 1, cra::SiteOp::annihilate).dense();
  const cra::Vector x0 = cra::vectorize(a * ness.rho.matrix());
  for (std::size_t k = 0; k < 9; ++k) {
    EXPECT_DOUBLE_EQ(series.tau[k], 0.5 * double(k));
    const cra::DenseMatrix xt = cra::unvectorize((l * series.tau[k]).exp() * x0, 9);
    EXPECT_LT(std::abs(series.values[k] - (a.adjoint() * xt).trace()), 1e-9) << k;
  }
}

TEST(Autocorrelation, KrylovPathAgreesWithDensePath) {
  cra::BHParams p;
  p.J = 1;
  p.U = 2;
  p.omega = 0.4;
  const auto ness = cra::solve_ness(p, 6);
  ASSERT_GT(ness.liouvillian.size(), cra::dense_propagator_limit);
  const auto series = cra::autocorrelation(ness.rho, ness.liouvillian, ness.space, 0, 2.0, 5);
  const cra::Vector x0 = cra::vectorize(
      cra::site_operator(ness.space, 0, cra::SiteOp::annihilate).dense() * ness.rho.matrix());
  const cra::DenseMatrix ad =
      cra::site_operator(ness.space, 0, cra::SiteOp::create).dense();
  for (std::size_t k = 1; k < 5; ++k) {
    const cra::Vector xt = cra::expv(ness.liouvillian.matrix(), series.tau[k], x0,
                                     {.tol = 1e-13, .krylov_dim = 40});
    const cplx expect = (ad * cra::unvectorize(xt, 49)).trace();
    EXPECT_LT(std::abs(series.values[k] - expect), 1e-8);
  }
}

TEST(Autocorrelation, VacuumAndLinearCavity) {
  FockSpace s(1, 12, false);
  cra::BHParams p;
  p.sites = 1;
  p.U = 0;
  p.detuning = 0.0;
  p.omega = 0.0;
  auto ness = cra::solve_ness(p, 12);
  auto series = cra::autocorrelation(ness.rho, ness.liouvillian, ness.space, 0, 5.0, 11);
  for (auto v : series.values) EXPECT_LT(std::abs(v), 1e-14);

  p.omega = 0.25;
  ness = cra::solve_ness(p, 12);
  series = cra::autocorrelation(ness.rho, ness.liouvillian, ness.space, 0, 5.0, 11);
  for (auto v : series.values) EXPECT_LT(std::abs(v - cplx(0.25)), 1e-9);
  const auto spec = cra::emission_spectrum(series, true, cplx(0.25));
  const auto raw = cra::emission_spectrum(series, false, cplx(0.25));
  EXPECT_LT(*std::max_element(spec.power.begin(), spec.power.end()),
            1e-12 * *std::max_element(raw.power.begin(), raw.power.end()));
}

cra::CorrelationSeries synthetic(const std::vector<std::pair<double, cplx>>& lines,
                                 double t_max, std::size_t n, double width = 1.0) {
  cra::CorrelationSeries s;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t_max * double(k) / double(n - 1);
    cplx v = 0.0;
    for (auto [e, amp] : lines) v += amp * std::exp(cplx(-width / 2, e) * t);
    s.tau.push_back(t);
    s.values.push_back(v);
  }
  return s;
}

TEST(EmissionSpectrum, GridAndResolution) {
  const auto sp = cra::emission_spectrum(synthetic({{3.0, 1.0}}, 20.0, 401), false, 0.0);
  EXPECT_DOUBLE_EQ(sp.resolution(), 2 * std::numbers::pi / 20.0);
  EXPECT_EQ(sp.samples, 401u);
  for (std::size_t i = 1; i < sp.omega.size(); ++i) {
    EXPECT_NEAR(sp.omega[i] - sp.omega[i - 1], sp.resolution(), 1e-12);
  }
  for (double p : sp.power) EXPECT_GE(p, 0.0);
  // Nyquist band: |w| <= pi / dt = 20 pi.
  EXPECT_LE(std::abs(sp.omega.front()), 20 * std::numbers::pi + 1e-9);
  EXPECT_LE(sp.omega.back(), 20 * std::numbers::pi + 1e-9);
  // A window restricts the grid to multiples of the resolution inside it.
  cra::SpectrumOptions w;
  w.omega_min = -1.0;
  w.omega_max = 2.0;
  const auto win = cra::emission_spectrum(synthetic({{3.0, 1.0}}, 20.0, 401), false, 0.0, w);
  EXPECT_EQ(win.omega.size(), 10u);  // k = -3 .. 6
  EXPECT_NEAR(win.omega.front(), -3 * win.resolution(), 1e-12);
}

TEST(EmissionSpectrum, DirectSumOracle) {
  const auto series = synthetic({{2.0, 1.0}, {-5.0, cplx(0.3, 0.1)}}, 10.0, 257);
  const auto sp = cra::emission_spectrum(series, true, cplx(0.05, 0.0));
  const double dt = series.step();
  for (std::size_t i = 0; i < sp.omega.size(); i += 37) {
    cplx acc = 0.0;
    for (std::size_t k = 0; k < series.tau.size(); ++k) {
      acc += (series.values[k] - 0.05) * std::exp(cplx(0.0, -sp.omega[i] * series.tau[k]));
    }
    acc *= dt;
    EXPECT_LT(std::abs(sp.amplitude[i] - acc), 1e-10 * std::max(1.0, std::abs(acc)));
    EXPECT_DOUBLE_EQ(sp.power[i], std::norm(sp.amplitude[i]));
  }
}

TEST(EmissionSpectrum, LineAppearsAtPositiveEnergy) {
  const double e = 4.3;
  const auto sp = cra::emission_spectrum(synthetic({{e, 1.0}}, 30.0, 2048), false, 0.0);
  ASSERT_EQ(sp.peaks.size(), 1u);
  EXPECT_NEAR(sp.peaks[0], e, 1e-3);
  const auto grid = cra::spectral_peaks(sp.power);
  ASSERT_EQ(grid.size(), 1u);
  EXPECT_LE(std::abs(sp.omega[grid[0]] - e), sp.resolution() / 2 + 1e-12);
}

TEST(EmissionSpectrum, LinearSumRule) {
  // Over the Nyquist band, (dw / 2 pi) sum F = S(0) + S(T_max) - 2 offset.
  const auto series = synthetic({{1.5, 0.7}, {-6.0, 0.3}, {0.0, 0.2}}, 30.0, 4096);
  const cplx offset = 0.2 * std::exp(-15.0);
  const auto sp = cra::emission_spectrum(series, true, offset);
  cplx acc = 0.0;
  for (auto f : sp.amplitude) acc += f;
  acc *= sp.resolution() / (2 * std::numbers::pi);
  const cplx expect = series.values.front() + series.values.back() - 2.0 * offset;
  EXPECT_LT(std::abs(acc - expect), 1e-3 * std::abs(expect));
}

TEST(EmissionSpectrum, RejectsNonUniformGrid) {
  auto s = synthetic({{1.0, 1.0}}, 5.0, 20);
  s.tau[7] += 0.01;
  EXPECT_THROW(cra::emission_spectrum(s, false, 0.0), cra::InvalidArgument);
  cra::CorrelationSeries one;
  one.tau = {0.0};
  one.values = {1.0};
  EXPECT_THROW(cra::emission_spectrum(one, false, 0.0), cra::InvalidArgument);
}

TEST(SpectralPeaks, FloorAndTies) {
  const std::vector<double> p{0, 1, 0, 5, 5, 0, 1e-8, 0, 2, 1};
  const auto pk = cra::spectral_peaks(p, 1e-6);
  EXPECT_EQ(pk, (std::vector<std::size_t>{1, 3, 8}));
}

// Two lines A and B plus a weak line C that sweeps across B as U grows.
std::vector<cra::SpectrumSlice> crossing_scan(double u_cross, bool with_c) {
  std::vector<cra::SpectrumSlice> out;
  for (int i = 0; i < 16; ++i) {
    const double u = 5.0 + i;
    std::vector<std::pair<double, cplx>> lines{{-3.0, 1.0}, {15.0, 0.3}};
    if (with_c) lines.emplace_back(15.0 + 0.8 * (u - u_cross), 0.05);
    cra::SpectrumOptions w;
    w.omega_min = -30;
    w.omega_max = 40;
    out.push_back({u, cra::emission_spectrum(synthetic(lines, 20.0, 2048), false, 0.0, w)});
  }
  return out;
}

TEST(RidgeCrossing, LocatesSyntheticCrossing) {
  const auto r = cra::ridge_crossing(
      crossing_scan(12.3, true), 10.0, [](double) { return -3.0; },
      [](double) { return 15.0; });
  ASSERT_TRUE(r.found);
  EXPECT_NEAR(r.U, 12.3, 1.0);
  EXPECT_NEAR(r.ratio, r.U / 10.0, 1e-15);
  ASSERT_TRUE(r.line_b.has_value());
  EXPECT_NE(*r.partner, *r.line_b);
}

TEST(RidgeCrossing, NoPartnerMeansNoCrossing) {
  const auto r = cra::ridge_crossing(
      crossing_scan(12.3, false), 10.0, [](double) { return -3.0; },
      [](double) { return 15.0; });
  EXPECT_FALSE(r.found);
  EXPECT_TRUE(std::isnan(r.U));
  EXPECT_TRUE(r.line_b.has_value());
  EXPECT_EQ(r.ridge_count, 2u);
}

TEST(RidgeCrossing, MissingLineBMeansNoCrossing) {
  const auto r = cra::ridge_crossing(
      crossing_scan(12.3, true), 10.0, [](double) { return -3.0; },
      [](double) { return 25.0; });
  EXPECT_FALSE(r.found);
  EXPECT_FALSE(r.line_b.has_value());
}

TEST(RidgeCrossing, PreconditionsEnforced) {
  auto scan = crossing_scan(12.3, false);
  auto line = [](double) { return 0.0; };
  std::swap(scan[2], scan[3]);
  EXPECT_THROW(cra::ridge_crossing(scan, 1.0, line, line), cra::InvalidArgument);
  EXPECT_THROW(cra::ridge_crossing({scan[0]}, 1.0, line, line), cra::InvalidArgument);
}

TEST(TraceRidges, NearestFrequencyLinking) {
  auto slice = [](double u, std::vector<double> peaks) {
    cra::SpectrumSlice s;
    s.U = u;
    s.spectrum.peaks = std::move(peaks);
    return s;
  };
  const auto ridges = cra::trace_ridges(
      {slice(0, {1.0, 5.0}), slice(1, {1.4, 4.5, 9.0}), slice(2, {4.4}), slice(3, {4.3, 1.0})});
  ASSERT_EQ(ridges.size(), 4u);
  EXPECT_EQ(ridges[0].omega, (std::vector<double>{1.0, 1.4}));
  EXPECT_EQ(ridges[1].omega, (std::vector<double>{5.0, 4.5, 4.4, 4.3}));
  EXPECT_EQ(ridges[2].first, 1u);
  EXPECT_EQ(ridges[3].first, 3u);
  // Equidistant candidates: the lower frequency wins.
  const auto tie = cra::trace_ridges({slice(0, {2.0}), slice(1, {1.0, 3.0})});
  EXPECT_EQ(tie[0].omega, (std::vector<double>{2.0, 1.0}));
}

TEST(DoubleOccupancy, SymmetricSectorOracle) {
  FockSpace d(2, 2, false);
  auto profile = [&](double U, double J, int level) {
    cra::BHParams p;
    p.J = J;
    p.U = U;
    p.detuning = 0.0;
    const auto blk = cra::excitation_block(cra::bh_hamiltonian(p, d), d, 2);
    Eigen::SelfAdjointEigenSolver<cra::DenseMatrix> es(blk.block);
    // Symmetric eigenvectors: equal weight on |20> and |02>.
    std::vector<cra::Vector> sym;
    for (Eigen::Index c = 0; c < es.eigenvectors().cols(); ++c) {
      cra::Vector psi = cra::Vector::Zero(Eigen::Index(d.dim()));
      for (std::size_t i = 0; i < blk.basis.size(); ++i) {
        psi[Eigen::Index(blk.basis[i])] = es.eigenvectors()(Eigen::Index(i), c);
      }
      const cplx a20 = psi[Eigen::Index(d.index(std::vector<cra::SiteLabel>{{2, 0}, {0, 0}}))];
      const cplx a02 = psi[Eigen::Index(d.index(std::vector<cra::SiteLabel>{{0, 0}, {2, 0}}))];
      if (std::abs(a20 - a02) < 1e-8) sym.push_back(psi);
    }
    EXPECT_GT(sym.size(), std::size_t(level));
    return cra::double_occupancy_profile(sym[std::size_t(level)], d);
  };
  // 2x2 oracle [[2U, -2J], [-2J, 0]] on {(|20> + |02>)/sqrt2, |11>}.
  auto oracle = [](double U, double J, int level) {
    Eigen::Matrix2d m;
    m << 2 * U, -2 * J, -2 * J, 0;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(m);
    return std::norm(es.eigenvectors()(0, level));
  };
  EXPECT_NEAR(profile(0, 1, 0), 0.5, 1e-12);
  EXPECT_NEAR(profile(0, 1, 1), 0.5, 1e-12);
  EXPECT_NEAR(profile(1, 1, 0), 0.2764, 1e-4);
  EXPECT_NEAR(profile(1, 1, 1), 0.7236, 1e-4);
  for (double u : {0.3, 1.0, 4.0}) {
    EXPECT_NEAR(profile(u, 1, 0), oracle(u, 1, 0), 1e-12);
    EXPECT_NEAR(profile(u, 1, 1), oracle(u, 1, 1), 1e-12);
  }
  EXPECT_LT(profile(1e4, 1, 0), 1e-7);
}

TEST(DoubleOccupancy, Preconditions) {
  FockSpace d(2, 2, false);
  EXPECT_THROW(cra::double_occupancy_profile(cra::Vector::Zero(9), d), cra::InvalidArgument);
  EXPECT_THROW(cra::double_occupancy_profile(fock(d, 1), d), cra::InvalidArgument);
  FockSpace t(3, 2, false);
  EXPECT_THROW(cra::double_occupancy_profile(cra::Vector::Zero(27), t), cra::InvalidArgument);
}

TEST(Ness, SpectrumLinesAtWeakDrive) {
  // Bright lines: one-photon emission Delta_c - J and its two-photon cascade
  // partner J - Delta_c. The weak upper line Delta_c + J sits within two bins.
  for (auto [J, U] : {std::pair{10.0, 5.0}, {6.0, 12.0}, {3.0, 3.0}}) {
    cra::BHParams p;
    p.J = J;
    p.U = U;
    p.omega = 0.05;
    const auto ness = cra::solve_ness(p, 3);
    cra::SpectrumSettings st;
    st.samples = 2048;
    st.window.omega_min = -40;
    st.window.omega_max = 40;
    const auto sp = cra::ness_spectrum(ness, st);
    const double dc = ness.detuning;
    auto nearest = [&](double line) {
      double best = 1e9;
      for (double w : sp.peaks) best = std::min(best, std::abs(w - line));
      return best;
    };
    EXPECT_LT(nearest(dc - J), sp.resolution()) << "J=" << J << " U=" << U;
    EXPECT_LT(nearest(J - dc), sp.resolution()) << "J=" << J << " U=" << U;
    EXPECT_LT(nearest(dc + J), 2 * sp.resolution()) << "J=" << J << " U=" << U;
  }
}

}  // namespace
