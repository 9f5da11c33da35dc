// Copyright 2026 The cra Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Infinitesimal-drive photon statistics from the stationary vector of the
// non-Hermitian effective Hamiltonian, with optional zero-momentum reduction,
// and the extent of the bunched region along a U scan.

#pragma once

#include "cra/hilbert.hpp"
#include "cra/liouville.hpp"
#include "cra/models.hpp"
#include "cra/observables.hpp"
#include "cra/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cra {

struct StationaryState {
  Vector state;  // unit norm, first non-negligible component real positive
  cplx eigenvalue;
};

struct StationaryOptions {
  /// Dense eigen-decomposition selects the minimum-modulus eigenpair up to
  /// this dimension; above it the vacuum-anchored solve starts from lambda = 0.
  /// At weak drive the vacuum branch has |lambda| = O(Omega^2) while every
  /// other eigenvalue has |Im lambda| >= gamma / 2, so both select the same pair.
  Eigen::Index dense_limit = 256;
  double degeneracy_tol = 1e-12;
  int max_refinements = 50;
};

namespace detail {

// Solve (H - lambda) x = 0 with x[anchor] = 1, updating lambda from the
// anchor row until it is self-consistent. Components that are O(Omega^k)
// keep their relative accuracy, which a plain eigenvector does not.
inline StationaryState anchored_refine(const SparseMatrix& h, Eigen::Index anchor,
                                       cplx lambda, int max_iter) {
  const Eigen::Index n = h.rows();
  if (n == 1) return {Vector::Ones(1), h.coeff(0, 0)};
  auto shrink = [anchor](Eigen::Index i) { return i < anchor ? i : i - 1; };
  std::vector<Triplet> base;
  Vector rhs = Vector::Zero(n - 1);
  Vector anchor_row = Vector::Zero(n);
  for (Eigen::Index k = 0; k < h.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(h, k); it; ++it) {
      const auto r = it.row();
      const auto c = it.col();
      if (r == anchor) {
        anchor_row[c] += it.value();
      } else if (c == anchor) {
        rhs[shrink(r)] -= it.value();
      } else {
        base.emplace_back(shrink(r), shrink(c), it.value());
      }
    }
  }
  DirectSparseLU lu;
  Vector x_rest;
  for (int iter = 0; iter < max_iter; ++iter) {
    std::vector<Triplet> entries(base);
    for (Eigen::Index i = 0; i < n - 1; ++i) entries.emplace_back(i, i, -lambda);
    SparseMatrix a(n - 1, n - 1);
    a.setFromTriplets(entries.begin(), entries.end());
    a.makeCompressed();
    if (iter == 0) lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success) {
      throw ConvergenceError("stationary_state: anchored system is singular");
    }
    x_rest = lu.solve(rhs);
    cplx next = anchor_row[anchor];
    for (Eigen::Index c = 0; c < n; ++c) {
      if (c != anchor && anchor_row[c] != cplx(0.0)) next += anchor_row[c] * x_rest[shrink(c)];
    }
    const double change = std::abs(next - lambda);
    lambda = next;
    if (change <= 1e-14 * std::abs(lambda) || change == 0.0) {
      Vector full(n);
      for (Eigen::Index i = 0; i < n; ++i) full[i] = i == anchor ? cplx(1.0) : x_rest[shrink(i)];
      full.normalize();
      fix_phase(full);
      return {std::move(full), lambda};
    }
  }
  throw ConvergenceError("stationary_state: eigenvalue refinement did not converge");
}

}  // namespace detail

/// Eigenpair of a (driven) effective Hamiltonian whose eigenvalue has the
/// smallest modulus.
inline StationaryState stationary_state(const SparseMatrix& h_eff,
                                        const StationaryOptions& opt = {}) {
  const Eigen::Index n = h_eff.rows();
  if (n == 0 || h_eff.cols() != n) throw InvalidArgument("stationary_state: bad matrix");
  if (n > opt.dense_limit) {
    return detail::anchored_refine(h_eff, 0, 0.0, opt.max_refinements);
  }
  Eigen::ComplexEigenSolver<DenseMatrix> es(DenseMatrix(h_eff), true);
  if (es.info() != Eigen::Success) {
    throw ConvergenceError("stationary_state: dense eigensolver failed");
  }
  const auto& ev = es.eigenvalues();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < n; ++i) {
    if (std::abs(ev[i]) < std::abs(ev[best])) best = i;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i != best && std::abs(std::abs(ev[i]) - std::abs(ev[best])) < opt.degeneracy_tol) {
      throw DegeneracyError("stationary_state: minimum-modulus eigenvalue is degenerate");
    }
  }
  Eigen::Index anchor = 0;
  es.eigenvectors().col(best).cwiseAbs().maxCoeff(&anchor);
  return detail::anchored_refine(h_eff, anchor, ev[best], opt.max_refinements);
}

inline StationaryState stationary_state(const OperatorMatrix& h_eff, double omega,
                                        const StationaryOptions& opt = {}) {
  if (!(omega > 0)) throw InvalidArgument("stationary_state: drive amplitude must be > 0");
  return stationary_state(h_eff.matrix(), opt);
}

struct WeakDriveOptions {
  std::vector<double> omegas{1e-2, 1e-3, 1e-4};
  double tol = 1e-3;  // relative change of g2 between the last two drives
  StationaryOptions stationary;
};

struct WeakDriveResult {
  std::vector<double> omega_sequence;
  std::vector<double> g2_sequence;
  double converged_g2 = 0.0;
  bool converged = false;
  double population = 0.0;  // <n_0> at the smallest drive
  cplx eigenvalue = 0.0;    // at the smallest drive
};

namespace detail {

inline void check_omegas(const std::vector<double>& omegas) {
  if (omegas.empty()) throw InvalidArgument("weakdrive: empty drive sequence");
  for (std::size_t i = 0; i < omegas.size(); ++i) {
    if (!(omegas[i] > 0)) throw InvalidArgument("weakdrive: drive amplitudes must be > 0");
    if (i && !(omegas[i] < omegas[i - 1])) {
      throw InvalidArgument("weakdrive: drive sequence must be strictly decreasing");
    }
  }
}

template <class Solve>
WeakDriveResult run_weakdrive(const ModelParams& model, const FockSpace& space,
                              const WeakDriveOptions& opt, Solve&& solve) {
  check_omegas(opt.omegas);
  if (model_sites(model) != space.sites() || model_has_tls(model) != space.has_tls()) {
    throw InvalidArgument("weakdrive: model does not match space");
  }
  // Resolve the detuning once; it does not depend on the drive.
  ModelParams fixed = model;
  const double dc = model_detuning(model, space);
  std::visit([dc](auto& p) { p.detuning = dc; }, fixed);
  const double gamma = model_gamma(model);

  WeakDriveResult out;
  for (double omega : opt.omegas) {
    const auto h = hamiltonian(with_omega(fixed, omega), space);
    const auto heff = effective_hamiltonian(h, space, gamma);
    const StationaryState st = solve(heff);
    out.omega_sequence.push_back(omega);
    out.g2_sequence.push_back(g2_local(st.state, space, 0));
    out.population = mean_photons(st.state, space, 0);
    out.eigenvalue = st.eigenvalue;
  }
  out.converged_g2 = out.g2_sequence.back();
  if (out.g2_sequence.size() >= 2) {
    const double a = out.g2_sequence[out.g2_sequence.size() - 2];
    const double b = out.g2_sequence.back();
    out.converged = std::abs(a - b) <= opt.tol * std::abs(b);
  }
  return out;
}

}  // namespace detail

/// Weak-drive g2 on site 0 from the full-space effective Hamiltonian.
inline WeakDriveResult weakdrive_g2(const ModelParams& model, const FockSpace& space,
                                    const WeakDriveOptions& opt = {}) {
  return detail::run_weakdrive(model, space, opt, [&](const OperatorMatrix& heff) {
    return stationary_state(heff.matrix(), opt.stationary);
  });
}

/// Same contract as weakdrive_g2, solved inside the zero-momentum sector.
inline WeakDriveResult weakdrive_g2_momentum(const ModelParams& model,
                                             const FockSpace& space,
                                             const MomentumBasis& basis,
                                             const WeakDriveOptions& opt = {}) {
  if (basis.full_dim() != space.dim()) {
    throw InvalidArgument("weakdrive_g2_momentum: basis built for another space");
  }
  return detail::run_weakdrive(model, space, opt, [&](const OperatorMatrix& heff) {
    StationaryState st = stationary_state(basis.restrict(heff.matrix()), opt.stationary);
    Vector full = basis.to_full(st.state);
    full.normalize();
    fix_phase(full);
    return StationaryState{std::move(full), st.eigenvalue};
  });
}

struct BunchingRegion {
  double J = 0.0;
  bool empty = true;
  double U_LHS = 0.0;  // argmax of g2 over U
  double U_RHS = 0.0;  // g2 = 1 crossing above the peak
  double peak_g2 = 0.0;
};

/// Extent of the bunched region along an increasing U grid for any g2(U).
/// U_LHS is refined by golden-section search around the best grid point and
/// U_RHS by bisection in log U to `rel_tol`.
template <class G2>
BunchingRegion bunching_region(double J, G2&& g2_of_u, std::span<const double> u_grid,
                               double rel_tol = 1e-3) {
  if (u_grid.size() < 3) throw InvalidArgument("bunching_region: grid too small");
  for (std::size_t i = 0; i < u_grid.size(); ++i) {
    if (!(u_grid[i] > 0) || (i && !(u_grid[i] > u_grid[i - 1]))) {
      throw InvalidArgument("bunching_region: U grid must be positive and increasing");
    }
  }
  std::vector<double> g(u_grid.size());
  for (std::size_t i = 0; i < u_grid.size(); ++i) g[i] = g2_of_u(u_grid[i]);
  const auto imax = static_cast<std::size_t>(
      std::distance(g.begin(), std::max_element(g.begin(), g.end())));

  BunchingRegion out;
  out.J = J;
  out.peak_g2 = g[imax];
  if (g[imax] <= 1.0) return out;
  out.empty = false;

  // Golden-section refinement of the peak in log U.
  double a = std::log(u_grid[imax == 0 ? 0 : imax - 1]);
  double b = std::log(u_grid[std::min(imax + 1, u_grid.size() - 1)]);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double gc = g2_of_u(std::exp(c));
  double gd = g2_of_u(std::exp(d));
  while (b - a > 1e-2 * rel_tol) {
    if (gc > gd) {
      b = d;
      d = c;
      gd = gc;
      c = b - phi * (b - a);
      gc = g2_of_u(std::exp(c));
    } else {
      a = c;
      c = d;
      gc = gd;
      d = a + phi * (b - a);
      gd = g2_of_u(std::exp(d));
    }
  }
  const double u_peak = std::exp(0.5 * (a + b));
  const double g_peak = g2_of_u(u_peak);
  if (g_peak >= out.peak_g2) {
    out.peak_g2 = g_peak;
    out.U_LHS = u_peak;
  } else {
    out.U_LHS = u_grid[imax];
  }

  std::size_t above = imax;
  while (above < g.size() && g[above] >= 1.0) ++above;
  if (above == g.size()) {
    throw ConvergenceError("bunching_region: g2 stays above 1 up to U = " +
                           std::to_string(u_grid.back()) + "; bracket [" +
                           std::to_string(u_grid[imax]) + ", inf)");
  }
  double lo = std::log(u_grid[above - 1]);
  double hi = std::log(u_grid[above]);
  while (hi - lo > 1e-2 * rel_tol) {
    const double mid = 0.5 * (lo + hi);
    (g2_of_u(std::exp(mid)) >= 1.0 ? lo : hi) = mid;
  }
  out.U_RHS = std::exp(0.5 * (lo + hi));
  return out;
}

/// Bunching region of the resonantly driven Bose-Hubbard chain in the
/// weak-drive limit. The grid must span at least [0.1, 1000].
inline BunchingRegion bunching_region_weakdrive(int sites, double J, int n_max,
                                                std::span<const double> u_grid,
                                                const WeakDriveOptions& opt = {},
                                                double rel_tol = 1e-3) {
  if (u_grid.empty() || u_grid.front() > 0.1 || u_grid.back() < 1e3) {
    throw InvalidArgument("bunching_region: U grid must span at least [0.1, 1000]");
  }
  const FockSpace space(sites, n_max, false);
  std::optional<MomentumBasis> basis;
  if (sites >= 3) basis.emplace(space);
  auto g2 = [&](double u) {
    BHParams p;
    p.sites = sites;
    p.J = J;
    p.U = u;
    return basis ? weakdrive_g2_momentum(p, space, *basis, opt).converged_g2
                 : weakdrive_g2(p, space, opt).converged_g2;
  };
  return bunching_region(J, g2, u_grid, rel_tol);
}

}  // namespace cra
