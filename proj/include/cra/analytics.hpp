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

// Closed-form results for the resonantly driven Bose-Hubbard dimer.
// Rates are in units of gamma_p unless a gamma argument is taken.

#pragma once

#include "cra/models.hpp"
#include "cra/types.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <vector>

namespace cra::analytics {

struct DimerEigenfrequencies {
  // (omega_+, omega_-) relative to omega_c: the symmetric and antisymmetric
  // Bloch modes at -J and +J.
  std::array<double, 2> one_photon;
  // (omega_+, omega_0, omega_-) relative to 2 omega_c, ascending.
  std::array<double, 3> two_photon;
};

inline DimerEigenfrequencies dimer_eigenfrequencies(double J, double U) {
  if (J < 0 || U < 0) throw InvalidArgument("dimer_eigenfrequencies: J, U must be >= 0");
  const double s = std::sqrt(U * U + 4.0 * J * J);
  return {{-J, J}, {U - s, 2.0 * U, U + s}};
}

namespace detail {

inline cplx shifted_detuning(double J, double U, double gamma) {
  return cplx(resonance_detuning_bh(J, U), -0.5 * gamma);
}

}  // namespace detail

/// Weak-drive g2 of the resonantly driven dimer,
///   |D^2 - J^2|^2 / |D^2 + U D - J^2|^2,  D = Delta_c(J, U) - i gamma / 2,
/// from the order-Omega and order-Omega^2 amplitudes of the effective
/// Hamiltonian's stationary vector (the pair amplitude on |20>, |02> enters
/// <a^dag a^dag a a> with weight n(n-1) = 2).
inline double g2_closed_form(double J, double U, double gamma = 1.0) {
  const cplx d = detail::shifted_detuning(J, U, gamma);
  const cplx num = d * d - J * J;
  const cplx den = num + U * d;
  return std::norm(num) / std::norm(den);
}

/// Sign-carrying factor of g2 - 1 with the trivial U = 0 root removed:
/// g2 - 1 = -U * bunching_excess / |D^2 + U D - J^2|^2, so the emission is
/// bunched exactly where bunching_excess < 0.
inline double bunching_excess(double J, double U, double gamma = 1.0) {
  const cplx d = detail::shifted_detuning(J, U, gamma);
  const cplx a = d * d - J * J;
  return 2.0 * (std::conj(a) * d).real() + U * std::norm(d);
}

/// d(bunching_excess)/dU at fixed J.
inline double bunching_excess_slope(double J, double U, double gamma = 1.0) {
  const double s = std::sqrt(U * U + 4.0 * J * J);
  const cplx d = detail::shifted_detuning(J, U, gamma);
  const double dd = 0.5 * (U / s - 1.0);
  const cplx a = d * d - J * J;
  const cplx da = 2.0 * d * dd;
  return 2.0 * (std::conj(da) * d + std::conj(a) * dd).real() + std::norm(d) +
         2.0 * U * (std::conj(d) * dd).real();
}

enum class CriticalSource { reference, located };

struct CriticalPoint {
  double J_c = 0.0;
  double U_c = 0.0;
  CriticalSource source = CriticalSource::reference;
};

namespace detail {

template <class F>
double bisect(F&& f, double lo, double hi, int iterations = 200) {
  double flo = f(lo);
  for (int i = 0; i < iterations && hi - lo > 1e-16 * std::abs(hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

struct ExcessMinimum {
  double U = 0.0;
  double value = 0.0;
};

// Global minimum of bunching_excess over U in [1e-4, 1e4] at fixed J.
inline ExcessMinimum excess_minimum(double J, double gamma) {
  constexpr int kGrid = 400;
  const double lo = std::log(1e-4);
  const double hi = std::log(1e4);
  ExcessMinimum best{1e-4, bunching_excess(J, 1e-4, gamma)};
  double prev_u = std::exp(lo);
  double prev_slope = bunching_excess_slope(J, prev_u, gamma);
  for (int i = 1; i <= kGrid; ++i) {
    const double u = std::exp(lo + (hi - lo) * i / kGrid);
    const double slope = bunching_excess_slope(J, u, gamma);
    if (prev_slope < 0 && slope >= 0) {
      const double root = bisect(
          [&](double x) { return bunching_excess_slope(J, x, gamma); }, prev_u, u);
      const double v = bunching_excess(J, root, gamma);
      if (v < best.value) best = {root, v};
    }
    prev_u = u;
    prev_slope = slope;
  }
  const double tail = bunching_excess(J, std::exp(hi), gamma);
  if (tail < best.value) best = {std::exp(hi), tail};
  return best;
}

}  // namespace detail

/// Reference onset (J_c, U_c) = (sqrt(3 + 2 sqrt 2) / 4, sqrt(J_c)), or with
/// `locate` the smallest J at which the g2 = 1 contour first touches U > 0,
/// found by tangency of bunching_excess.
inline CriticalPoint critical_point(bool locate, double gamma = 1.0) {
  if (!locate) {
    const double jc = std::sqrt(3.0 + 2.0 * std::sqrt(2.0)) / 4.0;
    return {jc, std::sqrt(jc), CriticalSource::reference};
  }
  auto hmin = [gamma](double J) { return detail::excess_minimum(J, gamma).value; };
  double lo = 0.05 * gamma;
  double hi = lo;
  for (;;) {
    hi = lo * 1.05;
    if (hmin(hi) < 0) break;
    lo = hi;
    if (lo > 1e3 * gamma) throw ConvergenceError("critical_point: no bunching onset found");
  }
  const double jc = detail::bisect(hmin, lo, hi);
  return {jc, detail::excess_minimum(jc, gamma).U, CriticalSource::located};
}

/// Large-J location of the g2 = 1 boundary: J = sqrt(U / 2).
inline double g2_unity_boundary(double U) {
  if (!(U > 0)) throw InvalidArgument("g2_unity_boundary: U must be > 0");
  return std::sqrt(0.5 * U);
}

/// g2 ~ (J/U)^2 (1 + 4 J^2) for U >> J >= gamma_p.
inline double g2_large_u_asymptote(double J, double U) {
  return (J / U) * (J / U) * (1.0 + 4.0 * J * J);
}

/// Mean photon number per site of the hardcore (U -> infinity) dimer,
/// x (2x + 1) / ((2x + 1)^2 + x y) with x = (2 Omega / gamma)^2, y = (J / Omega)^2.
inline double hardcore_population(double omega, double J, double gamma = 1.0) {
  if (!(omega > 0)) throw InvalidArgument("hardcore_population: Omega must be > 0");
  const double x = std::pow(2.0 * omega / gamma, 2);
  const double y = std::pow(J / omega, 2);
  return x * (2.0 * x + 1.0) / ((2.0 * x + 1.0) * (2.0 * x + 1.0) + x * y);
}

/// U/J at which the upper one-photon emission line meets the weaker
/// two-photon feature: the smaller root of 2 r^2 - 9 r + 8 = 0.
inline double line_crossing_ratio() { return (9.0 - std::sqrt(17.0)) / 4.0; }

}  // namespace cra::analytics
