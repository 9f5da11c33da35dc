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

// Expectation values, local photon statistics, two-time correlations via
// the quantum regression theorem, and emission spectra.

#pragma once

#include "cra/hilbert.hpp"
#include "cra/liouville.hpp"
#include "cra/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace cra {

/// Tr(O rho).
inline cplx expectation(const DensityMatrix& rho, const OperatorMatrix& op) {
  if (rho.dim() != op.dim()) throw InvalidArgument("expectation: dimension mismatch");
  cplx acc = 0.0;
  const auto& r = rho.matrix();
  for (Eigen::Index k = 0; k < op.matrix().outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(op.matrix(), k); it; ++it) {
      acc += it.value() * r(it.col(), it.row());
    }
  }
  return acc;
}

/// <psi|O|psi> / <psi|psi>.
inline cplx expectation(const Vector& psi, const OperatorMatrix& op) {
  if (psi.size() != op.dim()) throw InvalidArgument("expectation: dimension mismatch");
  const double n2 = psi.squaredNorm();
  if (n2 == 0.0) throw InvalidArgument("expectation: zero state vector");
  return psi.dot(op.matrix() * psi) / n2;
}

namespace detail {

// Diagonal weights n(n-1) and n for one site, evaluated from basis labels.
struct LocalMoments {
  double n = 0.0;
  double n2 = 0.0;    // <n^2>
  double pair = 0.0;  // <a^dag a^dag a a>
};

template <class Weight>
LocalMoments local_moments(const FockSpace& space, int site, Weight&& weight) {
  if (site < 0 || site >= space.sites()) {
    throw InvalidArgument("site " + std::to_string(site) + " out of range");
  }
  LocalMoments m;
  for (std::size_t idx = 0; idx < space.dim(); ++idx) {
    const double p = weight(idx);
    const double n = space.photons(idx, site);
    m.n += p * n;
    m.n2 += p * n * n;
    m.pair += p * n * (n - 1.0);
  }
  return m;
}

inline LocalMoments local_moments(const DensityMatrix& rho, const FockSpace& space,
                                  int site) {
  if (rho.dim() != space.size()) throw InvalidArgument("dimension mismatch");
  const auto& r = rho.matrix();
  return local_moments(space, site, [&](std::size_t i) {
    return r(Eigen::Index(i), Eigen::Index(i)).real();
  });
}

inline LocalMoments local_moments(const Vector& psi, const FockSpace& space, int site) {
  if (psi.size() != space.size()) throw InvalidArgument("dimension mismatch");
  const double n2 = psi.squaredNorm();
  if (n2 == 0.0) throw InvalidArgument("zero state vector");
  return local_moments(space, site,
                       [&](std::size_t i) { return std::norm(psi[Eigen::Index(i)]) / n2; });
}

inline double g2_from(const LocalMoments& m, double floor) {
  if (!(m.n > floor)) {
    throw UndefinedObservable("g2_local: mean photon number " + std::to_string(m.n) +
                              " is zero; g2 undefined");
  }
  return m.pair / (m.n * m.n);
}

}  // namespace detail

/// Minimum <n_j> for which g2 of a density matrix is considered defined.
inline constexpr double kG2PopulationFloor = 1e-14;

/// <a^dag a^dag a a> / <a^dag a>^2 on one site.
inline double g2_local(const DensityMatrix& rho, const FockSpace& space, int site) {
  return detail::g2_from(detail::local_moments(rho, space, site), kG2PopulationFloor);
}

// Pure states are normalized exactly, so only an identically empty site is rejected.
inline double g2_local(const Vector& psi, const FockSpace& space, int site) {
  return detail::g2_from(detail::local_moments(psi, space, site), 0.0);
}

inline double mean_photons(const DensityMatrix& rho, const FockSpace& space, int site) {
  return detail::local_moments(rho, space, site).n;
}
inline double mean_photons(const Vector& psi, const FockSpace& space, int site) {
  return detail::local_moments(psi, space, site).n;
}

inline double number_variance(const DensityMatrix& rho, const FockSpace& space, int site) {
  const auto m = detail::local_moments(rho, space, site);
  return m.n2 - m.n * m.n;
}
inline double number_variance(const Vector& psi, const FockSpace& space, int site) {
  const auto m = detail::local_moments(psi, space, site);
  return m.n2 - m.n * m.n;
}

struct CorrelationSeries {
  std::vector<double> tau;
  std::vector<cplx> values;

  double step() const { return tau.size() > 1 ? tau[1] - tau[0] : 0.0; }
  double t_max() const { return tau.empty() ? 0.0 : tau.back(); }
};

/// Superoperator size up to which autocorrelation propagates with a dense
/// matrix exponential instead of Krylov steps.
inline constexpr Eigen::Index dense_propagator_limit = 1296;

/// S(tau) = <a^dag(t + tau) a(t)> = Tr[a^dag exp(L tau)(a rho_ss)] on
/// `samples` uniform delays in [0, t_max].
inline CorrelationSeries autocorrelation(const DensityMatrix& rho_ss,
                                         const Superoperator& l,
                                         const FockSpace& space, int site,
                                         double t_max, std::size_t samples,
                                         ExpvOptions opt = {.tol = 1e-10, .krylov_dim = 16}) {
  if (rho_ss.dim() != space.size() || l.hilbert_dim() != space.size()) {
    throw InvalidArgument("autocorrelation: dimension mismatch");
  }
  if (samples < 2 || !(t_max > 0)) {
    throw InvalidArgument("autocorrelation: need >= 2 samples and t_max > 0");
  }
  const auto a = site_operator(space, site, SiteOp::annihilate);
  const auto ad = a.adjoint();
  const Eigen::Index d = space.size();

  CorrelationSeries out;
  out.tau.resize(samples);
  out.values.resize(samples);
  const double dt = t_max / static_cast<double>(samples - 1);
  Vector x = vectorize(DenseMatrix(a.matrix() * rho_ss.matrix()));
  // Small Liouvillians use one dense propagator exp(L dt) for every step.
  std::optional<DenseMatrix> step;
  if (l.size() <= dense_propagator_limit) {
    step = (DenseMatrix(l.matrix()) * dt).exp();
  }
  for (std::size_t k = 0; k < samples; ++k) {
    out.tau[k] = dt * static_cast<double>(k);
    // Tr(a^dag X) = sum_{ij} (a^dag)_{ij} X_{ji}
    cplx s = 0.0;
    for (Eigen::Index c = 0; c < ad.matrix().outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(ad.matrix(), c); it; ++it) {
        s += it.value() * x[it.col() + it.row() * d];
      }
    }
    out.values[k] = s;
    if (k + 1 < samples) x = step ? Vector(*step * x) : expv(l.matrix(), dt, x, opt);
  }
  return out;
}

struct SpectrumResult {
  std::vector<double> omega;      // omega - omega_L
  std::vector<double> power;      // |S(omega - omega_L)|^2
  std::vector<cplx> amplitude;    // S(omega - omega_L)
  std::vector<double> peaks;      // local maxima of |F(omega)|^2, off-grid refined
  double t_max = 0.0;
  std::size_t samples = 0;
  bool coherent_subtracted = false;
  cplx coherent_offset = 0.0;

  double resolution() const { return 2.0 * std::numbers::pi / t_max; }
};

struct SpectrumOptions {
  // Frequency window; the grid is k * 2 pi / T_max for every integer k inside
  // it. Unset bounds default to the Nyquist band.
  std::optional<double> omega_min;
  std::optional<double> omega_max;
  // Grid maxima below peak_floor * max(power) are not reported as peaks.
  double peak_floor = 1e-6;
};

/// Indices of local maxima of `power` exceeding rel_floor * max(power).
inline std::vector<std::size_t> spectral_peaks(const std::vector<double>& power,
                                               double rel_floor = 1e-6) {
  std::vector<std::size_t> out;
  if (power.size() < 3) return out;
  const double cut = rel_floor * *std::max_element(power.begin(), power.end());
  for (std::size_t i = 1; i + 1 < power.size(); ++i) {
    if (power[i] > power[i - 1] && power[i] >= power[i + 1] && power[i] > cut) {
      out.push_back(i);
    }
  }
  return out;
}

namespace detail {

// dtau sum_k s_k exp(-i w tau_k) on a uniform grid starting at tau0.
inline cplx one_sided_transform(const std::vector<cplx>& s, double tau0, double dt, double w) {
  const cplx z = std::exp(cplx(0.0, -w * dt));
  cplx acc = 0.0;
  for (std::size_t i = s.size(); i-- > 0;) acc = acc * z + s[i];
  return acc * dt * std::exp(cplx(0.0, -w * tau0));
}

// Maximizer of |F|^2 in [lo, hi] by golden-section search.
inline double refine_maximum(const std::vector<cplx>& s, double tau0, double dt, double lo,
                             double hi, double tol) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  auto f = [&](double w) { return std::norm(one_sided_transform(s, tau0, dt, w)); };
  double x1 = hi - r * (hi - lo);
  double x2 = lo + r * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  while (hi - lo > tol) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + r * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - r * (hi - lo);
      f1 = f(x1);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Frequencies k * 2 pi / T_max (k integer) inside the window for a series of
/// `samples` uniform delays on [0, t_max]. Unset bounds default to Nyquist.
inline std::vector<double> spectrum_grid(double t_max, std::size_t samples,
                                         const SpectrumOptions& opt = {}) {
  if (samples < 2 || !(t_max > 0)) {
    throw InvalidArgument("spectrum_grid: need >= 2 samples and t_max > 0");
  }
  const double dt = t_max / static_cast<double>(samples - 1);
  const double span = dt * static_cast<double>(samples - 1);
  const double dw = 2.0 * std::numbers::pi / span;
  const double nyquist = std::numbers::pi / dt;
  const double lo = opt.omega_min.value_or(-nyquist);
  const double hi = opt.omega_max.value_or(nyquist);
  const auto k_lo = static_cast<long>(std::ceil(lo / dw - 1e-9));
  const auto k_hi = static_cast<long>(std::floor(hi / dw + 1e-9));
  std::vector<double> out;
  for (long k = k_lo; k <= k_hi; ++k) out.push_back(dw * static_cast<double>(k));
  return out;
}

/// One-sided transform F(w) = dtau sum_k S(tau_k) exp(-i w tau_k) of the
/// (optionally coherent-subtracted) series, sampled at multiples of 2 pi / T_max.
///
/// The exp(-i w tau) kernel puts emission from a level at rotating-frame
/// energy E (S ~ exp(+i E tau)) at w = +E. No window is applied. Each grid
/// maximum is also located off-grid as the maximizer of |F|^2 within one bin.
inline SpectrumResult emission_spectrum(const CorrelationSeries& series,
                                        bool subtract_coherent, cplx coherent_offset,
                                        const SpectrumOptions& opt = {}) {
  const std::size_t n = series.tau.size();
  if (n < 2 || series.values.size() != n) {
    throw InvalidArgument("emission_spectrum: series needs >= 2 matched samples");
  }
  const double dt = series.step();
  if (!(dt > 0)) throw InvalidArgument("emission_spectrum: non-increasing tau grid");
  for (std::size_t k = 0; k < n; ++k) {
    if (std::abs(series.tau[k] - series.tau[0] - dt * double(k)) > 1e-9 * dt * double(n)) {
      throw InvalidArgument("emission_spectrum: tau grid is not uniform");
    }
  }
  SpectrumResult out;
  out.t_max = series.tau.back() - series.tau.front();
  out.samples = n;
  out.coherent_subtracted = subtract_coherent;
  out.coherent_offset = subtract_coherent ? coherent_offset : cplx(0.0);

  std::vector<cplx> s(series.values);
  if (subtract_coherent) {
    for (auto& v : s) v -= coherent_offset;
  }
  const double tau0 = series.tau.front();
  const double dw = out.resolution();
  out.omega = spectrum_grid(out.t_max, n, opt);
  for (double w : out.omega) {
    const cplx f = detail::one_sided_transform(s, tau0, dt, w);
    out.amplitude.push_back(f);
    out.power.push_back(std::norm(f));
  }
  for (std::size_t i : spectral_peaks(out.power, opt.peak_floor)) {
    out.peaks.push_back(detail::refine_maximum(s, tau0, dt, out.omega[i] - dw,
                                               out.omega[i] + dw, 1e-9 * dw));
  }
  return out;
}

/// One spectrum of a scan over the interaction strength.
struct SpectrumSlice {
  double U = 0.0;
  SpectrumResult spectrum;
};

/// A local-maximum ridge: one peak frequency per consecutive slice, starting
/// at slice `first`.
struct Ridge {
  std::size_t first = 0;
  std::vector<double> omega;

  std::size_t last() const { return first + omega.size() - 1; }
  bool covers(std::size_t slice) const { return slice >= first && slice <= last(); }
  double at(std::size_t slice) const { return omega[slice - first]; }
};

/// Peak ridges across U slices. Each slice's refined peaks are linked to the
/// previous slice by one-to-one nearest-frequency matching, closest
/// pairs first and the lower frequency winning ties. Unmatched peaks start
/// new ridges and unmatched ridges end.
inline std::vector<Ridge> trace_ridges(const std::vector<SpectrumSlice>& slices) {
  std::vector<Ridge> ridges;
  std::vector<std::size_t> open;  // ridge indices alive at the previous slice
  for (std::size_t s = 0; s < slices.size(); ++s) {
    const std::vector<double>& peaks = slices[s].spectrum.peaks;

    struct Pair {
      double dist;
      double freq;
      std::size_t ridge;
      std::size_t peak;
    };
    std::vector<Pair> pairs;
    for (std::size_t r : open) {
      for (std::size_t p = 0; p < peaks.size(); ++p) {
        pairs.push_back({std::abs(peaks[p] - ridges[r].omega.back()), peaks[p], r, p});
      }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
      return a.dist != b.dist ? a.dist < b.dist : a.freq < b.freq;
    });
    std::vector<bool> ridge_used(ridges.size(), false);
    std::vector<bool> peak_used(peaks.size(), false);
    std::vector<std::size_t> next;
    for (const auto& pr : pairs) {
      if (ridge_used[pr.ridge] || peak_used[pr.peak]) continue;
      ridge_used[pr.ridge] = true;
      peak_used[pr.peak] = true;
      ridges[pr.ridge].omega.push_back(pr.freq);
      next.push_back(pr.ridge);
    }
    for (std::size_t p = 0; p < peaks.size(); ++p) {
      if (peak_used[p]) continue;
      ridges.push_back({s, {peaks[p]}});
      next.push_back(ridges.size() - 1);
    }
    open = std::move(next);
  }
  return ridges;
}

struct RidgeCrossing {
  bool found = false;
  double U = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();  // U / J
  double separation = std::numeric_limits<double>::infinity();  // nearest approach to B
  std::size_t ridge_count = 0;
  std::optional<std::size_t> line_b;   // index into `ridges`
  std::optional<std::size_t> partner;  // ridge meeting line B
  std::vector<Ridge> ridges;
};

/// Crossing of the upper one-photon line B with another emission ridge.
///
/// Line B is the ridge, alive in at least half of the slices, whose mean
/// offset from line_b(U) is smallest, provided every point lies within one
/// bin of it. Line A (tracking line_a(U) by the same rule) is excluded as a
/// partner. Every other ridge sharing slices with B yields crossing events:
///   - a sign change of its separation from B, interpolated linearly in U;
///   - ending before the last slice while approaching B, or starting after
///     the first slice while receding from it (a line merged into B), with the
///     separation of its two outermost points extrapolated linearly to zero.
/// Merge events are accepted when the separation at the ridge end is at most
/// `meeting_bins` bins and the extrapolated U lies inside the scan. The event
/// with the smallest separation wins; a merge event is averaged with the best
/// opposite-kind merge event on the other side of B.
inline RidgeCrossing ridge_crossing(const std::vector<SpectrumSlice>& slices, double J,
                                    const std::function<double(double)>& line_a,
                                    const std::function<double(double)>& line_b,
                                    double meeting_bins = 8.0) {
  if (slices.size() < 2) throw InvalidArgument("ridge_crossing: need at least two slices");
  for (std::size_t s = 1; s < slices.size(); ++s) {
    if (!(slices[s].U > slices[s - 1].U)) {
      throw InvalidArgument("ridge_crossing: U grid must increase");
    }
    if (slices[s].spectrum.omega != slices[0].spectrum.omega) {
      throw InvalidArgument("ridge_crossing: slices must share one frequency grid");
    }
  }
  RidgeCrossing out;
  out.ridges = trace_ridges(slices);
  out.ridge_count = out.ridges.size();
  const double bin = slices[0].spectrum.resolution();

  auto track = [&](const auto& line) -> std::optional<std::size_t> {
    std::optional<std::size_t> best;
    double best_mean = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < out.ridges.size(); ++r) {
      const auto& rg = out.ridges[r];
      if (2 * rg.omega.size() < slices.size()) continue;
      double sum = 0.0;
      double worst = 0.0;
      for (std::size_t s = rg.first; s <= rg.last(); ++s) {
        const double off = std::abs(rg.at(s) - line(slices[s].U));
        sum += off;
        worst = std::max(worst, off);
      }
      const double mean = sum / double(rg.omega.size());
      if (worst <= bin && mean < best_mean) {
        best_mean = mean;
        best = r;
      }
    }
    return best;
  };
  out.line_b = track(line_b);
  if (!out.line_b) return out;
  const auto line_a_ridge = track(line_a);
  const Ridge& b = out.ridges[*out.line_b];

  enum class Kind { sign_change, ends, starts };
  struct Event {
    Kind kind;
    double u;
    double separation;  // |distance to B| at the event (0 for sign changes)
    double side;        // sign of (partner - B) at the ridge end
    std::size_t ridge;
  };
  std::vector<Event> events;
  const double u_lo = slices.front().U;
  const double u_hi = slices.back().U;
  auto zero_of = [&](std::size_t s0, double d0, std::size_t s1, double d1) {
    return slices[s0].U + d0 / (d0 - d1) * (slices[s1].U - slices[s0].U);
  };
  for (std::size_t r = 0; r < out.ridges.size(); ++r) {
    if (r == *out.line_b || (line_a_ridge && r == *line_a_ridge)) continue;
    const Ridge& c = out.ridges[r];
    const std::size_t lo = std::max(b.first, c.first);
    const std::size_t hi = std::min(b.last(), c.last());
    if (lo > hi) continue;
    auto sep = [&](std::size_t s) { return c.at(s) - b.at(s); };
    for (std::size_t s = lo + 1; s <= hi; ++s) {
      if (sep(s - 1) * sep(s) < 0.0) {
        events.push_back({Kind::sign_change, zero_of(s - 1, sep(s - 1), s, sep(s)), 0.0, 0.0, r});
      }
    }
    if (hi == lo) continue;
    const double limit = meeting_bins * bin;
    if (c.last() < slices.size() - 1 && c.last() == hi) {
      const double d1 = sep(hi - 1);
      const double d0 = sep(hi);
      if (std::abs(d0) < std::abs(d1) && d0 * d1 > 0.0 && std::abs(d0) <= limit) {
        const double u = zero_of(hi - 1, d1, hi, d0);
        if (u >= u_lo && u <= u_hi) {
          events.push_back({Kind::ends, u, std::abs(d0), d0 > 0 ? 1.0 : -1.0, r});
        }
      }
    }
    if (c.first > 0 && c.first == lo) {
      const double d0 = sep(lo);
      const double d1 = sep(lo + 1);
      if (std::abs(d0) < std::abs(d1) && d0 * d1 > 0.0 && std::abs(d0) <= limit) {
        const double u = zero_of(lo, d0, lo + 1, d1);
        if (u >= u_lo && u <= u_hi) {
          events.push_back({Kind::starts, u, std::abs(d0), d0 > 0 ? 1.0 : -1.0, r});
        }
      }
    }
  }
  if (events.empty()) return out;
  const auto best = std::min_element(events.begin(), events.end(),
                                     [](const Event& x, const Event& y) {
                                       return x.separation < y.separation;
                                     });
  out.found = true;
  out.U = best->u;
  out.separation = best->separation;
  out.partner = best->ridge;
  if (best->kind != Kind::sign_change) {
    const Kind other = best->kind == Kind::ends ? Kind::starts : Kind::ends;
    const Event* mate = nullptr;
    for (const auto& e : events) {
      if (e.kind == other && e.side == -best->side &&
          (!mate || e.separation < mate->separation)) {
        mate = &e;
      }
    }
    if (mate) out.U = 0.5 * (best->u + mate->u);
  }
  out.ratio = out.U / J;
  return out;
}

/// Probability weight on doubly occupied configurations {|2,0>, |0,2>} of a
/// dimer two-photon vector (full-space amplitudes on a photon-only M = 2 space).
inline double double_occupancy_profile(const Vector& psi, const FockSpace& space) {
  if (space.sites() != 2 || space.has_tls() || psi.size() != space.size()) {
    throw InvalidArgument("double_occupancy_profile: expects a photon-only dimer vector");
  }
  const double norm2 = psi.squaredNorm();
  double total = 0.0;
  double doubled = 0.0;
  for (std::size_t idx = 0; idx < space.dim(); ++idx) {
    const double p = std::norm(psi[Eigen::Index(idx)]);
    if (p == 0.0) continue;
    const int n0 = space.photons(idx, 0);
    const int n1 = space.photons(idx, 1);
    if (n0 + n1 != 2) {
      if (p > 1e-20 * norm2) {
        throw InvalidArgument("double_occupancy_profile: vector leaves the two-photon subspace");
      }
      continue;
    }
    total += p;
    if (n0 == 2 || n1 == 2) doubled += p;
  }
  if (total == 0.0) throw InvalidArgument("double_occupancy_profile: zero vector");
  return doubled / total;
}

}  // namespace cra
