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

// Rotating-frame Bose-Hubbard and Jaynes-Cummings-Hubbard Hamiltonians.
// All rates are in units of the photon loss rate; the bare cavity frequency
// only enters through the laser detuning Delta_c = omega_c - omega_L.

#pragma once

#include "cra/hilbert.hpp"
#include "cra/types.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace cra {

struct BHParams {
  int sites = 2;
  double J = 0.0;
  double U = 0.0;
  double omega = 0.0;
  std::optional<double> detuning;  // empty: two-photon resonant
  double gamma = 1.0;

  void validate() const {
    if (sites < 1) throw InvalidArgument("BHParams: sites must be >= 1");
    if (J < 0 || U < 0 || omega < 0) {
      throw InvalidArgument("BHParams: J, U and Omega must be non-negative");
    }
    if (!(gamma > 0)) throw InvalidArgument("BHParams: gamma_p must be > 0");
  }
};

struct JCHParams {
  int sites = 2;
  double J = 0.0;
  double g = 0.0;
  double delta = 0.0;  // omega_c - omega_a
  double omega = 0.0;
  std::optional<double> detuning;  // empty: lowest two-excitation resonance
  double gamma = 1.0;

  void validate() const {
    if (sites < 1) throw InvalidArgument("JCHParams: sites must be >= 1");
    if (J < 0 || g < 0 || omega < 0) {
      throw InvalidArgument("JCHParams: J, g and Omega must be non-negative");
    }
    if (!(gamma > 0)) throw InvalidArgument("JCHParams: gamma_p must be > 0");
  }
};

using ModelParams = std::variant<BHParams, JCHParams>;

/// Laser detuning placing two laser photons on the lowest two-photon level
/// of the Bose-Hubbard dimer: Delta_c (Delta_c + U) = J^2.
inline double resonance_detuning_bh(double J, double U) {
  if (J < 0 || U < 0) {
    throw InvalidArgument("resonance_detuning_bh: J and U must be non-negative");
  }
  const double root = std::sqrt(U * U + 4.0 * J * J);
  return root == 0.0 ? 0.0 : 2.0 * J * J / (root + U);
}

namespace detail {

struct SiteTerms {
  double detuning = 0.0;  // coefficient of n_j
  double kerr = 0.0;      // coefficient of a^dag a^dag a a
  double tls = 0.0;       // coefficient of sigma+ sigma-
  double jc = 0.0;        // g (a^dag sigma- + sigma+ a)
  double drive = 0.0;     // Omega (a^dag + a)
  double hopping = 0.0;   // J in -J sum (a_i^dag a_j + h.c.)
};

inline SparseMatrix assemble(const FockSpace& space, const SiteTerms& t) {
  const int nmax = space.n_max();
  std::vector<Triplet> entries;
  entries.reserve(space.dim() * static_cast<std::size_t>(
                                    1 + 4 * space.sites() +
                                    2 * static_cast<int>(space.bonds().size())));
  for (std::size_t idx = 0; idx < space.dim(); ++idx) {
    const auto col = static_cast<std::ptrdiff_t>(idx);
    double diag = 0.0;
    for (int j = 0; j < space.sites(); ++j) {
      const int n = space.photons(idx, j);
      const int s = space.tls(idx, j);
      const auto step = static_cast<std::ptrdiff_t>(space.stride(j));
      const auto tls_step = step * (nmax + 1);
      diag += t.detuning * n + t.kerr * n * (n - 1) + t.tls * s;
      if (t.drive != 0.0) {
        if (n < nmax) entries.emplace_back(col + step, col, t.drive * std::sqrt(n + 1.0));
        if (n > 0) entries.emplace_back(col - step, col, t.drive * std::sqrt(double(n)));
      }
      if (t.jc != 0.0 && space.has_tls()) {
        if (s == 1 && n < nmax) {
          entries.emplace_back(col - tls_step + step, col, t.jc * std::sqrt(n + 1.0));
        }
        if (s == 0 && n > 0) {
          entries.emplace_back(col + tls_step - step, col, t.jc * std::sqrt(double(n)));
        }
      }
    }
    if (diag != 0.0) entries.emplace_back(col, col, diag);
    if (t.hopping != 0.0) {
      for (const auto& [a, b] : space.bonds()) {
        const int na = space.photons(idx, a);
        const int nb = space.photons(idx, b);
        const auto sa = static_cast<std::ptrdiff_t>(space.stride(a));
        const auto sb = static_cast<std::ptrdiff_t>(space.stride(b));
        if (nb > 0 && na < nmax) {
          entries.emplace_back(col - sb + sa, col,
                               -t.hopping * std::sqrt(nb * (na + 1.0)));
        }
        if (na > 0 && nb < nmax) {
          entries.emplace_back(col - sa + sb, col,
                               -t.hopping * std::sqrt(na * (nb + 1.0)));
        }
      }
    }
  }
  SparseMatrix h(space.size(), space.size());
  h.setFromTriplets(entries.begin(), entries.end());
  h.prune(cplx(0.0));
  return h;
}

inline void check_sites(int sites, const FockSpace& space, const char* who) {
  if (sites != space.sites()) {
    throw InvalidArgument(std::string(who) + ": params.sites (" +
                          std::to_string(sites) + ") != space sites (" +
                          std::to_string(space.sites()) + ")");
  }
}

}  // namespace detail

inline double resolved_detuning(const BHParams& p) {
  return p.detuning ? *p.detuning : resonance_detuning_bh(p.J, p.U);
}

inline OperatorMatrix bh_hamiltonian(const BHParams& p, const FockSpace& space) {
  p.validate();
  detail::check_sites(p.sites, space, "bh_hamiltonian");
  if (space.has_tls()) {
    throw InvalidArgument("bh_hamiltonian: space must be photon-only");
  }
  detail::SiteTerms t;
  t.detuning = resolved_detuning(p);
  t.kerr = p.U;
  t.drive = p.omega;
  t.hopping = p.J;
  return OperatorMatrix(detail::assemble(space, t), true);
}

/// Total excitation number N = sum_j (n_j + sigma_j^+ sigma_j^-).
inline OperatorMatrix excitation_number(const FockSpace& space) {
  std::vector<Triplet> entries;
  for (std::size_t idx = 0; idx < space.dim(); ++idx) {
    const int n = space.excitations(idx);
    if (n) entries.emplace_back(std::ptrdiff_t(idx), std::ptrdiff_t(idx), double(n));
  }
  SparseMatrix m(space.size(), space.size());
  m.setFromTriplets(entries.begin(), entries.end());
  return OperatorMatrix(std::move(m), true);
}

struct ExcitationBlock {
  DenseMatrix block;
  std::vector<std::size_t> basis;  // full-space indices, ascending
};

/// Restriction of an excitation-conserving operator to the N-excitation
/// subspace. Throws if H couples different excitation numbers.
inline ExcitationBlock excitation_block(const OperatorMatrix& h,
                                        const FockSpace& space, int n) {
  if (h.dim() != space.size()) {
    throw InvalidArgument("excitation_block: operator/space dimension mismatch");
  }
  double scale = 1.0;
  for (Eigen::Index k = 0; k < h.matrix().outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(h.matrix(), k); it; ++it) {
      scale = std::max(scale, std::abs(it.value()));
      const auto r = static_cast<std::size_t>(it.row());
      const auto c = static_cast<std::size_t>(it.col());
      if (space.excitations(r) != space.excitations(c) &&
          std::abs(it.value()) > 1e-12 * scale) {
        throw InvalidArgument(
            "excitation_block: operator does not conserve excitation number "
            "(drive present?)");
      }
    }
  }
  ExcitationBlock out;
  std::vector<Eigen::Index> pos(space.dim(), -1);
  for (std::size_t idx = 0; idx < space.dim(); ++idx) {
    if (space.excitations(idx) == n) {
      pos[idx] = static_cast<Eigen::Index>(out.basis.size());
      out.basis.push_back(idx);
    }
  }
  const auto nb = static_cast<Eigen::Index>(out.basis.size());
  out.block = DenseMatrix::Zero(nb, nb);
  for (Eigen::Index k = 0; k < h.matrix().outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(h.matrix(), k); it; ++it) {
      const auto r = pos[static_cast<std::size_t>(it.row())];
      const auto c = pos[static_cast<std::size_t>(it.col())];
      if (r >= 0 && c >= 0) out.block(r, c) += it.value();
    }
  }
  return out;
}

/// Laser detuning that puts the lowest undriven two-excitation JCH level at
/// zero in the rotating frame. The space must hold at least two photons per
/// site so the two-excitation manifold is complete.
inline double resonance_detuning_jch(double J, double g, double delta,
                                     const FockSpace& space) {
  if (!(g > 0)) {
    throw InvalidArgument(
        "resonance_detuning_jch: g must be > 0 (photon and atom sectors decouple)");
  }
  if (!space.has_tls()) {
    throw InvalidArgument("resonance_detuning_jch: space has no two-level systems");
  }
  if (space.n_max() < 2) {
    throw InvalidArgument("resonance_detuning_jch: n_max must be >= 2");
  }
  detail::SiteTerms t;
  t.tls = -delta;
  t.jc = g;
  t.hopping = J;
  const OperatorMatrix h0(detail::assemble(space, t), true);
  const auto blk = excitation_block(h0, space, 2);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(blk.block, Eigen::EigenvaluesOnly);
  return -0.5 * es.eigenvalues().minCoeff();
}

inline double resolved_detuning(const JCHParams& p, const FockSpace& space) {
  return p.detuning ? *p.detuning
                    : resonance_detuning_jch(p.J, p.g, p.delta, space);
}

inline OperatorMatrix jch_hamiltonian(const JCHParams& p, const FockSpace& space) {
  p.validate();
  detail::check_sites(p.sites, space, "jch_hamiltonian");
  if (!space.has_tls()) {
    throw InvalidArgument("jch_hamiltonian: space has no two-level systems");
  }
  detail::SiteTerms t;
  t.detuning = resolved_detuning(p, space);
  t.tls = t.detuning - p.delta;
  t.jc = p.g;
  t.drive = p.omega;
  t.hopping = p.J;
  return OperatorMatrix(detail::assemble(space, t), true);
}

/// H - i (gamma_p / 2) sum_j n_j. Only photon loss enters.
inline OperatorMatrix effective_hamiltonian(const OperatorMatrix& h,
                                            const FockSpace& space,
                                            double gamma) {
  if (h.dim() != space.size()) {
    throw InvalidArgument("effective_hamiltonian: dimension mismatch");
  }
  std::vector<Triplet> entries;
  for (std::size_t idx = 0; idx < space.dim(); ++idx) {
    int n = 0;
    for (int j = 0; j < space.sites(); ++j) n += space.photons(idx, j);
    if (n) {
      entries.emplace_back(std::ptrdiff_t(idx), std::ptrdiff_t(idx),
                           cplx(0.0, -0.5 * gamma * n));
    }
  }
  SparseMatrix loss(space.size(), space.size());
  loss.setFromTriplets(entries.begin(), entries.end());
  return OperatorMatrix(SparseMatrix(h.matrix() + loss), false);
}

// Convenience over the model variant.

inline int model_sites(const ModelParams& m) {
  return std::visit([](const auto& p) { return p.sites; }, m);
}
inline double model_gamma(const ModelParams& m) {
  return std::visit([](const auto& p) { return p.gamma; }, m);
}
inline bool model_has_tls(const ModelParams& m) {
  return std::holds_alternative<JCHParams>(m);
}

inline ModelParams with_omega(ModelParams m, double omega) {
  std::visit([omega](auto& p) { p.omega = omega; }, m);
  return m;
}

inline FockSpace make_space(const ModelParams& m, int n_max,
                            std::size_t max_dim = FockSpace::kDefaultMaxDim) {
  return FockSpace(model_sites(m), n_max, model_has_tls(m), max_dim);
}

inline OperatorMatrix hamiltonian(const ModelParams& m, const FockSpace& space) {
  if (const auto* bh = std::get_if<BHParams>(&m)) return bh_hamiltonian(*bh, space);
  return jch_hamiltonian(std::get<JCHParams>(m), space);
}

inline double model_detuning(const ModelParams& m, const FockSpace& space) {
  if (const auto* bh = std::get_if<BHParams>(&m)) return resolved_detuning(*bh);
  return resolved_detuning(std::get<JCHParams>(m), space);
}

}  // namespace cra
