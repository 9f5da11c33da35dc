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

// Truncated Fock spaces for periodic resonator chains, local ladder and
// two-level operators, and the zero-momentum translation sector.
//
// Basis ordering: a basis label is the tuple (s_0, ..., s_{M-1}) of local
// states, ordered lexicographically with site 0 most significant. Within a
// site the local index is tls * (n_max + 1) + photons, so the photon number
// varies fastest and the two-level bit comes after it.

#pragma once

#include "cra/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cra {

using Bond = std::pair<int, int>;

struct SiteLabel {
  int photons = 0;
  int tls = 0;

  friend bool operator==(const SiteLabel&, const SiteLabel&) = default;
};

class FockSpace {
 public:
  static constexpr std::size_t kDefaultMaxDim = 1'000'000;

  FockSpace(int sites, int n_max, bool has_tls,
            std::size_t max_dim = kDefaultMaxDim)
      : sites_(sites), n_max_(n_max), has_tls_(has_tls) {
    if (sites < 1) throw InvalidArgument("FockSpace: site count must be >= 1");
    if (n_max < 1) throw InvalidArgument("FockSpace: n_max must be >= 1");
    local_dim_ = (n_max + 1) * (has_tls ? 2 : 1);
    strides_.assign(static_cast<std::size_t>(sites), 1);
    std::size_t d = 1;
    for (int j = sites - 1; j >= 0; --j) {
      strides_[static_cast<std::size_t>(j)] = d;
      if (d > max_dim / static_cast<std::size_t>(local_dim_)) {
        throw SizingError("FockSpace: dimension " + std::to_string(local_dim_) +
                          "^" + std::to_string(sites) + " exceeds bound " +
                          std::to_string(max_dim));
      }
      d *= static_cast<std::size_t>(local_dim_);
    }
    dim_ = d;
    if (sites == 2) {
      bonds_.emplace_back(0, 1);
    } else if (sites >= 3) {
      for (int j = 0; j < sites; ++j) bonds_.emplace_back(j, (j + 1) % sites);
    }
  }

  int sites() const { return sites_; }
  int n_max() const { return n_max_; }
  bool has_tls() const { return has_tls_; }
  int local_dim() const { return local_dim_; }
  std::size_t dim() const { return dim_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(dim_); }

  /// Nearest-neighbour pairs of the periodic chain, each bond listed once.
  const std::vector<Bond>& bonds() const { return bonds_; }

  std::size_t stride(int site) const {
    return strides_[static_cast<std::size_t>(site)];
  }

  int local_state(std::size_t index, int site) const {
    return static_cast<int>((index / stride(site)) %
                            static_cast<std::size_t>(local_dim_));
  }
  int photons(std::size_t index, int site) const {
    return local_state(index, site) % (n_max_ + 1);
  }
  int tls(std::size_t index, int site) const {
    return local_state(index, site) / (n_max_ + 1);
  }

  /// Photons plus two-level excitations, summed over sites.
  int excitations(std::size_t index) const {
    int n = 0;
    for (int j = 0; j < sites_; ++j) n += photons(index, j) + tls(index, j);
    return n;
  }

  std::vector<SiteLabel> label(std::size_t index) const {
    check_index(index);
    std::vector<SiteLabel> out(static_cast<std::size_t>(sites_));
    for (int j = 0; j < sites_; ++j) {
      out[static_cast<std::size_t>(j)] = {photons(index, j), tls(index, j)};
    }
    return out;
  }

  std::size_t index(std::span<const SiteLabel> labels) const {
    if (labels.size() != static_cast<std::size_t>(sites_)) {
      throw InvalidArgument("FockSpace::index: label length != site count");
    }
    std::size_t idx = 0;
    for (int j = 0; j < sites_; ++j) {
      const auto& l = labels[static_cast<std::size_t>(j)];
      if (l.photons < 0 || l.photons > n_max_ || l.tls < 0 ||
          l.tls > (has_tls_ ? 1 : 0)) {
        throw InvalidArgument("FockSpace::index: label outside truncation");
      }
      idx += static_cast<std::size_t>(l.tls * (n_max_ + 1) + l.photons) *
             stride(j);
    }
    return idx;
  }

  /// Image of a basis index under the cyclic shift site j -> j + 1.
  std::size_t translate(std::size_t index) const {
    std::size_t out = 0;
    for (int j = 0; j < sites_; ++j) {
      const auto s = static_cast<std::size_t>(local_state(index, j));
      out += s * stride((j + 1) % sites_);
    }
    return out;
  }

 private:
  void check_index(std::size_t index) const {
    if (index >= dim_) throw InvalidArgument("FockSpace: index out of range");
  }

  int sites_;
  int n_max_;
  bool has_tls_;
  int local_dim_ = 0;
  std::size_t dim_ = 0;
  std::vector<std::size_t> strides_;
  std::vector<Bond> bonds_;
};

/// Sparse operator on a FockSpace together with its hermiticity flag.
class OperatorMatrix {
 public:
  OperatorMatrix() = default;

  OperatorMatrix(SparseMatrix m, bool hermitian)
      : mat_(std::move(m)), hermitian_(hermitian) {
    if (mat_.rows() != mat_.cols()) {
      throw InvalidArgument("OperatorMatrix: matrix must be square");
    }
    mat_.makeCompressed();
    if (hermitian_ && hermiticity_defect() > hermitian_tolerance()) {
      throw InvalidArgument("OperatorMatrix: flagged hermitian but A != A^dagger");
    }
  }

  const SparseMatrix& matrix() const { return mat_; }
  bool hermitian() const { return hermitian_; }
  Eigen::Index dim() const { return mat_.rows(); }
  DenseMatrix dense() const { return DenseMatrix(mat_); }

  OperatorMatrix adjoint() const {
    return OperatorMatrix(SparseMatrix(mat_.adjoint()), hermitian_);
  }

  /// max |A - A^dagger| over all elements.
  double hermiticity_defect() const {
    SparseMatrix diff = mat_ - SparseMatrix(mat_.adjoint());
    double worst = 0.0;
    for (Eigen::Index k = 0; k < diff.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(diff, k); it; ++it) {
        worst = std::max(worst, std::abs(it.value()));
      }
    }
    return worst;
  }

 private:
  double hermitian_tolerance() const {
    double scale = 1.0;
    for (Eigen::Index k = 0; k < mat_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(mat_, k); it; ++it) {
        scale = std::max(scale, std::abs(it.value()));
      }
    }
    return 1e-12 * scale;
  }

  SparseMatrix mat_;
  bool hermitian_ = false;
};

enum class SiteOp {
  annihilate,
  create,
  number,
  sigma_minus,
  sigma_plus,
  tls_number,
};

inline OperatorMatrix site_operator(const FockSpace& space, int site,
                                    SiteOp kind) {
  if (site < 0 || site >= space.sites()) {
    throw InvalidArgument("site_operator: site " + std::to_string(site) +
                          " out of range");
  }
  const bool tls_kind = kind == SiteOp::sigma_minus ||
                        kind == SiteOp::sigma_plus || kind == SiteOp::tls_number;
  if (tls_kind && !space.has_tls()) {
    throw InvalidArgument("site_operator: two-level operator on a photon-only space");
  }
  const std::size_t photon_step = space.stride(site);
  const std::size_t tls_step =
      photon_step * static_cast<std::size_t>(space.n_max() + 1);

  std::vector<Triplet> entries;
  entries.reserve(space.dim());
  for (std::size_t idx = 0; idx < space.dim(); ++idx) {
    const int n = space.photons(idx, site);
    const auto col = static_cast<std::ptrdiff_t>(idx);
    switch (kind) {
      case SiteOp::annihilate:
        if (n > 0) {
          entries.emplace_back(static_cast<std::ptrdiff_t>(idx - photon_step),
                               col, std::sqrt(static_cast<double>(n)));
        }
        break;
      case SiteOp::create:
        if (n < space.n_max()) {
          entries.emplace_back(static_cast<std::ptrdiff_t>(idx + photon_step),
                               col, std::sqrt(static_cast<double>(n + 1)));
        }
        break;
      case SiteOp::number:
        if (n > 0) entries.emplace_back(col, col, static_cast<double>(n));
        break;
      case SiteOp::sigma_minus:
        if (space.tls(idx, site) == 1) {
          entries.emplace_back(static_cast<std::ptrdiff_t>(idx - tls_step), col,
                               1.0);
        }
        break;
      case SiteOp::sigma_plus:
        if (space.tls(idx, site) == 0) {
          entries.emplace_back(static_cast<std::ptrdiff_t>(idx + tls_step), col,
                               1.0);
        }
        break;
      case SiteOp::tls_number:
        if (space.tls(idx, site) == 1) entries.emplace_back(col, col, 1.0);
        break;
    }
  }
  SparseMatrix m(space.size(), space.size());
  m.setFromTriplets(entries.begin(), entries.end());
  const bool herm = kind == SiteOp::number || kind == SiteOp::tls_number;
  return OperatorMatrix(std::move(m), herm);
}

inline SparseMatrix identity(const FockSpace& space) {
  SparseMatrix id(space.size(), space.size());
  id.setIdentity();
  return id;
}

/// Cyclic shift T as a sparse permutation matrix: T|s_0..s_{M-1}> = |s_{M-1} s_0 ..>.
inline SparseMatrix translation_operator(const FockSpace& space) {
  std::vector<Triplet> entries;
  entries.reserve(space.dim());
  for (std::size_t idx = 0; idx < space.dim(); ++idx) {
    entries.emplace_back(static_cast<std::ptrdiff_t>(space.translate(idx)),
                         static_cast<std::ptrdiff_t>(idx), 1.0);
  }
  SparseMatrix t(space.size(), space.size());
  t.setFromTriplets(entries.begin(), entries.end());
  return t;
}

/// Rotates v so its first non-negligible component is real and positive.
inline void fix_phase(Vector& v) {
  const double scale = v.cwiseAbs().maxCoeff();
  if (scale == 0.0) return;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12 * scale) {
      v *= std::conj(v[i]) / std::abs(v[i]);
      return;
    }
  }
}

// Zero-momentum sector of a periodic chain. Each translation orbit yields one
// symmetric basis vector (1/sqrt(|orbit|)) sum_{s in orbit} |s>.
class MomentumBasis {
 public:
  explicit MomentumBasis(const FockSpace& space) : full_dim_(space.dim()) {
    std::vector<char> seen(space.dim(), 0);
    std::vector<Triplet> entries;
    entries.reserve(space.dim());
    for (std::size_t idx = 0; idx < space.dim(); ++idx) {
      if (seen[idx]) continue;
      std::vector<std::size_t> orbit{idx};
      seen[idx] = 1;
      for (std::size_t next = space.translate(idx); next != idx;
           next = space.translate(next)) {
        orbit.push_back(next);
        seen[next] = 1;
      }
      const auto col = static_cast<std::ptrdiff_t>(reps_.size());
      const double amp = 1.0 / std::sqrt(static_cast<double>(orbit.size()));
      for (auto member : orbit) {
        entries.emplace_back(static_cast<std::ptrdiff_t>(member), col, amp);
      }
      reps_.push_back(idx);
      orbit_sizes_.push_back(static_cast<int>(orbit.size()));
    }
    isometry_.resize(space.size(), static_cast<Eigen::Index>(reps_.size()));
    isometry_.setFromTriplets(entries.begin(), entries.end());
    isometry_.makeCompressed();
  }

  std::size_t sector_dim() const { return reps_.size(); }
  std::size_t full_dim() const { return full_dim_; }

  /// Smallest basis index of every orbit, in ascending order.
  const std::vector<std::size_t>& representatives() const { return reps_; }
  const std::vector<int>& orbit_sizes() const { return orbit_sizes_; }

  /// Full-space x sector matrix whose columns are the symmetric basis vectors.
  const SparseMatrix& isometry() const { return isometry_; }

  Vector to_full(const Vector& sector) const { return isometry_ * sector; }
  Vector to_sector(const Vector& full) const {
    return isometry_.adjoint() * full;
  }

  /// Restriction P^dagger A P of a translation-invariant operator.
  SparseMatrix restrict(const SparseMatrix& op) const {
    if (op.rows() != static_cast<Eigen::Index>(full_dim_)) {
      throw InvalidArgument("MomentumBasis::restrict: dimension mismatch");
    }
    SparseMatrix tmp = op * isometry_;
    return SparseMatrix(isometry_.adjoint() * tmp);
  }

 private:
  std::size_t full_dim_;
  std::vector<std::size_t> reps_;
  std::vector<int> orbit_sizes_;
  SparseMatrix isometry_;
};

inline MomentumBasis build_momentum_basis(const FockSpace& space) {
  return MomentumBasis(space);
}

}  // namespace cra
