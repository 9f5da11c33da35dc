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

// Lindblad superoperators on column-stacked density matrices, the
// steady-state solver and Krylov propagation of exp(L t).
//
// Vectorization: vec(rho)[i + j * d] = rho(i, j), so vec(A X B) =
// (B^T kron A) vec(X).

#pragma once

#include "cra/hilbert.hpp"
#include "cra/types.hpp"

#include <Eigen/SVD>
#include <Eigen/SparseLU>
#include <unsupported/Eigen/IterativeSolvers>
#ifdef CRA_HAVE_UMFPACK
#include <Eigen/UmfPackSupport>
#endif
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace cra {

class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(DenseMatrix m) : rho_(std::move(m)) {
    if (rho_.rows() != rho_.cols()) {
      throw InvalidArgument("DensityMatrix: matrix must be square");
    }
  }

  static DensityMatrix pure(const Vector& psi) {
    const double n2 = psi.squaredNorm();
    if (n2 == 0.0) throw InvalidArgument("DensityMatrix::pure: zero vector");
    return DensityMatrix(psi * psi.adjoint() / n2);
  }

  const DenseMatrix& matrix() const { return rho_; }
  Eigen::Index dim() const { return rho_.rows(); }
  cplx trace() const { return rho_.trace(); }

  double hermiticity_defect() const {
    return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
  }
  double min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(
        0.5 * (rho_ + rho_.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  }

  /// 0.5 * || a - b ||_1 (sum of absolute eigenvalues of the Hermitian part).
  friend double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
    const DenseMatrix diff = a.rho_ - b.rho_;
    Eigen::SelfAdjointEigenSolver<DenseMatrix> es(
        0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
  }

 private:
  DenseMatrix rho_;
};

inline Vector vectorize(const DenseMatrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

inline DenseMatrix unvectorize(const Vector& v, Eigen::Index d) {
  if (v.size() != d * d) throw InvalidArgument("unvectorize: size is not d^2");
  return Eigen::Map<const DenseMatrix>(v.data(), d, d);
}

class Superoperator {
 public:
  Superoperator() = default;
  Superoperator(SparseMatrix m, Eigen::Index hilbert_dim)
      : mat_(std::move(m)), d_(hilbert_dim) {
    if (mat_.rows() != d_ * d_ || mat_.cols() != d_ * d_) {
      throw InvalidArgument("Superoperator: matrix is not d^2 x d^2");
    }
    mat_.makeCompressed();
  }

  const SparseMatrix& matrix() const { return mat_; }
  Eigen::Index hilbert_dim() const { return d_; }
  Eigen::Index size() const { return d_ * d_; }

  DenseMatrix apply(const DenseMatrix& rho) const {
    return unvectorize(mat_ * vectorize(rho), d_);
  }

  /// Induced 1-norm (max absolute column sum).
  double norm1() const {
    double best = 0.0;
    for (Eigen::Index k = 0; k < mat_.outerSize(); ++k) {
      double s = 0.0;
      for (SparseMatrix::InnerIterator it(mat_, k); it; ++it) s += std::abs(it.value());
      best = std::max(best, s);
    }
    return best;
  }

 private:
  SparseMatrix mat_;
  Eigen::Index d_ = 0;
};

/// L[rho] = -i[H, rho] + sum_k rate_k D_{O_k}[rho] with
/// D_O[rho] = O rho O^dag - (O^dag O rho + rho O^dag O) / 2.
inline Superoperator liouvillian(const OperatorMatrix& h,
                                 const std::vector<OperatorMatrix>& collapse,
                                 const std::vector<double>& rates) {
  if (collapse.size() != rates.size()) {
    throw InvalidArgument("liouvillian: collapse operator / rate count mismatch");
  }
  const Eigen::Index d = h.dim();
  SparseMatrix id(d, d);
  id.setIdentity();
  const SparseMatrix& hm = h.matrix();
  SparseMatrix hT = hm.transpose();
  SparseMatrix l = cplx(0.0, -1.0) * (SparseMatrix(Eigen::kroneckerProduct(id, hm)) -
                                      SparseMatrix(Eigen::kroneckerProduct(hT, id)));
  for (std::size_t k = 0; k < collapse.size(); ++k) {
    const auto& o = collapse[k].matrix();
    if (o.rows() != d) throw InvalidArgument("liouvillian: operator dimension mismatch");
    if (rates[k] < 0) throw InvalidArgument("liouvillian: negative rate");
    if (rates[k] == 0) continue;
    SparseMatrix odo = SparseMatrix(o.adjoint()) * o;
    SparseMatrix odoT = odo.transpose();
    SparseMatrix oc = o.conjugate();
    l += rates[k] * (SparseMatrix(Eigen::kroneckerProduct(oc, o)) -
                     0.5 * SparseMatrix(Eigen::kroneckerProduct(id, odo)) -
                     0.5 * SparseMatrix(Eigen::kroneckerProduct(odoT, id)));
  }
  l.prune(cplx(0.0));
  return Superoperator(std::move(l), d);
}

/// Liouvillian with uniform photon loss gamma on every site.
inline Superoperator photon_loss_liouvillian(const OperatorMatrix& h,
                                             const FockSpace& space,
                                             double gamma) {
  std::vector<OperatorMatrix> ops;
  for (int j = 0; j < space.sites(); ++j) {
    ops.push_back(site_operator(space, j, SiteOp::annihilate));
  }
  return liouvillian(h, ops, std::vector<double>(ops.size(), gamma));
}

struct SteadyStateOptions {
  enum class Method { automatic, dense, sparse, iterative };
  Method method = Method::automatic;
  /// Automatic mode uses the dense path up to this many superoperator rows.
  Eigen::Index dense_limit = 256;
  /// Singular values below rtol * sigma_max count toward the null space.
  double degeneracy_rtol = 1e-12;
  double residual_rtol = 1e-10;
  double iterative_tol = 1e-13;
  int iterative_max_iterations = 20000;
  int gmres_restart = 200;
};

namespace detail {

/// Direct sparse LU: UMFPACK when available, Eigen SparseLU otherwise.
#ifdef CRA_HAVE_UMFPACK
using DirectSparseLU = Eigen::UmfPackLU<SparseMatrix>;
#else
using DirectSparseLU = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<std::ptrdiff_t>>;
#endif

inline DensityMatrix finish_steady_state(const Superoperator& l, const Vector& x,
                                         const SteadyStateOptions& opt) {
  const Eigen::Index d = l.hilbert_dim();
  DenseMatrix rho = unvectorize(x, d);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const cplx tr = rho.trace();
  if (std::abs(tr) == 0.0 || !std::isfinite(std::abs(tr))) {
    throw ConvergenceError("steady_state: solution has zero or non-finite trace");
  }
  rho /= tr.real();
  const Vector v = vectorize(rho);
  const double residual = (l.matrix() * v).norm();
  const double bound = opt.residual_rtol * l.norm1() * std::max(1.0, v.norm());
  if (!(residual <= bound)) {
    throw ConvergenceError("steady_state: residual " + std::to_string(residual) +
                           " exceeds " + std::to_string(bound));
  }
  return DensityMatrix(std::move(rho));
}

// Last row replaced by the trace functional sum_i rho_ii = 1.
inline SparseMatrix trace_constrained(const Superoperator& l) {
  const Eigen::Index d = l.hilbert_dim();
  const Eigen::Index n = l.size();
  std::vector<Triplet> entries;
  entries.reserve(static_cast<std::size_t>(l.matrix().nonZeros() + d));
  for (Eigen::Index k = 0; k < l.matrix().outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(l.matrix(), k); it; ++it) {
      if (it.row() != n - 1) entries.emplace_back(it.row(), it.col(), it.value());
    }
  }
  for (Eigen::Index i = 0; i < d; ++i) entries.emplace_back(n - 1, i + i * d, 1.0);
  SparseMatrix a(n, n);
  a.setFromTriplets(entries.begin(), entries.end());
  a.makeCompressed();
  return a;
}

}  // namespace detail

/// Number of singular values of L below rtol * sigma_max (dense SVD).
inline int null_space_dimension(const Superoperator& l, double rtol = 1e-12) {
  const DenseMatrix dense(l.matrix());
  Eigen::BDCSVD<DenseMatrix> svd(dense);
  const auto& s = svd.singularValues();
  const double cut = rtol * s.maxCoeff();
  return static_cast<int>((s.array() < cut).count());
}

/// Unit-trace solution of L[rho] = 0.
///
/// Small problems are solved densely after an SVD uniqueness check; larger
/// ones by sparse LU, falling back to restarted GMRES if the factorization
/// fails. Degeneracy is detected explicitly only on the dense path; on the
/// sparse paths a non-unique steady state shows up as a factorization
/// failure or a residual error.
inline DensityMatrix steady_state(const Superoperator& l,
                                  const SteadyStateOptions& opt = {}) {
  using Method = SteadyStateOptions::Method;
  const Eigen::Index n = l.size();
  Method method = opt.method;
  if (method == Method::automatic) {
    method = n <= opt.dense_limit ? Method::dense : Method::sparse;
  }
  Vector rhs = Vector::Zero(n);
  rhs[n - 1] = 1.0;
  const SparseMatrix a = detail::trace_constrained(l);

  if (method == Method::dense) {
    const int nullity = null_space_dimension(l, opt.degeneracy_rtol);
    if (nullity > 1) {
      throw DegeneracyError("steady_state: Liouvillian null space has dimension " +
                            std::to_string(nullity) + "; steady state is not unique");
    }
    const DenseMatrix ad(a);
    Eigen::PartialPivLU<DenseMatrix> lu(ad);
    return detail::finish_steady_state(l, lu.solve(rhs), opt);
  }

  if (method == Method::sparse) {
    detail::DirectSparseLU lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() == Eigen::Success) {
      Vector x = lu.solve(rhs);
      if (lu.info() == Eigen::Success && x.allFinite()) {
        return detail::finish_steady_state(l, x, opt);
      }
    }
  }

  Eigen::GMRES<SparseMatrix, Eigen::IncompleteLUT<cplx, std::ptrdiff_t>> gmres;
  gmres.set_restart(opt.gmres_restart);
  gmres.setTolerance(opt.iterative_tol);
  gmres.setMaxIterations(opt.iterative_max_iterations);
  gmres.compute(a);
  if (gmres.info() != Eigen::Success) {
    throw ConvergenceError("steady_state: preconditioner setup failed (singular system?)");
  }
  Vector x = gmres.solve(rhs);
  if (gmres.info() != Eigen::Success) {
    throw ConvergenceError("steady_state: GMRES did not converge, estimated error " +
                           std::to_string(gmres.error()));
  }
  return detail::finish_steady_state(l, x, opt);
}

struct ExpvOptions {
  double tol = 1e-10;  // local error per unit time, relative to ||v||
  int krylov_dim = 30;
  int max_rejections = 20;
};

/// w = exp(t A) v by adaptive Krylov (Arnoldi) substepping.
inline Vector expv(const SparseMatrix& a, double t, const Vector& v,
                   const ExpvOptions& opt = {}) {
  if (t < 0) throw InvalidArgument("expv: negative time");
  const double normv = v.norm();
  if (t == 0.0 || normv == 0.0) return v;
  const Eigen::Index n = v.size();
  const int m = static_cast<int>(std::min<Eigen::Index>(opt.krylov_dim, n));

  double anorm = 0.0;
  {
    Eigen::VectorXd rows = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < a.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(a, k); it; ++it) rows[it.row()] += std::abs(it.value());
    }
    anorm = rows.maxCoeff();
  }
  if (anorm == 0.0) return v;

  const double tol = opt.tol;
  const double btol = 1e-14 * anorm;
  constexpr double kGamma = 0.9;
  constexpr double kDelta = 1.2;
  auto round2 = [](double x) {
    const double s = std::pow(10.0, std::floor(std::log10(x)) - 1.0);
    return std::ceil(x / s) * s;
  };

  double xm = 1.0 / m;
  const double fact = std::pow((m + 1) / std::numbers::e, m + 1) *
                      std::sqrt(2.0 * std::numbers::pi * (m + 1));
  double t_new = (1.0 / anorm) * std::pow((fact * tol) / (4.0 * anorm), xm);
  t_new = round2(t_new);

  Vector w = v;
  double beta = normv;
  double t_now = 0.0;
  DenseMatrix basis(n, m + 1);
  while (t_now < t) {
    double t_step = std::min(t - t_now, t_new);
    DenseMatrix hess = DenseMatrix::Zero(m + 2, m + 2);
    basis.col(0) = w / beta;
    int k1 = 2;
    int mb = m;
    double avnorm = 0.0;
    for (int j = 0; j < m; ++j) {
      Vector p = a * basis.col(j);
      for (int i = 0; i <= j; ++i) {
        hess(i, j) = basis.col(i).dot(p);
        p -= hess(i, j) * basis.col(i);
      }
      const double s = p.norm();
      if (s < btol) {
        k1 = 0;
        mb = j + 1;
        t_step = t - t_now;
        break;
      }
      hess(j + 1, j) = s;
      basis.col(j + 1) = p / s;
    }
    if (k1 != 0) {
      hess(m + 1, m) = 1.0;
      avnorm = (a * basis.col(m)).norm();
    }

    DenseMatrix f;
    double err_loc = 0.0;
    for (int reject = 0;; ++reject) {
      const int mx = mb + k1;
      f = (t_step * hess.topLeftCorner(mx, mx)).exp();
      if (k1 == 0) {
        err_loc = btol;
        break;
      }
      const double phi1 = std::abs(beta * f(m, 0));
      const double phi2 = std::abs(beta * f(m + 1, 0) * avnorm);
      if (phi1 > 10.0 * phi2) {
        err_loc = phi2;
        xm = 1.0 / m;
      } else if (phi1 > phi2) {
        err_loc = phi1 * phi2 / (phi1 - phi2);
        xm = 1.0 / m;
      } else {
        err_loc = phi1;
        xm = 1.0 / (m - 1);
      }
      if (err_loc <= kDelta * t_step * tol * normv) break;
      if (reject >= opt.max_rejections) {
        throw ConvergenceError("expv: step-size underflow (too many rejected steps)");
      }
      t_step = round2(kGamma * t_step * std::pow(t_step * tol * normv / err_loc, xm));
      if (t_step < 1e-14 * t) throw ConvergenceError("expv: step-size underflow");
    }
    const int mx = mb + std::max(0, k1 - 1);
    w = basis.leftCols(mx) * (beta * f.col(0).head(mx));
    beta = w.norm();
    t_now += t_step;
    if (beta == 0.0) break;
    t_new = round2(kGamma * t_step *
                   std::pow(t_step * tol * normv / std::max(err_loc, 1e-300), xm));
  }
  return w;
}

/// rho(t) = exp(L t)[rho0].
inline DensityMatrix evolve(const DensityMatrix& rho0, const Superoperator& l,
                            double t, const ExpvOptions& opt = {}) {
  if (rho0.dim() != l.hilbert_dim()) {
    throw InvalidArgument("evolve: density matrix / superoperator dimension mismatch");
  }
  return DensityMatrix(
      unvectorize(expv(l.matrix(), t, vectorize(rho0.matrix()), opt), l.hilbert_dim()));
}

}  // namespace cra
