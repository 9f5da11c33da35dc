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

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace cra {

using cplx = std::complex<double>;
using SparseMatrix = Eigen::SparseMatrix<cplx, Eigen::ColMajor, std::ptrdiff_t>;
using DenseMatrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using Triplet = Eigen::Triplet<cplx, std::ptrdiff_t>;

inline constexpr cplx kI{0.0, 1.0};

// Error taxonomy. Everything derives from cra::Error so callers (the sweep
// runner in particular) can map failures onto per-row status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested Hilbert space exceeds the configured dimension bound.
class SizingError : public Error {
 public:
  using Error::Error;
};

/// Operands live on incompatible spaces, or an argument is out of range.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A steady state or stationary vector is not unique.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

/// Iterative or adaptive numerics failed to reach the requested accuracy.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Observable is undefined on the given state (e.g. g2 of the vacuum).
class UndefinedObservable : public Error {
 public:
  using Error::Error;
};

}  // namespace cra
