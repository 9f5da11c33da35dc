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

// Finite-drive master-equation pipeline: model -> Hamiltonian -> Liouvillian
// -> steady state, plus the steady-state emission spectrum.

#pragma once

#include "cra/hilbert.hpp"
#include "cra/liouville.hpp"
#include "cra/models.hpp"
#include "cra/observables.hpp"

#include <utility>

namespace cra {

struct NessResult {
  FockSpace space;
  double detuning;
  OperatorMatrix hamiltonian;
  Superoperator liouvillian;
  DensityMatrix rho;
};

inline NessResult solve_ness(const ModelParams& model, int n_max,
                             const SteadyStateOptions& opt = {}) {
  FockSpace space = make_space(model, n_max);
  ModelParams fixed = model;
  const double dc = model_detuning(model, space);
  std::visit([dc](auto& p) { p.detuning = dc; }, fixed);
  OperatorMatrix h = hamiltonian(fixed, space);
  Superoperator l = photon_loss_liouvillian(h, space, model_gamma(model));
  DensityMatrix rho = steady_state(l, opt);
  return {std::move(space), dc, std::move(h), std::move(l), std::move(rho)};
}

struct SpectrumSettings {
  double t_max = 20.0;
  std::size_t samples = 4096;
  bool subtract_coherent = true;
  SpectrumOptions window;
  int site = 0;
};

/// Emission spectrum on one site of a solved steady state.
inline SpectrumResult ness_spectrum(const NessResult& ness, const SpectrumSettings& s = {}) {
  const auto series = autocorrelation(ness.rho, ness.liouvillian, ness.space, s.site,
                                      s.t_max, s.samples);
  const auto a = site_operator(ness.space, s.site, SiteOp::annihilate);
  const cplx alpha = expectation(ness.rho, a);
  return emission_spectrum(series, s.subtract_coherent, std::norm(alpha), s.window);
}

}  // namespace cra
