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

// Normalization gate for the closed-form dimer g2: the master-equation
// steady state at a small drive must reproduce the analytic value at fixed
// reference points before the closed form is used.

#pragma once

#include "cra/analytics.hpp"
#include "cra/models.hpp"
#include "cra/ness.hpp"
#include "cra/observables.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace cra::analytics {

struct GatePoint {
  double J;
  double U;
};

inline constexpr std::array<GatePoint, 5> kGatePoints{
    {{0.5, 0.5}, {1.0, 2.0}, {2.0, 2.0}, {3.0, 10.0}, {10.0, 10.0}}};
inline constexpr double kGateOmega = 1e-3;
inline constexpr int kGateNmax = 3;
inline constexpr double kGateTolerance = 1e-2;

struct GateResult {
  std::array<double, kGatePoints.size()> master_equation{};
  std::array<double, kGatePoints.size()> closed_form{};
  // max |closed / master - 1| for the shipped normalization.
  double max_rel_deviation = 0.0;
  // Same for the pair amplitude weighted by 1 instead of n(n-1) = 2.
  double unit_weight_deviation = 0.0;
  bool passed = false;
};

/// Master-equation g2 at Omega = kGateOmega, n_max = kGateNmax versus
/// g2_closed_form at every gate point. Passes when the relative deviation
/// stays below kGateTolerance everywhere.
inline GateResult run_closed_form_gate() {
  GateResult out;
  double alt = 0.0;
  for (std::size_t i = 0; i < kGatePoints.size(); ++i) {
    BHParams p;
    p.J = kGatePoints[i].J;
    p.U = kGatePoints[i].U;
    p.omega = kGateOmega;
    const NessResult ness = solve_ness(p, kGateNmax);
    const double me = g2_local(ness.rho, ness.space, 0);
    const double cf = g2_closed_form(p.J, p.U);
    out.master_equation[i] = me;
    out.closed_form[i] = cf;
    out.max_rel_deviation = std::max(out.max_rel_deviation, std::abs(cf / me - 1.0));
    alt = std::max(alt, std::abs(0.5 * cf / me - 1.0));
  }
  out.unit_weight_deviation = alt;
  out.passed = out.max_rel_deviation < kGateTolerance;
  return out;
}

}  // namespace cra::analytics
