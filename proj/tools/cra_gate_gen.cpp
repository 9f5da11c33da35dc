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

// Build step: runs the closed-form normalization gate and writes its record
// as a constexpr header. Exits non-zero, failing the build, when the gate
// does not pass.

#include "cra/gate.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

namespace {

std::string g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: cra_gate_gen <output-header>\n";
    return 1;
  }
  const auto gate = cra::analytics::run_closed_form_gate();
  std::ofstream out(argv[1]);
  out << "// Generated by cra_gate_gen. Do not edit.\n#pragma once\n\n"
      << "namespace cra::generated {\n\n"
      << "struct ClosedFormGateRecord {\n"
      << "  bool passed;\n  double omega;\n  int n_max;\n  int points;\n"
      << "  double tolerance;\n  double max_rel_deviation;\n"
      << "  double unit_weight_deviation;\n};\n\n"
      << "inline constexpr ClosedFormGateRecord kClosedFormGate{"
      << (gate.passed ? "true" : "false") << ", " << g17(cra::analytics::kGateOmega)
      << ", " << cra::analytics::kGateNmax << ", " << cra::analytics::kGatePoints.size()
      << ", " << g17(cra::analytics::kGateTolerance) << ", " << g17(gate.max_rel_deviation)
      << ", " << g17(gate.unit_weight_deviation) << "};\n\n"
      << "}  // namespace cra::generated\n";
  if (!out) {
    std::cerr << "cra_gate_gen: cannot write " << argv[1] << "\n";
    return 1;
  }
  std::cout << "closed-form gate: max deviation " << gate.max_rel_deviation
            << ", unit-weight deviation " << gate.unit_weight_deviation
            << (gate.passed ? " (pass)\n" : " (FAIL)\n");
  return gate.passed ? 0 : 2;
}
