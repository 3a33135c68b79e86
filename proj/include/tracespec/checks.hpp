#pragma once

// Invariant checks shared by the `verify` subcommand and the acceptance run.

#include <cstdint>
#include <string>
#include <vector>

namespace tracespec {

struct CheckResult
{
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
  double seconds = 0.0;
};

/// Max drift of the Fricke-Vogt invariant under f and f^-1 over random points
/// of [-5, 5]^3, relative to the size of the terms of I at the image point.
CheckResult check_trace_invariance(std::size_t points = 1000000, std::uint64_t seed = 1);

/// invariant_of_energy against I of the initial condition on random discrete
/// models, and the closed forms q^2/4 (p = 1) and (p^2 - 1)^2/(4p^2) (q = 0).
CheckResult check_invariant_of_energy(std::size_t samples = 10000, std::uint64_t seed = 2);

/// Half-traces of the explicit monodromy products against trace-map iterates
/// through level k_max, for random discrete and continuum models.
CheckResult check_oracle_equivalence(std::size_t samples = 200, int k_max = 15, std::uint64_t seed = 3);

/// Residual of f(F(t)) - F(A t) on random torus points and |I| on the image.
CheckResult check_semiconjugacy(std::size_t samples = 10000, std::uint64_t seed = 4);

/// (0, 0, -1) returns to itself exactly after six steps and not before.
CheckResult check_period_six();

std::vector<CheckResult> invariant_suite();

/// One aligned line: "PASS name  measured=... tol=... detail".
std::string format_check(const CheckResult& r);

} // namespace tracespec
