#pragma once

// Brute-force ground truth: Sturmian words, explicit Jacobi matrices and
// transfer-matrix monodromies, periodic approximant spectra by dense
// eigensolving, and variational ground-state bounds for the continuum model.
//
// Letter conventions.  Block words follow w_{k+1} = w_k w_{k-1} with
// w_0 = "0", w_1 = "1" (so |w_k| = F_k and w_k is a prefix of the Sturmian
// word at theta = 0).  In the Jacobi model letter 1 carries (p, q) and letter
// 0 carries (1, 0).  In the continuum model letter 1 is a free unit cell and
// letter 0 a unit cell with potential lambda.

#include "tracespec/trace_core.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

namespace tracespec::oracle {

/// Golden-mean rotation number (sqrt 5 - 1)/2.
inline constexpr double kAlpha = 0.61803398874989484820;

/// Largest supported periodic-approximant size for dense eigensolves.
inline constexpr std::size_t kMaxPeriod = 2584;

std::uint64_t fibonacci_number(int k);

using Word = std::vector<std::uint8_t>;

/// k-th Fibonacci block word, k >= 0.
Word block_word(int k);

class SturmianWord
{
public:
  SturmianWord(double theta, long n_from, std::vector<std::uint8_t> entries);

  double theta() const { return theta_; }
  long n_from() const { return n_from_; }
  long n_to() const { return n_from_ + static_cast<long>(entries_.size()) - 1; }
  const std::vector<std::uint8_t>& entries() const { return entries_; }
  std::uint8_t at(long n) const;

private:
  double theta_;
  long n_from_;
  std::vector<std::uint8_t> entries_;
};

SturmianWord sturmian_word(double theta, long n_from, long n_to);

struct JacobiCoefficients
{
  std::vector<double> p; // off-diagonal couplings p_n
  std::vector<double> q; // diagonal entries q_n
};

JacobiCoefficients jacobi_coefficients(const Discrete& model,
                                       const std::vector<std::uint8_t>& word);

struct Monodromy
{
  std::array<double, 4> m{1.0, 0.0, 0.0, 1.0}; // row-major
  bool normalized = false;

  double det() const { return m[0] * m[3] - m[1] * m[2]; }
  double half_trace() const { return 0.5 * (m[0] + m[3]); }
};

/// Determinant-normalized cyclic monodromy of the Jacobi recursion over the
/// block word w_k (wraparound coupling taken from the first letter).
Monodromy jacobi_monodromy(const Discrete& model, Energy E, int k);

/// Half-trace of the same monodromy accumulated in 50-digit arithmetic.
double jacobi_half_trace_extended(const Discrete& model, Energy E, int k);

/// Ordered product of unit-cell transfer matrices over the block word w_k.
Monodromy continuum_monodromy(double lambda, Energy E, int k);

/// Half-traces x_1 .. x_{k_max} (element i holds x_{i+1}) from explicit
/// monodromy products, independent of the trace-map recursion.  Throws
/// std::overflow_error when a product leaves the double range.
std::vector<double> half_trace_sequence(const ModelParams& model, Energy E, int k_max);

enum class Phase { periodic, antiperiodic };

struct PeriodicSpectrum
{
  int level = 0;
  Phase phase = Phase::periodic;
  std::vector<double> eigenvalues; // ascending, size F_k
};

PeriodicSpectrum periodic_spectrum(const Discrete& model, int k, Phase phase);

/// Composite Simpson estimate of (int phi'^2 + V phi^2) / int phi^2 on [lo, hi].
double dirichlet_quotient(const std::function<double(double)>& phi,
                          const std::function<double(double)>& dphi,
                          const std::function<double(double)>& potential, double lo,
                          double hi, int panels);

/// Dirichlet energy ||phi'||^2 (+ potential energy, which vanishes) of a fixed
/// normalized quartic bump supported on a length-2 interval of free cells.
double ground_state_rayleigh(double lambda);

/// Bottom of the level-k continuum periodic-approximant spectrum: the smallest
/// double at which the (extended precision) half-trace drops to 1 or below.
Energy ground_state_estimate(double lambda, int k);

} // namespace tracespec::oracle
