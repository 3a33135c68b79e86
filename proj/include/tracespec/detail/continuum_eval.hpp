#pragma once

// Precision-generic evaluation of continuum half-traces.  Used with double for
// ordinary scans and with a multiprecision type where barrier cells make the
// cancellation in the half-trace exceed double precision.

#include "tracespec/trace_core.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace tracespec::detail {

template <class Real> struct Mat2
{
  Real a, b, c, d;

  Mat2 operator*(const Mat2& o) const
  {
    return {a * o.a + b * o.c, a * o.b + b * o.d, c * o.a + d * o.c, c * o.b + d * o.d};
  }
};

/// Unit-cell transfer matrix of -u'' + V u = E u acting on (u, u'), u = E - V.
template <class Real> Mat2<Real> unit_cell(const Real& u)
{
  const Real c = entire::cos_sqrt(u);
  const Real s = entire::sinc_sqrt(u);
  return {c, s, -u * s, c};
}

/// Ordered product over a word (letter 1: free cell, letter 0: potential lambda).
template <class Real>
Mat2<Real> continuum_word_product(const Real& lambda, const Real& E,
                                  const std::vector<std::uint8_t>& word)
{
  const Mat2<Real> free_cell = unit_cell(E);
  const Mat2<Real> barrier = unit_cell(Real(E - lambda));
  Mat2<Real> m{Real(1), Real(0), Real(0), Real(1)};
  for (std::uint8_t letter : word)
    m = (letter ? free_cell : barrier) * m;
  return m;
}

/// x_k by the trace recursion started from (x_1, x_0, x_{-1}).
template <class Real>
Real continuum_orbit_half_trace(const Real& lambda, const Real& E, int k)
{
  const Real c0 = entire::cos_sqrt(E);
  const Real c1 = entire::cos_sqrt(Real(E - lambda));
  const Real s0 = entire::sinc_sqrt(E);
  const Real s1 = entire::sinc_sqrt(Real(E - lambda));
  Real next = c0;                                           // x_1
  Real cur = c1;                                            // x_0
  Real prev = c0 * c1 + (E - lambda / 2) * s0 * s1;         // x_{-1}
  if (k == -1)
    return prev;
  if (k == 0)
    return cur;
  for (int j = 1; j < k; ++j) {
    Real after = 2 * next * cur - prev;
    prev = cur;
    cur = next;
    next = after;
  }
  return next;
}

} // namespace tracespec::detail
