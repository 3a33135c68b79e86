#pragma once

#include <cmath>
#include <limits>

namespace tracespec::entire {

namespace detail {

inline constexpr double kSeriesRadius = 1e-4;

// sum_{n>=0} (-u)^n / (2n + offset)!, offset in {0, 1}
template <class Real> Real even_series(const Real& u, int offset)
{
  using std::abs;
  Real term = 1;
  Real sum = 1;
  const Real eps = std::numeric_limits<Real>::epsilon();
  for (int n = 1; n < 256; ++n) {
    term *= -u / Real((2 * n + offset) * (2 * n - 1 + offset));
    sum += term;
    if (abs(term) <= eps * abs(sum))
      break;
  }
  return sum;
}

} // namespace detail

template <class Real> Real cos_sqrt(const Real& u)
{
  using std::abs;
  using std::cos;
  using std::cosh;
  using std::sqrt;
  if (abs(u) < Real(detail::kSeriesRadius))
    return detail::even_series(u, 0);
  if (u > 0)
    return cos(sqrt(u));
  return cosh(sqrt(-u));
}

template <class Real> Real sinc_sqrt(const Real& u)
{
  using std::abs;
  using std::sin;
  using std::sinh;
  using std::sqrt;
  if (abs(u) < Real(detail::kSeriesRadius))
    return detail::even_series(u, 1);
  if (u > 0) {
    const Real s = sqrt(u);
    return sin(s) / s;
  }
  const Real s = sqrt(-u);
  return sinh(s) / s;
}

} // namespace tracespec::entire
