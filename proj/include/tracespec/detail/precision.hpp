#pragma once

// Fixed-precision ladder for continuum half-traces.  Callers pass the number
// of decimal digits they need; the functor is invoked with a value of the
// smallest sufficient floating type.

#include <boost/multiprecision/mpfr.hpp>

#include <stdexcept>
#include <string>

namespace tracespec::detail {

using Mp50 = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<50>,
                                           boost::multiprecision::et_off>;
using Mp100 = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<100>,
                                            boost::multiprecision::et_off>;
using Mp200 = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<200>,
                                            boost::multiprecision::et_off>;
using Mp400 = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<400>,
                                            boost::multiprecision::et_off>;

inline constexpr int kMaxDigits = 380;

template <class Real> struct PrecisionTag
{
  using type = Real;
};

template <class F> decltype(auto) with_precision(int digits, F&& f)
{
  if (digits <= 15)
    return f(PrecisionTag<double>{});
  if (digits <= 45)
    return f(PrecisionTag<Mp50>{});
  if (digits <= 95)
    return f(PrecisionTag<Mp100>{});
  if (digits <= 190)
    return f(PrecisionTag<Mp200>{});
  if (digits <= kMaxDigits)
    return f(PrecisionTag<Mp400>{});
  throw std::range_error("continuum evaluation needs " + std::to_string(digits) +
                         " digits, above the supported " + std::to_string(kMaxDigits));
}

} // namespace tracespec::detail
