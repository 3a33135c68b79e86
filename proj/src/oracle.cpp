#include "tracespec/oracle.hpp"

#include "tracespec/detail/continuum_eval.hpp"

#include <Eigen/Dense>
#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

namespace tracespec::oracle {

std::uint64_t fibonacci_number(int k)
{
  if (k < 0 || k > 91)
    throw std::out_of_range("fibonacci_number: k must lie in [0, 91]");
  std::uint64_t a = 1, b = 1; // F_0, F_1
  for (int j = 0; j < k; ++j) {
    std::uint64_t c = a + b;
    a = b;
    b = c;
  }
  return a;
}

Word block_word(int k)
{
  if (k < 0)
    throw std::invalid_argument("block_word: k must be >= 0");
  if (k > 40)
    throw std::out_of_range("block_word: level too large");
  Word older{0}, newer{1};
  if (k == 0)
    return older;
  for (int j = 1; j < k; ++j) {
    Word next = newer;
    next.insert(next.end(), older.begin(), older.end());
    older = std::move(newer);
    newer = std::move(next);
  }
  return newer;
}

SturmianWord::SturmianWord(double theta, long n_from, std::vector<std::uint8_t> entries)
  : theta_(theta), n_from_(n_from), entries_(std::move(entries))
{
}

std::uint8_t SturmianWord::at(long n) const
{
  if (n < n_from_ || n > n_to())
    throw std::out_of_range("SturmianWord::at: index " + std::to_string(n) +
                            " outside the computed range");
  return entries_[static_cast<std::size_t>(n - n_from_)];
}

SturmianWord sturmian_word(double theta, long n_from, long n_to)
{
  if (!std::isfinite(theta))
    throw std::invalid_argument("sturmian_word: theta must be finite");
  if (n_to < n_from)
    throw std::invalid_argument("sturmian_word: empty index range");
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(n_to - n_from + 1));
  // Exact in long double for |n| up to ~1e9, which is far beyond any use here.
  const long double a = 0.61803398874989484820458683436563811772L;
  for (long n = n_from; n <= n_to; ++n) {
    long double t = static_cast<long double>(n) * a + theta;
    t -= std::floor(t);
    out.push_back(t >= 1.0L - a ? 1 : 0);
  }
  return SturmianWord(theta, n_from, std::move(out));
}

JacobiCoefficients jacobi_coefficients(const Discrete& model,
                                       const std::vector<std::uint8_t>& word)
{
  JacobiCoefficients c;
  c.p.reserve(word.size());
  c.q.reserve(word.size());
  for (std::uint8_t letter : word) {
    c.p.push_back(letter ? model.p : 1.0);
    c.q.push_back(letter ? model.q : 0.0);
  }
  return c;
}

namespace {

template <class Real> detail::Mat2<Real> jacobi_product(const Discrete& model, Energy E, int k)
{
  const auto coef = jacobi_coefficients(model, block_word(k));
  const std::size_t n = coef.p.size();
  detail::Mat2<Real> m{1, 0, 0, 1};
  for (std::size_t i = 0; i < n; ++i) {
    const Real pn = coef.p[i];
    const Real pn1 = coef.p[(i + 1) % n];
    using std::abs;
    using std::sqrt;
    const Real scale = 1 / (pn1 * sqrt(abs(pn / pn1)));
    m = detail::Mat2<Real>{(Real(E) - coef.q[i]) * scale, -pn * scale, pn1 * scale, 0} * m;
  }
  return m;
}

} // namespace

Monodromy jacobi_monodromy(const Discrete& model, Energy E, int k)
{
  const auto m = jacobi_product<double>(model, E, k);
  Monodromy out;
  out.m = {m.a, m.b, m.c, m.d};
  out.normalized = true;
  return out;
}

double jacobi_half_trace_extended(const Discrete& model, Energy E, int k)
{
  const auto m = jacobi_product<boost::multiprecision::cpp_bin_float_50>(model, E, k);
  return static_cast<double>((m.a + m.d) / 2);
}

Monodromy continuum_monodromy(double lambda, Energy E, int k)
{
  const auto m = detail::continuum_word_product<double>(lambda, E, block_word(k));
  Monodromy out;
  out.m = {m.a, m.b, m.c, m.d};
  out.normalized = false; // unimodular by construction
  return out;
}

std::vector<double> half_trace_sequence(const ModelParams& model, Energy E, int k_max)
{
  if (k_max < 1)
    throw std::invalid_argument("half_trace_sequence: k_max must be >= 1");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(k_max));
  for (int k = 1; k <= k_max; ++k) {
    const Monodromy m = model.is_discrete()
                            ? jacobi_monodromy(model.discrete(), E, k)
                            : continuum_monodromy(model.continuum().lambda, E, k);
    if (!std::isfinite(m.m[0]) || !std::isfinite(m.m[1]) || !std::isfinite(m.m[2]) ||
        !std::isfinite(m.m[3]))
      throw std::overflow_error("half_trace_sequence: monodromy overflows at level " +
                                std::to_string(k));
    out.push_back(m.half_trace());
  }
  return out;
}

PeriodicSpectrum periodic_spectrum(const Discrete& model, int k, Phase phase)
{
  if (k < 0)
    throw std::invalid_argument("periodic_spectrum: k must be >= 0");
  if (fibonacci_number(k) > kMaxPeriod)
    throw std::out_of_range("periodic_spectrum: period F_k exceeds " +
                            std::to_string(kMaxPeriod));
  const auto coef = jacobi_coefficients(model, block_word(k));
  const auto n = static_cast<Eigen::Index>(coef.p.size());
  const double sign = phase == Phase::periodic ? 1.0 : -1.0;

  // Site i couples to site i+1 through p_{i+1}; the wrap bond carries p_0.
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    h(i, i) = coef.q[static_cast<std::size_t>(i)];
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    h(i, i + 1) += coef.p[static_cast<std::size_t>(i + 1)];
    h(i + 1, i) += coef.p[static_cast<std::size_t>(i + 1)];
  }
  if (n == 1) {
    h(0, 0) += 2.0 * sign * coef.p[0];
  } else {
    h(n - 1, 0) += sign * coef.p[0];
    h(0, n - 1) += sign * coef.p[0];
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("periodic_spectrum: eigensolver did not converge");
  PeriodicSpectrum out;
  out.level = k;
  out.phase = phase;
  out.eigenvalues.assign(solver.eigenvalues().data(),
                         solver.eigenvalues().data() + solver.eigenvalues().size());
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
  return out;
}

double dirichlet_quotient(const std::function<double(double)>& phi,
                          const std::function<double(double)>& dphi,
                          const std::function<double(double)>& potential, double lo,
                          double hi, int panels)
{
  if (!(hi > lo) || panels < 2)
    throw std::invalid_argument("dirichlet_quotient: need hi > lo and panels >= 2");
  if (panels % 2)
    ++panels;
  const double h = (hi - lo) / panels;
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= panels; ++i) {
    const double x = lo + i * h;
    const double w = (i == 0 || i == panels) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const double f = phi(x), df = dphi(x);
    num += w * (df * df + potential(x) * f * f);
    den += w * f * f;
  }
  return num / den;
}

double ground_state_rayleigh(double lambda)
{
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("ground_state_rayleigh: lambda must be finite and >= 0");
  // Two consecutive free cells exist in the first dozen letters.
  const auto w = sturmian_word(0.0, 0, 16);
  long start = -1;
  for (long n = 0; n < 16 && start < 0; ++n)
    if (w.at(n) == 1 && w.at(n + 1) == 1)
      start = n;
  if (start < 0)
    throw std::logic_error("ground_state_rayleigh: no pair of free cells found");
  const double centre = static_cast<double>(start) + 1.0;
  auto phi = [centre](double x) {
    const double s = x - centre;
    return (1.0 - s * s) * (1.0 + s * s / 5.0);
  };
  auto dphi = [centre](double x) {
    const double s = x - centre;
    return -1.6 * s - 0.8 * s * s * s;
  };
  auto potential = [&w, lambda](double x) {
    const long cell = static_cast<long>(std::floor(x));
    return w.at(cell) ? 0.0 : lambda;
  };
  return dirichlet_quotient(phi, dphi, potential, centre - 1.0, centre + 1.0, 10000);
}

namespace {

// True iff the solution with u(0) = 0, u'(0) = 1 has no zero in (0, L], i.e.
// E lies strictly below the lowest Dirichlet eigenvalue on one period.
template <class Mp> bool below_dirichlet_ground_state(const Mp& lambda, const Mp& E, const Word& word)
{
  using std::atan2;
  using std::floor;
  using std::sqrt;
  using std::tanh;
  const Mp pi = boost::math::constants::pi<Mp>();
  Mp u = 0, v = 1;
  for (std::uint8_t letter : word) {
    const Mp q = letter ? E : Mp(E - lambda);
    if (q > 0) {
      // Scaled Pruefer angle advances uniformly by sqrt(q) across the cell.
      const Mp kappa = sqrt(q);
      const Mp theta = atan2(u, v / kappa);
      if (floor((theta + kappa) / pi) != floor(theta / pi))
        return false;
    } else if (q < 0) {
      const Mp kappa = sqrt(-q);
      if (v != 0) {
        const Mp t = -u * kappa / v;
        if (t > 0 && t <= tanh(kappa))
          return false;
      }
    } else if (v != 0) {
      const Mp x = -u / v;
      if (x > 0 && x <= 1)
        return false;
    }
    const auto m = detail::unit_cell(q);
    const Mp nu = m.a * u + m.b * v;
    const Mp nv = m.c * u + m.d * v;
    u = nu;
    v = nv;
  }
  return true;
}

template <class Mp> double ground_state_impl(double lambda, const Word& word, double upper)
{
  const Mp lam(lambda);
  auto above = [&](double E) {
    const auto m = detail::continuum_word_product<Mp>(lam, Mp(E), word);
    return (m.a + m.d) / 2 > 1;
  };
  auto below_mu = [&](double E) { return below_dirichlet_ground_state<Mp>(lam, Mp(E), word); };

  auto bisect = [](double lo, double hi, const auto& pred) {
    for (;;) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi)
        return hi;
      (pred(mid) ? lo : hi) = mid;
    }
  };

  if (!above(0.0))
    return 0.0;
  while (below_mu(upper))
    upper *= 2.0;
  // The periodic ground state lies below the Dirichlet one, and the
  // half-trace stays below 1 between them, so a plain bisection is safe even
  // when the lowest bands are far narrower than any sampling grid.
  const double mu = bisect(0.0, upper, below_mu);
  return bisect(0.0, mu, above);
}

} // namespace

Energy ground_state_estimate(double lambda, int k)
{
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw std::invalid_argument("ground_state_estimate: lambda must be finite and >= 0");
  if (k < 2)
    throw std::invalid_argument("ground_state_estimate: k must be >= 2");
  if (lambda == 0.0)
    return 0.0;

  // Products over barrier cells cancel down from ~exp(sqrt(lambda) * #barriers).
  const double barriers = static_cast<double>(fibonacci_number(k - 2));
  const double digits = 25.0 + barriers * std::sqrt(lambda) / std::log(10.0);
  const Word word = block_word(k);
  const double upper = ground_state_rayleigh(lambda) + 0.5;
  // At large lambda the lowest band can be narrower than 1e-13; the result is
  // the first double at which the half-trace is at most 1.
  if (digits <= 45.0)
    return ground_state_impl<boost::multiprecision::cpp_bin_float_50>(lambda, word, upper);
  if (digits <= 95.0)
    return ground_state_impl<boost::multiprecision::cpp_bin_float_100>(lambda, word, upper);
  if (digits <= 190.0)
    return ground_state_impl<boost::multiprecision::number<boost::multiprecision::cpp_bin_float<200>>>(
        lambda, word, upper);
  throw std::range_error("ground_state_estimate: lambda and k need more than 190 digits");
}

} // namespace tracespec::oracle
