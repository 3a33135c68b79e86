#include "tracespec/trace_core.hpp"

#include <boost/math/tools/minima.hpp>

#include <cmath>
#include <numbers>
#include <sstream>

namespace tracespec {

ModelParams::ModelParams(Discrete d) : m_(d)
{
  if (!(d.p != 0.0) || !std::isfinite(d.p) || !std::isfinite(d.q))
    throw std::invalid_argument("discrete model requires finite p != 0");
}

ModelParams::ModelParams(Continuum c) : m_(c)
{
  if (!(c.lambda > 0.0) || !std::isfinite(c.lambda))
    throw std::invalid_argument("continuum model requires finite lambda > 0");
}

const Discrete& ModelParams::discrete() const
{
  if (auto d = std::get_if<Discrete>(&m_))
    return *d;
  throw std::logic_error("model is not discrete");
}

const Continuum& ModelParams::continuum() const
{
  if (auto c = std::get_if<Continuum>(&m_))
    return *c;
  throw std::logic_error("model is not continuum");
}

std::string ModelParams::describe() const
{
  std::ostringstream os;
  os.precision(17);
  if (is_discrete())
    os << "discrete(p=" << discrete().p << ", q=" << discrete().q << ")";
  else
    os << "continuum(lambda=" << continuum().lambda << ")";
  return os.str();
}

bool operator==(const ModelParams& a, const ModelParams& b)
{
  if (a.is_discrete() != b.is_discrete())
    return false;
  if (a.is_discrete())
    return a.discrete().p == b.discrete().p && a.discrete().q == b.discrete().q;
  return a.continuum().lambda == b.continuum().lambda;
}

double wrap_unit(double t)
{
  double r = t - std::floor(t);
  // floor can leave r == 1 for tiny negative t
  return r >= 1.0 ? 0.0 : r;
}

TorusPoint::TorusPoint(double theta, double phi)
  : theta_(wrap_unit(theta)), phi_(wrap_unit(phi))
{
}

TracePoint trace_map(const TracePoint& pt)
{
  return {2.0 * pt.x * pt.y - pt.z, pt.x, pt.y};
}

TracePoint trace_map_inverse(const TracePoint& pt)
{
  return {pt.y, pt.z, 2.0 * pt.y * pt.z - pt.x};
}

double fricke_vogt(const TracePoint& pt)
{
  return pt.x * pt.x + pt.y * pt.y + pt.z * pt.z - 2.0 * pt.x * pt.y * pt.z - 1.0;
}

namespace {

struct ContinuumFactors
{
  double c0, c1, s0, s1, half_sum;
};

// c0 = cos sqrt E, c1 = cos sqrt(E - lambda), s* the matching sinc factors,
// half_sum = (2E - lambda)/2 so that sqrt-ratio terms become entire.
ContinuumFactors continuum_factors(double lambda, double E)
{
  return {entire::cos_sqrt(E), entire::cos_sqrt(E - lambda), entire::sinc_sqrt(E),
          entire::sinc_sqrt(E - lambda), 0.5 * (2.0 * E - lambda)};
}

} // namespace

TracePoint continuum_curve(double lambda, Energy E)
{
  const auto f = continuum_factors(lambda, E);
  return {f.c0, f.c1, f.c0 * f.c1 - f.half_sum * f.s0 * f.s1};
}

TracePoint free_continuum_curve(double t)
{
  return {std::cos(t), std::cos(t), std::cos(2.0 * t)};
}

double distance_to_free_curve(const TracePoint& pt)
{
  auto dist = [&](double t) {
    const TracePoint c = free_continuum_curve(t);
    return std::hypot(pt.x - c.x, pt.y - c.y, pt.z - c.z);
  };
  constexpr int samples = 720;
  const double step = 2.0 * std::numbers::pi / samples;
  int best = 0;
  double best_d = dist(0.0);
  for (int i = 1; i < samples; ++i)
    if (const double d = dist(i * step); d < best_d) {
      best_d = d;
      best = i;
    }
  const auto [t, d] = boost::math::tools::brent_find_minima(dist, (best - 1) * step, (best + 1) * step, 52);
  (void)t;
  return std::min(d, best_d);
}

TracePoint initial_condition(const ModelParams& model, Energy E)
{
  if (model.is_discrete()) {
    const auto& d = model.discrete();
    return {(E - d.q) / (2.0 * d.p), 0.5 * E, (1.0 + d.p * d.p) / (2.0 * d.p)};
  }
  const auto f = continuum_factors(model.continuum().lambda, E);
  return {f.c0, f.c1, f.c0 * f.c1 + f.half_sum * f.s0 * f.s1};
}

double invariant_of_energy(const ModelParams& model, Energy E)
{
  if (model.is_discrete()) {
    const auto& d = model.discrete();
    const double p2m1 = d.p * d.p - 1.0;
    return (d.q * p2m1 * E + d.q * d.q + p2m1 * p2m1) / (4.0 * d.p * d.p);
  }
  const double lambda = model.continuum().lambda;
  const double s = entire::sinc_sqrt(E) * entire::sinc_sqrt(E - lambda);
  return 0.25 * lambda * lambda * s * s;
}

double discrete_invariant_slope(const Discrete& d)
{
  return d.q * (d.p * d.p - 1.0) / (4.0 * d.p * d.p);
}

std::optional<int> escape_level(const TracePoint& pt, int max_level)
{
  if (max_level < 2)
    throw std::invalid_argument("escape_level: max_level must be >= 2");
  double prev = pt.z; // x_{k-1}
  double cur = pt.y;  // x_k
  double next = pt.x; // x_{k+1}
  for (int k = 0; k <= max_level; ++k) {
    if (!std::isfinite(cur) || !std::isfinite(next) || !std::isfinite(prev))
      return k;
    const double a = std::abs(cur), b = std::abs(next);
    if (a > 1.0 && b > 1.0 && b >= std::abs(prev))
      return k;
    const double after = 2.0 * next * cur - prev;
    prev = cur;
    cur = next;
    next = after;
  }
  return std::nullopt;
}

double orbit_half_trace(const TracePoint& pt, int k)
{
  if (k < -1)
    throw std::invalid_argument("orbit_half_trace: k must be >= -1");
  if (k == -1)
    return pt.z;
  if (k == 0)
    return pt.y;
  TracePoint cur = pt;
  for (int j = 1; j < k; ++j)
    cur = trace_map(cur);
  return cur.x;
}

TorusPoint torus_map(const TorusPoint& t)
{
  return TorusPoint(t.theta() + t.phi(), t.theta());
}

TracePoint torus_embed(const TorusPoint& t)
{
  constexpr double two_pi = 2.0 * 3.14159265358979323846;
  return {std::cos(two_pi * (t.theta() + t.phi())), std::cos(two_pi * t.theta()),
          std::cos(two_pi * t.phi())};
}

} // namespace tracespec
