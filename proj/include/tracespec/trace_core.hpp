#pragma once

// Fibonacci trace map, Fricke-Vogt invariant, curves of initial conditions
// (discrete Jacobi and continuum) and the torus factor of the map on the
// Cayley cubic.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

namespace tracespec {

using Energy = double;

struct TracePoint
{
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  bool finite() const
  {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
  }
  friend bool operator==(const TracePoint&, const TracePoint&) = default;
};

/// Jacobi model with off-diagonal couplings in {1, p} and diagonal in {0, q}.
struct Discrete
{
  double p = 1.0;
  double q = 0.0;
};

/// Continuum Schroedinger model with unit-length potential pieces 0 and lambda.
struct Continuum
{
  double lambda = 1.0;
};

class ModelParams
{
public:
  ModelParams(Discrete d);
  ModelParams(Continuum c);

  bool is_discrete() const { return std::holds_alternative<Discrete>(m_); }
  bool is_continuum() const { return std::holds_alternative<Continuum>(m_); }
  const Discrete& discrete() const;
  const Continuum& continuum() const;
  std::string describe() const;

  friend bool operator==(const ModelParams& a, const ModelParams& b);

private:
  std::variant<Discrete, Continuum> m_;
};

/// Point of the 2-torus R^2/Z^2; coordinates are reduced into [0,1).
class TorusPoint
{
public:
  TorusPoint(double theta = 0.0, double phi = 0.0);
  double theta() const { return theta_; }
  double phi() const { return phi_; }

private:
  double theta_;
  double phi_;
};

double wrap_unit(double t);

TracePoint trace_map(const TracePoint& pt);
TracePoint trace_map_inverse(const TracePoint& pt);
double fricke_vogt(const TracePoint& pt);

/// Triple (x_1, x_0, x_{-1}) of half-traces whose forward trace-map orbit
/// reproduces the half-traces of the Fibonacci periodic approximants.
TracePoint initial_condition(const ModelParams& model, Energy E);

/// The continuum curve as (cos sqrt E, cos sqrt(E - lambda), z(E)) where z is
/// the half-trace of the two-cell product.  Differs from initial_condition in
/// the third coordinate by the involution z -> 2xy - z (same invariant).
TracePoint continuum_curve(double lambda, Energy E);

/// Curve of the free continuum operator, (cos t, cos t, cos 2t) with t = sqrt E.
TracePoint free_continuum_curve(double t);

/// Euclidean distance from pt to the whole free curve (over all t).
double distance_to_free_curve(const TracePoint& pt);

double invariant_of_energy(const ModelParams& model, Energy E);

/// E-derivative of the discrete invariant (constant: the invariant is affine).
double discrete_invariant_slope(const Discrete& d);

/// First level k <= max_level at which the orbit is certified to diverge:
/// |x_k| > 1, |x_{k+1}| > 1 and |x_{k+1}| >= |x_{k-1}|.  Levels are counted
/// with pt = (x_1, x_0, x_{-1}).  Non-finite values escape immediately.
std::optional<int> escape_level(const TracePoint& pt, int max_level);

/// Half-trace x_k obtained by iterating the trace map from pt = (x_1, x_0, x_{-1}).
double orbit_half_trace(const TracePoint& pt, int k);

TorusPoint torus_map(const TorusPoint& t);
TracePoint torus_embed(const TorusPoint& t);

// Entire functions used by the continuum formulas.  Both are evaluated by a
// Taylor series near the origin and through cosh/sinh for negative argument.
namespace entire {

/// cos(sqrt(u)), continued analytically to u < 0 as cosh(sqrt(-u)).
template <class Real> Real cos_sqrt(const Real& u);

/// sin(sqrt(u))/sqrt(u), continued analytically (value 1 at u = 0).
template <class Real> Real sinc_sqrt(const Real& u);

} // namespace entire
} // namespace tracespec

#include "tracespec/detail/entire_impl.hpp"
