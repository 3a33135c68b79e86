#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tracespec/detail/continuum_eval.hpp"
#include "tracespec/trace_core.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <numbers>
#include <random>

using namespace tracespec;
using std::numbers::pi;

namespace {

double rel_diff(double a, double b)
{
  return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

TracePoint random_point(std::mt19937_64& rng, double r)
{
  std::uniform_real_distribution<double> u(-r, r);
  return {u(rng), u(rng), u(rng)};
}

} // namespace

TEST_CASE("trace map and inverse")
{
  CHECK(trace_map({1, 1, 1}) == TracePoint{1, 1, 1});
  CHECK(trace_map({2, 3, 4}) == TracePoint{8, 2, 3});
  CHECK(trace_map_inverse({8, 2, 3}) == TracePoint{2, 3, 4});

  std::mt19937_64 rng(11);
  for (int i = 0; i < 10000; ++i) {
    const TracePoint pt = random_point(rng, 10.0);
    const TracePoint back = trace_map_inverse(trace_map(pt));
    CHECK(std::abs(back.x - pt.x) <= 1e-12 * std::max(1.0, std::abs(pt.x)));
    CHECK(std::abs(back.y - pt.y) <= 1e-12 * std::max(1.0, std::abs(pt.y)));
    CHECK(std::abs(back.z - pt.z) <= 1e-12 * std::max(1.0, std::abs(pt.z)) * 100);
  }
}

TEST_CASE("Fricke-Vogt invariant")
{
  CHECK(fricke_vogt({1, 1, 1}) == 0.0);
  CHECK(fricke_vogt({0, 0, 0}) == -1.0);
  CHECK(fricke_vogt({0, 0, -1}) == 0.0);

  std::mt19937_64 rng(12);
  for (int i = 0; i < 20000; ++i) {
    const TracePoint pt = random_point(rng, 5.0);
    const double before = fricke_vogt(pt);
    // 1e-12 is relative to the size of the terms that cancel.
    const double scale = 1.0 + std::abs(before) + 2.0 * std::abs(pt.x * pt.y * pt.z);
    CHECK(std::abs(fricke_vogt(trace_map(pt)) - before) <= 1e-12 * scale * 10);
    CHECK(std::abs(fricke_vogt(trace_map_inverse(pt)) - before) <= 1e-12 * scale * 10);
  }
}

TEST_CASE("model parameters validate")
{
  CHECK_THROWS_AS(ModelParams(Discrete{0.0, 1.0}), std::invalid_argument);
  CHECK_THROWS_AS(ModelParams(Continuum{0.0}), std::invalid_argument);
  CHECK_THROWS_AS(ModelParams(Continuum{-2.0}), std::invalid_argument);
  CHECK_THROWS_AS(ModelParams(Discrete{NAN, 1.0}), std::invalid_argument);
  const ModelParams m(Discrete{2.0, 3.0});
  CHECK(m.is_discrete());
  CHECK_THROWS_AS(m.continuum(), std::logic_error);
  CHECK(m == ModelParams(Discrete{2.0, 3.0}));
  CHECK_FALSE(m == ModelParams(Continuum{2.0}));
}

TEST_CASE("initial conditions")
{
  const TracePoint free_edge = initial_condition(ModelParams(Discrete{1, 0}), 2.0);
  CHECK(free_edge == TracePoint{1, 1, 1});

  const double lambda = 12 * pi * pi;
  const TracePoint acc = initial_condition(ModelParams(Continuum{lambda}), 16 * pi * pi);
  CHECK(acc.x == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(acc.y == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(acc.z == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(invariant_of_energy(ModelParams(Continuum{lambda}), 16 * pi * pi)) < 1e-24);

  // Two-cell half-trace by explicit products, with the square roots taken
  // directly (E > lambda keeps everything real).
  for (double E : {1.0, 5.0, 100.0}) {
    const double lam = 0.5;
    const double a = std::sqrt(E), b = std::sqrt(E - lam);
    const double free_cell[4] = {std::cos(a), std::sin(a) / a, -a * std::sin(a), std::cos(a)};
    const double bar[4] = {std::cos(b), std::sin(b) / b, -b * std::sin(b), std::cos(b)};
    // product bar * free (letter order "10" applied left to right)
    const double m00 = bar[0] * free_cell[0] + bar[1] * free_cell[2];
    const double m11 = bar[2] * free_cell[1] + bar[3] * free_cell[3];
    const TracePoint c = continuum_curve(lam, E);
    CHECK(c.z == doctest::Approx(0.5 * (m00 + m11)).epsilon(1e-12));
    const TracePoint ic = initial_condition(ModelParams(Continuum{lam}), E);
    CHECK(ic.z == doctest::Approx(2 * c.x * c.y - c.z).epsilon(1e-12));
  }
}

TEST_CASE("removable singularities of the continuum curve")
{
  const double lambda = 3.0;
  for (double E : {0.0, lambda}) {
    const TracePoint at = initial_condition(ModelParams(Continuum{lambda}), E);
    const TracePoint left = initial_condition(ModelParams(Continuum{lambda}), E - 2e-4);
    const TracePoint right = initial_condition(ModelParams(Continuum{lambda}), E + 2e-4);
    CHECK(at.finite());
    CHECK(std::abs(at.z - 0.5 * (left.z + right.z)) < 1e-6);
    CHECK(std::abs(at.x - 0.5 * (left.x + right.x)) < 1e-6);
  }
  CHECK(entire::sinc_sqrt(0.0) == 1.0);
  CHECK(entire::cos_sqrt(0.0) == 1.0);
  CHECK(entire::cos_sqrt(-4.0) == doctest::Approx(std::cosh(2.0)).epsilon(1e-15));
  CHECK(entire::sinc_sqrt(-4.0) == doctest::Approx(std::sinh(2.0) / 2.0).epsilon(1e-15));
  // Series branch agrees with the closed form at the switch-over.
  CHECK(entire::sinc_sqrt(1.00001e-4) ==
        doctest::Approx(std::sin(std::sqrt(1.00001e-4)) / std::sqrt(1.00001e-4)).epsilon(1e-15));
  CHECK(entire::cos_sqrt(9.9e-5) == doctest::Approx(std::cos(std::sqrt(9.9e-5))).epsilon(1e-15));
}

TEST_CASE("invariant of energy matches the invariant of the initial condition")
{
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> up(-4.0, 4.0), uq(-4.0, 4.0), ue(-6.0, 6.0);
  for (int i = 0; i < 10000; ++i) {
    double p = up(rng);
    if (std::abs(p) < 0.05)
      p = 0.5;
    const ModelParams m(Discrete{p, uq(rng)});
    const double E = ue(rng);
    CHECK(rel_diff(invariant_of_energy(m, E), fricke_vogt(initial_condition(m, E))) < 1e-12);
  }
  std::uniform_real_distribution<double> ul(0.1, 40.0), uc(-10.0, 200.0);
  for (int i = 0; i < 5000; ++i) {
    const double lambda = ul(rng);
    const ModelParams m(Continuum{lambda});
    for (double E : {uc(rng), lambda + 1e-6 * uc(rng), 1e-6 * uc(rng)}) {
      const double lhs = invariant_of_energy(m, E);
      const double rhs = fricke_vogt(initial_condition(m, E));
      const TracePoint pt = initial_condition(m, E);
      const double scale = 1.0 + pt.x * pt.x + pt.y * pt.y + pt.z * pt.z;
      CHECK(std::abs(lhs - rhs) <= 1e-12 * scale * 10);
      CHECK(std::abs(fricke_vogt(continuum_curve(lambda, E)) - rhs) <= 1e-12 * scale * 10);
    }
  }
}

TEST_CASE("discrete invariant special cases")
{
  for (double q : {-3.0, 0.5, 2.0})
    for (double E : {-5.0, 0.0, 1.7})
      CHECK(invariant_of_energy(ModelParams(Discrete{1.0, q}), E) ==
            doctest::Approx(q * q / 4).epsilon(1e-15));
  for (double p : {-2.0, 0.5, 3.0})
    for (double E : {-5.0, 0.0, 1.7})
      CHECK(invariant_of_energy(ModelParams(Discrete{p, 0.0}), E) ==
            doctest::Approx((p * p - 1) * (p * p - 1) / (4 * p * p)).epsilon(1e-15));
  CHECK(discrete_invariant_slope({1.0, 5.0}) == 0.0);
  CHECK(discrete_invariant_slope({3.0, 0.0}) == 0.0);
  CHECK(discrete_invariant_slope({-1.0, 2.0}) == 0.0);
  const Discrete d{2.0, 3.0};
  const double slope = invariant_of_energy(ModelParams(d), 1.0) - invariant_of_energy(ModelParams(d), 0.0);
  CHECK(slope == doctest::Approx(discrete_invariant_slope(d)));
  CHECK(discrete_invariant_slope(d) == doctest::Approx(3.0 * 3.0 / 16.0));
}

TEST_CASE("continuum invariant decays at high energy")
{
  for (double lambda : {1.0, 7.0, 50.0})
    for (double E = lambda + 0.5; E < 1e5; E *= 1.37)
      CHECK(invariant_of_energy(ModelParams(Continuum{lambda}), E) <=
            lambda * lambda / (4 * E * (E - lambda)) * (1 + 1e-12));
}

TEST_CASE("escape levels")
{
  CHECK_THROWS_AS(escape_level({0, 0, 0}, 1), std::invalid_argument);
  CHECK_FALSE(escape_level({1, 1, 1}, 200).has_value());
  CHECK_FALSE(escape_level({0, 0, -1}, 200).has_value());
  const auto out = escape_level(initial_condition(ModelParams(Discrete{1, 2}), 10.0), 50);
  REQUIRE(out.has_value());
  CHECK(*out <= 3);
  CHECK(escape_level({NAN, 0, 0}, 5) == 0);

  // Monotone in max_level, and never certifies a bounded orbit.
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> ue(-3.0, 5.0);
  for (int i = 0; i < 500; ++i) {
    const TracePoint pt = initial_condition(ModelParams(Discrete{1, 2}), ue(rng));
    const auto a = escape_level(pt, 10);
    const auto b = escape_level(pt, 40);
    if (a)
      CHECK(b == a);
    if (b) {
      // After the certificate the half-traces grow without bound.
      const double big = orbit_half_trace(pt, *b + 12);
      CHECK((std::abs(big) > 1e6 || !std::isfinite(big)));
    }
  }
}

TEST_CASE("period-6 orbit of (0,0,-1)")
{
  TracePoint pt{0, 0, -1};
  const TracePoint start = pt;
  for (int i = 1; i <= 6; ++i) {
    pt = trace_map(pt);
    if (i < 6)
      CHECK_FALSE(pt == start);
  }
  CHECK(pt == start);
}

TEST_CASE("orbit half-traces")
{
  const TracePoint pt{0.3, -0.2, 0.7};
  CHECK(orbit_half_trace(pt, -1) == 0.7);
  CHECK(orbit_half_trace(pt, 0) == -0.2);
  CHECK(orbit_half_trace(pt, 1) == 0.3);
  CHECK(orbit_half_trace(pt, 2) == doctest::Approx(2 * 0.3 * -0.2 - 0.7));
  CHECK_THROWS(orbit_half_trace(pt, -2));

  // The precision-generic evaluator agrees with the double-precision orbit.
  using Mp = boost::multiprecision::cpp_bin_float_50;
  for (double E : {-3.0, 0.0, 2.5, 40.0}) {
    const double lambda = 4.0;
    const TracePoint ic = initial_condition(ModelParams(Continuum{lambda}), E);
    for (int k = -1; k <= 8; ++k) {
      const double d = orbit_half_trace(ic, k);
      const double mp = static_cast<double>(detail::continuum_orbit_half_trace<Mp>(Mp(lambda), Mp(E), k));
      CHECK(mp == doctest::Approx(d).epsilon(1e-9));
    }
  }
}

TEST_CASE("torus factor")
{
  const TorusPoint o = torus_map(TorusPoint(0, 0));
  CHECK(o.theta() == 0.0);
  CHECK(o.phi() == 0.0);
  const TorusPoint a = torus_map(TorusPoint(0.25, 0));
  CHECK(a.theta() == 0.25);
  CHECK(a.phi() == 0.25);
  const TorusPoint b = torus_map(TorusPoint(0.9, 0.3));
  CHECK(b.theta() == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(b.phi() == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(TorusPoint(-1e-18, 1.0).theta() < 1.0);

  CHECK(torus_embed(TorusPoint(0, 0)) == TracePoint{1, 1, 1});
  const TracePoint q = torus_embed(TorusPoint(0.25, 0));
  CHECK(std::abs(q.x) < 1e-15);
  CHECK(std::abs(q.y) < 1e-15);
  CHECK(q.z == 1.0);

  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const TorusPoint t(u(rng), u(rng));
    const TracePoint lhs = trace_map(torus_embed(t));
    const TracePoint rhs = torus_embed(torus_map(t));
    CHECK(std::abs(lhs.x - rhs.x) < 1e-12);
    CHECK(std::abs(lhs.y - rhs.y) < 1e-12);
    CHECK(std::abs(lhs.z - rhs.z) < 1e-12);
    CHECK(std::abs(fricke_vogt(rhs)) < 1e-12);
  }
}
