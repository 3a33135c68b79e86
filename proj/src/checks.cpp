#include "tracespec/checks.hpp"

#include "tracespec/oracle.hpp"
#include "tracespec/trace_core.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace tracespec {

namespace {

double term_scale(const TracePoint& p)
{
  return 1.0 + p.x * p.x + p.y * p.y + p.z * p.z + 2.0 * std::abs(p.x * p.y * p.z);
}

double relative(double a, double b)
{
  return std::abs(a - b) / std::max(1.0, std::abs(b));
}

template <class Fn>
CheckResult timed(Fn fn)
{
  const auto start = std::chrono::steady_clock::now();
  CheckResult r = fn();
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

} // namespace

CheckResult check_trace_invariance(std::size_t points, std::uint64_t seed)
{
  return timed([&] {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
      const TracePoint p{u(rng), u(rng), u(rng)};
      const double before = fricke_vogt(p);
      for (const TracePoint& img : {trace_map(p), trace_map_inverse(p)}) {
        const double scale = std::max(term_scale(img), term_scale(p));
        worst = std::max(worst, std::abs(fricke_vogt(img) - before) / scale);
      }
    }
    CheckResult r{"trace-map invariance", worst < 1e-12, worst, 1e-12, ""};
    r.detail = std::to_string(points) + " points in [-5,5]^3";
    return r;
  });
}

CheckResult check_invariant_of_energy(std::size_t samples, std::uint64_t seed)
{
  return timed([&] {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> up(-4.0, 4.0), uq(-4.0, 4.0), ue(-6.0, 6.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
      double p = up(rng);
      if (std::abs(p) < 0.05)
        p = 0.5;
      const double q = uq(rng);
      const double e = ue(rng);
      const ModelParams m(Discrete{p, q});
      const TracePoint pt = initial_condition(m, e);
      worst = std::max(worst, std::abs(invariant_of_energy(m, e) - fricke_vogt(pt)) / term_scale(pt));
      worst = std::max(worst, relative(invariant_of_energy(ModelParams(Discrete{1.0, q}), e), q * q / 4.0));
      const double free_form = (p * p - 1.0) * (p * p - 1.0) / (4.0 * p * p);
      worst = std::max(worst, relative(invariant_of_energy(ModelParams(Discrete{p, 0.0}), e), free_form));
    }
    CheckResult r{"invariant of energy", worst < 1e-12, worst, 1e-12, ""};
    r.detail = std::to_string(samples) + " random (p,q,E)";
    return r;
  });
}

CheckResult check_oracle_equivalence(std::size_t samples, int k_max, std::uint64_t seed)
{
  return timed([&] {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    std::size_t escaped = 0;
    bool consistent = true;
    for (std::size_t trial = 0; trial < samples; ++trial) {
      ModelParams model = ModelParams(Discrete{1.0, 0.0});
      double e;
      if (trial % 2 == 0) {
        double p = 0.3 + 2.7 * u(rng);
        if (u(rng) < 0.5)
          p = -p;
        const double q = -3.0 + 6.0 * u(rng);
        model = ModelParams(Discrete{p, q});
        const double r = 2.0 * std::abs(p) + std::abs(q);
        e = -r + 2.0 * r * u(rng);
      } else {
        model = ModelParams(Continuum{0.2 + 10.0 * u(rng)});
        e = -2.0 + 60.0 * u(rng);
      }
      const TracePoint ic = initial_condition(model, e);
      std::vector<double> xs;
      try {
        xs = oracle::half_trace_sequence(model, e, k_max);
      } catch (const std::overflow_error&) {
        ++escaped;
        consistent = consistent && escape_level(ic, k_max).has_value();
        continue;
      }
      for (int k = 1; k <= k_max; ++k)
        worst = std::max(worst, relative(orbit_half_trace(ic, k), xs[k - 1]));
    }
    CheckResult r{"oracle equivalence", consistent && worst < 1e-9, worst, 1e-9, ""};
    r.detail = std::to_string(samples) + " (model,E) through k=" + std::to_string(k_max) + ", " +
               std::to_string(escaped) + " overflowed after escape";
    return r;
  });
}

CheckResult check_semiconjugacy(std::size_t samples, std::uint64_t seed)
{
  return timed([&] {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
      const TorusPoint t(u(rng), u(rng));
      const TracePoint lhs = trace_map(torus_embed(t));
      const TracePoint rhs = torus_embed(torus_map(t));
      worst = std::max({worst, std::abs(lhs.x - rhs.x), std::abs(lhs.y - rhs.y), std::abs(lhs.z - rhs.z),
                        std::abs(fricke_vogt(rhs))});
    }
    CheckResult r{"semiconjugacy", worst < 1e-12, worst, 1e-12, ""};
    r.detail = std::to_string(samples) + " torus points";
    return r;
  });
}

CheckResult check_period_six()
{
  return timed([&] {
    const TracePoint start{0.0, 0.0, -1.0};
    TracePoint pt = start;
    int period = 0;
    for (int i = 1; i <= 12 && period == 0; ++i) {
      pt = trace_map(pt);
      if (pt == start)
        period = i;
    }
    CheckResult r{"period-6 orbit", period == 6, static_cast<double>(period), 0.0, ""};
    r.detail = "first return of (0,0,-1) after " + std::to_string(period) + " steps";
    return r;
  });
}

std::vector<CheckResult> invariant_suite()
{
  return {check_trace_invariance(), check_invariant_of_energy(), check_oracle_equivalence(),
          check_semiconjugacy(), check_period_six()};
}

std::string format_check(const CheckResult& r)
{
  char buf[512];
  std::snprintf(buf, sizeof buf, "%s  %-22s measured=%.3e tol=%.1e  %s (%.2fs)", r.pass ? "PASS" : "FAIL",
                r.name.c_str(), r.measured, r.tolerance, r.detail.c_str(), r.seconds);
  return buf;
}

} // namespace tracespec
