#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tracespec/sumset.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace tracespec;
using std::numbers::pi;

namespace {

// Central Cantor construction keeping two pieces of relative length `keep`.
IntervalUnion central_cantor(int n, double keep)
{
  std::vector<Band> cur{{0.0, 1.0}};
  for (int level = 0; level < n; ++level) {
    std::vector<Band> next;
    for (const Band& b : cur) {
      const double len = b.length() * keep;
      next.push_back({b.lo, b.lo + len});
      next.push_back({b.hi - len, b.hi});
    }
    cur = std::move(next);
  }
  return IntervalUnion(cur);
}

IntervalUnion random_union(std::mt19937_64& rng, int max_parts, double gap_scale)
{
  std::uniform_int_distribution<int> count(1, max_parts);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Band> out;
  double x = 10.0 * (u(rng) - 0.5);
  const int n = count(rng);
  for (int i = 0; i < n; ++i) {
    const double len = 0.05 + u(rng);
    out.push_back({x, x + len});
    x += len + gap_scale * (0.01 + u(rng));
  }
  return IntervalUnion(out);
}

// Brute membership: x lies in A + B iff some a-interval shifted into x meets B.
bool in_sum(const IntervalUnion& a, const IntervalUnion& b, double x)
{
  for (const Band& ia : a.intervals())
    for (const Band& ib : b.intervals())
      if (x - ia.hi <= ib.hi && x - ia.lo >= ib.lo)
        return true;
  return false;
}

} // namespace

TEST_CASE("interval union normalization")
{
  const IntervalUnion u({{3, 4}, {0, 1}, {1, 2}, {3.5, 3.7}});
  REQUIRE(u.size() == 2);
  CHECK(u.intervals()[0] == Band{0, 2});
  CHECK(u.intervals()[1] == Band{3, 4});
  CHECK(u.measure() == 3);
  CHECK(u.largest_gap() == 1);
  CHECK(u.covers(0.5, 1.5));
  CHECK_FALSE(u.covers(1.5, 3.5));
  CHECK(u.component_at(3.2) == Band{3, 4});
  CHECK_FALSE(u.component_at(2.5).has_value());
  CHECK_THROWS_AS(IntervalUnion({{1, 0}}), std::invalid_argument);
}

TEST_CASE("minkowski sum examples")
{
  const auto s = minkowski_sum(IntervalUnion({{0, 1}}), IntervalUnion({{2, 3}}));
  REQUIRE(s.size() == 1);
  CHECK(s.intervals()[0] == Band{2, 4});

  const auto id = minkowski_sum(IntervalUnion({{0, 1}}), IntervalUnion({{0, 0}}));
  REQUIRE(id.size() == 1);
  CHECK(id.intervals()[0] == Band{0, 1});

  CHECK_THROWS_AS(minkowski_sum(IntervalUnion(), IntervalUnion({{0, 1}})), std::invalid_argument);

  for (int n = 0; n <= 10; ++n) {
    const auto c = IntervalUnion(middle_thirds(n).bands());
    const auto cc = minkowski_sum(c, c);
    REQUIRE(cc.size() == 1);
    CHECK(cc.min() == 0.0);
    CHECK(cc.max() == 2.0);
  }
}

TEST_CASE("minkowski sum agrees with brute membership")
{
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = random_union(rng, 6, 0.8);
    const auto b = random_union(rng, 6, 0.8);
    const auto s = minkowski_sum(a, b);
    for (int i = 0; i < 50; ++i) {
      const double x = s.min() - 0.5 + (s.max() - s.min() + 1.0) * u(rng);
      CHECK(s.covers(x, x) == in_sum(a, b, x));
    }
  }
}

TEST_CASE("minkowski sum algebra")
{
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto a = random_union(rng, 5, 1.0);
    const auto b = random_union(rng, 5, 1.0);
    const auto c = random_union(rng, 5, 1.0);
    const auto ab = minkowski_sum(a, b);
    CHECK(ab.intervals() == minkowski_sum(b, a).intervals());
    CHECK(ab.min() == a.min() + b.min());
    CHECK(ab.max() == a.max() + b.max());

    const auto left = minkowski_sum(ab, c).intervals();
    const auto right = minkowski_sum(a, minkowski_sum(b, c)).intervals();
    REQUIRE(left.size() == right.size());
    for (std::size_t i = 0; i < left.size(); ++i) {
      CHECK(left[i].lo == doctest::Approx(right[i].lo).epsilon(1e-14));
      CHECK(left[i].hi == doctest::Approx(right[i].hi).epsilon(1e-14));
    }

    // Monotone under inclusion: dropping a piece of a can only shrink the sum.
    if (a.size() > 1) {
      std::vector<Band> sub(a.intervals().begin() + 1, a.intervals().end());
      const auto smaller = minkowski_sum(IntervalUnion(sub), b);
      for (const Band& piece : smaller.intervals())
        CHECK(ab.covers(piece.lo, piece.hi));
    }
  }
}

TEST_CASE("gap lemma certificate")
{
  for (int n = 1; n <= 10; ++n) {
    const auto a = central_cantor(n, 0.4);
    const auto t = thickness(BandSet::from_intervals(a.intervals()));
    CHECK(t.tau == doctest::Approx(2.0));
    CHECK(gap_lemma_certificate(t, t, a, a));
    const auto s = minkowski_sum(a, a);
    REQUIRE(s.size() == 1);
    CHECK(s.intervals()[0].lo == 0.0);
    CHECK(s.intervals()[0].hi == 2.0);
  }

  // A small copy sitting inside the central gap of the other set.
  const auto a = central_cantor(4, 0.4);
  std::vector<Band> small;
  for (const Band& b : a.intervals())
    small.push_back({0.45 + 0.1 * b.lo, 0.45 + 0.1 * b.hi});
  const IntervalUnion b(small);
  const auto ta = thickness(BandSet::from_intervals(a.intervals()));
  const auto tb = thickness(BandSet::from_intervals(b.intervals()));
  CHECK(ta.tau * tb.tau > 1.0);
  CHECK_FALSE(gap_lemma_certificate(ta, tb, a, b));

  // Boundary case: tau * tau = 1 is not certified, although C + C = [0, 2].
  const auto c = IntervalUnion(middle_thirds(6).bands());
  const auto tc = thickness(middle_thirds(6));
  CHECK(tc.tau == doctest::Approx(1.0));
  CHECK_FALSE(gap_lemma_certificate(tc, tc, c, c));
  CHECK(minkowski_sum(c, c).size() == 1);
}

TEST_CASE("certified sums are intervals")
{
  std::mt19937_64 rng(5);
  int certified = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    const auto a = random_union(rng, 8, 0.3);
    const auto b = random_union(rng, 8, 0.3);
    const auto ta = thickness(BandSet::from_intervals(a.intervals()));
    const auto tb = thickness(BandSet::from_intervals(b.intervals()));
    if (!gap_lemma_certificate(ta, tb, a, b))
      continue;
    ++certified;
    const auto s = minkowski_sum(a, b);
    CHECK(s.covers(a.min() + b.min(), a.max() + b.max()));
  }
  CHECK(certified > 100);
}

TEST_CASE("dimension sum bound")
{
  DimensionEstimate a, b;
  a.value = 0.3;
  b.value = 0.4;
  CHECK(dimension_sum_bound(a, b) == doctest::Approx(0.7));
  a.value = b.value = 0.8;
  CHECK(dimension_sum_bound(a, b) == 1.0);

  std::vector<BandSet> levels;
  for (int n = 4; n <= 12; ++n)
    levels.push_back(middle_thirds(n));
  const auto d = box_dimension(levels, {0, 1});
  CHECK(d.value == doctest::Approx(std::log(2.0) / std::log(3.0)).epsilon(0.03));
  CHECK(dimension_sum_bound(d, d) == 1.0);
}

TEST_CASE("classify free and large-coupling pairs")
{
  const ModelParams free(Discrete{1, 0});
  const auto r = classify_pair(free, free, 8);
  CHECK(r.verdict == Verdict::interval_only);
  REQUIRE(r.interval.has_value());
  CHECK(r.interval->stable_levels == 3);
  CHECK_FALSE(r.cantor.has_value());

  const ModelParams big(Discrete{1, 20});
  const auto c = classify_pair(big, big, 8);
  CHECK(c.verdict == Verdict::cantor_only);
  REQUIRE(c.cantor.has_value());
  CHECK(c.cantor->bound < 0.95);
  CHECK(c.cantor->gaps_persist);
  CHECK(c.stable);

  CHECK_THROWS_AS(classify_pair(ModelParams(Continuum{1}), free, 8), std::invalid_argument);
}

TEST_CASE("sum cover extremes")
{
  const ModelParams m1(Discrete{-10, 25}), m2(Discrete{1, 2});
  for (int k = 6; k <= 9; ++k) {
    const auto a = compute_bands(m1, k), b = compute_bands(m2, k);
    const auto s = minkowski_sum(IntervalUnion(a.bands()), IntervalUnion(b.bands()));
    CHECK(s.min() == doctest::Approx(a.min() + b.min()).epsilon(1e-15));
    CHECK(s.max() == doctest::Approx(a.max() + b.max()).epsilon(1e-15));
  }
}

TEST_CASE("scanner")
{
  ScanGrid only_free{1, 1, 1, 0, 0, 1, 8, 1};
  const auto s = scan_grid(only_free);
  REQUIRE(s.size() == 1);
  CHECK(s[0].error.empty());
  CHECK_FALSE(s[0].candidate);
  CHECK(s[0].v_min == 0.0);

  ScanGrid bad;
  bad.p_min = -1;
  bad.p_max = 1;
  CHECK_THROWS_AS(scan_grid(bad), std::invalid_argument);
  bad = ScanGrid{};
  bad.q_steps = 0;
  CHECK_THROWS_AS(scan_grid(bad), std::invalid_argument);

  ScanGrid grid;
  grid.p_steps = 9;
  grid.q_steps = 9;
  grid.threads = 4;
  const auto scan = scan_grid(grid);
  REQUIRE(scan.size() == 81);
  const auto hits = candidates(scan);
  CHECK(hits.size() >= 1);
  for (std::size_t i = 1; i < hits.size(); ++i)
    CHECK(hits[i - 1].margin >= hits[i].margin);
  for (const ScanPoint& pt : scan) {
    if (!pt.error.empty())
      continue;
    const ModelParams m(Discrete{pt.p, pt.q});
    const auto bs = compute_bands(m, grid.k);
    CHECK(pt.v_min == doctest::Approx(invariant_of_energy(m, bs.min())).epsilon(1e-10));
    CHECK(pt.v_max == doctest::Approx(invariant_of_energy(m, bs.max())).epsilon(1e-10));
  }

  // Output does not depend on the number of workers.
  grid.threads = 1;
  std::ostringstream one, four;
  write_scan_csv(one, scan_grid(grid));
  write_scan_csv(four, scan);
  CHECK(one.str() == four.str());
  CHECK(one.str().rfind("p,q,V_min,V_max,tau_local,dim_local,candidate\n", 0) == 0);
}

TEST_CASE("scanner candidate classifies as mixed")
{
  ScanGrid grid;
  grid.p_steps = 5;
  grid.q_steps = 5;
  const auto hits = candidates(scan_grid(grid));
  REQUIRE_FALSE(hits.empty());
  const ModelParams m(Discrete{hits[0].p, hits[0].q});
  const auto r = classify_pair(m, m, grid.k);
  CHECK(r.verdict == Verdict::mixed);
  CHECK(r.stable);
  REQUIRE(r.interval.has_value());
  REQUIRE(r.cantor.has_value());
  CHECK(r.interval->certified);
  CHECK(r.cantor->bound < 0.95);

  const auto j = r.to_json();
  CHECK(j["verdict"] == "mixed");
  CHECK(j["interval_evidence"]["stable_levels"] == 3);
}

TEST_CASE("high-energy windows near the period-six orbit")
{
  const auto w = high_energy_window(1.0, 6, 10.0, 1e5);
  REQUIRE(w.has_value());
  CHECK(w->near);
  CHECK(w->distance < 0.05);
  CHECK(w->thickness.tau > 1.0);
  CHECK(w->window.contains(w->energy));

  // The closest approach for lambda = 50 stays outside the default radius.
  const auto far = high_energy_window(50.0, 6, 500.0, 1e5);
  REQUIRE(far.has_value());
  CHECK(far->distance > 0.05);
  CHECK_FALSE(far->near);
  const auto r = continuum_mixed_check(50.0, 50.0, 6, 1e5);
  CHECK_FALSE(r.interval.has_value());
  REQUIRE_FALSE(r.notes.empty());

  // Windows meeting the accumulation point (1, 1, 1) are not used.
  const double lambda = 12 * pi * pi, e = 16 * pi * pi;
  const auto acc = high_energy_window(lambda, 6, e - 1.0, e + 1.0);
  REQUIRE(acc.has_value());
  CHECK(acc->window.contains(e));
  CHECK_FALSE(acc->near);
}

TEST_CASE("continuum mixed check")
{
  const auto small = continuum_mixed_check(1.0, 1.0, 6, 1e5);
  REQUIRE(small.interval.has_value());
  CHECK(small.interval->certified);

  double previous = 2.0;
  for (double lambda : {16.0, 64.0, 256.0}) {
    const auto r = continuum_mixed_check(lambda, lambda, 6, 1e4);
    REQUIRE(r.cantor.has_value());
    CHECK(r.cantor->bound < previous);
    previous = r.cantor->bound;
  }
}
