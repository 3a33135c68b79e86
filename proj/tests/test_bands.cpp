#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "tracespec/bands.hpp"
#include "tracespec/oracle.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace tracespec;
using std::numbers::pi;

TEST_CASE("band set validation and helpers")
{
  CHECK_THROWS_AS(BandSet::from_intervals({{0, 1}, {0.5, 2}}), std::invalid_argument);
  CHECK_THROWS_AS(BandSet::from_intervals({{1, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(BandSet::from_intervals({{0, 1}, {1, 2}}), std::invalid_argument);
  const auto bs = BandSet::from_intervals({{0, 1}, {2, 3}, {5, 8}});
  CHECK(bs.min() == 0);
  CHECK(bs.max() == 8);
  CHECK(bs.total_length() == 5);
  const auto c = bs.clipped({0.5, 6});
  REQUIRE(c.size() == 3);
  CHECK(c.bands()[0] == Band{0.5, 1});
  CHECK(c.bands()[2] == Band{5, 6});
  CHECK(merge_intervals({{2, 3}, {0, 1}, {1, 1.5}, {3.2, 4}}, 0.0) ==
        std::vector<Band>{{0, 1.5}, {2, 3}, {3.2, 4}});
  CHECK(merge_intervals({{2, 3}, {3.2, 4}}, 0.5) == std::vector<Band>{{2, 4}});
}

TEST_CASE("gaps")
{
  const auto g = gaps(BandSet::from_intervals({{0, 1.0 / 3}, {2.0 / 3, 1}}));
  REQUIRE(g.size() == 1);
  CHECK(g[0].lo == doctest::Approx(1.0 / 3));
  CHECK(g[0].hi == doctest::Approx(2.0 / 3));
  CHECK(g[0].left_band == 0);
  CHECK(g[0].right_band == 1);
  CHECK(gaps(BandSet::from_intervals({{0, 1}})).empty());
  CHECK_THROWS(gaps(BandSet::from_intervals({})));
  CHECK(gaps(compute_bands(ModelParams(Discrete{1, 2}), 8)).size() == 33);
}

TEST_CASE("thickness")
{
  CHECK(thickness(BandSet::from_intervals({{0, 1.0 / 3}, {2.0 / 3, 1}})).tau == doctest::Approx(1.0));
  CHECK(thickness(BandSet::from_intervals({{0, 0.4}, {0.6, 1}})).tau == doctest::Approx(2.0));
  CHECK(std::isinf(thickness(BandSet::from_intervals({{0, 1}})).tau));
  for (int n = 1; n <= 10; ++n)
    CHECK(thickness(middle_thirds(n)).tau == doctest::Approx(1.0).epsilon(1e-9));

  // Hand-computed example with a bridge passing a smaller gap:
  // bands [0,1] [1.5,2] [4,5]: gaps 0.5 and 2.  Gap 0.5: left 1, right 0.5 (to
  // the larger gap); gap 2: left runs to the set start (2), right 1.
  const auto rep = thickness(BandSet::from_intervals({{0, 1}, {1.5, 2}, {4, 5}}));
  REQUIRE(rep.ratios.size() == 2);
  CHECK(rep.ratios[0].left_bridge == doctest::Approx(1.0));
  CHECK(rep.ratios[0].right_bridge == doctest::Approx(0.5));
  CHECK(rep.ratios[1].left_bridge == doctest::Approx(2.0));
  CHECK(rep.ratios[1].right_bridge == doctest::Approx(1.0));
  CHECK(rep.tau == doctest::Approx(0.5));

  // Scale invariance on random sets.
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Band> b;
    double x = 0;
    const int n = 2 + trial % 12;
    for (int i = 0; i < n; ++i) {
      const double len = u(rng);
      b.push_back({x, x + len});
      x += len + u(rng);
    }
    const auto base = BandSet::from_intervals(b);
    const double a = 3.7, shift = -12.25;
    std::vector<Band> scaled;
    for (const Band& e : b)
      scaled.push_back({a * e.lo + shift, a * e.hi + shift});
    CHECK(thickness(BandSet::from_intervals(scaled)).tau ==
          doctest::Approx(thickness(base).tau).epsilon(1e-12));
    // Brute-force bridges: scan outward for a gap at least as long.
    const auto rep2 = thickness(base);
    const auto g = gaps(base);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double left = g[i].lo - base.min();
      for (long j = static_cast<long>(i) - 1; j >= 0; --j)
        if (g[j].length() >= g[i].length()) {
          left = g[i].lo - g[j].hi;
          break;
        }
      double right = base.max() - g[i].hi;
      for (std::size_t j = i + 1; j < g.size(); ++j)
        if (g[j].length() >= g[i].length()) {
          right = g[j].lo - g[i].hi;
          break;
        }
      CHECK(rep2.ratios[i].left_bridge == doctest::Approx(left));
      CHECK(rep2.ratios[i].right_bridge == doctest::Approx(right));
    }
  }
}

TEST_CASE("local thickness")
{
  const auto mt = middle_thirds(8);
  const auto whole = local_thickness(mt, {mt.min(), mt.max()});
  CHECK(whole.tau == doctest::Approx(thickness(mt).tau));
  CHECK_FALSE(whole.truncated);
  const auto left = local_thickness(mt, {0, 1.0 / 3});
  CHECK(left.tau == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_FALSE(left.truncated);
  // A window cutting through a band flags the bridge touching the cut.
  const auto cut = local_thickness(mt, {0, 0.3});
  CHECK(cut.truncated);
  CHECK_THROWS(local_thickness(mt, {0.4, 0.5}));

  const auto bw = bottom_window(mt, 0.2);
  REQUIRE(bw.has_value());
  CHECK(bw->lo == 0.0);
  CHECK(bw->hi == doctest::Approx(1.0 / 9));
  const auto tw = top_window(mt, 0.2);
  REQUIRE(tw.has_value());
  CHECK(tw->hi == doctest::Approx(1.0));
  CHECK(tw->lo == doctest::Approx(8.0 / 9));
  CHECK_FALSE(local_thickness(mt, *bw).truncated);
}

TEST_CASE("box dimension")
{
  std::vector<BandSet> mt;
  for (int n = 4; n <= 12; ++n)
    mt.push_back(middle_thirds(n));
  const auto d = box_dimension(mt, {0, 1});
  CHECK(d.value == doctest::Approx(std::log(2.0) / std::log(3.0)).epsilon(0.02 / 0.63));
  CHECK_FALSE(d.dyadic_fallback);
  CHECK(d.levels_used == 9);

  std::vector<BandSet> one(3, BandSet::from_intervals({{0, 1}}));
  const auto d1 = box_dimension(one, {0, 1});
  CHECK(d1.value == doctest::Approx(1.0).epsilon(0.01));
  CHECK(d1.dyadic_fallback);

  std::vector<BandSet> pts(3, BandSet::from_intervals({{0.1, 0.1}, {0.35, 0.35}, {0.7, 0.7}}));
  const auto d0 = box_dimension(pts, {0, 1});
  CHECK(d0.value <= 0.05);
  CHECK(d0.degenerate == false);

  CHECK_THROWS(box_dimension({mt[0], mt[1]}, {0, 1}));

  // Window inclusion: estimates on a sub-window stay within estimator noise.
  const auto sub = box_dimension(mt, {0, 1.0 / 3});
  CHECK(std::abs(sub.value - d.value) <= 0.03);
}

TEST_CASE("discrete bands")
{
  const auto free10 = compute_bands(ModelParams(Discrete{1, 0}), 10);
  REQUIRE(free10.size() == 1);
  CHECK(free10.merged());
  CHECK(std::abs(free10.min() + 2.0) < 1e-6);
  CHECK(std::abs(free10.max() - 2.0) < 1e-6);

  for (int k = 6; k <= 10; ++k) {
    const auto bs = compute_bands(ModelParams(Discrete{1, 2}), k);
    CHECK(bs.size() == oracle::fibonacci_number(k));
    CHECK_FALSE(bs.merged());
    for (const Band& b : bs.bands()) {
      CHECK(b.lo >= -4.0);
      CHECK(b.hi <= 4.0);
    }
  }

  // Extremal edges are (anti)periodic eigenvalues.
  const auto bs8 = compute_bands(ModelParams(Discrete{2, 1}), 8);
  const auto per = oracle::periodic_spectrum({2, 1}, 8, oracle::Phase::periodic).eigenvalues;
  const auto anti = oracle::periodic_spectrum({2, 1}, 8, oracle::Phase::antiperiodic).eigenvalues;
  CHECK(bs8.min() == doctest::Approx(std::min(per.front(), anti.front())).epsilon(1e-10));
  CHECK(bs8.max() == doctest::Approx(std::max(per.back(), anti.back())).epsilon(1e-10));

  // Strict contraction along the hierarchy.
  for (auto d : {Discrete{1, 1}, Discrete{1, 2}, Discrete{2, 1}}) {
    for (int k = 2; k <= 9; ++k) {
      auto longest = [](const BandSet& s) {
        double m = 0;
        for (const Band& b : s.bands())
          m = std::max(m, b.length());
        return m;
      };
      CHECK(longest(compute_bands(ModelParams(d), k + 3)) < longest(compute_bands(ModelParams(d), k)));
    }
  }

  auto levels = compute_band_levels(ModelParams(Discrete{1, 2}), 6, 8);
  REQUIRE(levels.size() == 3);
  CHECK(covering_check(levels[0], levels[1], levels[2]).ok);
  const auto free_levels = compute_band_levels(ModelParams(Discrete{1, 0}), 4, 6);
  CHECK(covering_check(free_levels[0], free_levels[1], free_levels[2]).ok);
  const auto shifted = levels[2].shifted(0.05);
  const auto bad = covering_check(levels[0], levels[1], shifted);
  CHECK_FALSE(bad.ok);
  CHECK_FALSE(bad.violations.empty());
  CHECK_THROWS(covering_check(levels[0], levels[2], levels[1]));
  const auto other = compute_bands(ModelParams(Discrete{1, 3}), 8);
  CHECK_THROWS(covering_check(levels[0], levels[1], other));
}

TEST_CASE("continuum bands")
{
  const double lambda = 12 * pi * pi;
  BandOptions opt;
  opt.e_min = 0;
  opt.e_max = 20 * pi * pi;
  const auto bs = compute_bands(ModelParams(Continuum{lambda}), 6, opt);
  const double target = 16 * pi * pi;
  bool hit = false;
  for (const Band& b : bs.bands())
    hit = hit || (b.lo <= target + 1e-8 && b.hi >= target - 1e-8);
  CHECK(hit);

  // Edges are where |x_k| = 1 (double-precision oracle away from the barrier regime).
  const auto lv = compute_band_levels(ModelParams(Continuum{2.0}), 4, 7, {0.0, 60.0});
  REQUIRE(lv.size() == 4);
  for (const BandSet& s : lv) {
    for (const Band& b : s.bands()) {
      if (b.lo <= 0.0 || b.hi >= 60.0)
        continue;
      const double x_lo = oracle::continuum_monodromy(2.0, b.lo, s.level()).half_trace();
      const double x_hi = oracle::continuum_monodromy(2.0, b.hi, s.level()).half_trace();
      CHECK(std::abs(std::abs(x_lo) - 1.0) < 1e-6);
      CHECK(std::abs(std::abs(x_hi) - 1.0) < 1e-6);
    }
  }
  CHECK(covering_check(lv[0], lv[1], lv[2]).ok);
  CHECK(covering_check(lv[1], lv[2], lv[3]).ok);

  // Band count in the free-like high-energy region follows the IDS.
  const auto high = compute_bands(ModelParams(Continuum{1.0}), 5, {400.0, 900.0});
  const double expect = 8.0 * (std::sqrt(900.0) - std::sqrt(400.0)) / pi;
  CHECK(std::abs(static_cast<double>(high.size()) - expect) <= 3.0);
}

TEST_CASE("continuum bottom levels")
{
  for (double lambda : {16.0, 100.0}) {
    const auto bl = continuum_bottom_levels(lambda, 4, 6);
    REQUIRE(bl.levels.size() == 3);
    REQUIRE(bl.covers.size() == 3);
    for (int i = 0; i < 3; ++i) {
      const double e0 = bl.origin + bl.covers[i].min();
      CHECK(e0 >= 0.0);
      CHECK(e0 <= oracle::ground_state_rayleigh(lambda));
      const double expect = std::min(oracle::ground_state_estimate(lambda, 4 + i),
                                     oracle::ground_state_estimate(lambda, 5 + i));
      CHECK(std::abs(e0 - expect) < 1e-9);
    }
    // Covers are nested: each lies in the previous one.
    for (int i = 0; i + 1 < 3; ++i)
      for (const Band& b : bl.covers[i + 1].bands()) {
        bool inside = false;
        for (const Band& c : bl.covers[i].bands())
          inside = inside || (c.lo <= b.lo && b.hi <= c.hi);
        CHECK(inside);
      }
  }
}

TEST_CASE("stable extreme windows")
{
  const auto a = compute_bands(ModelParams(Discrete{1, 2}), 8);
  const auto b = compute_bands(ModelParams(Discrete{1, 2}), 9);
  const auto w = stable_extreme_window(a, b, Extreme::bottom);
  REQUIRE(w.has_value());
  CHECK(w->window.lo == a.min());
  CHECK(w->tau == doctest::Approx(std::min(w->tau_k, w->tau_k1)));
  CHECK(std::max(w->tau_k, w->tau_k1) / std::min(w->tau_k, w->tau_k1) <= 1.5);
}

TEST_CASE("band csv")
{
  std::ostringstream os;
  write_bands_csv(os, {BandSet::from_intervals({{0, 0.1}, {0.5, 1}}, 3)});
  CHECK(os.str() == "level,band_index,lo,hi\n3,0,0,0.10000000000000001\n3,1,0.5,1\n");
}
