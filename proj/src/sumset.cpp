#include "tracespec/sumset.hpp"

#include "tracespec/oracle.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace tracespec {

// ---------------------------------------------------------------- intervals

IntervalUnion::IntervalUnion(std::vector<Band> intervals)
{
  for (const Band& b : intervals)
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || b.lo > b.hi)
      throw std::invalid_argument("IntervalUnion: intervals must be finite with lo <= hi");
  std::sort(intervals.begin(), intervals.end(),
            [](const Band& a, const Band& b) { return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi); });
  // Endpoints that agree up to a few rounding steps count as touching.
  for (const Band& b : intervals) {
    if (!parts_.empty()) {
      Band& last = parts_.back();
      const double slack =
          4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(last.hi), std::abs(b.lo));
      if (b.lo <= last.hi + slack) {
        last.hi = std::max(last.hi, b.hi);
        continue;
      }
    }
    parts_.push_back(b);
  }
}

IntervalUnion IntervalUnion::from_offsets(const BandSet& bs)
{
  return IntervalUnion(bs.bands());
}

double IntervalUnion::min() const
{
  if (parts_.empty())
    throw std::logic_error("IntervalUnion::min of empty union");
  return parts_.front().lo;
}

double IntervalUnion::max() const
{
  if (parts_.empty())
    throw std::logic_error("IntervalUnion::max of empty union");
  return parts_.back().hi;
}

double IntervalUnion::measure() const
{
  double s = 0.0;
  for (const Band& b : parts_)
    s += b.length();
  return s;
}

double IntervalUnion::largest_gap() const
{
  double g = 0.0;
  for (std::size_t i = 1; i < parts_.size(); ++i)
    g = std::max(g, parts_[i].lo - parts_[i - 1].hi);
  return g;
}

bool IntervalUnion::covers(double lo, double hi, double slack) const
{
  for (const Band& b : parts_)
    if (b.lo - slack <= lo && hi <= b.hi + slack)
      return true;
  return false;
}

IntervalUnion IntervalUnion::clipped(const Window& w) const
{
  std::vector<Band> out;
  for (const Band& b : parts_) {
    const double lo = std::max(b.lo, w.lo), hi = std::min(b.hi, w.hi);
    if (lo <= hi)
      out.push_back({lo, hi});
  }
  return IntervalUnion(std::move(out));
}

std::optional<Band> IntervalUnion::component_at(double x) const
{
  for (const Band& b : parts_)
    if (b.lo <= x && x <= b.hi)
      return b;
  return std::nullopt;
}

IntervalUnion minkowski_sum(const IntervalUnion& a, const IntervalUnion& b)
{
  if (a.empty() || b.empty())
    throw std::invalid_argument("minkowski_sum: both operands must be nonempty");
  std::vector<Band> sums;
  sums.reserve(a.size() * b.size());
  for (const Band& x : a.intervals())
    for (const Band& y : b.intervals())
      sums.push_back({x.lo + y.lo, x.hi + y.hi});
  return IntervalUnion(std::move(sums));
}

bool gap_lemma_certificate(const ThicknessReport& a_report, const ThicknessReport& b_report,
                           const IntervalUnion& a, const IntervalUnion& b)
{
  if (a.empty() || b.empty())
    return false;
  const double product = a_report.tau * b_report.tau;
  if (!(product > 1.0))
    return false;
  return a.max() - a.min() >= b.largest_gap() && b.max() - b.min() >= a.largest_gap();
}

double dimension_sum_bound(const DimensionEstimate& d_box_a, const DimensionEstimate& d_haus_b)
{
  return std::min(d_box_a.value + d_haus_b.value, 1.0);
}

std::string to_string(Verdict v)
{
  switch (v) {
  case Verdict::mixed:
    return "mixed";
  case Verdict::interval_only:
    return "interval-only";
  case Verdict::cantor_only:
    return "cantor-only";
  case Verdict::undetermined:
    break;
  }
  return "undetermined";
}

namespace {

nlohmann::json model_json(const ModelParams& m)
{
  if (m.is_discrete())
    return {{"kind", "discrete"}, {"p", m.discrete().p}, {"q", m.discrete().q}};
  return {{"kind", "continuum"}, {"lambda", m.continuum().lambda}};
}

nlohmann::json finite_or_null(double x)
{
  return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
}

Verdict verdict_of(bool interval, bool cantor)
{
  if (interval && cantor)
    return Verdict::mixed;
  if (interval)
    return Verdict::interval_only;
  if (cantor)
    return Verdict::cantor_only;
  return Verdict::undetermined;
}

std::string fmt(double x)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

} // namespace

nlohmann::json RegimeReport::to_json() const
{
  nlohmann::json j;
  j["models"] = {model_json(m1), model_json(m2)};
  j["level"] = level;
  j["verdict"] = to_string(verdict);
  j["stable"] = stable;
  if (interval)
    j["interval_evidence"] = {{"window", {interval->window.lo, interval->window.hi}},
                              {"stable_levels", interval->stable_levels},
                              {"tau", {finite_or_null(interval->tau_a), finite_or_null(interval->tau_b)}},
                              {"certified", interval->certified}};
  else
    j["interval_evidence"] = nullptr;
  if (cantor)
    j["cantor_evidence"] = {{"window", {cantor->window.lo, cantor->window.hi}},
                            {"dimensions", {cantor->dim_a, cantor->dim_b}},
                            {"bound", cantor->bound},
                            {"gaps_persist", cantor->gaps_persist}};
  else
    j["cantor_evidence"] = nullptr;
  j["notes"] = notes;
  return j;
}

// ---------------------------------------------------------------- discrete classification

namespace {

// Window at an extreme: the smallest stable thickness window if there is one,
// else the quarter of the spectrum next to the extreme.
struct ExtremeWindow
{
  Window window;
  double width = 0.0;
  bool stable = false;
};

ExtremeWindow extreme_window(const BandSet& level_k, const BandSet& level_k1, Extreme side)
{
  if (auto sw = stable_extreme_window(level_k, level_k1, side))
    return {sw->window, sw->width, true};
  const double w = 0.25 * (level_k.max() - level_k.min());
  const auto win = side == Extreme::bottom ? bottom_window(level_k, w) : top_window(level_k, w);
  if (win)
    return {*win, w, false};
  return {side == Extreme::bottom ? Window{level_k.min(), level_k.min() + w}
                                  : Window{level_k.max() - w, level_k.max()},
          w, false};
}

// Window of the same width rule applied to another level.
Window window_at(const BandSet& level, Extreme side, const ExtremeWindow& ref)
{
  const auto win = side == Extreme::bottom ? bottom_window(level, ref.width) : top_window(level, ref.width);
  if (win && ref.stable)
    return *win;
  return side == Extreme::bottom ? Window{level.min(), std::max(ref.window.hi, level.min())}
                                 : Window{std::min(ref.window.lo, level.max()), level.max()};
}

struct Sides
{
  Extreme small;
  Extreme large;
  double v_min;
  double v_max;
};

Sides sides_of(const ModelParams& m, const BandSet& level)
{
  const double v_min = invariant_of_energy(m, level.min());
  const double v_max = invariant_of_energy(m, level.max());
  const bool bottom_small = std::abs(v_min) <= std::abs(v_max);
  return {bottom_small ? Extreme::bottom : Extreme::top, bottom_small ? Extreme::top : Extreme::bottom,
          v_min, v_max};
}

RegimeReport classify_at(const ModelParams& m1, const ModelParams& m2, int k, const RegimeOptions& opt)
{
  RegimeReport r{m1, m2, k, std::nullopt, std::nullopt, Verdict::undetermined, true, {}};
  const std::array<ModelParams, 2> models{m1, m2};
  std::array<std::vector<BandSet>, 2> levels;
  for (int i = 0; i < 2; ++i)
    levels[i] = compute_band_levels(models[i], k, k + 2);
  std::array<Sides, 2> sides{sides_of(m1, levels[0][0]), sides_of(m2, levels[1][0])};

  std::vector<IntervalUnion> sums;
  for (int j = 0; j < 3; ++j)
    sums.push_back(minkowski_sum(IntervalUnion(levels[0][j].bands()), IntervalUnion(levels[1][j].bands())));

  // Interval evidence near the small-|V| extremes.
  {
    std::array<ExtremeWindow, 2> ew;
    for (int i = 0; i < 2; ++i)
      ew[i] = extreme_window(levels[i][0], levels[i][1], sides[i].small);
    bool certified = true;
    double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
    std::array<double, 2> tau{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
    for (int j = 0; j < 2; ++j) {
      std::array<IntervalUnion, 2> local;
      std::array<ThicknessReport, 2> th;
      for (int i = 0; i < 2; ++i) {
        const Window w = j == 0 ? ew[i].window : window_at(levels[i][j], sides[i].small, ew[i]);
        local[i] = IntervalUnion(levels[i][j].clipped(w).bands());
        th[i] = local[i].empty() ? ThicknessReport{} : local_thickness(levels[i][j], w);
        tau[i] = std::min(tau[i], th[i].tau);
      }
      if (local[0].empty() || local[1].empty() || !gap_lemma_certificate(th[0], th[1], local[0], local[1])) {
        certified = false;
        r.notes.push_back("interval: no Gap Lemma certificate at level " + std::to_string(k + j) +
                          " (tau " + fmt(th[0].tau) + ", " + fmt(th[1].tau) + ")");
        break;
      }
      lo = std::max(lo, local[0].min() + local[1].min());
      hi = std::min(hi, local[0].max() + local[1].max());
    }
    if (certified) {
      int stable = 0;
      if (hi - lo > opt.coverage_tol)
        while (stable < 3 && sums[static_cast<std::size_t>(stable)].covers(lo, hi, opt.coverage_tol))
          ++stable;
      if (stable == 3)
        r.interval = IntervalEvidence{{lo, hi}, stable, tau[0], tau[1], true};
      else
        r.notes.push_back("interval: certified window not covered at all three levels");
    }
  }

  // Cantor evidence near the large-|V| extremes.
  if (sides[0].large != sides[1].large) {
    r.notes.push_back("cantor: large-V extremes lie on opposite sides");
  } else {
    const Extreme side = sides[0].large;
    std::array<Window, 2> win;
    std::array<DimensionEstimate, 2> dim;
    bool gaps_persist = true;
    for (int i = 0; i < 2; ++i) {
      win[i] = extreme_window(levels[i][0], levels[i][1], side).window;
      dim[i] = box_dimension(levels[i], win[i]);
      for (const BandSet& bs : levels[i])
        gaps_persist = gaps_persist && bs.clipped(win[i]).size() >= 2;
    }
    // Near the extreme of the sum only the two local pieces contribute.
    const double reach = std::min(win[0].length(), win[1].length());
    const Window sum_win = side == Extreme::bottom
                               ? Window{sums[0].min(), sums[0].min() + reach}
                               : Window{sums[0].max() - reach, sums[0].max()};
    for (const IntervalUnion& s : sums)
      gaps_persist = gaps_persist && s.clipped(sum_win).size() >= 2;
    const double bound = dimension_sum_bound(dim[0], dim[1]);
    if (bound < opt.cantor_bound && gaps_persist && !dim[0].degenerate && !dim[1].degenerate)
      r.cantor = CantorEvidence{sum_win, dim[0].value, dim[1].value, bound, true};
    else
      r.notes.push_back("cantor: dimension bound " + fmt(bound) + (gaps_persist ? "" : ", gaps close"));
  }
  r.verdict = verdict_of(r.interval.has_value(), r.cantor.has_value());
  return r;
}

} // namespace

RegimeReport classify_pair(const ModelParams& m1, const ModelParams& m2, int k, const RegimeOptions& opt)
{
  if (!m1.is_discrete() || !m2.is_discrete())
    throw std::invalid_argument("classify_pair: discrete models only (use continuum_mixed_check)");
  RegimeReport r = classify_at(m1, m2, k, opt);
  if (opt.check_next_level) {
    const RegimeReport next = classify_at(m1, m2, k + 1, opt);
    if (next.verdict != r.verdict) {
      r.stable = false;
      r.notes.push_back("verdict at level " + std::to_string(k + 1) + " is " + to_string(next.verdict));
      r.verdict = Verdict::undetermined;
    }
  }
  return r;
}

// ---------------------------------------------------------------- scanner

void validate(const ScanGrid& g)
{
  if (g.p_steps < 1 || g.q_steps < 1)
    throw std::invalid_argument("scan grid: step counts must be >= 1");
  if (!(g.p_min <= g.p_max) || !(g.q_min <= g.q_max))
    throw std::invalid_argument("scan grid: ranges must satisfy min <= max");
  if (g.p_min <= 0.0 && g.p_max >= 0.0)
    throw std::invalid_argument("scan grid: the p range must exclude 0");
  if (g.k < 2 || oracle::fibonacci_number(g.k + 2) > oracle::kMaxPeriod)
    throw std::invalid_argument("scan grid: level k out of range");
}

namespace {

double grid_value(double lo, double hi, int steps, int i)
{
  if (steps == 1)
    return lo;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
}

ScanPoint scan_point(double p, double q, int k)
{
  ScanPoint pt;
  pt.p = p;
  pt.q = q;
  const ModelParams m(Discrete{p, q});
  const auto levels = compute_band_levels(m, k, k + 2);
  const Sides s = sides_of(m, levels[0]);
  pt.v_min = s.v_min;
  pt.v_max = s.v_max;
  if (auto sw = stable_extreme_window(levels[0], levels[1], s.small))
    pt.tau_local = sw->tau;
  if (levels[0].size() >= 2) {
    const Window w = extreme_window(levels[0], levels[1], s.large).window;
    const auto d = box_dimension(levels, w);
    pt.dim_local = d.degenerate ? 1.0 : d.value;
  }
  pt.margin = std::min(pt.tau_local - 1.0, 0.5 - pt.dim_local);
  pt.candidate = pt.tau_local > 1.0 && pt.dim_local < 0.5;
  return pt;
}

} // namespace

std::vector<ScanPoint> scan_grid(const ScanGrid& grid)
{
  validate(grid);
  const std::size_t n = static_cast<std::size_t>(grid.p_steps) * static_cast<std::size_t>(grid.q_steps);
  std::vector<ScanPoint> out(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t idx = next++; idx < n; idx = next++) {
      const int i = static_cast<int>(idx / static_cast<std::size_t>(grid.q_steps));
      const int j = static_cast<int>(idx % static_cast<std::size_t>(grid.q_steps));
      const double p = grid_value(grid.p_min, grid.p_max, grid.p_steps, i);
      const double q = grid_value(grid.q_min, grid.q_max, grid.q_steps, j);
      try {
        out[idx] = scan_point(p, q, grid.k);
      } catch (const std::exception& e) {
        out[idx] = ScanPoint{};
        out[idx].p = p;
        out[idx].q = q;
        out[idx].error = e.what();
      }
    }
  };
  unsigned threads = grid.threads > 0 ? static_cast<unsigned>(grid.threads) : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t)
    pool.emplace_back(worker);
  worker();
  for (auto& t : pool)
    t.join();
  return out;
}

std::vector<ScanPoint> candidates(const std::vector<ScanPoint>& scan)
{
  std::vector<ScanPoint> out;
  for (const ScanPoint& pt : scan)
    if (pt.error.empty() && pt.candidate)
      out.push_back(pt);
  std::stable_sort(out.begin(), out.end(),
                   [](const ScanPoint& a, const ScanPoint& b) { return a.margin > b.margin; });
  return out;
}

void write_scan_csv(std::ostream& os, const std::vector<ScanPoint>& scan)
{
  os << "p,q,V_min,V_max,tau_local,dim_local,candidate\n";
  char buf[256];
  for (const ScanPoint& pt : scan) {
    if (!pt.error.empty())
      continue;
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d\n", pt.p, pt.q, pt.v_min,
                  pt.v_max, pt.tau_local, pt.dim_local, pt.candidate ? 1 : 0);
    os << buf;
  }
}

// ---------------------------------------------------------------- continuum

namespace {

constexpr std::array<TracePoint, 6> kPeriodSix{{{0, 0, -1}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {-1, 0, 0}, {0, -1, 0}}};

double distance(const TracePoint& a, const TracePoint& b)
{
  return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

double orbit_distance(double lambda, double E)
{
  const TracePoint pt = initial_condition(ModelParams(Continuum{lambda}), E);
  double d = std::numeric_limits<double>::infinity();
  for (const TracePoint& q : kPeriodSix)
    d = std::min(d, distance(pt, q));
  return d;
}

double accumulation_distance(double lambda, double E)
{
  const TracePoint pt = initial_condition(ModelParams(Continuum{lambda}), E);
  return std::min(distance(pt, {1, 1, 1}), distance(pt, {-1, -1, 1}));
}

} // namespace

std::optional<HighEnergyWindow> high_energy_window(double lambda, int k, double e_min, double e_max,
                                                   const ContinuumCheckOptions& opt)
{
  if (!(lambda > 0.0) || !(e_max > e_min) || !(e_min >= 0.0))
    throw std::invalid_argument("high_energy_window: need lambda > 0 and 0 <= e_min < e_max");
  // The curve oscillates on the scale of one unit in sqrt(E).
  const double t0 = std::sqrt(e_min), t1 = std::sqrt(e_max);
  const double step = 0.01;
  double best_t = t0, best_d = std::numeric_limits<double>::infinity();
  for (double t = t0; t <= t1; t += step) {
    const double d = orbit_distance(lambda, t * t);
    if (d < best_d) {
      best_d = d;
      best_t = t;
    }
  }
  if (!std::isfinite(best_d))
    return std::nullopt;
  const auto refined = boost::math::tools::brent_find_minima(
      [&](double t) { return orbit_distance(lambda, t * t); }, std::max(t0, best_t - step),
      std::min(t1, best_t + step), 52);

  HighEnergyWindow hw;
  hw.energy = refined.first * refined.first;
  hw.distance = refined.second;
  hw.near = hw.distance < opt.delta;

  // A quarter radian of sqrt(E) on either side, resolved into at least six
  // band periods (one period is about 4 pi sqrt(E) / F_level).
  const double h = 0.5 * std::sqrt(hw.energy);
  int level = k;
  while (static_cast<double>(oracle::fibonacci_number(level)) < 6.0 * 4.0 * M_PI * std::sqrt(hw.energy) / (2.0 * h))
    ++level;
  hw.level = level;
  hw.window = {hw.energy - h, hw.energy + h};
  const Window offsets{-h, h};
  for (double e = -h; e <= h; e += h / 64.0)
    if (accumulation_distance(lambda, hw.energy + e) < opt.accum_exclusion)
      hw.near = false;

  ThicknessReport worst;
  for (int lv = level; lv <= level + 1; ++lv) {
    const BandSet bs = continuum_bands_in_window(lambda, lv, hw.energy, offsets, {}, 1e-12 * h);
    if (bs.empty())
      return std::nullopt;
    const ThicknessReport th = local_thickness(bs, offsets);
    if (lv == level || th.tau < worst.tau)
      worst = th;
  }
  hw.thickness = worst;
  return hw;
}

RegimeReport continuum_mixed_check(double l1, double l2, int k, double e_max, const ContinuumCheckOptions& opt)
{
  if (!(l1 > 0.0) || !(l2 > 0.0))
    throw std::invalid_argument("continuum_mixed_check: couplings must be positive");
  RegimeReport r{ModelParams(Continuum{l1}), ModelParams(Continuum{l2}), k, std::nullopt, std::nullopt,
                 Verdict::undetermined, true, {}};

  // Cantor evidence at the bottom of both spectra.
  {
    const BottomLevels b1 = continuum_bottom_levels(l1, k, k + 2);
    const BottomLevels b2 = continuum_bottom_levels(l2, k, k + 2);
    const DimensionEstimate d1 = box_dimension(b1.covers, b1.window);
    const DimensionEstimate d2 = box_dimension(b2.covers, b2.window);
    bool gaps_persist = true;
    for (std::size_t j = 0; j < b1.covers.size(); ++j) {
      gaps_persist = gaps_persist && b1.covers[j].size() >= 2 && b2.covers[j].size() >= 2;
      if (gaps_persist)
        gaps_persist = minkowski_sum(IntervalUnion::from_offsets(b1.covers[j]),
                                     IntervalUnion::from_offsets(b2.covers[j]))
                           .size() >= 2;
    }
    const double bound = dimension_sum_bound(d1, d2);
    const double base = b1.origin + b2.origin;
    const Window win{base + b1.window.lo + b2.window.lo, base + b1.window.hi + b2.window.hi};
    if (bound < opt.cantor_bound && gaps_persist && !d1.degenerate && !d2.degenerate)
      r.cantor = CantorEvidence{win, d1.value, d2.value, bound, true};
    else
      r.notes.push_back("cantor: bottom dimension bound " + fmt(bound) + (gaps_persist ? "" : ", gaps close"));
  }

  // Interval evidence near the period-6 orbit at high energy.
  {
    std::array<std::optional<HighEnergyWindow>, 2> hw;
    const std::array<double, 2> lam{l1, l2};
    bool ok = true;
    for (int i = 0; i < 2; ++i) {
      const double e_min = std::min(10.0 * std::max(lam[i], 1.0), 0.5 * e_max);
      hw[i] = high_energy_window(lam[i], k, e_min, e_max, opt);
      if (!hw[i] || !hw[i]->near) {
        ok = false;
        r.notes.push_back("interval: no window within " + fmt(opt.delta) + " of the period-6 orbit below E = " +
                          fmt(e_max) + " for lambda = " + fmt(lam[i]) +
                          (hw[i] ? " (closest " + fmt(hw[i]->distance) + ")" : ""));
      }
    }
    if (ok) {
      int stable = 0;
      double lo = -std::numeric_limits<double>::infinity(), hi = std::numeric_limits<double>::infinity();
      for (int step = 0; step <= 1; ++step) {
        std::array<BandSet, 2> bs;
        std::array<IntervalUnion, 2> local;
        for (int i = 0; i < 2; ++i) {
          const double h = 0.5 * hw[i]->window.length();
          bs[i] = continuum_bands_in_window(lam[i], hw[i]->level + step, hw[i]->energy, {-h, h}, {}, 1e-12 * h);
          local[i] = IntervalUnion::from_offsets(bs[i]);
        }
        const Window w0{-0.5 * hw[0]->window.length(), 0.5 * hw[0]->window.length()};
        const Window w1{-0.5 * hw[1]->window.length(), 0.5 * hw[1]->window.length()};
        if (!gap_lemma_certificate(local_thickness(bs[0], w0), local_thickness(bs[1], w1), local[0], local[1]))
          break;
        const double base = hw[0]->energy + hw[1]->energy;
        lo = std::max(lo, base + local[0].min() + local[1].min());
        hi = std::min(hi, base + local[0].max() + local[1].max());
        if (!minkowski_sum(local[0], local[1]).covers(local[0].min() + local[1].min(), local[0].max() + local[1].max()))
          break;
        ++stable;
      }
      if (stable == 2 && hi > lo)
        r.interval = IntervalEvidence{{lo, hi}, stable, hw[0]->thickness.tau, hw[1]->thickness.tau, true};
      else
        r.notes.push_back("interval: Gap Lemma certificate fails near the period-6 orbit");
    }
  }
  r.verdict = verdict_of(r.interval.has_value(), r.cantor.has_value());
  return r;
}

} // namespace tracespec
