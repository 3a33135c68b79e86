#include "tracespec/bands.hpp"

#include "tracespec/detail/continuum_eval.hpp"
#include "tracespec/detail/precision.hpp"
#include "tracespec/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace tracespec {

BandSet::BandSet(std::optional<ModelParams> model, int level, std::vector<Band> bands,
                 bool merged, double origin)
  : model_(std::move(model)), level_(level), bands_(std::move(bands)), merged_(merged),
    origin_(origin)
{
  for (std::size_t i = 0; i < bands_.size(); ++i) {
    const Band& b = bands_[i];
    if (!std::isfinite(b.lo) || !std::isfinite(b.hi) || b.lo > b.hi)
      throw std::invalid_argument("BandSet: band " + std::to_string(i) + " is not a finite closed interval");
    if (i > 0 && !(b.lo > bands_[i - 1].hi))
      throw std::invalid_argument("BandSet: bands " + std::to_string(i - 1) + " and " +
                                  std::to_string(i) + " are not separated by a gap");
  }
}

BandSet BandSet::from_intervals(std::vector<Band> bands, int level)
{
  return BandSet(std::nullopt, level, std::move(bands));
}

double BandSet::min() const
{
  if (bands_.empty())
    throw std::logic_error("BandSet::min: empty set");
  return bands_.front().lo;
}

double BandSet::max() const
{
  if (bands_.empty())
    throw std::logic_error("BandSet::max: empty set");
  return bands_.back().hi;
}

double BandSet::total_length() const
{
  double s = 0.0;
  for (const Band& b : bands_)
    s += b.length();
  return s;
}

BandSet BandSet::clipped(const Window& w) const
{
  std::vector<Band> out;
  for (const Band& b : bands_) {
    if (b.hi < w.lo || b.lo > w.hi)
      continue;
    out.push_back({std::max(b.lo, w.lo), std::min(b.hi, w.hi)});
  }
  BandSet r(model_, level_, std::move(out), merged_, origin_);
  r.clipped_low = clipped_low;
  r.clipped_high = clipped_high;
  return r;
}

BandSet BandSet::rebased(double origin) const
{
  BandSet r = shifted(origin_ - origin);
  r.origin_ = origin;
  return r;
}

BandSet BandSet::shifted(double delta) const
{
  std::vector<Band> out = bands_;
  for (Band& b : out) {
    b.lo += delta;
    b.hi += delta;
  }
  BandSet r(model_, level_, std::move(out), merged_, origin_);
  r.clipped_low = clipped_low;
  r.clipped_high = clipped_high;
  return r;
}

std::vector<Band> merge_intervals(std::vector<Band> intervals, double tol)
{
  std::sort(intervals.begin(), intervals.end(),
            [](const Band& a, const Band& b) { return a.lo < b.lo || (a.lo == b.lo && a.hi < b.hi); });
  std::vector<Band> out;
  for (const Band& b : intervals) {
    if (!out.empty() && b.lo <= out.back().hi + tol)
      out.back().hi = std::max(out.back().hi, b.hi);
    else
      out.push_back(b);
  }
  return out;
}

namespace {

// ---------------------------------------------------------------- discrete

} // namespace

std::vector<Band> discrete_band_edges(const Discrete& d, int k)
{
  const auto per = oracle::periodic_spectrum(d, k, oracle::Phase::periodic);
  const auto anti = oracle::periodic_spectrum(d, k, oracle::Phase::antiperiodic);
  std::vector<double> edges = per.eigenvalues;
  edges.insert(edges.end(), anti.eigenvalues.begin(), anti.eigenvalues.end());
  std::sort(edges.begin(), edges.end());

  std::vector<Band> raw;
  for (std::size_t j = 0; j + 1 < edges.size(); j += 2)
    raw.push_back({edges[j], edges[j + 1]});
  return raw;
}

namespace {

BandSet discrete_bands(const Discrete& d, int k, const BandOptions& opt)
{
  const std::vector<Band> raw = discrete_band_edges(d, k);

  // Labeling cross-check: the half-trace stays in [-1, 1] inside every band.
  for (const Band& b : raw) {
    if (b.length() <= 1e-12)
      continue;
    const double mid = 0.5 * (b.lo + b.hi);
    double x = oracle::jacobi_monodromy(d, mid, k).half_trace();
    // Large couplings make the double product cancel badly inside thin bands.
    if (!std::isfinite(x) || std::abs(x) > 1.0 + 1e-6)
      x = oracle::jacobi_half_trace_extended(d, mid, k);
    if (std::abs(x) > 1.0 + 1e-6) {
      std::ostringstream os;
      os.precision(17);
      os << "compute_bands: band [" << b.lo << ", " << b.hi << "] at level " << k
         << " has half-trace " << x << " at its midpoint";
      throw std::runtime_error(os.str());
    }
  }

  std::vector<Band> bands;
  bool merged = false;
  for (const Band& b : raw) {
    if (!bands.empty() && b.lo - bands.back().hi < opt.merge_tol) {
      bands.back().hi = std::max(bands.back().hi, b.hi);
      merged = true;
    } else {
      bands.push_back(b);
    }
  }
  return BandSet(ModelParams(d), k, std::move(bands), merged);
}

// --------------------------------------------------------------- continuum

class ContinuumProbe
{
public:
  ContinuumProbe(double lambda, int k, double origin)
    : lambda_(lambda), k_(k), origin_(origin),
      barriers_(static_cast<double>(oracle::fibonacci_number(std::max(k - 2, 0)))),
      cells_(static_cast<double>(oracle::fibonacci_number(k)))
  {
  }

  double origin() const { return origin_; }
  int level() const { return k_; }

  double half_trace(double offset) const
  {
    const double E = origin_ + offset;
    // Digits lost to cancellation: growth through decaying cells.
    const double loss = (barriers_ * std::sqrt(std::max(lambda_ - E, 0.0)) +
                         cells_ * std::sqrt(std::max(-E, 0.0))) /
                        std::log(10.0);
    const int digits = loss <= 3.0 ? 15 : static_cast<int>(std::ceil(22.0 + loss));
    const double x = detail::with_precision(digits, [&](auto tag) -> double {
      using Real = typename decltype(tag)::type;
      const Real e = Real(origin_) + Real(offset);
      return static_cast<double>(detail::continuum_orbit_half_trace<Real>(Real(lambda_), e, k_));
    });
    if (std::isnan(x))
      throw std::runtime_error("continuum half-trace is NaN at E = " + std::to_string(E));
    return x;
  }

  int classify(double offset) const
  {
    const double x = half_trace(offset);
    return x > 1.0 ? 1 : (x < -1.0 ? -1 : 0);
  }

private:
  double lambda_;
  int k_;
  double origin_;
  double barriers_;
  double cells_;
};

struct Sample
{
  double e;
  int c;
};

// Boundary between class-0 and nonzero samples, returned as the point on the
// band side.
double bisect_edge(const ContinuumProbe& probe, Sample out, Sample in, double tol)
{
  double a = out.e, b = in.e;
  for (int it = 0; it < 2000; ++it) {
    if (std::abs(b - a) <= tol)
      break;
    const double mid = 0.5 * (a + b);
    if (mid == a || mid == b)
      break;
    if (probe.classify(mid) == 0)
      b = mid;
    else
      a = mid;
  }
  return b;
}

// Point with |x| <= 1 between samples of opposite nonzero class.
std::optional<double> find_inside(const ContinuumProbe& probe, Sample lo, Sample hi)
{
  for (int it = 0; it < 2000; ++it) {
    const double mid = 0.5 * (lo.e + hi.e);
    if (mid == lo.e || mid == hi.e)
      return std::nullopt;
    const int c = probe.classify(mid);
    if (c == 0)
      return mid;
    if (c == lo.c)
      lo.e = mid;
    else
      hi.e = mid;
  }
  return std::nullopt;
}

struct ScanLimits
{
  double lo, hi; // bands may not extend beyond these offsets
};

// Walks outward from a band point until the class changes, then bisects.
double extend_edge(const ContinuumProbe& probe, double inside, double step, double limit, double tol,
                   bool& hit_limit)
{
  if (inside == limit) {
    hit_limit = true;
    return limit;
  }
  const double dir = limit < inside ? -1.0 : 1.0;
  double prev = inside;
  for (int j = 0; j < 80; ++j) {
    double e = inside + dir * step * std::ldexp(1.0, j);
    if ((dir < 0 && e <= limit) || (dir > 0 && e >= limit))
      e = limit;
    const int c = probe.classify(e);
    if (c != 0)
      return bisect_edge(probe, {e, c}, {prev, 0}, tol);
    if (e == limit) {
      hit_limit = true;
      return limit;
    }
    prev = e;
  }
  hit_limit = true;
  return prev;
}

struct ScanResult
{
  std::vector<Band> bands;
  bool hit_low = false;
  bool hit_high = false;
};

// Extremum of the half-trace on [a, b] by golden-section search.
Sample refine_extremum(const ContinuumProbe& probe, double a, double b, bool maximum)
{
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  auto f = [&](double e) {
    const double x = std::clamp(probe.half_trace(e), -1e300, 1e300);
    return maximum ? x : -x;
  };
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200; ++it) {
    if (!(d - c > 0.0) || c <= a || d >= b)
      break;
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  const double e = fc > fd ? c : d;
  return {e, probe.classify(e)};
}

ScanResult scan_once(const ContinuumProbe& probe, double a, double b, int n, double tol,
                     const ScanLimits& limits)
{
  std::vector<Sample> s;
  std::vector<double> xs;
  s.reserve(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) {
    const double e = i == n ? b : a + (b - a) * (static_cast<double>(i) / n);
    const double x = std::clamp(probe.half_trace(e), -1e300, 1e300);
    xs.push_back(x);
    s.push_back({e, x > 1.0 ? 1 : (x < -1.0 ? -1 : 0)});
  }
  // The half-trace is monotone across a band, so every turning point lies in
  // a gap or closes one.  Adding the turning points as samples exposes gaps
  // and bands too thin to be hit by the grid.
  std::vector<Sample> turning;
  for (std::size_t i = 1; i + 1 < s.size(); ++i) {
    const double l = xs[i] - xs[i - 1], r = xs[i + 1] - xs[i];
    if (l > 0.0 && r < 0.0)
      turning.push_back(refine_extremum(probe, s[i - 1].e, s[i + 1].e, true));
    else if (l < 0.0 && r > 0.0)
      turning.push_back(refine_extremum(probe, s[i - 1].e, s[i + 1].e, false));
  }
  if (!turning.empty()) {
    s.insert(s.end(), turning.begin(), turning.end());
    std::sort(s.begin(), s.end(), [](const Sample& u, const Sample& v) { return u.e < v.e; });
    s.erase(std::unique(s.begin(), s.end(), [](const Sample& u, const Sample& v) { return u.e == v.e; }),
            s.end());
  }
  const double step = (b - a) / n;

  ScanResult r;
  std::optional<double> open{}; // left edge of the band being traversed
  if (s[0].c == 0)
    open = extend_edge(probe, a, step, limits.lo, tol, r.hit_low);

  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    const Sample& u = s[i];
    const Sample& v = s[i + 1];
    if (u.c != 0 && v.c == 0) {
      open = bisect_edge(probe, u, v, tol);
    } else if (u.c == 0 && v.c != 0) {
      r.bands.push_back({open.value(), bisect_edge(probe, v, u, tol)});
      open.reset();
    } else if (u.c != 0 && v.c != 0 && u.c != v.c) {
      if (auto m = find_inside(probe, u, v)) {
        const double lo = bisect_edge(probe, u, {*m, 0}, tol);
        const double hi = bisect_edge(probe, v, {*m, 0}, tol);
        r.bands.push_back({lo, hi});
      } else {
        // Band narrower than the double grid: record it as a point.
        const double e = 0.5 * (u.e + v.e);
        r.bands.push_back({e, e});
      }
    }
  }
  if (open) {
    bool hit = false;
    const double hi = extend_edge(probe, b, step, limits.hi, tol, hit);
    r.hit_high = hit;
    r.bands.push_back({*open, hi});
  }
  return r;
}

std::size_t expected_band_count(int k, double origin, double a, double b)
{
  const double ea = std::max(origin + a, 0.0), eb = std::max(origin + b, 0.0);
  const double f = static_cast<double>(oracle::fibonacci_number(k));
  return static_cast<std::size_t>(f * (std::sqrt(eb) - std::sqrt(ea)) / 3.14159265358979 + 2.0);
}

// Adaptive scan of one candidate interval: the sample count doubles until the
// number of bands found is the same at two consecutive resolutions.
ScanResult scan_candidate(const ContinuumProbe& probe, double a, double b, double tol,
                          const ScanLimits& limits)
{
  const std::size_t expect = expected_band_count(probe.level(), probe.origin(), a, b);
  int n = static_cast<int>(std::clamp<std::size_t>(16 * expect, 32, 1 << 20));
  ScanResult prev = scan_once(probe, a, b, n, tol, limits);
  for (int round = 0; round < 10; ++round) {
    n *= 2;
    ScanResult next = scan_once(probe, a, b, n, tol, limits);
    if (next.bands.size() == prev.bands.size())
      return next;
    prev = std::move(next);
  }
  std::ostringstream os;
  os.precision(17);
  os << "continuum bands: sign pattern of |x_k| - 1 did not stabilize on ["
     << probe.origin() + a << ", " << probe.origin() + b << "] at level " << probe.level();
  throw std::runtime_error(os.str());
}

BandSet finish_continuum(double lambda, int k, double origin, std::vector<Band> found,
                         double merge_tol, bool clip_lo, bool clip_hi)
{
  // Overlaps arise when neighbouring candidates find the same band.
  std::vector<Band> unique = merge_intervals(std::move(found), 0.0);
  std::vector<Band> bands;
  bool merged = false;
  for (const Band& b : unique) {
    if (!bands.empty() && b.lo - bands.back().hi < merge_tol) {
      bands.back().hi = std::max(bands.back().hi, b.hi);
      merged = true;
    } else {
      bands.push_back(b);
    }
  }
  BandSet out(ModelParams(Continuum{lambda}), k, std::move(bands), merged, origin);
  out.clipped_low = clip_lo;
  out.clipped_high = clip_hi;
  return out;
}

} // namespace

BandSet continuum_bands_in_window(double lambda, int k, double origin, const Window& offsets,
                                  const std::vector<Band>& candidates, double edge_tol)
{
  if (!(lambda > 0.0))
    throw std::invalid_argument("continuum bands need lambda > 0");
  if (k < 2)
    throw std::invalid_argument("continuum bands need level k >= 2");
  if (!(offsets.hi > offsets.lo))
    throw std::invalid_argument("continuum bands: empty energy window");
  const ContinuumProbe probe(lambda, k, origin);
  const ScanLimits limits{offsets.lo, offsets.hi};

  std::vector<Band> regions;
  if (candidates.empty()) {
    regions.push_back({offsets.lo, offsets.hi});
  } else {
    for (const Band& c : candidates) {
      const double pad = 1e-3 * c.length() + 8.0 * edge_tol;
      const double lo = std::max(c.lo - pad, offsets.lo);
      const double hi = std::min(c.hi + pad, offsets.hi);
      if (hi > lo)
        regions.push_back({lo, hi});
    }
    regions = merge_intervals(std::move(regions), 0.0);
  }

  std::vector<Band> found;
  bool clip_lo = false, clip_hi = false;
  for (const Band& reg : regions) {
    const double tol = std::min(edge_tol, 1e-9 * reg.length());
    ScanResult r = scan_candidate(probe, reg.lo, reg.hi, tol > 0 ? tol : edge_tol, limits);
    clip_lo = clip_lo || (r.hit_low && reg.lo <= offsets.lo);
    clip_hi = clip_hi || (r.hit_high && reg.hi >= offsets.hi);
    found.insert(found.end(), r.bands.begin(), r.bands.end());
  }
  return finish_continuum(lambda, k, origin, std::move(found), edge_tol, clip_lo, clip_hi);
}

namespace {

std::vector<BandSet> continuum_hierarchy(double lambda, int k_last, const BandOptions& opt)
{
  if (!(opt.e_max > opt.e_min))
    throw std::invalid_argument("continuum bands: e_max must exceed e_min");
  const Window range{opt.e_min, opt.e_max};
  std::vector<BandSet> levels;
  for (int k = 2; k <= k_last; ++k) {
    std::vector<Band> candidates;
    if (k >= 4) {
      for (const BandSet* bs : {&levels[levels.size() - 1], &levels[levels.size() - 2]})
        candidates.insert(candidates.end(), bs->bands().begin(), bs->bands().end());
      candidates = merge_intervals(std::move(candidates), 0.0);
      if (candidates.empty()) {
        levels.push_back(BandSet(ModelParams(Continuum{lambda}), k, {}));
        continue;
      }
    }
    BandSet bs = continuum_bands_in_window(lambda, k, 0.0, range, candidates, opt.edge_tol);
    // Re-merge with the requested tolerance.
    std::vector<Band> merged;
    bool flag = bs.merged();
    for (const Band& b : bs.bands()) {
      if (!merged.empty() && b.lo - merged.back().hi < opt.merge_tol) {
        merged.back().hi = std::max(merged.back().hi, b.hi);
        flag = true;
      } else {
        merged.push_back(b);
      }
    }
    BandSet out(ModelParams(Continuum{lambda}), k, std::move(merged), flag);
    out.clipped_low = bs.clipped_low;
    out.clipped_high = bs.clipped_high;
    levels.push_back(std::move(out));
  }
  return levels;
}

} // namespace

BandSet compute_bands(const ModelParams& model, int k, const BandOptions& opt)
{
  if (model.is_discrete())
    return discrete_bands(model.discrete(), k, opt);
  if (k < 2)
    throw std::invalid_argument("compute_bands: continuum levels start at k = 2");
  return continuum_hierarchy(model.continuum().lambda, k, opt).back();
}

std::vector<BandSet> compute_band_levels(const ModelParams& model, int k_first, int k_last,
                                         const BandOptions& opt)
{
  if (k_last < k_first)
    throw std::invalid_argument("compute_band_levels: empty level range");
  std::vector<BandSet> out;
  if (model.is_discrete()) {
    std::vector<std::future<BandSet>> jobs;
    for (int k = k_first; k <= k_last; ++k)
      jobs.push_back(std::async(std::launch::async,
                                [&model, k, &opt] { return discrete_bands(model.discrete(), k, opt); }));
    for (auto& j : jobs)
      out.push_back(j.get());
    return out;
  }
  if (k_first < 2)
    throw std::invalid_argument("compute_band_levels: continuum levels start at k = 2");
  auto all = continuum_hierarchy(model.continuum().lambda, k_last, opt);
  out.assign(all.begin() + (k_first - 2), all.end());
  return out;
}

BottomLevels continuum_bottom_levels(double lambda, int k_first, int k_last)
{
  if (k_first < 4 || k_last < k_first)
    throw std::invalid_argument("continuum_bottom_levels: need 4 <= k_first <= k_last");
  const double e_top = oracle::ground_state_rayleigh(lambda) + 0.5;

  // Levels 2 and 3 in absolute energies, then offsets from the lowest level-3
  // edge so that later, exponentially thin bands stay resolvable.
  const Window range{0.0, e_top};
  std::vector<BandSet> levels;
  levels.push_back(continuum_bands_in_window(lambda, 2, 0.0, range, {}, 1e-13));
  levels.push_back(continuum_bands_in_window(lambda, 3, 0.0, range, {}, 1e-13));
  if (levels[1].empty())
    throw std::runtime_error("continuum_bottom_levels: no level-3 band below the variational bound");
  double origin = levels[1].min();
  for (BandSet& bs : levels)
    bs = bs.rebased(origin);

  for (int k = 4; k <= k_last + 1; ++k) {
    // Follow the bottom with the origin so that offsets stay small.
    const double lowest = std::min(levels[levels.size() - 1].empty() ? 0.0 : levels.back().min(),
                                   levels[levels.size() - 2].empty() ? 0.0
                                                                     : levels[levels.size() - 2].min());
    const double moved = origin + lowest;
    const double delta = moved - origin;
    if (delta != 0.0) {
      origin = moved;
      for (BandSet& bs : levels)
        bs = bs.rebased(origin);
    }
    const Window offsets{-origin, e_top - origin};
    std::vector<Band> candidates;
    for (const BandSet* bs : {&levels[levels.size() - 1], &levels[levels.size() - 2]})
      candidates.insert(candidates.end(), bs->bands().begin(), bs->bands().end());
    candidates = merge_intervals(std::move(candidates), 0.0);
    if (candidates.empty())
      throw std::runtime_error("continuum_bottom_levels: no candidates at level " + std::to_string(k));
    double scale = 0.0;
    for (const Band& c : candidates)
      scale = std::max(scale, c.length());
    const double tol = std::max(scale * 1e-9, 1e-300);
    levels.push_back(continuum_bands_in_window(lambda, k, origin, offsets, candidates, tol));
  }

  // The spectrum lies in the union of any two consecutive levels; the window
  // is the lowest cluster of that union below its largest gap.
  const auto& lk = levels[static_cast<std::size_t>(k_first - 2)].bands();
  const auto& lk1 = levels[static_cast<std::size_t>(k_first - 1)].bands();
  std::vector<Band> u = lk;
  u.insert(u.end(), lk1.begin(), lk1.end());
  const BandSet unions = BandSet::from_intervals(merge_intervals(std::move(u), 0.0));
  const auto win = bottom_window(unions, 0.25 * (unions.max() - unions.min()));
  BottomLevels out;
  out.origin = origin;
  out.window = win ? *win : Window{unions.min(), unions.max()};
  for (int k = k_first; k <= k_last; ++k) {
    const BandSet& a = levels[static_cast<std::size_t>(k - 2)];
    const BandSet& b = levels[static_cast<std::size_t>(k - 1)];
    out.levels.push_back(a.clipped(out.window));
    out.covers.push_back(level_cover(a, b).clipped(out.window));
  }
  return out;
}

BandSet level_cover(const BandSet& level_k, const BandSet& level_k1)
{
  if (level_k.origin() != level_k1.origin())
    throw std::invalid_argument("level_cover: band sets use different origins");
  std::vector<Band> u = level_k.bands();
  u.insert(u.end(), level_k1.bands().begin(), level_k1.bands().end());
  BandSet out(level_k.model(), level_k.level(), merge_intervals(std::move(u), 0.0),
              level_k.merged() || level_k1.merged(), level_k.origin());
  out.clipped_low = level_k.clipped_low || level_k1.clipped_low;
  out.clipped_high = level_k.clipped_high || level_k1.clipped_high;
  return out;
}

// ---------------------------------------------------------------- statistics

std::vector<Gap> gaps(const BandSet& bs)
{
  if (bs.empty())
    throw std::invalid_argument("gaps: band set is empty");
  std::vector<Gap> out;
  const auto& b = bs.bands();
  for (std::size_t i = 0; i + 1 < b.size(); ++i)
    out.push_back({b[i].hi, b[i + 1].lo, i, i + 1});
  return out;
}

namespace {

// For each gap, index of the nearest gap on the given side with length >= its
// own (or -1), by a monotone stack.
std::vector<long> nearest_at_least(const std::vector<Gap>& g, bool leftward)
{
  const long n = static_cast<long>(g.size());
  std::vector<long> out(static_cast<std::size_t>(n), -1);
  std::vector<long> stack;
  for (long t = 0; t < n; ++t) {
    const long i = leftward ? t : n - 1 - t;
    const double len = g[static_cast<std::size_t>(i)].length();
    while (!stack.empty() && g[static_cast<std::size_t>(stack.back())].length() < len)
      stack.pop_back();
    if (!stack.empty())
      out[static_cast<std::size_t>(i)] = stack.back();
    stack.push_back(i);
  }
  return out;
}

ThicknessReport thickness_with_edges(const BandSet& bs, double left_outer_gap, double right_outer_gap,
                                     bool cut_left, bool cut_right)
{
  ThicknessReport rep;
  const auto g = gaps(bs);
  const auto left = nearest_at_least(g, true);
  const auto right = nearest_at_least(g, false);
  for (std::size_t i = 0; i < g.size(); ++i) {
    GapRatio r;
    r.gap = g[i];
    const double len = g[i].length();
    if (left[i] >= 0) {
      r.left_bridge = g[i].lo - g[static_cast<std::size_t>(left[i])].hi;
    } else {
      r.left_bridge = g[i].lo - bs.min();
      r.left_truncated = cut_left || left_outer_gap < len;
    }
    if (right[i] >= 0) {
      r.right_bridge = g[static_cast<std::size_t>(right[i])].lo - g[i].hi;
    } else {
      r.right_bridge = bs.max() - g[i].hi;
      r.right_truncated = cut_right || right_outer_gap < len;
    }
    r.ratio = len > 0.0 ? std::min(r.left_bridge, r.right_bridge) / len
                        : std::numeric_limits<double>::infinity();
    rep.tau = std::min(rep.tau, r.ratio);
    if (r.left_truncated || r.right_truncated)
      rep.truncated = true;
    else
      rep.tau_untruncated = std::min(rep.tau_untruncated, r.ratio);
    rep.ratios.push_back(r);
  }
  return rep;
}

} // namespace

ThicknessReport thickness(const BandSet& bs)
{
  const double inf = std::numeric_limits<double>::infinity();
  return thickness_with_edges(bs, inf, inf, false, false);
}

ThicknessReport local_thickness(const BandSet& bs, const Window& window)
{
  const BandSet inner = bs.clipped(window);
  if (inner.empty())
    throw std::invalid_argument("local_thickness: window does not meet the band set");
  const double inf = std::numeric_limits<double>::infinity();
  const auto& all = bs.bands();
  // Locate the first and last bands meeting the window in the full set.
  std::size_t first = 0;
  while (all[first].hi < window.lo)
    ++first;
  std::size_t last = first + inner.size() - 1;

  // Behind each window edge the true bridge continues unless the set ends or
  // the next gap is at least as long as the gap in question.
  bool cut_left = all[first].lo < window.lo;
  bool cut_right = all[last].hi > window.hi;
  double outer_left = first == 0 ? inf : all[first].lo - all[first - 1].hi;
  double outer_right = last + 1 == all.size() ? inf : all[last + 1].lo - all[last].hi;
  if (first == 0 && !cut_left && bs.clipped_low)
    outer_left = 0.0;
  if (last + 1 == all.size() && !cut_right && bs.clipped_high)
    outer_right = 0.0;
  return thickness_with_edges(inner, outer_left, outer_right, cut_left, cut_right);
}

namespace {

// Number of boxes [lo + j eps, lo + (j+1) eps) meeting the bands.
double count_boxes(const std::vector<Band>& bands, double lo, double eps)
{
  auto snap = [](double t) {
    const double r = std::round(t);
    return std::abs(t - r) <= 1e-9 * std::max(1.0, std::abs(t)) ? r : t;
  };
  double count = 0.0;
  double last = -1.0;
  for (const Band& b : bands) {
    const double first_idx = std::floor(snap((b.lo - lo) / eps));
    double last_idx = std::ceil(snap((b.hi - lo) / eps)) - 1.0;
    if (last_idx < first_idx)
      last_idx = first_idx;
    const double from = std::max(first_idx, last + 1.0);
    if (last_idx >= from)
      count += last_idx - from + 1.0;
    last = std::max(last, last_idx);
  }
  return count;
}

void fit(DimensionEstimate& d)
{
  const std::size_t n = d.log_counts.size();
  if (n < 2) {
    d.degenerate = true;
    return;
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += d.log_inv_scales[i];
    my += d.log_counts[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (d.log_inv_scales[i] - mx) * (d.log_inv_scales[i] - mx);
    sxy += (d.log_inv_scales[i] - mx) * (d.log_counts[i] - my);
  }
  if (sxx <= 0.0) {
    d.degenerate = true;
    return;
  }
  d.raw_slope = sxy / sxx;
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = d.log_counts[i] - (my + d.raw_slope * (d.log_inv_scales[i] - mx));
    ss += e * e;
  }
  d.residual = std::sqrt(ss / n);
  const bool flat = std::all_of(d.log_counts.begin(), d.log_counts.end(),
                                [&](double c) { return c == d.log_counts.front(); });
  if (flat)
    d.degenerate = true;
  d.value = std::clamp(d.raw_slope, 0.0, 1.0);
}

} // namespace

DimensionEstimate box_dimension(const std::vector<BandSet>& bands_by_level, const Window& window)
{
  if (bands_by_level.size() < 3)
    throw std::invalid_argument("box_dimension: need at least 3 levels");
  if (!(window.hi > window.lo))
    throw std::invalid_argument("box_dimension: empty window");
  for (const BandSet& bs : bands_by_level)
    if (bs.origin() != bands_by_level.front().origin())
      throw std::invalid_argument("box_dimension: levels use different origins");

  DimensionEstimate d;
  std::vector<double> scales;
  std::vector<std::vector<Band>> clipped;
  for (const BandSet& bs : bands_by_level) {
    const BandSet c = bs.clipped(window);
    double eps = 0.0;
    for (const Band& b : c.bands())
      eps = std::max(eps, b.length());
    if (c.empty() || eps <= 0.0)
      continue;
    scales.push_back(eps);
    clipped.push_back(c.bands());
  }
  const bool varied = scales.size() >= 2 &&
                      *std::max_element(scales.begin(), scales.end()) >=
                          1.5 * *std::min_element(scales.begin(), scales.end());
  if (varied) {
    for (std::size_t i = 0; i < scales.size(); ++i) {
      d.log_inv_scales.push_back(-std::log(scales[i]));
      d.log_counts.push_back(std::log(count_boxes(clipped[i], window.lo, scales[i])));
    }
    d.levels_used = static_cast<int>(scales.size());
  } else {
    d.dyadic_fallback = true;
    const BandSet finest = bands_by_level.back().clipped(window);
    if (finest.empty()) {
      d.degenerate = true;
      return d;
    }
    const double W = window.length();
    for (int j = 1; j <= 40; ++j) {
      const double eps = std::ldexp(W, -j);
      d.log_inv_scales.push_back(-std::log(eps));
      d.log_counts.push_back(std::log(count_boxes(finest.bands(), window.lo, eps)));
    }
    d.levels_used = 1;
  }
  fit(d);
  return d;
}

CoveringResult covering_check(const BandSet& bs_k, const BandSet& bs_k1, const BandSet& bs_k2,
                              double dilation)
{
  if (!(bs_k.model() == bs_k1.model()) || !(bs_k1.model() == bs_k2.model()))
    throw std::invalid_argument("covering_check: band sets belong to different models");
  if (bs_k1.level() != bs_k.level() + 1 || bs_k2.level() != bs_k.level() + 2)
    throw std::invalid_argument("covering_check: levels must be consecutive");
  if (bs_k.origin() != bs_k1.origin() || bs_k.origin() != bs_k2.origin())
    throw std::invalid_argument("covering_check: band sets use different origins");
  std::vector<Band> cover = bs_k.bands();
  cover.insert(cover.end(), bs_k1.bands().begin(), bs_k1.bands().end());
  cover = merge_intervals(std::move(cover), 0.0);

  CoveringResult r;
  const auto& target = bs_k2.bands();
  std::size_t j = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const Band& b = target[i];
    while (j < cover.size() && cover[j].hi + dilation < b.lo)
      ++j;
    const bool inside = j < cover.size() && cover[j].lo - dilation <= b.lo && b.hi <= cover[j].hi + dilation;
    if (!inside)
      r.violations.push_back({i, b});
  }
  r.ok = r.violations.empty();
  return r;
}

BandSet middle_thirds(int n)
{
  if (n < 0 || n > 24)
    throw std::invalid_argument("middle_thirds: level must lie in [0, 24]");
  const double scale = std::pow(3.0, n);
  std::vector<Band> out;
  const long count = 1L << n;
  out.reserve(static_cast<std::size_t>(count));
  for (long j = 0; j < count; ++j) {
    // Ternary digits 0 or 2 from the binary digits of j.
    double left = 0.0;
    for (int bit = n - 1; bit >= 0; --bit)
      left = 3.0 * left + ((j >> bit) & 1 ? 2.0 : 0.0);
    out.push_back({left / scale, (left + 1.0) / scale});
  }
  return BandSet::from_intervals(std::move(out), n);
}

std::optional<Window> bottom_window(const BandSet& bs, double w)
{
  if (bs.empty())
    return std::nullopt;
  const double end = bs.min();
  const Gap* best = nullptr;
  const auto g = gaps(bs);
  for (const Gap& gap : g) {
    if (gap.lo > end + w)
      break;
    if (!best || gap.length() > best->length())
      best = &gap;
  }
  if (!best)
    return std::nullopt;
  return Window{end, best->lo};
}

std::optional<Window> top_window(const BandSet& bs, double w)
{
  if (bs.empty())
    return std::nullopt;
  const double end = bs.max();
  const auto g = gaps(bs);
  const Gap* best = nullptr;
  for (auto it = g.rbegin(); it != g.rend(); ++it) {
    if (it->hi < end - w)
      break;
    if (!best || it->length() > best->length())
      best = &*it;
  }
  if (!best)
    return std::nullopt;
  return Window{best->hi, end};
}

std::optional<StableWindow> stable_extreme_window(const BandSet& level_k, const BandSet& level_k1,
                                                  Extreme side, int max_halvings, std::size_t min_gaps)
{
  if (level_k.size() < 2 || level_k1.size() < 2)
    return std::nullopt;
  std::optional<StableWindow> best;
  double w = 0.25 * (level_k.max() - level_k.min());
  for (int h = 0; h <= max_halvings; ++h, w *= 0.5) {
    const auto wk = side == Extreme::bottom ? bottom_window(level_k, w) : top_window(level_k, w);
    const auto wk1 = side == Extreme::bottom ? bottom_window(level_k1, w) : top_window(level_k1, w);
    if (!wk || !wk1)
      continue;
    const auto tk = local_thickness(level_k, *wk);
    const auto tk1 = local_thickness(level_k1, *wk1);
    if (tk.ratios.size() < min_gaps || tk1.ratios.size() < min_gaps)
      break;
    const double a = tk.tau, b = tk1.tau;
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
      continue;
    if (std::max(a, b) / std::min(a, b) <= 1.5)
      best = StableWindow{*wk, a, b, std::min(a, b), w};
  }
  return best;
}

void write_bands_csv(std::ostream& os, const std::vector<BandSet>& sets)
{
  os << "level,band_index,lo,hi\n";
  char buf[128];
  for (const BandSet& bs : sets)
    for (std::size_t i = 0; i < bs.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%d,%zu,%.17g,%.17g\n", bs.level(), i,
                    bs.origin() + bs.bands()[i].lo, bs.origin() + bs.bands()[i].hi);
      os << buf;
    }
}

void detail::fit_log_log(DimensionEstimate& d)
{
  fit(d);
}

} // namespace tracespec
