#include "tracespec/dos.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <random>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace tracespec {

namespace {

double absolute(const BandSet& bs, double v)
{
  return bs.origin() + v;
}

void normalize(std::vector<double>& w)
{
  double total = 0.0;
  for (double x : w)
    total += x;
  if (!(total > 0.0))
    throw std::invalid_argument("measure has no mass");
  for (double& x : w)
    x /= total;
}

// Mass of (-inf, e], or of (-inf, e) when `left` is set.
double cumulative(const BandMeasure& m, double e, bool left)
{
  double s = 0.0;
  for (const auto& p : m.pieces) {
    if (e < p.lo || (left && e == p.lo))
      break;
    if (e >= p.hi && !(left && e == p.hi && p.hi == p.lo))
      s += p.weight;
    else if (p.hi > p.lo)
      s += p.weight * (e - p.lo) / (p.hi - p.lo);
  }
  return std::clamp(s, 0.0, 1.0);
}

// Distribution function of U[0, big] + U[0, small] at x.
double trapezoid_cdf(double x, double big, double small)
{
  if (big == 0.0)
    return x >= 0.0 ? 1.0 : 0.0;
  if (x <= 0.0)
    return 0.0;
  if (small == 0.0)
    return std::min(x / big, 1.0);
  if (x >= big + small)
    return 1.0;
  if (x <= small)
    return x * x / (2.0 * big * small);
  if (x <= big)
    return (x - 0.5 * small) / big;
  const double r = big + small - x;
  return 1.0 - r * r / (2.0 * big * small);
}

bool precedes(const BandMeasure& a, const BandMeasure& b)
{
  return std::lexicographical_compare(
      a.pieces.begin(), a.pieces.end(), b.pieces.begin(), b.pieces.end(),
      [](const MeasurePiece& x, const MeasurePiece& y) {
        return std::tie(x.lo, x.hi, x.weight) < std::tie(y.lo, y.hi, y.weight);
      });
}

void check_radii(const std::vector<double>& radii)
{
  if (radii.size() < 3)
    throw std::invalid_argument("local dimension needs at least 3 radii");
  const auto [lo, hi] = std::minmax_element(radii.begin(), radii.end());
  if (!(*lo > 0.0) || *hi < 100.0 * *lo)
    throw std::invalid_argument("radii must be positive and span two decades");
}

template <class MassFn>
DimensionEstimate measure_slope(const std::vector<double>& radii, MassFn mass)
{
  check_radii(radii);
  DimensionEstimate d;
  bool empty_ball = false;
  for (double r : radii) {
    const double mu = mass(r);
    if (!(mu > 0.0)) {
      empty_ball = true;
      continue;
    }
    d.log_inv_scales.push_back(-std::log(r));
    d.log_counts.push_back(-std::log(mu));
  }
  d.levels_used = static_cast<int>(d.log_counts.size());
  detail::fit_log_log(d);
  if (empty_ball)
    d.degenerate = true;
  return d;
}

} // namespace

double BandMeasure::total_mass() const
{
  double s = 0.0;
  for (const auto& p : pieces)
    s += p.weight;
  return s;
}

BandMeasure measure_from_pieces(std::vector<MeasurePiece> pieces)
{
  if (pieces.empty())
    throw std::invalid_argument("measure needs at least one piece");
  std::vector<double> w;
  std::vector<Band> bands;
  for (auto& p : pieces) {
    if (!(p.hi >= p.lo) || !(p.weight >= 0.0))
      throw std::invalid_argument("invalid measure piece");
    w.push_back(p.weight);
  }
  normalize(w);
  for (std::size_t i = 0; i < pieces.size(); ++i)
    pieces[i].weight = w[i];
  std::sort(pieces.begin(), pieces.end(),
            [](const MeasurePiece& a, const MeasurePiece& b) { return a.lo < b.lo; });

  for (const auto& p : pieces) {
    if (!bands.empty() && p.lo <= bands.back().hi)
      bands.back().hi = std::max(bands.back().hi, p.hi);
    else
      bands.push_back({p.lo, p.hi});
  }
  BandMeasure m;
  m.bands = BandSet::from_intervals(bands);
  m.weights.assign(bands.size(), 0.0);
  std::size_t j = 0;
  for (const auto& p : pieces) {
    while (p.lo > bands[j].hi)
      ++j;
    m.weights[j] += p.weight;
  }
  m.aggregated = bands.size() != pieces.size();
  m.pieces = std::move(pieces);
  return m;
}

BandMeasure dos_from_bands(const BandSet& bs)
{
  if (bs.empty())
    throw std::invalid_argument("empty band set");
  BandMeasure m;
  m.bands = bs;
  m.weights.assign(bs.size(), 0.0);

  if (bs.model() && bs.model()->is_discrete() && bs.level() >= 1) {
    std::vector<Band> raw = discrete_band_edges(bs.model()->discrete(), bs.level());
    const double per_state = 1.0 / static_cast<double>(raw.size());
    std::size_t j = 0;
    for (Band b : raw) {
      const double mid = 0.5 * (b.lo + b.hi);
      while (j < bs.size() && absolute(bs, bs.bands()[j].hi) < mid)
        ++j;
      if (j == bs.size())
        break;
      const Band& host = bs.bands()[j];
      if (mid < absolute(bs, host.lo))
        continue;
      b.lo = std::clamp(b.lo, absolute(bs, host.lo), absolute(bs, host.hi));
      b.hi = std::clamp(b.hi, b.lo, absolute(bs, host.hi));
      m.weights[j] += per_state;
      m.pieces.push_back({b.lo, b.hi, per_state});
    }
    m.aggregated = m.pieces.size() != bs.size();
    normalize(m.weights);
    double total = m.total_mass();
    for (auto& p : m.pieces)
      p.weight /= total;
    std::sort(m.pieces.begin(), m.pieces.end(),
              [](const MeasurePiece& a, const MeasurePiece& b) { return a.lo < b.lo; });
    return m;
  }

  const double w = 1.0 / static_cast<double>(bs.size());
  for (std::size_t i = 0; i < bs.size(); ++i) {
    m.weights[i] = w;
    m.pieces.push_back({absolute(bs, bs.bands()[i].lo), absolute(bs, bs.bands()[i].hi), w});
  }
  return m;
}

double ids(const BandMeasure& m, double e)
{
  return cumulative(m, e, false);
}

double ids_distance(const BandMeasure& a, const BandMeasure& b)
{
  std::vector<double> xs;
  for (const auto* m : {&a, &b})
    for (const auto& p : m->pieces) {
      xs.push_back(p.lo);
      xs.push_back(p.hi);
    }
  double d = 0.0;
  for (double x : xs) {
    d = std::max(d, std::abs(cumulative(a, x, false) - cumulative(b, x, false)));
    d = std::max(d, std::abs(cumulative(a, x, true) - cumulative(b, x, true)));
  }
  return d;
}

double ConvolutionDensity::total_mass() const
{
  double s = 0.0;
  for (double x : masses)
    s += x;
  return s;
}

double ConvolutionDensity::density_at(double x) const
{
  if (masses.empty() || x < lo || x > hi())
    return 0.0;
  auto i = static_cast<std::size_t>((x - lo) / width);
  return density(std::min(i, masses.size() - 1));
}

double ConvolutionDensity::mass_in(double a, double b) const
{
  if (masses.empty() || b <= a)
    return 0.0;
  const double first = std::max(0.0, std::floor((a - lo) / width));
  const double last = std::min(static_cast<double>(masses.size() - 1), std::floor((b - lo) / width));
  double s = 0.0;
  for (auto i = static_cast<std::size_t>(first); static_cast<double>(i) <= last; ++i) {
    const double c0 = lo + width * static_cast<double>(i);
    const double overlap = std::min(b, c0 + width) - std::max(a, c0);
    if (overlap > 0.0)
      s += masses[i] * std::min(overlap / width, 1.0);
  }
  return s;
}

ConvolutionDensity ConvolutionDensity::coarsened() const
{
  ConvolutionDensity c;
  c.lo = lo;
  c.width = 2.0 * width;
  for (std::size_t i = 0; i < masses.size(); i += 2)
    c.masses.push_back(masses[i] + (i + 1 < masses.size() ? masses[i + 1] : 0.0));
  return c;
}

ConvolutionDensity convolve(const BandMeasure& m1, const BandMeasure& m2, std::size_t cells, int threads)
{
  if (cells < 16)
    throw std::invalid_argument("convolution needs at least 16 cells");
  // Fixed operand order makes the result independent of argument order.
  const BandMeasure& a = precedes(m2, m1) ? m2 : m1;
  const BandMeasure& b = precedes(m2, m1) ? m1 : m2;

  ConvolutionDensity out;
  out.lo = a.min() + b.min();
  double hi = a.max() + b.max();
  if (!(hi > out.lo))
    hi = out.lo + std::max(std::abs(out.lo), 1.0) * 1e-12;
  out.width = (hi - out.lo) / static_cast<double>(cells);
  out.masses.assign(cells, 0.0);

  auto boundary = [&](std::size_t i) {
    return i == cells ? hi : out.lo + out.width * static_cast<double>(i);
  };
  auto cell_of = [&](double x) {
    const double c = std::floor((x - out.lo) / out.width);
    return static_cast<std::size_t>(std::clamp(c, 0.0, static_cast<double>(cells - 1)));
  };

  constexpr std::size_t chunk = 32;
  const std::size_t n_chunks = (a.pieces.size() + chunk - 1) / chunk;
  std::vector<std::vector<double>> partial(n_chunks);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t c = next++; c < n_chunks; c = next++) {
      std::vector<double> acc(cells, 0.0);
      const std::size_t end = std::min(a.pieces.size(), (c + 1) * chunk);
      for (std::size_t i = c * chunk; i < end; ++i) {
        const auto& pa = a.pieces[i];
        for (const auto& pb : b.pieces) {
          const double w = pa.weight * pb.weight;
          if (w == 0.0)
            continue;
          const double s0 = pa.lo + pb.lo;
          const double big = std::max(pa.hi - pa.lo, pb.hi - pb.lo);
          const double small = std::min(pa.hi - pa.lo, pb.hi - pb.lo);
          const std::size_t i0 = cell_of(s0);
          const std::size_t i1 = cell_of(pa.hi + pb.hi);
          double prev = 0.0;
          for (std::size_t j = i0; j <= i1; ++j) {
            const double cur = j == i1 ? 1.0 : trapezoid_cdf(boundary(j + 1) - s0, big, small);
            acc[j] += w * (cur - prev);
            prev = cur;
          }
        }
      }
      partial[c] = std::move(acc);
    }
  };

  unsigned n_threads = threads > 0 ? static_cast<unsigned>(threads)
                                   : std::max(1u, std::thread::hardware_concurrency());
  n_threads = static_cast<unsigned>(std::min<std::size_t>(n_threads, std::max<std::size_t>(n_chunks, 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n_threads; ++t)
    pool.emplace_back(worker);
  worker();
  for (auto& t : pool)
    t.join();

  for (const auto& acc : partial)
    for (std::size_t j = 0; j < cells; ++j)
      out.masses[j] += acc[j];
  return out;
}

DimensionEstimate local_measure_dimension(const BandMeasure& m, double x, const std::vector<double>& radii)
{
  if (x < m.min() || x > m.max())
    throw std::invalid_argument("point outside the support");
  return measure_slope(radii, [&](double r) {
    return cumulative(m, x + r, false) - cumulative(m, x - r, true);
  });
}

DimensionEstimate local_measure_dimension(const ConvolutionDensity& c, double x,
                                          const std::vector<double>& radii)
{
  if (x < c.lo || x > c.hi())
    throw std::invalid_argument("point outside the support");
  return measure_slope(radii, [&](double r) { return c.mass_in(x - r, x + r); });
}

AcScEvidence ac_sc_evidence(const ConvolutionDensity& conv, const std::vector<IntervalUnion>& sum_covers,
                            const AcScOptions& opt)
{
  if (sum_covers.size() < 3)
    throw std::invalid_argument("ac/sc evidence needs covers at three levels");
  if (opt.window_cells < 4)
    throw std::invalid_argument("windows need at least 4 cells");
  const ConvolutionDensity coarse = conv.coarsened();
  const std::size_t n = conv.masses.size();

  auto cell_range = [](const ConvolutionDensity& c, double lo, double hi) {
    const double last = static_cast<double>(c.masses.size() - 1);
    const double i0 = std::clamp(std::floor((lo - c.lo) / c.width), 0.0, last);
    const double i1 = std::clamp(std::floor((hi - c.lo) / c.width), 0.0, last);
    return std::pair{static_cast<std::size_t>(i0), static_cast<std::size_t>(i1)};
  };
  auto overlap = [&](std::size_t i, double lo, double hi) {
    const double c0 = conv.lo + conv.width * static_cast<double>(i);
    return std::max(0.0, std::min(hi, c0 + conv.width) - std::max(lo, c0));
  };
  auto max_density = [&](const ConvolutionDensity& c, const Window& w) {
    const auto [i0, i1] = cell_range(c, w.lo, w.hi);
    double best = 0.0;
    for (std::size_t i = i0; i <= i1; ++i)
      best = std::max(best, c.density(i));
    return best;
  };

  // The measure lives on the first cover, so each cell's mass is shared among
  // the windows in proportion to the cover length they hold inside the cell.
  std::vector<double> covered(n, 0.0);
  for (const Band& part : sum_covers.front().intervals()) {
    const auto [i0, i1] = cell_range(conv, part.lo, part.hi);
    for (std::size_t i = i0; i <= i1; ++i)
      covered[i] += overlap(i, part.lo, part.hi);
  }

  const double max_len = conv.width * static_cast<double>(opt.window_cells);
  AcScEvidence ev;
  for (const Band& part : sum_covers.front().intervals()) {
    const auto pieces = static_cast<std::size_t>(std::max(1.0, std::ceil(part.length() / max_len)));
    for (std::size_t s = 0; s < pieces; ++s) {
      EvidenceWindow win;
      const double step = part.length() / static_cast<double>(pieces);
      win.window = {part.lo + step * static_cast<double>(s),
                    s + 1 == pieces ? part.hi : part.lo + step * static_cast<double>(s + 1)};
      for (const auto& cover : sum_covers)
        win.lengths.push_back(cover.clipped(win.window).measure());
      const double steps = static_cast<double>(win.lengths.size() - 1);
      win.thin = win.lengths.back() <= std::pow(opt.decay_ratio, steps) * win.lengths.front();

      const auto [i0, i1] = cell_range(conv, win.window.lo, win.window.hi);
      for (std::size_t i = i0; i <= i1; ++i)
        if (covered[i] > 0.0)
          win.mass += conv.masses[i] * overlap(i, win.window.lo, win.window.hi) / covered[i];

      // Densities are only resolved on windows spanning a few coarse cells.
      const double fine = max_density(conv, win.window);
      const double rough = max_density(coarse, win.window);
      win.bounded = win.mass > 0.0 && win.window.length() >= 2.0 * coarse.width &&
                    fine <= (1.0 + opt.density_drift) * rough;
      if (win.thin)
        ev.mass_on_thin += win.mass;
      if (win.bounded)
        ev.density_bounded_mass += win.mass;
      ev.windows.push_back(std::move(win));
    }
  }
  ev.mass_on_thin = std::clamp(ev.mass_on_thin, 0.0, 1.0);
  ev.density_bounded_mass = std::clamp(ev.density_bounded_mass, 0.0, 1.0);
  return ev;
}

nlohmann::json AcScEvidence::to_json() const
{
  nlohmann::json j;
  j["mass_on_thin"] = mass_on_thin;
  j["density_bounded_mass"] = density_bounded_mass;
  auto& ws = j["windows"] = nlohmann::json::array();
  for (const auto& w : windows)
    ws.push_back({{"lo", w.window.lo}, {"hi", w.window.hi}, {"mass", w.mass},
                  {"lengths", w.lengths}, {"thin", w.thin}, {"bounded", w.bounded}});
  return j;
}

double torus_pushforward_check(std::size_t samples, const BandMeasure* reference, std::uint64_t seed)
{
  if (samples < 1000)
    throw std::invalid_argument("pushforward check needs at least 1000 samples");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> theta(0.0, 1.0);
  std::vector<double> e(samples);
  for (double& x : e)
    x = 2.0 * std::cos(2.0 * std::numbers::pi * theta(rng));
  std::sort(e.begin(), e.end());

  auto law = [&](double x) {
    if (reference)
      return ids(*reference, x);
    return std::acos(std::clamp(-x / 2.0, -1.0, 1.0)) / std::numbers::pi;
  };
  const double n = static_cast<double>(samples);
  double d = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double f = law(e[i]);
    d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  return d;
}

void write_measure_csv(std::ostream& os, const ConvolutionDensity& c)
{
  os << "cell_lo,cell_hi,mass,density\n";
  char buf[128];
  for (std::size_t i = 0; i < c.masses.size(); ++i) {
    const double c0 = c.lo + c.width * static_cast<double>(i);
    const double c1 = i + 1 == c.masses.size() ? c.hi() : c0 + c.width;
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", c0, c1, c.masses[i], c.density(i));
    os << buf;
  }
}

} // namespace tracespec
