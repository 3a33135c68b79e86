#pragma once

// Density-of-states approximants on band covers, their convolutions, local
// measure dimensions and finite-level ac/sc evidence.

#include "tracespec/bands.hpp"
#include "tracespec/sumset.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace tracespec {

/// Piece of a measure with uniform density on [lo, hi] in absolute energy.
struct MeasurePiece
{
  double lo = 0.0;
  double hi = 0.0;
  double weight = 0.0;
};

struct BandMeasure
{
  BandSet bands;
  std::vector<double> weights;     // per band of `bands`, summing to 1
  std::vector<MeasurePiece> pieces; // sorted; unmerged bands where known
  bool aggregated = false;          // some band carries several states

  double min() const { return pieces.front().lo; }
  double max() const { return pieces.back().hi; }
  double total_mass() const;
};

/// Weight 1/F_k per unmerged band of a discrete approximant.  Merged bands
/// get the summed weight of the bands they contain and keep those bands as
/// pieces.  Sets without a discrete model get equal weights per band.
BandMeasure dos_from_bands(const BandSet& bs);

/// Measure from explicit pieces (weights are normalized to total 1).
BandMeasure measure_from_pieces(std::vector<MeasurePiece> pieces);

/// Integrated density of states, the mass of (-inf, E].
double ids(const BandMeasure& m, double e);

/// Sup distance between two integrated densities of states.
double ids_distance(const BandMeasure& a, const BandMeasure& b);

struct ConvolutionDensity
{
  double lo = 0.0;
  double width = 0.0;
  std::vector<double> masses;

  double hi() const { return lo + width * static_cast<double>(masses.size()); }
  double total_mass() const;
  double density(std::size_t cell) const { return masses[cell] / width; }
  /// Density of the cell containing x (0 outside the grid).
  double density_at(double x) const;
  /// Mass of [a, b], uniform within each cell.
  double mass_in(double a, double b) const;
  /// Neighbouring cells merged in pairs (an odd last cell stays alone).
  ConvolutionDensity coarsened() const;
};

/// Law of X + Y for independent X ~ m1, Y ~ m2 on `cells` equal cells over
/// [min m1 + min m2, max m1 + max m2].  Each pair of pieces contributes a
/// trapezoid whose distribution function is integrated exactly per cell.
/// threads = 0 uses the hardware concurrency; the result does not depend on it.
ConvolutionDensity convolve(const BandMeasure& m1, const BandMeasure& m2, std::size_t cells,
                            int threads = 0);

DimensionEstimate local_measure_dimension(const BandMeasure& m, double x,
                                          const std::vector<double>& radii);
DimensionEstimate local_measure_dimension(const ConvolutionDensity& c, double x,
                                          const std::vector<double>& radii);

struct AcScOptions
{
  double decay_ratio = 0.8;   // cover length ratio per level counted as geometric decay
  double density_drift = 0.05; // allowed change of the max density under grid doubling
  std::size_t window_cells = 32; // longer cover components are split into windows of this size
};

struct EvidenceWindow
{
  Window window;
  double mass = 0.0;
  std::vector<double> lengths; // cover length inside the window per level
  bool thin = false;
  bool bounded = false;
};

struct AcScEvidence
{
  double mass_on_thin = 0.0;
  double density_bounded_mass = 0.0;
  std::vector<EvidenceWindow> windows;

  nlohmann::json to_json() const;
};

/// Windows are the components of the first cover, split to at most
/// window_cells grid cells.  A window is thin when the cover length inside it
/// shrinks on average by decay_ratio per level, and bounded when it spans at
/// least two coarse cells and its max cell density moves less than
/// density_drift between the grid and the grid with half as many cells.
AcScEvidence ac_sc_evidence(const ConvolutionDensity& conv, const std::vector<IntervalUnion>& sum_covers,
                            const AcScOptions& opt = {});

/// Kolmogorov-Smirnov distance between E = 2cos(2 pi theta) for uniform
/// theta and the arcsine law, or the IDS of `reference` when given.
double torus_pushforward_check(std::size_t samples, const BandMeasure* reference = nullptr,
                               std::uint64_t seed = 20240601);

void write_measure_csv(std::ostream& os, const ConvolutionDensity& c);

} // namespace tracespec
