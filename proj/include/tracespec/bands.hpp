#pragma once

// Band covers of the periodic approximants and their fractal statistics:
// gaps, Newhouse thickness (global and windowed) and box-counting dimension.

#include "tracespec/trace_core.hpp"

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace tracespec {

struct Band
{
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  friend bool operator==(const Band&, const Band&) = default;
};

/// Closed interval of energies used for windows.
struct Window
{
  double lo = 0.0;
  double hi = 0.0;

  double length() const { return hi - lo; }
  bool contains(double e) const { return e >= lo && e <= hi; }
};

/// Sorted disjoint bands.  Energies are origin + value; origin is nonzero only
/// for covers resolved below double resolution around a reference energy.
class BandSet
{
public:
  BandSet() = default;
  BandSet(std::optional<ModelParams> model, int level, std::vector<Band> bands,
          bool merged = false, double origin = 0.0);

  /// Synthetic set without a model (tests, calibration sets).
  static BandSet from_intervals(std::vector<Band> bands, int level = 0);

  const std::optional<ModelParams>& model() const { return model_; }
  int level() const { return level_; }
  const std::vector<Band>& bands() const { return bands_; }
  std::size_t size() const { return bands_.size(); }
  bool empty() const { return bands_.empty(); }
  bool merged() const { return merged_; }
  double origin() const { return origin_; }

  double min() const;
  double max() const;
  double total_length() const;

  /// Bands intersected with a window given in the same (offset) coordinates.
  BandSet clipped(const Window& w) const;
  BandSet shifted(double delta) const;
  /// Same energies expressed relative to another origin.
  BandSet rebased(double origin) const;

  bool clipped_low = false;  // first band cut by the computation range
  bool clipped_high = false; // last band cut by the computation range

private:
  std::optional<ModelParams> model_;
  int level_ = 0;
  std::vector<Band> bands_;
  bool merged_ = false;
  double origin_ = 0.0;
};

struct BandOptions
{
  // Continuum computation range (absolute energies).
  double e_min = 0.0;
  double e_max = 200.0;
  double merge_tol = 1e-9;
  double edge_tol = 1e-10;
};

BandSet compute_bands(const ModelParams& model, int k, const BandOptions& opt = {});

/// The F_k bands of a discrete approximant before merging (consecutive pairs
/// of the sorted periodic and antiperiodic eigenvalues; may touch or overlap
/// by rounding where gaps are closed).
std::vector<Band> discrete_band_edges(const Discrete& d, int k);

/// Levels k_first..k_last (discrete levels are computed concurrently; the
/// continuum hierarchy is built once).
std::vector<BandSet> compute_band_levels(const ModelParams& model, int k_first, int k_last,
                                         const BandOptions& opt = {});

/// Continuum bands of level k restricted to a window around origin, resolved in
/// extended precision.  `candidates` (offset coordinates) must contain the
/// level-k spectrum inside the window, e.g. the union of the two previous
/// levels; pass an empty list to scan the whole window.
BandSet continuum_bands_in_window(double lambda, int k, double origin, const Window& offsets,
                                  const std::vector<Band>& candidates, double edge_tol);

struct BottomLevels
{
  double origin = 0.0; // absolute energy of offset 0
  Window window;       // offset window holding the lowest cluster
  std::vector<BandSet> levels; // level-k bands inside the window (may be empty)
  std::vector<BandSet> covers; // level_cover(k, k+1) inside the window
};

/// Union of two consecutive levels, which contains the whole spectrum.
BandSet level_cover(const BandSet& level_k, const BandSet& level_k1);

/// Levels k_first..k_last of the continuum spectrum inside the lowest cluster
/// of bands (below the largest gap near the bottom of levels k_first and
/// k_first + 1 combined), in offset coordinates.
BottomLevels continuum_bottom_levels(double lambda, int k_first, int k_last);

struct Gap
{
  double lo = 0.0;
  double hi = 0.0;
  std::size_t left_band = 0;
  std::size_t right_band = 0;

  double length() const { return hi - lo; }
};

std::vector<Gap> gaps(const BandSet& bs);

struct GapRatio
{
  Gap gap;
  double left_bridge = 0.0;
  double right_bridge = 0.0;
  double ratio = 0.0;
  bool left_truncated = false;
  bool right_truncated = false;
};

struct ThicknessReport
{
  double tau = std::numeric_limits<double>::infinity();
  std::vector<GapRatio> ratios;
  bool truncated = false; // some bridge was cut by a window boundary
  // Minimum over ratios whose bridges were not cut (infinity if none).
  double tau_untruncated = std::numeric_limits<double>::infinity();
};

/// Newhouse thickness.  A bridge runs from the gap to the nearest gap on that
/// side at least as long, or to the extreme of the set.
ThicknessReport thickness(const BandSet& bs);

/// Thickness of the bands inside the window.  Bridges that reach a window
/// boundary behind which the set continues are flagged as truncated.
ThicknessReport local_thickness(const BandSet& bs, const Window& window);

struct DimensionEstimate
{
  double value = 0.0;     // clamped to [0, 1]
  double raw_slope = 0.0; // unclamped regression slope
  double residual = 0.0;  // RMS residual of the log-log fit
  std::vector<double> log_inv_scales;
  std::vector<double> log_counts;
  int levels_used = 0;
  bool dyadic_fallback = false; // natural scales did not vary across levels
  bool degenerate = false;      // counts constant or fit impossible
};

/// Box-counting dimension of the bands inside the window, one natural scale
/// (largest band length in the window) per level.
DimensionEstimate box_dimension(const std::vector<BandSet>& bands_by_level, const Window& window);

struct CoveringViolation
{
  std::size_t band_index = 0;
  Band band;
};

struct CoveringResult
{
  bool ok = true;
  std::vector<CoveringViolation> violations;
};

/// Every level-(k+2) band lies in the union of levels k and k+1 up to `dilation`.
CoveringResult covering_check(const BandSet& bs_k, const BandSet& bs_k1, const BandSet& bs_k2,
                              double dilation = 1e-8);

/// Union of intervals merged where they overlap or touch within tol.
std::vector<Band> merge_intervals(std::vector<Band> intervals, double tol = 0.0);

/// Level-n middle-thirds construction on [0, 1] (2^n bands).
BandSet middle_thirds(int n);

// Windows anchored at the spectral extremes.  The inner edge is placed at the
// largest gap within distance w of the extreme, so that no bridge inside the
// window is cut short.
std::optional<Window> bottom_window(const BandSet& bs, double w);
std::optional<Window> top_window(const BandSet& bs, double w);

enum class Extreme { bottom, top };

struct StableWindow
{
  Window window;
  double tau_k = 0.0;
  double tau_k1 = 0.0;
  double tau = 0.0; // min of the two levels
  double width = 0.0;
};

/// Halve w from a quarter of the spectral width while both levels keep at
/// least min_gaps gaps in the window; the result is the smallest window on
/// which local thickness at the two levels agrees (ratio <= 1.5).
std::optional<StableWindow> stable_extreme_window(const BandSet& level_k, const BandSet& level_k1,
                                                  Extreme side, int max_halvings = 30,
                                                  std::size_t min_gaps = 2);

void write_bands_csv(std::ostream& os, const std::vector<BandSet>& sets);

namespace detail {
/// Least-squares slope of log_counts against log_inv_scales, filling value,
/// raw_slope, residual and degenerate.
void fit_log_log(DimensionEstimate& d);
} // namespace detail

} // namespace tracespec
