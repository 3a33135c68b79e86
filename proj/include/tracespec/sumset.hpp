#pragma once

// Minkowski sums of band covers, Gap Lemma and dimension-sum certificates,
// and the mixed interval-Cantor classifier and parameter scanner.

#include "tracespec/bands.hpp"

#include <json.hpp>

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tracespec {

/// Sorted union of closed intervals, merged where they overlap or touch.
class IntervalUnion
{
public:
  IntervalUnion() = default;
  explicit IntervalUnion(std::vector<Band> intervals);

  /// Bands of a set as offsets from its origin (the origin is not added).
  static IntervalUnion from_offsets(const BandSet& bs);

  const std::vector<Band>& intervals() const { return parts_; }
  std::size_t size() const { return parts_.size(); }
  bool empty() const { return parts_.empty(); }
  double min() const;
  double max() const;
  double measure() const;
  double largest_gap() const; // 0 for a single interval

  /// True if [lo, hi] lies inside one component, allowing `slack` at both ends.
  bool covers(double lo, double hi, double slack = 0.0) const;
  IntervalUnion clipped(const Window& w) const;
  /// Component containing x, if any.
  std::optional<Band> component_at(double x) const;

private:
  std::vector<Band> parts_;
};

IntervalUnion minkowski_sum(const IntervalUnion& a, const IntervalUnion& b);

/// Newhouse Gap Lemma for sums: tau(a) * tau(b) > 1 and each set is at least as
/// long as the largest gap of the other.  Then a + b is the interval
/// [min a + min b, max a + max b].
bool gap_lemma_certificate(const ThicknessReport& a_report, const ThicknessReport& b_report,
                           const IntervalUnion& a, const IntervalUnion& b);

/// min(dim a + dim b, 1).
double dimension_sum_bound(const DimensionEstimate& d_box_a, const DimensionEstimate& d_haus_b);

enum class Verdict { mixed, interval_only, cantor_only, undetermined };

std::string to_string(Verdict v);

struct IntervalEvidence
{
  Window window;           // certified part of the sum cover
  int stable_levels = 0;   // consecutive levels whose sum cover contains it
  double tau_a = 0.0;
  double tau_b = 0.0;
  bool certified = false;  // Gap Lemma on the contributing local windows
};

struct CantorEvidence
{
  Window window;           // sum window
  double dim_a = 0.0;
  double dim_b = 0.0;
  double bound = 1.0;
  bool gaps_persist = false;
};

struct RegimeReport
{
  ModelParams m1;
  ModelParams m2;
  int level = 0;
  std::optional<IntervalEvidence> interval;
  std::optional<CantorEvidence> cantor;
  Verdict verdict = Verdict::undetermined;
  bool stable = true;      // verdict unchanged at the next level
  std::vector<std::string> notes;

  nlohmann::json to_json() const;
};

struct RegimeOptions
{
  double coverage_tol = 1e-8;
  double cantor_bound = 0.95;
  bool check_next_level = true;
};

/// Discrete pairs only; continuum pairs go through continuum_mixed_check.
RegimeReport classify_pair(const ModelParams& m1, const ModelParams& m2, int k,
                           const RegimeOptions& opt = {});

struct ScanGrid
{
  double p_min = -30.0, p_max = -10.0;
  int p_steps = 5;
  double q_min = 10.0, q_max = 30.0;
  int q_steps = 5;
  int k = 8;
  int threads = 0; // 0: hardware concurrency
};

void validate(const ScanGrid& grid);

struct ScanPoint
{
  double p = 0.0;
  double q = 0.0;
  double v_min = 0.0;     // V at the band-cover minimum
  double v_max = 0.0;     // V at the band-cover maximum
  double tau_local = 0.0; // near the extreme with smaller |V| (0 if no stable window)
  double dim_local = 1.0; // near the extreme with larger |V|
  bool candidate = false; // tau_local > 1 and dim_local < 1/2
  double margin = 0.0;    // min(tau_local - 1, 1/2 - dim_local)
  std::string error;      // nonempty if the point failed
};

/// Scan result sorted by (p, q); candidates() extracts the hits by margin.
std::vector<ScanPoint> scan_grid(const ScanGrid& grid);
std::vector<ScanPoint> candidates(const std::vector<ScanPoint>& scan);
void write_scan_csv(std::ostream& os, const std::vector<ScanPoint>& scan);

struct ContinuumCheckOptions
{
  double delta = 0.05;          // distance to the period-6 point accepted as "near"
  double accum_exclusion = 0.1; // keep this far from (1, 1, 1) and (-1, -1, 1)
  double cantor_bound = 0.95;
};

/// Point of the continuum curve closest to the period-6 orbit through
/// (0, 0, -1) below e_max.
struct HighEnergyWindow
{
  double energy = 0.0;   // closest approach
  double distance = 0.0;
  Window window;         // thickness window around it
  ThicknessReport thickness;
  int level = 0;
  bool near = false;     // distance < delta
};

std::optional<HighEnergyWindow> high_energy_window(double lambda, int k, double e_min, double e_max,
                                                   const ContinuumCheckOptions& opt = {});

RegimeReport continuum_mixed_check(double l1, double l2, int k, double e_max,
                                   const ContinuumCheckOptions& opt = {});

} // namespace tracespec
