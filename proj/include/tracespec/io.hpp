#pragma once

// Run configuration, the on-disk result cache and the CSV/SVG exporters used by
// the command-line tool.

#include "tracespec/bands.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace tracespec {

inline constexpr const char* kVersionTag = "tracespec-1";

/// "%.17g" formatting shared by every data file.
std::string format_double(double v);

struct RunConfig
{
  std::string command;

  std::string model = "discrete"; // discrete | continuum
  double p = 1.0;
  double q = 0.0;
  double lambda = 1.0;
  // Second operator for sumset and convolve; unset values copy the first.
  std::optional<double> p2;
  std::optional<double> q2;
  std::optional<double> lambda2;

  int k = 8;
  int k_max = 0; // 0: command default
  double e_min = 0.0;
  double e_max = 200.0;
  std::optional<double> window_lo;
  std::optional<double> window_hi;

  double coverage_tol = 1e-8;
  double cantor_bound = 0.95;
  double delta = 0.05;
  double accum_exclusion = 0.1;
  std::size_t cells = 4096;
  std::size_t samples = 2000;

  double p_min = -30.0, p_max = -10.0;
  int p_steps = 5;
  double q_min = 10.0, q_max = 30.0;
  int q_steps = 5;

  std::string out;      // output file (default under out_dir)
  std::string svg;      // optional SVG file
  std::string out_dir = ".";
  std::string cache_dir; // TRACESPEC_CACHE overrides; empty: <out_dir>/.tracespec-cache
  bool use_cache = true;
  int threads = 0;
  bool verbose = false;

  ModelParams first_model() const;
  ModelParams second_model() const;
  std::optional<Window> window() const;
  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
};

/// Cache directory after the TRACESPEC_CACHE override.
std::filesystem::path resolve_cache_dir(const RunConfig& cfg);

struct CacheKey
{
  std::string kind;           // discrete | continuum | synthetic
  std::vector<double> params; // rounded to 12 significant digits in the key
  int level = 0;
  std::string op;
  std::string version = kVersionTag;

  std::string canonical() const;
  /// 16 hex digits of the FNV-1a hash of canonical().
  std::string hash() const;
};

/// Directory of JSON entries keyed by CacheKey::hash().  Unreadable or
/// inconsistent entries are reported on `log`, removed, and treated as misses.
class Cache
{
public:
  explicit Cache(std::filesystem::path dir, std::ostream* log = nullptr);

  std::optional<nlohmann::json> get(const CacheKey& key);
  void put(const CacheKey& key, const nlohmann::json& payload);
  const std::filesystem::path& dir() const { return dir_; }
  std::filesystem::path entry_path(const CacheKey& key) const;

  std::size_t hits = 0;
  std::size_t misses = 0;

private:
  std::filesystem::path dir_;
  std::ostream* log_;
  std::mutex write_;
};

nlohmann::json bands_to_json(const BandSet& bs);
BandSet bands_from_json(const nlohmann::json& j);

/// compute_bands through the cache (cache may be null).
BandSet cached_bands(Cache* cache, const ModelParams& model, int k, const BandOptions& opt = {});

/// Writes the text to `path` (parent directories are created).  Errors name the path.
void write_file(const std::filesystem::path& path, const std::string& text);

struct SvgSeries
{
  std::vector<std::pair<double, double>> points;
  std::string color = "#1f77b4";
  std::string label;
};

struct SvgPanel
{
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<SvgSeries> series;
  // Horizontal bars, one row per entry (band covers).
  std::vector<std::vector<Band>> rows;
  std::vector<std::string> row_labels;
};

/// Self-contained SVG with the panels laid out side by side.
std::string render_svg(const std::vector<SvgPanel>& panels, double panel_width = 420.0,
                       double panel_height = 360.0);

} // namespace tracespec
