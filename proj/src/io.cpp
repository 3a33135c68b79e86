#include "tracespec/io.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace tracespec {

namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a(const std::string& s)
{
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex(std::uint64_t v)
{
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string fmt(const char* spec, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void require(bool ok, const std::string& what)
{
  if (!ok)
    throw std::invalid_argument(what);
}

} // namespace

std::string format_double(double v)
{
  return fmt("%.17g", v);
}

ModelParams RunConfig::first_model() const
{
  if (model == "continuum")
    return Continuum{lambda};
  return Discrete{p, q};
}

ModelParams RunConfig::second_model() const
{
  if (model == "continuum")
    return Continuum{lambda2.value_or(lambda)};
  return Discrete{p2.value_or(p), q2.value_or(q)};
}

std::optional<Window> RunConfig::window() const
{
  if (!window_lo && !window_hi)
    return std::nullopt;
  return Window{window_lo.value_or(-INFINITY), window_hi.value_or(INFINITY)};
}

void RunConfig::validate() const
{
  require(model == "discrete" || model == "continuum", "model must be discrete or continuum");
  require(std::isfinite(p) && p != 0.0, "p must be finite and nonzero");
  require(!p2 || (std::isfinite(*p2) && *p2 != 0.0), "p2 must be finite and nonzero");
  require(std::isfinite(q) && (!q2 || std::isfinite(*q2)), "q must be finite");
  require(std::isfinite(lambda) && lambda > 0.0, "lambda must be positive");
  require(!lambda2 || (std::isfinite(*lambda2) && *lambda2 > 0.0), "lambda2 must be positive");
  require(k >= 1 && k <= 18, "k must lie in [1, 18]");
  require(k_max == 0 || (k_max >= k && k_max <= 18), "k-max must lie in [k, 18]");
  require(std::isfinite(e_min) && std::isfinite(e_max) && e_min < e_max, "emin must be below emax");
  if (auto w = window())
    require(w->lo < w->hi, "window-lo must be below window-hi");
  require(coverage_tol >= 0.0, "coverage-tol must be nonnegative");
  require(cantor_bound > 0.0 && cantor_bound <= 1.0, "cantor-bound must lie in (0, 1]");
  require(delta > 0.0 && accum_exclusion >= 0.0, "delta must be positive");
  require(cells >= 16, "cells must be at least 16");
  require(samples >= 2, "samples must be at least 2");
  require(p_steps >= 1 && q_steps >= 1 && p_min <= p_max && q_min <= q_max, "invalid scan grid");
  require(threads >= 0, "threads must be nonnegative");
}

nlohmann::json RunConfig::to_json() const
{
  nlohmann::ordered_json j;
  j["command"] = command;
  j["model"] = model;
  j["p"] = p;
  j["q"] = q;
  j["lambda"] = lambda;
  j["p2"] = p2.value_or(p);
  j["q2"] = q2.value_or(q);
  j["lambda2"] = lambda2.value_or(lambda);
  j["k"] = k;
  j["k_max"] = k_max;
  j["emin"] = e_min;
  j["emax"] = e_max;
  j["window_lo"] = window_lo ? nlohmann::json(*window_lo) : nlohmann::json();
  j["window_hi"] = window_hi ? nlohmann::json(*window_hi) : nlohmann::json();
  j["coverage_tol"] = coverage_tol;
  j["cantor_bound"] = cantor_bound;
  j["delta"] = delta;
  j["accum_exclusion"] = accum_exclusion;
  j["cells"] = cells;
  j["samples"] = samples;
  j["p_min"] = p_min;
  j["p_max"] = p_max;
  j["p_steps"] = p_steps;
  j["q_min"] = q_min;
  j["q_max"] = q_max;
  j["q_steps"] = q_steps;
  j["out"] = out;
  j["svg"] = svg;
  j["out_dir"] = out_dir;
  j["cache_dir"] = cache_dir;
  j["use_cache"] = use_cache;
  j["threads"] = threads;
  j["version"] = kVersionTag;
  return nlohmann::json::parse(j.dump());
}

fs::path resolve_cache_dir(const RunConfig& cfg)
{
  if (const char* env = std::getenv("TRACESPEC_CACHE"); env && *env)
    return env;
  if (!cfg.cache_dir.empty())
    return cfg.cache_dir;
  return fs::path(cfg.out_dir) / ".tracespec-cache";
}

std::string CacheKey::canonical() const
{
  std::string s = "kind=" + kind + ";params=";
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i)
      s += ',';
    s += fmt("%.12g", params[i] == 0.0 ? 0.0 : params[i]);
  }
  s += ";level=" + std::to_string(level) + ";op=" + op + ";version=" + version;
  return s;
}

std::string CacheKey::hash() const
{
  return hex(fnv1a(canonical()));
}

Cache::Cache(fs::path dir, std::ostream* log) : dir_(std::move(dir)), log_(log) {}

fs::path Cache::entry_path(const CacheKey& key) const
{
  return dir_ / (key.hash() + ".json");
}

std::optional<nlohmann::json> Cache::get(const CacheKey& key)
{
  const fs::path path = entry_path(key);
  std::ifstream in(path);
  if (!in) {
    ++misses;
    return std::nullopt;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  in.close();
  std::string problem;
  try {
    const auto entry = nlohmann::json::parse(ss.str());
    if (entry.at("key").get<std::string>() != key.canonical())
      problem = "key mismatch";
    else if (entry.at("checksum").get<std::string>() != hex(fnv1a(entry.at("payload").dump())))
      problem = "checksum mismatch";
    else {
      ++hits;
      return entry.at("payload");
    }
  } catch (const std::exception& e) {
    problem = e.what();
  }
  if (log_)
    *log_ << "warning: discarding corrupted cache entry " << path.string() << " (" << problem << ")\n";
  std::error_code ec;
  fs::remove(path, ec);
  ++misses;
  return std::nullopt;
}

void Cache::put(const CacheKey& key, const nlohmann::json& payload)
{
  std::lock_guard lock(write_);
  nlohmann::json entry;
  entry["key"] = key.canonical();
  entry["payload"] = payload;
  entry["checksum"] = hex(fnv1a(payload.dump()));
  const fs::path path = entry_path(key);
  const fs::path tmp = path.string() + ".tmp";
  write_file(tmp, entry.dump());
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec)
    throw std::runtime_error("cannot write cache entry " + path.string() + ": " + ec.message());
}

nlohmann::json bands_to_json(const BandSet& bs)
{
  nlohmann::json j;
  j["level"] = bs.level();
  j["origin"] = bs.origin();
  j["merged"] = bs.merged();
  j["clipped_low"] = bs.clipped_low;
  j["clipped_high"] = bs.clipped_high;
  auto& arr = j["bands"] = nlohmann::json::array();
  for (const Band& b : bs.bands())
    arr.push_back({b.lo, b.hi});
  return j;
}

BandSet bands_from_json(const nlohmann::json& j)
{
  std::vector<Band> bands;
  for (const auto& b : j.at("bands"))
    bands.push_back({b.at(0).get<double>(), b.at(1).get<double>()});
  BandSet bs(std::nullopt, j.at("level").get<int>(), std::move(bands), j.at("merged").get<bool>(),
             j.at("origin").get<double>());
  bs.clipped_low = j.at("clipped_low").get<bool>();
  bs.clipped_high = j.at("clipped_high").get<bool>();
  return bs;
}

BandSet cached_bands(Cache* cache, const ModelParams& model, int k, const BandOptions& opt)
{
  if (!cache)
    return compute_bands(model, k, opt);
  CacheKey key;
  if (model.is_discrete()) {
    key.kind = "discrete";
    key.params = {model.discrete().p, model.discrete().q};
  } else {
    key.kind = "continuum";
    key.params = {model.continuum().lambda, opt.e_min, opt.e_max, opt.merge_tol, opt.edge_tol};
  }
  key.level = k;
  key.op = "bands";
  if (auto hit = cache->get(key)) {
    try {
      const BandSet raw = bands_from_json(*hit);
      BandSet bs(model, raw.level(), raw.bands(), raw.merged(), raw.origin());
      bs.clipped_low = raw.clipped_low;
      bs.clipped_high = raw.clipped_high;
      return bs;
    } catch (const std::exception&) {
      // fall through to recompute
    }
  }
  const BandSet bs = compute_bands(model, k, opt);
  cache->put(key, bands_to_json(bs));
  return bs;
}

void write_file(const fs::path& path, const std::string& text)
{
  std::error_code ec;
  if (path.has_parent_path())
    fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out)
    throw std::runtime_error("failed writing " + path.string());
}

std::string render_svg(const std::vector<SvgPanel>& panels, double panel_width, double panel_height)
{
  const double margin = 48.0;
  std::ostringstream os;
  const double total_w = panel_width * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt("%.0f", total_w) << "\" height=\""
     << fmt("%.0f", panel_height) << "\" viewBox=\"0 0 " << fmt("%.0f", total_w) << ' '
     << fmt("%.0f", panel_height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const SvgPanel& panel = panels[pi];
    const double x0 = panel_width * static_cast<double>(pi) + margin;
    const double y0 = 28.0;
    const double w = panel_width - 1.5 * margin;
    const double h = panel_height - y0 - margin;

    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    for (const auto& s : panel.series)
      for (auto [x, y] : s.points)
        if (std::isfinite(x) && std::isfinite(y)) {
          xmin = std::min(xmin, x);
          xmax = std::max(xmax, x);
          ymin = std::min(ymin, y);
          ymax = std::max(ymax, y);
        }
    for (const auto& row : panel.rows)
      for (const Band& b : row) {
        xmin = std::min(xmin, b.lo);
        xmax = std::max(xmax, b.hi);
      }
    if (!panel.rows.empty()) {
      ymin = 0.0;
      ymax = static_cast<double>(panel.rows.size());
    }
    if (!(xmax > xmin)) {
      xmin -= 1.0;
      xmax += 1.0;
    }
    if (!(ymax > ymin)) {
      ymin -= 1.0;
      ymax += 1.0;
    }
    auto sx = [&](double x) { return x0 + (x - xmin) / (xmax - xmin) * w; };
    auto sy = [&](double y) { return y0 + h - (y - ymin) / (ymax - ymin) * h; };

    os << "<g>\n";
    os << "<text x=\"" << fmt("%.2f", x0 + w / 2) << "\" y=\"16\" text-anchor=\"middle\">" << panel.title
       << "</text>\n";
    os << "<rect x=\"" << fmt("%.2f", x0) << "\" y=\"" << fmt("%.2f", y0) << "\" width=\"" << fmt("%.2f", w)
       << "\" height=\"" << fmt("%.2f", h) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << fmt("%.2f", x0) << "\" y=\"" << fmt("%.2f", y0 + h + 14) << "\">" << fmt("%.6g", xmin)
       << "</text>\n";
    os << "<text x=\"" << fmt("%.2f", x0 + w) << "\" y=\"" << fmt("%.2f", y0 + h + 14)
       << "\" text-anchor=\"end\">" << fmt("%.6g", xmax) << "</text>\n";
    os << "<text x=\"" << fmt("%.2f", x0 + w / 2) << "\" y=\"" << fmt("%.2f", y0 + h + 30)
       << "\" text-anchor=\"middle\">" << panel.x_label << "</text>\n";
    if (panel.rows.empty()) {
      os << "<text x=\"" << fmt("%.2f", x0 - 4) << "\" y=\"" << fmt("%.2f", y0 + 8) << "\" text-anchor=\"end\">"
         << fmt("%.4g", ymax) << "</text>\n";
      os << "<text x=\"" << fmt("%.2f", x0 - 4) << "\" y=\"" << fmt("%.2f", y0 + h) << "\" text-anchor=\"end\">"
         << fmt("%.4g", ymin) << "</text>\n";
    }
    os << "<text transform=\"translate(" << fmt("%.2f", x0 - 34) << ',' << fmt("%.2f", y0 + h / 2)
       << ") rotate(-90)\" text-anchor=\"middle\">" << panel.y_label << "</text>\n";

    for (std::size_t r = 0; r < panel.rows.size(); ++r) {
      const double top = sy(static_cast<double>(r) + 0.8);
      const double bottom = sy(static_cast<double>(r) + 0.2);
      for (const Band& b : panel.rows[r]) {
        const double bw = std::max(sx(b.hi) - sx(b.lo), 0.5);
        os << "<rect x=\"" << fmt("%.3f", sx(b.lo)) << "\" y=\"" << fmt("%.3f", top) << "\" width=\""
           << fmt("%.3f", bw) << "\" height=\"" << fmt("%.3f", bottom - top) << "\" fill=\"#1f77b4\"/>\n";
      }
      if (r < panel.row_labels.size())
        os << "<text x=\"" << fmt("%.2f", x0 - 4) << "\" y=\"" << fmt("%.2f", 0.5 * (top + bottom) + 4)
           << "\" text-anchor=\"end\">" << panel.row_labels[r] << "</text>\n";
    }
    for (const auto& s : panel.series) {
      os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"0.8\" points=\"";
      bool first = true;
      for (auto [x, y] : s.points) {
        if (!std::isfinite(x) || !std::isfinite(y))
          continue;
        os << (first ? "" : " ") << fmt("%.2f", sx(x)) << ',' << fmt("%.2f", sy(y));
        first = false;
      }
      os << "\"/>\n";
    }
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

} // namespace tracespec
