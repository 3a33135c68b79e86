#include "cli.hpp"

#include "tracespec/checks.hpp"
#include "tracespec/dos.hpp"
#include "tracespec/io.hpp"
#include "tracespec/sumset.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>

namespace tracespec::cli {

namespace fs = std::filesystem;

namespace {

struct Context
{
  RunConfig cfg;
  std::ostream& out;
  std::ostream& err;
  std::unique_ptr<Cache> cache;
  bool checks_failed = false;

  fs::path output(const std::string& default_name) const
  {
    return cfg.out.empty() ? fs::path(cfg.out_dir) / default_name : fs::path(cfg.out);
  }

  fs::path beside(const fs::path& main, const std::string& suffix) const
  {
    fs::path p = main;
    p.replace_extension();
    return p.string() + suffix;
  }

  BandSet bands(const ModelParams& m, int k) const
  {
    BandOptions opt;
    opt.e_min = cfg.e_min;
    opt.e_max = cfg.e_max;
    return cached_bands(cache.get(), m, k, opt);
  }

  std::vector<BandSet> levels(const ModelParams& m, int k_first, int k_last) const
  {
    std::vector<BandSet> out;
    for (int k = k_first; k <= k_last; ++k)
      out.push_back(bands(m, k));
    return out;
  }

  void note(const std::string& line) const { out << line << '\n'; }
};

std::string csv_line(std::initializer_list<double> values)
{
  std::string s;
  for (double v : values) {
    if (!s.empty())
      s += ',';
    s += format_double(v);
  }
  return s + '\n';
}

std::string dump(const nlohmann::json& j)
{
  return j.dump(2) + '\n';
}

SvgPanel band_panel(const std::vector<BandSet>& sets, const std::string& title)
{
  SvgPanel panel;
  panel.title = title;
  panel.x_label = "E";
  panel.y_label = "level";
  for (const BandSet& bs : sets) {
    std::vector<Band> row;
    for (const Band& b : bs.bands())
      row.push_back({bs.origin() + b.lo, bs.origin() + b.hi});
    panel.rows.push_back(std::move(row));
    panel.row_labels.push_back(std::to_string(bs.level()));
  }
  return panel;
}

fs::path cmd_bands(Context& c)
{
  const int k_last = c.cfg.k_max ? c.cfg.k_max : c.cfg.k;
  const auto sets = c.levels(c.cfg.first_model(), c.cfg.k, k_last);
  std::ostringstream csv;
  write_bands_csv(csv, sets);
  const fs::path path = c.output("bands.csv");
  write_file(path, csv.str());
  std::size_t rows = 0;
  for (const auto& s : sets)
    rows += s.size();
  if (!c.cfg.svg.empty())
    write_file(c.cfg.svg, render_svg({band_panel(sets, c.cfg.first_model().describe())}, 720.0, 60.0 + 40.0 * sets.size()));
  c.note("bands: " + std::to_string(rows) + " bands -> " + path.string());
  return path;
}

nlohmann::json thickness_json(const ThicknessReport& t)
{
  nlohmann::json j;
  j["tau"] = std::isfinite(t.tau) ? nlohmann::json(t.tau) : nlohmann::json("inf");
  j["tau_untruncated"] = std::isfinite(t.tau_untruncated) ? nlohmann::json(t.tau_untruncated) : nlohmann::json("inf");
  j["truncated"] = t.truncated;
  auto& arr = j["gaps"] = nlohmann::json::array();
  for (const auto& r : t.ratios)
    arr.push_back({{"lo", r.gap.lo}, {"hi", r.gap.hi}, {"left_bridge", r.left_bridge},
                   {"right_bridge", r.right_bridge}, {"ratio", r.ratio},
                   {"truncated", r.left_truncated || r.right_truncated}});
  return j;
}

fs::path cmd_thickness(Context& c)
{
  const BandSet bs = c.bands(c.cfg.first_model(), c.cfg.k);
  const auto w = c.cfg.window();
  const ThicknessReport t = w ? local_thickness(bs, {w->lo - bs.origin(), w->hi - bs.origin()}) : thickness(bs);
  nlohmann::json j = thickness_json(t);
  j["level"] = c.cfg.k;
  j["bands"] = bs.size();
  const fs::path path = c.output("thickness.json");
  write_file(path, dump(j));
  c.note("thickness: tau = " + format_double(t.tau) + " -> " + path.string());
  return path;
}

fs::path cmd_dims(Context& c)
{
  const int k_last = c.cfg.k_max ? c.cfg.k_max : c.cfg.k + 4;
  const auto sets = c.levels(c.cfg.first_model(), c.cfg.k, k_last);
  Window w{sets.front().min(), sets.front().max()};
  if (auto cw = c.cfg.window())
    w = {std::max(cw->lo, sets.front().origin() + w.lo) - sets.front().origin(),
         std::min(cw->hi, sets.front().origin() + w.hi) - sets.front().origin()};
  const DimensionEstimate d = box_dimension(sets, w);
  nlohmann::json j;
  j["value"] = d.value;
  j["raw_slope"] = d.raw_slope;
  j["residual"] = d.residual;
  j["levels_used"] = d.levels_used;
  j["log_inv_scales"] = d.log_inv_scales;
  j["log_counts"] = d.log_counts;
  j["dyadic_fallback"] = d.dyadic_fallback;
  j["degenerate"] = d.degenerate;
  j["window"] = {w.lo, w.hi};
  const fs::path path = c.output("dims.json");
  write_file(path, dump(j));
  c.note("dims: box dimension " + format_double(d.value) + " -> " + path.string());
  return path;
}

fs::path cmd_sumset(Context& c)
{
  const RegimeReport r = [&] {
    if (c.cfg.model == "continuum") {
      ContinuumCheckOptions opt;
      opt.delta = c.cfg.delta;
      opt.accum_exclusion = c.cfg.accum_exclusion;
      opt.cantor_bound = c.cfg.cantor_bound;
      return continuum_mixed_check(c.cfg.lambda, c.cfg.lambda2.value_or(c.cfg.lambda), c.cfg.k, c.cfg.e_max, opt);
    }
    RegimeOptions opt;
    opt.coverage_tol = c.cfg.coverage_tol;
    opt.cantor_bound = c.cfg.cantor_bound;
    return classify_pair(c.cfg.first_model(), c.cfg.second_model(), c.cfg.k, opt);
  }();
  const fs::path path = c.output("sumset.json");
  write_file(path, dump(r.to_json()));
  c.note("sumset: verdict " + to_string(r.verdict) + (r.stable ? "" : " (unstable)") + " -> " + path.string());
  return path;
}

fs::path cmd_dos(Context& c)
{
  const BandMeasure m = dos_from_bands(c.bands(c.cfg.first_model(), c.cfg.k));
  std::string csv = "lo,hi,weight,density\n";
  for (const auto& p : m.pieces)
    csv += csv_line({p.lo, p.hi, p.weight, p.hi > p.lo ? p.weight / (p.hi - p.lo) : INFINITY});
  const fs::path path = c.output("dos.csv");
  write_file(path, csv);
  c.note("dos: " + std::to_string(m.pieces.size()) + " pieces" + (m.aggregated ? " (aggregated)" : "") +
         " -> " + path.string());
  return path;
}

std::vector<IntervalUnion> sum_covers(const Context& c, const ModelParams& a, const ModelParams& b, int k)
{
  const auto la = c.levels(a, k, k + 3);
  const auto lb = c.levels(b, k, k + 3);
  std::vector<IntervalUnion> covers;
  for (int j = 0; j < 3; ++j) {
    auto shift = [](const BandSet& bs) {
      std::vector<Band> v;
      for (const Band& x : bs.bands())
        v.push_back({bs.origin() + x.lo, bs.origin() + x.hi});
      return IntervalUnion(v);
    };
    covers.push_back(minkowski_sum(shift(level_cover(la[j], la[j + 1])), shift(level_cover(lb[j], lb[j + 1]))));
  }
  return covers;
}

fs::path cmd_convolve(Context& c)
{
  const ModelParams a = c.cfg.first_model(), b = c.cfg.second_model();
  const BandMeasure ma = dos_from_bands(c.bands(a, c.cfg.k));
  const BandMeasure mb = dos_from_bands(c.bands(b, c.cfg.k));
  const ConvolutionDensity conv = convolve(ma, mb, c.cfg.cells, c.cfg.threads);
  std::ostringstream csv;
  write_measure_csv(csv, conv);
  const fs::path path = c.output("convolve.csv");
  write_file(path, csv.str());
  const AcScEvidence ev = ac_sc_evidence(conv, sum_covers(c, a, b, c.cfg.k));
  nlohmann::json j = ev.to_json();
  j["total_mass"] = conv.total_mass();
  write_file(c.beside(path, ".evidence.json"), dump(j));
  if (!c.cfg.svg.empty()) {
    SvgPanel panel;
    panel.title = "convolution density";
    panel.x_label = "E";
    panel.y_label = "density";
    SvgSeries s;
    for (std::size_t i = 0; i < conv.masses.size(); ++i)
      s.points.push_back({conv.lo + conv.width * (static_cast<double>(i) + 0.5), conv.density(i)});
    panel.series.push_back(std::move(s));
    write_file(c.cfg.svg, render_svg({panel}, 720.0, 360.0));
  }
  c.note("convolve: mass " + format_double(conv.total_mass()) + ", thin " + format_double(ev.mass_on_thin) +
         ", bounded " + format_double(ev.density_bounded_mass) + " -> " + path.string());
  return path;
}

fs::path cmd_scan(Context& c)
{
  ScanGrid g;
  g.p_min = c.cfg.p_min;
  g.p_max = c.cfg.p_max;
  g.p_steps = c.cfg.p_steps;
  g.q_min = c.cfg.q_min;
  g.q_max = c.cfg.q_max;
  g.q_steps = c.cfg.q_steps;
  g.k = c.cfg.k;
  g.threads = c.cfg.threads;
  const auto scan = scan_grid(g);
  std::ostringstream csv;
  write_scan_csv(csv, scan);
  const fs::path path = c.output("scan.csv");
  write_file(path, csv.str());
  const auto hits = candidates(scan);
  c.note("scan-mixed: " + std::to_string(hits.size()) + " candidates of " + std::to_string(scan.size()) +
         " points -> " + path.string());
  for (const auto& h : hits)
    c.note("  candidate p=" + format_double(h.p) + " q=" + format_double(h.q) + " tau=" +
           format_double(h.tau_local) + " dim=" + format_double(h.dim_local));
  return path;
}

fs::path cmd_curve(Context& c)
{
  const double lambda = c.cfg.lambda;
  const std::size_t n = c.cfg.samples;
  std::string csv = "E,x,y,z,invariant,dist_free_curve\n";
  SvgSeries xy, xz, yz;
  double max_dist = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // The curve oscillates with sqrt E, so sample uniformly in sqrt E when possible.
    const double f = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    double e = c.cfg.e_min + (c.cfg.e_max - c.cfg.e_min) * f;
    if (c.cfg.e_min >= 0.0) {
      const double t = std::sqrt(c.cfg.e_min) + (std::sqrt(c.cfg.e_max) - std::sqrt(c.cfg.e_min)) * f;
      e = t * t;
    }
    const TracePoint pt = continuum_curve(lambda, e);
    const double d = distance_to_free_curve(pt);
    max_dist = std::max(max_dist, d);
    csv += csv_line({e, pt.x, pt.y, pt.z, fricke_vogt(pt), d});
    xy.points.push_back({pt.x, pt.y});
    xz.points.push_back({pt.x, pt.z});
    yz.points.push_back({pt.y, pt.z});
  }
  const fs::path path = c.output("curve.csv");
  write_file(path, csv);
  if (!c.cfg.svg.empty()) {
    std::vector<SvgPanel> panels(3);
    const char* names[3][2] = {{"x", "y"}, {"x", "z"}, {"y", "z"}};
    SvgSeries* series[3] = {&xy, &xz, &yz};
    for (int i = 0; i < 3; ++i) {
      panels[i].title = std::string(names[i][0]) + "-" + names[i][1] + " projection";
      panels[i].x_label = names[i][0];
      panels[i].y_label = names[i][1];
      panels[i].series.push_back(*series[i]);
    }
    write_file(c.cfg.svg, render_svg(panels));
  }
  c.note("continuum-curve: " + std::to_string(n) + " samples, max distance to the free curve " +
         format_double(max_dist) + " -> " + path.string());
  return path;
}

fs::path cmd_verify(Context& c)
{
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : invariant_suite()) {
    c.note(format_check(r));
    j.push_back({{"name", r.name}, {"pass", r.pass}, {"measured", r.measured}, {"tolerance", r.tolerance},
                 {"detail", r.detail}});
    if (!r.pass)
      c.checks_failed = true;
  }
  const fs::path path = c.output("verify.json");
  write_file(path, dump(j));
  return path;
}

int fail(std::ostream& err, int code, const std::string& kind, const std::string& message)
{
  nlohmann::json j;
  j["error"] = kind;
  j["message"] = message;
  err << j.dump() << '\n';
  return code;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  RunConfig cfg;
  CLI::App app{"Spectra of Fibonacci Hamiltonians and their square sums", "tracespec"};
  app.set_config("--config", "", "flat key = value file; command-line flags win");
  app.fallthrough();
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.require_subcommand(1);

  const auto nonzero = CLI::Validator(
      [](std::string& s) {
        try {
          return std::stod(s) == 0.0 ? std::string("p must be nonzero") : std::string();
        } catch (const std::exception&) {
          return std::string("not a number: ") + s;
        }
      },
      "NONZERO");

  app.add_option("--model", cfg.model, "discrete or continuum")->check(CLI::IsMember({"discrete", "continuum"}));
  app.add_option("--p", cfg.p, "off-diagonal coupling p (nonzero)")->check(nonzero);
  app.add_option("--q", cfg.q, "diagonal coupling q");
  app.add_option("--lambda", cfg.lambda, "continuum coupling; implies --model continuum unless set");
  app.add_option("--p2", cfg.p2, "second operator p (sumset, convolve)")->check(nonzero);
  app.add_option("--q2", cfg.q2, "second operator q");
  app.add_option("--lambda2", cfg.lambda2, "second operator lambda");
  app.add_option("--k", cfg.k, "approximant level");
  app.add_option("--k-max", cfg.k_max, "last level for multi-level commands");
  app.add_option("--emin", cfg.e_min, "lower energy");
  app.add_option("--emax", cfg.e_max, "upper energy");
  app.add_option("--window-lo", cfg.window_lo, "analysis window lower end");
  app.add_option("--window-hi", cfg.window_hi, "analysis window upper end");
  app.add_option("--coverage-tol", cfg.coverage_tol, "interval coverage tolerance");
  app.add_option("--cantor-bound", cfg.cantor_bound, "dimension-sum bound accepted as Cantor");
  app.add_option("--delta", cfg.delta, "distance to the period-6 orbit counted as near");
  app.add_option("--accum-exclusion", cfg.accum_exclusion, "exclusion radius around (1,1,1), (-1,-1,1)");
  app.add_option("--cells", cfg.cells, "convolution grid cells");
  app.add_option("--samples", cfg.samples, "curve samples");
  app.add_option("--p-min", cfg.p_min);
  app.add_option("--p-max", cfg.p_max);
  app.add_option("--p-steps", cfg.p_steps);
  app.add_option("--q-min", cfg.q_min);
  app.add_option("--q-max", cfg.q_max);
  app.add_option("--q-steps", cfg.q_steps);
  app.add_option("--out", cfg.out, "output file");
  app.add_option("--svg", cfg.svg, "SVG plot file");
  app.add_option("--out-dir", cfg.out_dir, "output directory");
  app.add_option("--cache-dir", cfg.cache_dir, "cache directory (TRACESPEC_CACHE overrides)");
  app.add_flag("!--no-cache", cfg.use_cache, "disable the result cache");
  app.add_option("--threads", cfg.threads, "worker threads (0: all cores)");
  app.add_flag("--verbose", cfg.verbose, "timing and cache diagnostics on stderr");

  using Handler = std::function<fs::path(Context&)>;
  const std::vector<std::tuple<std::string, std::string, Handler>> commands{
      {"bands", "band edges of approximant levels (CSV)", cmd_bands},
      {"thickness", "Newhouse thickness of a level, optionally in a window (JSON)", cmd_thickness},
      {"dims", "box-counting dimension across levels (JSON)", cmd_dims},
      {"sumset", "interval/Cantor classification of the sum of two spectra (JSON)", cmd_sumset},
      {"dos", "density-of-states approximant (CSV)", cmd_dos},
      {"convolve", "convolution of two density-of-states measures (CSV + evidence JSON)", cmd_convolve},
      {"scan-mixed", "parameter scan for mixed interval-Cantor sums (CSV)", cmd_scan},
      {"continuum-curve", "curve of initial conditions of the continuum model (CSV, SVG)", cmd_curve},
      {"verify", "invariant suite with a pass/fail table", cmd_verify},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help, fn] : commands)
    subs.push_back(app.add_subcommand(name, help));

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return fail(err, 2, "usage", e.what());
  }

  if (app.count("--lambda") && !app.count("--model"))
    cfg.model = "continuum";
  std::size_t which = 0;
  for (; which < subs.size(); ++which)
    if (subs[which]->parsed())
      break;
  cfg.command = std::get<0>(commands[which]);

  const auto start = std::chrono::steady_clock::now();
  try {
    cfg.validate();
    Context c{cfg, out, err, nullptr};
    if (cfg.use_cache)
      c.cache = std::make_unique<Cache>(resolve_cache_dir(cfg), &err);
    const fs::path main = std::get<2>(commands[which])(c);
    write_file(c.beside(main, ".config.json"), dump(cfg.to_json()));

    if (cfg.verbose) {
      const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      err << "elapsed " << ms << " ms";
      if (c.cache)
        err << ", cache hits " << c.cache->hits << ", misses " << c.cache->misses;
      err << '\n';
    }
    return c.checks_failed ? 1 : 0;
  } catch (const std::invalid_argument& e) {
    return fail(err, 3, "invalid_parameter", e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(err, 4, "filesystem", e.what());
  } catch (const std::runtime_error& e) {
    const std::string what = e.what();
    const bool io = what.find("cannot open") != std::string::npos || what.find("failed writing") != std::string::npos ||
                    what.find("cannot write") != std::string::npos;
    return fail(err, io ? 4 : 1, io ? "filesystem" : "internal", what);
  } catch (const std::exception& e) {
    return fail(err, 1, "internal", e.what());
  }
}

} // namespace tracespec::cli
