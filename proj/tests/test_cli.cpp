#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "cli.hpp"

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Result
{
  int code = 0;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args)
{
  std::ostringstream out, err;
  const int code = tracespec::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s)
{
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

struct TempDir
{
  fs::path path;
  TempDir()
  {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("tracespec_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& name) const { return (path / name).string(); }
};

} // namespace

TEST_CASE("bands writes one row per band and a config sidecar")
{
  TempDir dir;
  const auto r = run({"bands", "--p", "1", "--q", "2", "--k", "10", "--out", dir / "bands.csv"});
  REQUIRE(r.code == 0);
  const std::string csv = slurp(dir / "bands.csv");
  CHECK(csv.rfind("level,band_index,lo,hi\n", 0) == 0);
  CHECK(count_lines(csv) == 90);

  const auto cfg = nlohmann::json::parse(slurp(dir / "bands.config.json"));
  CHECK(cfg["command"] == "bands");
  CHECK(cfg["k"] == 10);
  CHECK(cfg["q"] == 2.0);
  CHECK(cfg["model"] == "discrete");
}

TEST_CASE("outputs are byte-identical across runs, cache states and threads")
{
  TempDir dir;
  const std::string cache = dir / "cache";
  REQUIRE(run({"bands", "--p", "1.5", "--q", "3", "--k", "9", "--out", dir / "a.csv", "--cache-dir", cache}).code == 0);
  REQUIRE(run({"bands", "--p", "1.5", "--q", "3", "--k", "9", "--out", dir / "b.csv", "--cache-dir", cache}).code == 0);
  REQUIRE(run({"bands", "--p", "1.5", "--q", "3", "--k", "9", "--out", dir / "c.csv", "--no-cache"}).code == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
  CHECK(slurp(dir / "a.csv") == slurp(dir / "c.csv"));

  for (const char* threads : {"1", "3"})
    REQUIRE(run({"convolve", "--p", "1", "--q", "2", "--p2", "1.5", "--q2", "1", "--k", "7", "--cells", "1000",
                 "--threads", threads, "--out", dir / (std::string("conv") + threads + ".csv"), "--no-cache"})
                .code == 0);
  CHECK(slurp(dir / "conv1.csv") == slurp(dir / "conv3.csv"));
  CHECK(slurp(dir / "conv1.evidence.json") == slurp(dir / "conv3.evidence.json"));
}

TEST_CASE("invalid input is rejected with a structured error")
{
  TempDir dir;
  auto r = run({"bands", "--p", "0", "--k", "5", "--out-dir", dir.path.string()});
  CHECK(r.code == 2);
  auto j = nlohmann::json::parse(r.err);
  CHECK(j["error"] == "usage");
  CHECK(j["message"].get<std::string>().find("nonzero") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "bands.csv"));

  CHECK(run({"bands", "--frobnicate"}).code == 2);
  CHECK(run({"nosuchcommand"}).code == 2);
  CHECK(run({}).code == 2);

  r = run({"bands", "--k", "40", "--out-dir", dir.path.string()});
  CHECK(r.code == 3);
  CHECK(nlohmann::json::parse(r.err)["error"] == "invalid_parameter");
  CHECK(run({"sumset", "--p2", "0"}).code == 2);
  CHECK(run({"convolve", "--cells", "8", "--out-dir", dir.path.string()}).code == 3);

  // A regular file where a directory is needed.
  std::ofstream(dir / "blocker") << "x";
  r = run({"bands", "--k", "4", "--no-cache", "--out", dir / "blocker/bands.csv"});
  CHECK(r.code == 4);
  CHECK(nlohmann::json::parse(r.err)["error"] == "filesystem");
}

TEST_CASE("config file supplies defaults and flags win")
{
  TempDir dir;
  const std::string conf = dir / "run.conf";
  std::ofstream(conf) << "# scan settings\np = 1\nq = 2\nk = 9\nout-dir = \"" << dir.path.string() << "\"\n";
  REQUIRE(run({"bands", "--config", conf, "--no-cache"}).code == 0);
  CHECK(count_lines(slurp(dir / "bands.csv")) == 56);
  REQUIRE(run({"bands", "--config", conf, "--k", "7", "--no-cache"}).code == 0);
  CHECK(count_lines(slurp(dir / "bands.csv")) == 22);
  CHECK(nlohmann::json::parse(slurp(dir / "bands.config.json"))["k"] == 7);

  std::ofstream(dir / "bad.conf") << "kk = 3\n";
  CHECK(run({"bands", "--config", dir / "bad.conf"}).code == 2);
}

TEST_CASE("cache hits, corruption and the environment override")
{
  TempDir dir;
  const std::string cache = dir / "cache";
  const std::vector<std::string> args{"bands", "--p", "1", "--q", "1", "--k", "8", "--cache-dir", cache, "--verbose"};
  auto with_out = [&](const std::string& name) {
    auto a = args;
    a.push_back("--out");
    a.push_back(dir / name);
    return run(a);
  };

  auto first = with_out("one.csv");
  REQUIRE(first.code == 0);
  CHECK(first.err.find("cache hits 0, misses 1") != std::string::npos);
  auto second = with_out("two.csv");
  CHECK(second.err.find("cache hits 1, misses 0") != std::string::npos);

  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(cache))
    entries.push_back(e.path());
  REQUIRE(entries.size() == 1);
  std::ofstream(entries[0], std::ios::trunc) << "{\"key\": \"garbage";
  auto third = with_out("three.csv");
  REQUIRE(third.code == 0);
  CHECK(third.err.find("warning: discarding corrupted cache entry") != std::string::npos);
  CHECK(slurp(dir / "one.csv") == slurp(dir / "three.csv"));
  CHECK(with_out("four.csv").err.find("cache hits 1") != std::string::npos);

  const std::string env_cache = dir / "env_cache";
  ::setenv("TRACESPEC_CACHE", env_cache.c_str(), 1);
  REQUIRE(with_out("five.csv").code == 0);
  ::unsetenv("TRACESPEC_CACHE");
  CHECK(fs::exists(env_cache));
  CHECK_FALSE(fs::is_empty(env_cache));
}

TEST_CASE("continuum curve with a self-contained SVG")
{
  TempDir dir;
  const auto r = run({"continuum-curve", "--lambda", "50", "--emin", "51", "--emax", "6000", "--samples", "500",
                      "--out", dir / "curve.csv", "--svg", dir / "curve.svg"});
  REQUIRE(r.code == 0);
  const std::string csv = slurp(dir / "curve.csv");
  CHECK(csv.rfind("E,x,y,z,invariant,dist_free_curve\n", 0) == 0);
  CHECK(count_lines(csv) == 501);
  const std::string svg = slurp(dir / "curve.svg");
  CHECK(svg.rfind("<svg", 0) == 0);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("href") == std::string::npos);
  CHECK(svg.find("<image") == std::string::npos);
  CHECK(std::count(svg.begin(), svg.end(), '\n') > 10);
  CHECK(nlohmann::json::parse(slurp(dir / "curve.config.json"))["model"] == "continuum");
}

TEST_CASE("analysis subcommands")
{
  TempDir dir;
  const std::string d = dir.path.string();

  REQUIRE(run({"thickness", "--p", "1", "--q", "2", "--k", "8", "--out-dir", d}).code == 0);
  const auto t = nlohmann::json::parse(slurp(dir / "thickness.json"));
  CHECK(t["gaps"].size() == 33);
  CHECK(t["tau"].get<double>() > 0.0);

  REQUIRE(run({"dims", "--p", "1", "--q", "2", "--k", "6", "--out-dir", d}).code == 0);
  const auto dims = nlohmann::json::parse(slurp(dir / "dims.json"));
  CHECK(dims["levels_used"] == 5);
  CHECK(dims["value"].get<double>() > 0.0);
  CHECK(dims["value"].get<double>() < 1.0);

  REQUIRE(run({"sumset", "--p", "-10", "--q", "25", "--k", "8", "--out-dir", d}).code == 0);
  CHECK(nlohmann::json::parse(slurp(dir / "sumset.json"))["verdict"] == "mixed");

  const auto dos = run({"dos", "--p", "1", "--q", "0", "--k", "10", "--out-dir", d});
  REQUIRE(dos.code == 0);
  CHECK(dos.out.find("aggregated") != std::string::npos);
  CHECK(count_lines(slurp(dir / "dos.csv")) == 90);

  REQUIRE(run({"convolve", "--p", "1", "--q", "20", "--k", "6", "--cells", "512", "--out-dir", d}).code == 0);
  const auto ev = nlohmann::json::parse(slurp(dir / "convolve.evidence.json"));
  CHECK(ev["total_mass"].get<double>() == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(count_lines(slurp(dir / "convolve.csv")) == 513);

  const auto scan = run({"scan-mixed", "--p-steps", "2", "--q-steps", "2", "--out-dir", d});
  REQUIRE(scan.code == 0);
  CHECK(count_lines(slurp(dir / "scan.csv")) == 5);
}

TEST_CASE("verify prints the invariant table")
{
  TempDir dir;
  const auto r = run({"verify", "--out-dir", dir.path.string()});
  CHECK(r.code == 0);
  std::istringstream lines(r.out);
  std::string line;
  int passes = 0;
  while (std::getline(lines, line))
    passes += line.rfind("PASS", 0) == 0;
  CHECK(passes == 5);
  CHECK(nlohmann::json::parse(slurp(dir / "verify.json")).size() == 5);
}
