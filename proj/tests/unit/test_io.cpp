#include "dyadapt/errors.hpp"
#include "dyadapt/io.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <limits>
#include <random>
#include <sstream>

using namespace dyadapt;

namespace {

std::string
error_of(auto&& fn)
{
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

ThresholdRecord
small_record()
{
  const auto cfg = make_calibration_config(1024, 4, { .reps = 300, .seed = 2, .zeta_points = 20 });
  return calibrate(cfg);
}

} // namespace

TEST_CASE("doubles round-trip through their shortest form")
{
  std::mt19937_64 gen(1);
  for (int i = 0; i < 10000; ++i) {
    double x;
    const std::uint64_t bits = gen();
    std::memcpy(&x, &bits, sizeof x);
    if (!std::isfinite(x))
      continue;
    const auto s = io::format_double(x);
    REQUIRE(std::strtod(s.c_str(), nullptr) == x);
  }
  CHECK(io::format_double(0.5) == "0.5");
  CHECK(io::format_double(1e-300) == "1e-300");
}

TEST_CASE("sample parsing")
{
  std::istringstream in("0.25\n\n  0.5  \n+1\n1e-3\n");
  CHECK(io::parse_sample(in, "s") == std::vector<double>{ 0.25, 0.5, 1.0, 0.001 });

  std::istringstream bad("0.1\n0.2\nabc\n");
  CHECK(error_of([&] { io::parse_sample(bad, "data.txt"); }).find("data.txt:3") != std::string::npos);
  std::istringstream two("0.1 0.2\n");
  CHECK_THROWS_AS(io::parse_sample(two, "s"), ConfigError);
  std::istringstream nan("nan\n");
  CHECK_THROWS_AS(io::parse_sample(nan, "s"), ConfigError);
  std::istringstream empty("");
  CHECK(io::parse_sample(empty, "s").empty());
}

TEST_CASE("density specs")
{
  std::istringstream in("# comment\n"
                        "delta 0.45\n"
                        "M 1.4\n"
                        "segment 0 1 0.48365396477444733 1 0.75 0.5\n"
                        "holder 0 0.5 1 2 0.2\n"
                        "holder 0.5 1 0.5 2 0.2\n"
                        "probe 0.75\n");
  const auto spec = io::parse_density_spec(in, "cusp");
  CHECK(spec.density.segments().size() == 1);
  CHECK(spec.density.delta() == 0.45);
  REQUIRE(spec.profile);
  CHECK(spec.profile->pieces().size() == 2);
  CHECK(spec.probes == std::vector<double>{ 0.75 });

  std::istringstream norm("delta 0.5\nM 3\nnormalize\nsegment 0 1 2 0 0 1\n");
  CHECK(io::parse_density_spec(norm, "n").density.eval(0.5) == doctest::Approx(1.0));

  std::istringstream unknown("delta 0.5\nM 2\nwiggle 3\n");
  CHECK(error_of([&] { io::parse_density_spec(unknown, "x.spec"); }).find("x.spec:3") != std::string::npos);
  std::istringstream arity("delta 0.5\nM 2\nsegment 0 1 1\n");
  CHECK(error_of([&] { io::parse_density_spec(arity, "x.spec"); }).find("x.spec:3") != std::string::npos);
  std::istringstream missing("M 2\nsegment 0 1 1 0 0 1\n");
  CHECK_THROWS_AS(io::parse_density_spec(missing, "x"), ConfigError);
  std::istringstream probe("delta 1\nM 1\nsegment 0 1 1 0 0 1\nprobe 1.5\n");
  CHECK_THROWS_AS(io::parse_density_spec(probe, "x"), ConfigError);
}

TEST_CASE("corpus specs load")
{
  const std::string dir = DYADAPT_CORPUS_DIR;
  for (const char* name : { "uniform.spec", "cusp.spec", "bumps.spec" }) {
    const auto spec = io::read_density_spec(dir + "/" + name);
    CHECK(spec.density.total_mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(spec.profile.has_value());
    CHECK_FALSE(spec.probes.empty());
  }
}

TEST_CASE("threshold records round-trip")
{
  const auto rec = small_record();
  std::ostringstream out;
  io::write_threshold_record(out, rec);
  std::istringstream in(out.str());
  const auto back = io::parse_threshold_record(in, "rec");
  CHECK(back.zeta_n == rec.zeta_n);
  CHECK(back.zeta_index == rec.zeta_index);
  CHECK(back.bound == rec.bound);
  CHECK(back.config.zeta_grid == rec.config.zeta_grid);
  CHECK(back.config.p_grid == rec.config.p_grid);
  CHECK(back.config.seed == rec.config.seed);
  REQUIRE(back.achieved.size() == rec.achieved.size());
  for (std::size_t i = 0; i < rec.achieved.size(); ++i) {
    CHECK(back.achieved[i].p == rec.achieved[i].p);
    CHECK(back.achieved[i].lhs.mean == rec.achieved[i].lhs.mean);
    CHECK(back.achieved[i].lhs.std_error == rec.achieved[i].lhs.std_error);
  }
  std::ostringstream again;
  io::write_threshold_record(again, back);
  CHECK(again.str() == out.str());
}

TEST_CASE("corrupted threshold records are rejected")
{
  const auto rec = small_record();
  std::ostringstream out;
  io::write_threshold_record(out, rec);
  const std::string text = out.str();

  auto replace_line = [&](const std::string& key, const std::string& line) {
    std::istringstream in(text);
    std::string l;
    std::string res;
    while (std::getline(in, l))
      res += (l.rfind(key, 0) == 0 ? line : l) + "\n";
    return res;
  };
  auto parse = [](const std::string& s) {
    std::istringstream in(s);
    return io::parse_threshold_record(in, "rec");
  };
  CHECK_THROWS_AS(parse(replace_line("zeta_n =", "zeta_n = 123")), ConfigError);
  CHECK_THROWS_AS(parse(replace_line("bound =", "bound = 1")), ConfigError);
  CHECK_THROWS_AS(parse(replace_line("format =", "format = other/2")), ConfigError);
  CHECK_THROWS_AS(parse(replace_line("j_max =", "j_max = 9")), ConfigError);
  CHECK_THROWS_AS(parse(replace_line("level,p_index", "level,p")), ConfigError);
  // an achieved row above the bound
  CHECK_THROWS_AS(parse(replace_line("0,0,", "0,0," + io::format_double(rec.achieved[0].p) + ",1,0")),
                  ConfigError);
  // a missing row (the last line)
  CHECK_THROWS_AS(parse(text.substr(0, text.rfind('\n', text.size() - 2) + 1)), ConfigError);
  const auto msg = error_of([&] { parse(replace_line("reps =", "reps = many")); });
  CHECK(msg.find("rec:") != std::string::npos);
}

TEST_CASE("estimate and metric tables")
{
  SelectionMap sel{ 0, 2, { 0, 1, 2, 2 } };
  std::ostringstream out;
  io::write_estimate_csv(out, sel, { 1.0, 0.5, 1.25, 1.25 });
  CHECK(out.str() == "bin_index,x_left,x_right,jhat,fhat\n"
                     "0,0,0.25,0,1\n"
                     "1,0.25,0.5,1,0.5\n"
                     "2,0.5,0.75,2,1.25\n"
                     "3,0.75,1,2,1.25\n");
  CHECK_THROWS(io::write_estimate_csv(out, sel, { 1.0 }));

  const std::vector<MetricRecord> recs{ { 1024, 0, "a", 0.1 }, { 1024, 1, "a", 1.0 / 3.0 } };
  std::ostringstream m;
  io::write_metric_csv(m, recs);
  std::istringstream in(m.str());
  const auto back = io::parse_metric_csv(in, "m");
  REQUIRE(back.size() == 2);
  CHECK(back[1].value == 1.0 / 3.0);
  CHECK(back[1].metric == "a");
  std::istringstream bad("n,replicate,metric,value\n1024,x,a,1\n");
  CHECK(error_of([&] { io::parse_metric_csv(bad, "m.csv"); }).find("m.csv:2") != std::string::npos);

  MetricSummary s;
  s.metric = "a";
  s.n = 1024;
  s.reps = 2;
  s.slope = std::numeric_limits<double>::quiet_NaN();
  std::ostringstream sum;
  io::write_summary_csv(sum, { s });
  CHECK(sum.str() == "metric,n,reps,mean,std_error,p50,p95,max,slope\na,1024,2,0,0,0,0,0,\n");
}

TEST_CASE("atomic writes replace the target")
{
  const auto dir = std::filesystem::temp_directory_path() / "dyadapt_io_test";
  std::filesystem::create_directories(dir);
  const auto path = (dir / "out.txt").string();
  io::atomic_write(path, "first\n");
  io::atomic_write(path, "second\n");
  CHECK(io::read_file(path) == "second\n");
  CHECK_FALSE(std::filesystem::exists(path + ".tmp"));
  CHECK_THROWS(io::read_file((dir / "missing").string()));
  std::filesystem::remove_all(dir);
}
