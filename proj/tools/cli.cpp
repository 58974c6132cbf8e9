#include "cli.hpp"

#include "dyadapt/calibration.hpp"
#include "dyadapt/dyadic.hpp"
#include "dyadapt/errors.hpp"
#include "dyadapt/experiments.hpp"
#include "dyadapt/io.hpp"
#include "dyadapt/lepski.hpp"
#include "dyadapt/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

namespace dyadapt::cli {

using nlohmann::ordered_json;

namespace {

constexpr const char* manifest_format = "dyadapt-run-manifest/1";

struct InputFile
{
  std::string flag;
  std::string path;
};

// What a finished subcommand hands back for its manifest.
struct RunResult
{
  std::string subcommand;
  // Fully resolved flags (no --out, no --threads); replaying them
  // reproduces the outputs.
  std::vector<std::string> args;
  ordered_json config;
  std::vector<InputFile> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  bool has_seed = false;
  ordered_json diagnostics = ordered_json::object();
};

std::string
fmt(double x)
{
  return io::format_double(x);
}

void
write_manifest(const RunResult& r)
{
  ordered_json m;
  m["format"] = manifest_format;
  m["tool"] = "dyadapt";
  m["version"] = version_string;
  m["subcommand"] = r.subcommand;
  m["args"] = r.args;
  m["config"] = r.config;
  if (r.has_seed)
    m["seed"] = r.seed;
  ordered_json inputs = ordered_json::array();
  for (const auto& in : r.inputs) {
    inputs.push_back({ { "flag", in.flag },
                       { "path", in.path },
                       { "sha256", sha256_hex(io::read_file(in.path)) } });
  }
  m["inputs"] = inputs;
  ordered_json outputs = ordered_json::array();
  for (const auto& out : r.outputs) {
    outputs.push_back(
      { { "path", out }, { "sha256", sha256_hex(io::read_file(out)) } });
  }
  m["outputs"] = outputs;
  m["diagnostics"] = r.diagnostics;
  io::atomic_write(manifest_path(r.outputs.front()), m.dump(2) + "\n");
}

template<class T>
std::string
str(const T& v)
{
  if constexpr (std::is_floating_point_v<T>)
    return fmt(v);
  else
    return std::to_string(v);
}

std::string
join(const std::vector<std::size_t>& xs)
{
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i)
    s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

std::string
join(const std::vector<std::string>& xs)
{
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i)
    s += (i ? "," : "") + xs[i];
  return s;
}

// ---------------------------------------------------------------- calibrate

struct CalibrateOptions
{
  std::size_t n = 0;
  int jmax = -1;
  double alpha = 1.0;
  double d = 1.0;
  double delta = 0.1;
  double M = 10.0;
  std::size_t reps = 10000;
  std::uint64_t seed = 0;
  double zeta_min = 0.1;
  double zeta_max = 10.0;
  std::size_t zeta_points = 64;
  std::size_t p_points = 9;
  std::string out;
};

RunResult
calibrate_command(const CalibrateOptions& o, Parallelism par, std::ostream& log)
{
  if (o.zeta_points < 1)
    throw ConfigError("--zeta-points must be at least 1");
  if (!(o.zeta_min >= 0.0) || !(o.zeta_max >= o.zeta_min))
    throw ConfigError("need 0 <= --zeta-min <= --zeta-max");
  if (o.zeta_points > 1 && !(o.zeta_max > o.zeta_min))
    throw ConfigError("--zeta-max must exceed --zeta-min when --zeta-points > 1");
  if (o.p_points < 1)
    throw ConfigError("--p-points must be at least 1");
  const int jmax = o.jmax >= 0 ? o.jmax : default_j_max(o.n, o.d);

  CalibrationDefaults opts;
  opts.alpha = o.alpha;
  opts.d = o.d;
  opts.delta = o.delta;
  opts.M = o.M;
  opts.reps = o.reps;
  opts.seed = o.seed;
  opts.kappa_min = o.zeta_min;
  opts.kappa_max = o.zeta_max;
  opts.zeta_points = o.zeta_points;
  opts.p_points = o.p_points;
  const CalibrationConfig config = make_calibration_config(o.n, jmax, opts);
  const ThresholdRecord record = calibrate(config, par);

  std::ostringstream os;
  io::write_threshold_record(os, record);
  io::atomic_write(o.out, os.str());
  log << "zeta_n = " << fmt(record.zeta_n) << " (zeta_n / sqrt(log n) = "
      << fmt(record.zeta_n / std::sqrt(std::log(static_cast<double>(o.n))))
      << ")\n";

  RunResult r;
  r.subcommand = "calibrate";
  r.args = { "--n",        str(o.n),        "--jmax",        str(jmax),
             "--alpha",    str(o.alpha),    "--d",           str(o.d),
             "--delta",    str(o.delta),    "--M",           str(o.M),
             "--reps",     str(o.reps),     "--seed",        str(o.seed),
             "--zeta-min", str(o.zeta_min), "--zeta-max",    str(o.zeta_max),
             "--zeta-points", str(o.zeta_points), "--p-points", str(o.p_points) };
  r.config = { { "n", o.n },
               { "j_max", jmax },
               { "alpha", o.alpha },
               { "d", o.d },
               { "delta", o.delta },
               { "M", o.M },
               { "reps", o.reps },
               { "zeta_min_kappa", o.zeta_min },
               { "zeta_max_kappa", o.zeta_max },
               { "zeta_points", o.zeta_points },
               { "p_points", o.p_points } };
  r.outputs = { o.out };
  r.seed = o.seed;
  r.has_seed = true;
  r.diagnostics = { { "zeta_n", record.zeta_n }, { "zeta_index", record.zeta_index } };
  return r;
}

// ---------------------------------------------------------------- estimate

struct EstimateOptions
{
  std::string data;
  std::string thresholds;
  double kappa = 0.0;
  int jmax = -1;
  double d = 1.0;
  bool d_given = false;
  int start = 0;
  std::string out;
};

RunResult
estimate_command(const EstimateOptions& o, Parallelism par, std::ostream& log)
{
  const auto xs = io::read_sample_file(o.data);
  const std::size_t n = xs.size();
  if (n < 2)
    throw ConfigError(o.data + ": need at least two sample points");

  double d = o.d;
  int jmax = o.jmax;
  double zeta = 0.0;
  if (!o.thresholds.empty()) {
    const ThresholdRecord rec = io::read_threshold_record(o.thresholds);
    if (rec.config.n != n) {
      throw ConfigError(o.thresholds + ": calibrated for n = " +
                        std::to_string(rec.config.n) + " but " + o.data + " has " +
                        std::to_string(n) + " points");
    }
    if (!o.d_given)
      d = rec.config.d;
    if (jmax < 0)
      jmax = rec.config.j_max;
    if (jmax != rec.config.j_max) {
      throw ConfigError(o.thresholds + ": calibrated for j_max = " +
                        std::to_string(rec.config.j_max) + ", not " +
                        std::to_string(jmax));
    }
    zeta = rec.zeta_n;
  } else {
    zeta = o.kappa * std::sqrt(std::log(static_cast<double>(n)));
  }
  if (jmax < 0)
    jmax = default_j_max(n, d);

  const CountsPyramid p(xs, jmax, d);
  if (o.start < 0 || o.start > jmax)
    throw ConfigError("--start must lie in [0, j_max]");
  const SelectionMap sel = select_all(p, o.start, Threshold(zeta), par);
  const auto fhat = selected_values(p, sel);
  for (double v : fhat) {
    if (!std::isfinite(v))
      throw NumericError("non-finite estimate value");
  }
  std::ostringstream os;
  io::write_estimate_csv(os, sel, fhat);
  io::atomic_write(o.out, os.str());
  if (p.dropped() > 0)
    log << "dropped " << p.dropped() << " point(s) outside (0, 1]\n";

  RunResult r;
  r.subcommand = "estimate";
  r.args = { "--data", o.data };
  if (!o.thresholds.empty()) {
    r.args.insert(r.args.end(), { "--thresholds", o.thresholds });
    r.inputs.push_back({ "--thresholds", o.thresholds });
  } else {
    r.args.insert(r.args.end(), { "--kappa", str(o.kappa) });
  }
  r.args.insert(r.args.end(),
                { "--jmax", str(jmax), "--d", str(d), "--start", str(o.start) });
  r.inputs.insert(r.inputs.begin(), { "--data", o.data });
  r.config = { { "n", n },      { "j_max", jmax }, { "d", d },
               { "start", o.start }, { "zeta", zeta } };
  if (o.thresholds.empty())
    r.config["kappa"] = o.kappa;
  r.outputs = { o.out };
  r.diagnostics = { { "dropped", p.dropped() } };
  return r;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions
{
  std::string density;
  std::vector<std::size_t> n_list;
  std::size_t reps = 100;
  std::uint64_t seed = 0;
  std::vector<std::string> thresholds;
  double kappa = 0.0;
  double Delta = 0.4;
  double alpha = 1.0;
  bool alpha_given = false;
  double d = 1.0;
  bool d_given = false;
  int start = 0;
  std::string out;
  std::string levels;
};

RunResult
simulate_command(const SimulateOptions& o, Parallelism par, std::ostream& log)
{
  const io::DensitySpec spec = io::read_density_spec(o.density);
  StudyConfig sc;
  sc.density = spec.density;
  sc.profile = spec.profile;
  sc.probes = spec.probes;
  sc.reps = o.reps;
  sc.seed = o.seed;
  sc.Delta = o.Delta;
  sc.start_level = o.start;
  sc.alpha = o.alpha;
  sc.d = o.d;
  sc.n_list = o.n_list;

  if (!o.thresholds.empty()) {
    std::optional<double> rec_d;
    std::optional<double> rec_alpha;
    std::map<std::size_t, int> rec_jmax;
    for (const auto& path : o.thresholds) {
      const ThresholdRecord rec = io::read_threshold_record(path);
      const std::size_t n = rec.config.n;
      if (sc.thresholds.zeta_by_n.contains(n))
        throw ConfigError(path + ": a second threshold record for n = " + std::to_string(n));
      if ((rec_d && *rec_d != rec.config.d) || (rec_alpha && *rec_alpha != rec.config.alpha))
        throw ConfigError(path + ": threshold records disagree on d or alpha");
      rec_d = rec.config.d;
      rec_alpha = rec.config.alpha;
      rec_jmax[n] = rec.config.j_max;
      sc.thresholds.zeta_by_n[n] = rec.zeta_n;
    }
    if (!o.d_given)
      sc.d = *rec_d;
    if (!o.alpha_given)
      sc.alpha = *rec_alpha;
    if (sc.n_list.empty()) {
      for (const auto& [n, z] : sc.thresholds.zeta_by_n)
        sc.n_list.push_back(n);
    }
    for (std::size_t n : sc.n_list) {
      const auto it = rec_jmax.find(n);
      if (it == rec_jmax.end())
        throw ConfigError("no threshold record for n = " + std::to_string(n));
      if (n >= 2 && it->second != default_j_max(n, sc.d)) {
        throw ConfigError("threshold record for n = " + std::to_string(n) +
                          " has j_max = " + std::to_string(it->second) +
                          ", the study uses " + std::to_string(default_j_max(n, sc.d)));
      }
    }
  } else {
    sc.thresholds = ThresholdSource::from_kappa(o.kappa);
  }
  if (sc.n_list.empty())
    throw ConfigError("--n is required");

  const RiskReport report = run_study(sc, par);
  std::ostringstream os;
  io::write_metric_csv(os, report.records);
  io::atomic_write(o.out, os.str());
  if (!o.levels.empty()) {
    std::ostringstream ls;
    ls << "n,j_max,zeta,U,oracle_rhs,unqualified_bins\n";
    for (const auto& l : report.levels) {
      ls << l.n << ',' << l.j_max << ',' << fmt(l.zeta) << ',' << fmt(l.U) << ','
         << fmt(l.oracle_rhs) << ',' << l.unqualified_bins << '\n';
    }
    io::atomic_write(o.levels, ls.str());
  }
  for (const auto& l : report.levels) {
    if (l.unqualified_bins > 0) {
      log << "n = " << l.n << ": " << l.unqualified_bins
          << " bin(s) have no qualifying oracle level; j* = j_max used\n";
    }
  }

  RunResult r;
  r.subcommand = "simulate";
  r.args = { "--density", o.density, "--n", join(sc.n_list), "--reps", str(o.reps),
             "--seed", str(o.seed) };
  if (!o.thresholds.empty())
    r.args.insert(r.args.end(), { "--thresholds", join(o.thresholds) });
  else
    r.args.insert(r.args.end(), { "--kappa", str(o.kappa) });
  r.args.insert(r.args.end(), { "--Delta", str(o.Delta), "--alpha", str(sc.alpha),
                                "--d", str(sc.d), "--start", str(o.start) });
  r.inputs.push_back({ "--density", o.density });
  for (const auto& t : o.thresholds)
    r.inputs.push_back({ "--thresholds", t });
  ordered_json zetas = ordered_json::object();
  for (const auto& l : report.levels)
    zetas[std::to_string(l.n)] = l.zeta;
  r.config = { { "n", sc.n_list }, { "reps", o.reps },       { "Delta", o.Delta },
               { "alpha", sc.alpha }, { "d", sc.d },           { "start", o.start },
               { "zeta", zetas },     { "metrics", report.metric_names } };
  if (o.thresholds.empty())
    r.config["kappa"] = o.kappa;
  r.outputs = { o.out };
  if (!o.levels.empty()) {
    r.outputs.push_back(o.levels);
    // replaying must recreate the same set of files
    r.args.insert(r.args.end(), { "--levels", o.levels });
  }
  r.seed = o.seed;
  r.has_seed = true;
  return r;
}

// ---------------------------------------------------------------- report

struct ReportOptions
{
  std::string in;
  std::string out;
};

RunResult
report_command(const ReportOptions& o)
{
  std::istringstream is(io::read_file(o.in));
  const auto records = io::parse_metric_csv(is, o.in);
  const auto summary = summarize(records);
  std::ostringstream os;
  io::write_summary_csv(os, summary);
  io::atomic_write(o.out, os.str());

  RunResult r;
  r.subcommand = "report";
  r.args = { "--in", o.in };
  r.inputs = { { "--in", o.in } };
  r.config = { { "rows", summary.size() } };
  r.outputs = { o.out };
  return r;
}

// ---------------------------------------------------------------- rerun

std::vector<std::string>
replay_arguments(const std::string& manifest_file, const std::string& out)
{
  ordered_json m;
  try {
    m = ordered_json::parse(io::read_file(manifest_file));
  } catch (const ordered_json::parse_error& e) {
    throw ConfigError(manifest_file + ": not valid JSON: " + e.what());
  }
  if (!m.is_object() || m.value("format", "") != manifest_format)
    throw ConfigError(manifest_file + ": not a dyadapt run manifest");
  try {
    for (const auto& in : m.at("inputs")) {
      const std::string path = in.at("path");
      const std::string want = in.at("sha256");
      if (sha256_hex(io::read_file(path)) != want)
        throw ConfigError(path + ": contents differ from the manifest digest");
    }
    std::vector<std::string> args{ m.at("subcommand").get<std::string>() };
    for (const auto& a : m.at("args"))
      args.push_back(a.get<std::string>());
    // a simulate run may carry a second output; send it next to the new one
    for (std::size_t i = 1; i + 1 < args.size(); ++i) {
      if (args[i] == "--levels")
        args[i + 1] = out + ".levels.csv";
    }
    args.insert(args.end(), { "--out", out });
    return args;
  } catch (const ordered_json::exception& e) {
    throw ConfigError(manifest_file + ": malformed manifest: " + e.what());
  }
}

// ---------------------------------------------------------------- wiring

int
exit_code_for(const std::exception_ptr& ep, std::ostream& err)
{
  try {
    std::rethrow_exception(ep);
  } catch (const CalibrationInfeasible& e) {
    err << "error: " << e.what() << '\n';
    return exit_infeasible;
  } catch (const NumericError& e) {
    err << "error: numeric failure: " << e.what() << '\n';
    return exit_numeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_invalid;
  }
}

} // namespace

std::string
sha256_hex(const std::string& bytes)
{
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("SHA-256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

std::string
manifest_path(const std::string& output)
{
  return output + ".manifest.json";
}

int
run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
  CLI::App app{ "Spatially adaptive dyadic histogram density estimation", "dyadapt" };
  app.set_version_flag("--version", std::string(version_string));
  app.require_subcommand(1);
  unsigned threads = 0;
  std::function<RunResult(Parallelism)> action;

  auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", threads,
                    "Worker cap (0 = all cores); never changes results");
  };

  CalibrateOptions cal;
  auto* c = app.add_subcommand("calibrate", "Choose zeta_n by Monte-Carlo propagation");
  c->add_option("--n", cal.n, "Sample size")->required();
  c->add_option("--jmax", cal.jmax, "Finest level (default: largest admissible for --d)");
  c->add_option("--alpha", cal.alpha, "Propagation tolerance alpha")->capture_default_str();
  c->add_option("--d", cal.d, "Resolution constant d")->capture_default_str();
  c->add_option("--delta", cal.delta, "Lower density bound of the class")->capture_default_str();
  c->add_option("--M", cal.M, "Upper density bound of the class")->capture_default_str();
  c->add_option("--reps", cal.reps, "Replicates per grid point")->capture_default_str();
  c->add_option("--seed", cal.seed, "Random seed")->capture_default_str();
  c->add_option("--zeta-min", cal.zeta_min, "Smallest candidate, in units of sqrt(log n)")
    ->capture_default_str();
  c->add_option("--zeta-max", cal.zeta_max, "Largest candidate, in units of sqrt(log n)")
    ->capture_default_str();
  c->add_option("--zeta-points", cal.zeta_points, "Number of candidates")
    ->capture_default_str();
  c->add_option("--p-points", cal.p_points, "Bin masses per level")->capture_default_str();
  c->add_option("--out", cal.out, "Threshold record to write")->required();
  add_threads(c);
  c->callback([&] {
    action = [&](Parallelism par) { return calibrate_command(cal, par, err); };
  });

  EstimateOptions est;
  auto* e = app.add_subcommand("estimate", "Adaptive estimate of a sample");
  e->add_option("--data", est.data, "Sample file, one value per line")
    ->required()
    ->check(CLI::ExistingFile);
  auto* e_thr = e->add_option("--thresholds", est.thresholds, "Threshold record")
                  ->check(CLI::ExistingFile);
  auto* e_kap = e->add_option("--kappa", est.kappa, "Use zeta_n = kappa sqrt(log n)")
                  ->check(CLI::NonNegativeNumber);
  e_thr->excludes(e_kap);
  e->add_option("--jmax", est.jmax, "Finest level");
  auto* e_d = e->add_option("--d", est.d, "Resolution constant d");
  e->add_option("--start", est.start, "Start level J")->capture_default_str();
  e->add_option("--out", est.out, "Estimate CSV to write")->required();
  add_threads(e);
  e->callback([&] {
    if (e_thr->count() + e_kap->count() != 1)
      throw CLI::ValidationError("estimate", "exactly one of --thresholds or --kappa is required");
    est.d_given = e_d->count() > 0;
    action = [&](Parallelism par) { return estimate_command(est, par, err); };
  });

  SimulateOptions sim;
  auto* s = app.add_subcommand("simulate", "Monte-Carlo risk study on a density spec");
  s->add_option("--density", sim.density, "Density spec file")
    ->required()
    ->check(CLI::ExistingFile);
  s->add_option("--n", sim.n_list, "Sample sizes, ascending")->delimiter(',');
  s->add_option("--reps", sim.reps, "Replicates per n")->capture_default_str();
  s->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  auto* s_thr = s->add_option("--thresholds", sim.thresholds,
                              "Threshold records, one per n")
                  ->delimiter(',')
                  ->check(CLI::ExistingFile);
  auto* s_kap = s->add_option("--kappa", sim.kappa, "Use zeta_n = kappa sqrt(log n)")
                  ->check(CLI::NonNegativeNumber);
  s_thr->excludes(s_kap);
  s->add_option("--Delta", sim.Delta, "Oracle constant Delta")->capture_default_str();
  auto* s_alpha = s->add_option("--alpha", sim.alpha, "Alpha used in the oracle bound");
  auto* s_d = s->add_option("--d", sim.d, "Resolution constant d");
  s->add_option("--start", sim.start, "Start level J")->capture_default_str();
  s->add_option("--out", sim.out, "Metric CSV to write")->required();
  s->add_option("--levels", sim.levels, "Optional per-n constants CSV");
  add_threads(s);
  s->callback([&] {
    if (s_thr->count() + s_kap->count() != 1)
      throw CLI::ValidationError("simulate", "exactly one of --thresholds or --kappa is required");
    sim.alpha_given = s_alpha->count() > 0;
    sim.d_given = s_d->count() > 0;
    action = [&](Parallelism par) { return simulate_command(sim, par, err); };
  });

  ReportOptions rep;
  auto* r = app.add_subcommand("report", "Summary table of a metric CSV");
  r->add_option("--in", rep.in, "Metric CSV from simulate")
    ->required()
    ->check(CLI::ExistingFile);
  r->add_option("--out", rep.out, "Summary CSV to write")->required();
  add_threads(r);
  r->callback([&] { action = [&](Parallelism) { return report_command(rep); }; });

  std::string manifest_file;
  std::string rerun_out;
  auto* rr = app.add_subcommand("rerun", "Replay a run from its manifest");
  rr->add_option("--manifest", manifest_file, "Manifest written by an earlier run")
    ->required()
    ->check(CLI::ExistingFile);
  rr->add_option("--out", rerun_out, "Where to write the replayed output")->required();
  add_threads(rr);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& pe) {
    const int code = app.exit(pe, out, err);
    return code == 0 ? exit_ok : exit_invalid;
  }

  try {
    if (rr->parsed()) {
      auto replay = replay_arguments(manifest_file, rerun_out);
      replay.insert(replay.end(), { "--threads", std::to_string(threads) });
      return run(replay, out, err);
    }
    const RunResult result = action(Parallelism{ threads });
    write_manifest(result);
    return exit_ok;
  } catch (...) {
    return exit_code_for(std::current_exception(), err);
  }
}

int
run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i)
    args.emplace_back(argv[i]);
  return run(args, out, err);
}

} // namespace dyadapt::cli
