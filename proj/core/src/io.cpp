#include "dyadapt/io.hpp"

#include "dyadapt/errors.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <system_error>

namespace dyadapt::io {

namespace {

std::string
where(const std::string& source, std::size_t line)
{
  return source + ":" + std::to_string(line) + ": ";
}

std::string_view
trim(std::string_view s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string_view>
split_ws(std::string_view s)
{
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r'))
      ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r')
      ++j;
    if (j > i)
      out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view>
split_char(std::string_view s, char sep)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos)
      return out;
    start = pos + 1;
  }
}

std::optional<double>
to_double(std::string_view s)
{
  s = trim(s);
  if (!s.empty() && s.front() == '+')
    s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    return std::nullopt;
  return v;
}

template<class Int>
std::optional<Int>
to_int(std::string_view s)
{
  s = trim(s);
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    return std::nullopt;
  return v;
}

double
need_double(std::string_view s, const std::string& at)
{
  const auto v = to_double(s);
  if (!v)
    throw ConfigError(at + "expected a number, got '" + std::string(s) + "'");
  return *v;
}

template<class Int>
Int
need_int(std::string_view s, const std::string& at)
{
  const auto v = to_int<Int>(s);
  if (!v)
    throw ConfigError(at + "expected an integer, got '" + std::string(s) + "'");
  return *v;
}

std::ifstream
open_input(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open '" + path + "' for reading");
  return in;
}

std::string
join_doubles(const std::vector<double>& xs)
{
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i)
      out += ' ';
    out += format_double(xs[i]);
  }
  return out;
}

} // namespace

std::string
format_double(double x)
{
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  if (ec != std::errc{})
    throw NumericError("failed to format a double");
  return std::string(buf, ptr);
}

std::vector<double>
parse_sample(std::istream& in, const std::string& source)
{
  std::vector<double> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto t = trim(line);
    if (t.empty())
      continue;
    const auto v = to_double(t);
    if (!v || !std::isfinite(*v)) {
      throw ConfigError(where(source, no) + "malformed sample value '" +
                        std::string(t) + "'");
    }
    out.push_back(*v);
  }
  return out;
}

std::vector<double>
read_sample_file(const std::string& path)
{
  auto in = open_input(path);
  return parse_sample(in, path);
}

DensitySpec
parse_density_spec(std::istream& in, const std::string& source)
{
  std::optional<double> delta;
  std::optional<double> M;
  bool normalize = false;
  std::vector<PowerSegment> segments;
  std::vector<HolderPiece> pieces;
  std::vector<double> probes;

  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    std::string_view body = line;
    if (const auto hash = body.find('#'); hash != std::string_view::npos)
      body = body.substr(0, hash);
    const auto tok = split_ws(body);
    if (tok.empty())
      continue;
    const std::string at = where(source, no);
    const std::string_view key = tok[0];
    auto expect = [&](std::size_t count) {
      if (tok.size() != count + 1) {
        throw ConfigError(at + "'" + std::string(key) + "' takes " +
                          std::to_string(count) + " value(s)");
      }
    };
    if (key == "delta") {
      expect(1);
      delta = need_double(tok[1], at);
    } else if (key == "M") {
      expect(1);
      M = need_double(tok[1], at);
    } else if (key == "normalize") {
      expect(0);
      normalize = true;
    } else if (key == "segment") {
      expect(6);
      segments.push_back({ need_double(tok[1], at), need_double(tok[2], at),
                           need_double(tok[3], at), need_double(tok[4], at),
                           need_double(tok[5], at), need_double(tok[6], at) });
    } else if (key == "holder") {
      expect(5);
      pieces.push_back({ need_double(tok[1], at), need_double(tok[2], at),
                         need_double(tok[3], at), need_double(tok[4], at),
                         need_double(tok[5], at) });
    } else if (key == "probe") {
      expect(1);
      probes.push_back(need_double(tok[1], at));
    } else {
      throw ConfigError(at + "unknown key '" + std::string(key) +
                        "' (expected delta, M, normalize, segment, holder, probe)");
    }
  }
  if (!delta || !M)
    throw ConfigError(source + ": density spec must set both 'delta' and 'M'");
  if (segments.empty())
    throw ConfigError(source + ": density spec has no 'segment' lines");

  DensitySpec spec;
  try {
    spec.density = normalize ? PiecewiseDensity::normalized(segments, *delta, *M)
                             : PiecewiseDensity::create(segments, *delta, *M);
    if (!pieces.empty())
      spec.profile.emplace(pieces);
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  for (double x : probes) {
    if (!(x > 0.0 && x <= 1.0))
      throw ConfigError(source + ": probe " + format_double(x) + " outside (0, 1]");
  }
  spec.probes = std::move(probes);
  return spec;
}

DensitySpec
read_density_spec(const std::string& path)
{
  auto in = open_input(path);
  return parse_density_spec(in, path);
}

void
write_threshold_record(std::ostream& out, const ThresholdRecord& rec)
{
  const auto& c = rec.config;
  out << "# dyadapt threshold record\n";
  out << "format = dyadapt-threshold-record/1\n";
  out << "zeta_n = " << format_double(rec.zeta_n) << '\n';
  out << "zeta_index = " << rec.zeta_index << '\n';
  out << "n = " << c.n << '\n';
  out << "j_max = " << c.j_max << '\n';
  out << "alpha = " << format_double(c.alpha) << '\n';
  out << "d = " << format_double(c.d) << '\n';
  out << "delta = " << format_double(c.delta) << '\n';
  out << "M = " << format_double(c.M) << '\n';
  out << "reps = " << c.reps << '\n';
  out << "seed = " << c.seed << '\n';
  out << "bound = " << format_double(rec.bound) << '\n';
  out << "zeta_grid = " << join_doubles(c.zeta_grid) << '\n';
  out << "level_grid =";
  for (int j : c.level_grid)
    out << ' ' << j;
  out << '\n';
  for (std::size_t i = 0; i < c.level_grid.size(); ++i)
    out << "p_grid." << c.level_grid[i] << " = " << join_doubles(c.p_grid[i]) << '\n';
  out << "[achieved]\n";
  out << "level,p_index,p,mean,std_error\n";
  for (const auto& a : rec.achieved) {
    out << a.level << ',' << a.p_index << ',' << format_double(a.p) << ','
        << format_double(a.lhs.mean) << ',' << format_double(a.lhs.std_error) << '\n';
  }
}

ThresholdRecord
parse_threshold_record(std::istream& in, const std::string& source)
{
  std::map<std::string, std::pair<std::string, std::size_t>> kv;
  std::vector<std::pair<std::string, std::size_t>> table;
  bool in_table = false;
  bool table_header = false;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#')
      continue;
    if (t == "[achieved]") {
      in_table = true;
      continue;
    }
    if (in_table) {
      if (!table_header) {
        if (t != "level,p_index,p,mean,std_error")
          throw ConfigError(where(source, no) + "unexpected [achieved] header");
        table_header = true;
        continue;
      }
      table.emplace_back(std::string(t), no);
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(where(source, no) + "expected 'key = value'");
    const std::string key(trim(t.substr(0, eq)));
    if (kv.contains(key))
      throw ConfigError(where(source, no) + "duplicate key '" + key + "'");
    kv[key] = { std::string(trim(t.substr(eq + 1))), no };
  }

  auto value = [&](const std::string& key) -> std::pair<std::string, std::string> {
    const auto it = kv.find(key);
    if (it == kv.end())
      throw ConfigError(source + ": threshold record is missing '" + key + "'");
    return { it->second.first, where(source, it->second.second) };
  };
  auto number = [&](const std::string& key) {
    const auto [v, at] = value(key);
    return need_double(v, at);
  };
  auto doubles = [&](const std::string& key) {
    const auto [v, at] = value(key);
    std::vector<double> xs;
    for (auto tok : split_ws(v))
      xs.push_back(need_double(tok, at));
    return xs;
  };

  if (value("format").first != "dyadapt-threshold-record/1")
    throw ConfigError(source + ": unsupported threshold record format");

  ThresholdRecord rec;
  auto& c = rec.config;
  {
    const auto [v, at] = value("n");
    c.n = need_int<std::size_t>(v, at);
  }
  {
    const auto [v, at] = value("j_max");
    c.j_max = need_int<int>(v, at);
  }
  {
    const auto [v, at] = value("reps");
    c.reps = need_int<std::size_t>(v, at);
  }
  {
    const auto [v, at] = value("seed");
    c.seed = need_int<std::uint64_t>(v, at);
  }
  {
    const auto [v, at] = value("zeta_index");
    rec.zeta_index = need_int<std::size_t>(v, at);
  }
  c.alpha = number("alpha");
  c.d = number("d");
  c.delta = number("delta");
  c.M = number("M");
  rec.zeta_n = number("zeta_n");
  rec.bound = number("bound");
  c.zeta_grid = doubles("zeta_grid");
  {
    const auto [v, at] = value("level_grid");
    for (auto tok : split_ws(v))
      c.level_grid.push_back(need_int<int>(tok, at));
  }
  for (int j : c.level_grid)
    c.p_grid.push_back(doubles("p_grid." + std::to_string(j)));

  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(source + ": " + e.what());
  }
  if (rec.zeta_index >= c.zeta_grid.size() || c.zeta_grid[rec.zeta_index] != rec.zeta_n)
    throw ConfigError(source + ": zeta_n is not the grid entry at zeta_index");
  if (rec.bound != c.bound())
    throw ConfigError(source + ": bound does not equal alpha / (n 4^j_max)");

  for (const auto& [row, row_no] : table) {
    const std::string at = where(source, row_no);
    const auto cells = split_char(row, ',');
    if (cells.size() != 5)
      throw ConfigError(at + "expected 5 columns in [achieved]");
    GridPointResult g;
    g.level = need_int<int>(cells[0], at);
    g.p_index = need_int<std::size_t>(cells[1], at);
    g.p = need_double(cells[2], at);
    g.lhs.mean = need_double(cells[3], at);
    g.lhs.std_error = need_double(cells[4], at);
    if (!(g.lhs.mean + g.lhs.std_error <= rec.bound))
      throw ConfigError(at + "achieved value exceeds the propagation bound");
    rec.achieved.push_back(g);
  }
  std::size_t expected = 0;
  for (const auto& ps : c.p_grid)
    expected += ps.size();
  if (rec.achieved.size() != expected)
    throw ConfigError(source + ": [achieved] must have one row per grid point");
  return rec;
}

ThresholdRecord
read_threshold_record(const std::string& path)
{
  auto in = open_input(path);
  return parse_threshold_record(in, path);
}

void
write_estimate_csv(std::ostream& out, const SelectionMap& selection,
                   const std::vector<double>& fhat)
{
  if (fhat.size() != selection.jhat.size())
    throw std::invalid_argument("estimate and selection sizes differ");
  out << "bin_index,x_left,x_right,jhat,fhat\n";
  const int j = selection.j_max;
  for (std::size_t m = 0; m < fhat.size(); ++m) {
    out << m << ',' << format_double(std::ldexp(static_cast<double>(m), -j)) << ','
        << format_double(std::ldexp(static_cast<double>(m + 1), -j)) << ','
        << selection.jhat[m] << ',' << format_double(fhat[m]) << '\n';
  }
}

void
write_metric_csv(std::ostream& out, const std::vector<MetricRecord>& records)
{
  out << "n,replicate,metric,value\n";
  for (const auto& r : records)
    out << r.n << ',' << r.replicate << ',' << r.metric << ',' << format_double(r.value)
        << '\n';
}

std::vector<MetricRecord>
parse_metric_csv(std::istream& in, const std::string& source)
{
  std::vector<MetricRecord> out;
  std::string line;
  std::size_t no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++no;
    const auto t = trim(line);
    if (t.empty())
      continue;
    if (!header) {
      if (t != "n,replicate,metric,value")
        throw ConfigError(where(source, no) + "expected header n,replicate,metric,value");
      header = true;
      continue;
    }
    const std::string at = where(source, no);
    const auto cells = split_char(t, ',');
    if (cells.size() != 4)
      throw ConfigError(at + "expected 4 columns");
    MetricRecord r;
    r.n = need_int<std::size_t>(cells[0], at);
    r.replicate = need_int<std::size_t>(cells[1], at);
    r.metric = std::string(cells[2]);
    if (r.metric.empty())
      throw ConfigError(at + "empty metric name");
    r.value = need_double(cells[3], at);
    out.push_back(std::move(r));
  }
  if (!header)
    throw ConfigError(source + ": empty metric file");
  return out;
}

void
write_summary_csv(std::ostream& out, const std::vector<MetricSummary>& rows)
{
  out << "metric,n,reps,mean,std_error,p50,p95,max,slope\n";
  for (const auto& s : rows) {
    out << s.metric << ',' << s.n << ',' << s.reps << ',' << format_double(s.mean) << ','
        << format_double(s.std_error) << ',' << format_double(s.p50) << ','
        << format_double(s.p95) << ',' << format_double(s.max) << ',';
    if (std::isfinite(s.slope))
      out << format_double(s.slope);
    out << '\n';
  }
}

void
atomic_write(const std::string& path, const std::string& contents)
{
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out)
      throw ConfigError("cannot open '" + tmp.string() + "' for writing");
    out << contents;
    out.flush();
    if (!out)
      throw ConfigError("failed writing '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw ConfigError("cannot move output into place at '" + path + "': " + ec.message());
  }
}

std::string
read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ConfigError("cannot open '" + path + "' for reading");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

} // namespace dyadapt::io
