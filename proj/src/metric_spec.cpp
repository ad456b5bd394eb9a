#include "conformal/metric_spec.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

namespace conformal {

SpecError::SpecError(int line, const std::string& msg)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg), line_(line) {}

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

bool is_identifier(const std::string& s) {
  static const std::regex re("[A-Za-z_][A-Za-z0-9_]*");
  return std::regex_match(s, re);
}

Expr parse_at(int line, const std::string& text) {
  try {
    return parse(text);
  } catch (const ParseError& e) {
    throw SpecError(line, e.what());
  }
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double number_at(int line, const std::string& text) {
  Expr e = parse_at(line, text);
  auto v = e.as_double();
  if (!v) throw SpecError(line, "expected a number, got '" + text + "'");
  return *v;
}

}  // namespace

MetricSpec parse_metric_spec(std::string_view text) {
  static const std::regex g_re(R"(g\s*\[\s*(\d+)\s*\]\s*\[\s*(\d+)\s*\])");
  static const std::regex box_re(R"(box\s*\[\s*([A-Za-z_][A-Za-z0-9_]*)\s*\])");
  static const std::regex param_re(R"(param\s+([A-Za-z_][A-Za-z0-9_]*))");

  MetricSpec spec;
  std::optional<int> declared_dim;
  int dim_line = 0;
  struct Pending {
    int line;
    int i, j;
    Expr e;
  };
  std::vector<Pending> comps;
  std::vector<std::pair<int, std::string>> box_lines;
  std::vector<std::pair<int, std::vector<double>>> point_lines;

  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw.substr(0, raw.find('#'));
    s = trim(s);
    if (s.empty()) continue;
    auto eq = s.find('=');
    if (eq == std::string::npos) throw SpecError(line, "expected 'key = value'");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (value.empty()) throw SpecError(line, "empty value for '" + key + "'");
    std::smatch m;
    if (key == "name") {
      spec.name = value;
    } else if (key == "dimension") {
      int d = 0;
      auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), d);
      if (ec != std::errc() || p != value.data() + value.size() || d < 3)
        throw SpecError(line, "dimension must be an integer >= 3");
      declared_dim = d;
      dim_line = line;
    } else if (key == "coords") {
      if (!spec.coords.empty()) throw SpecError(line, "coords given twice");
      spec.coords = split_commas(value);
      for (const auto& c : spec.coords)
        if (!is_identifier(c)) throw SpecError(line, "bad coordinate name '" + c + "'");
      for (std::size_t i = 0; i < spec.coords.size(); ++i)
        for (std::size_t j = i + 1; j < spec.coords.size(); ++j)
          if (spec.coords[i] == spec.coords[j]) throw SpecError(line, "duplicate coordinate '" + spec.coords[i] + "'");
    } else if (std::regex_match(key, m, param_re)) {
      Expr v = parse_at(line, value);
      if (!v.is_numeric()) throw SpecError(line, "parameter '" + m[1].str() + "' must be numeric");
      spec.params.push_back({m[1].str(), v});
    } else if (std::regex_match(key, m, g_re)) {
      comps.push_back({line, std::stoi(m[1].str()), std::stoi(m[2].str()), parse_at(line, value)});
    } else if (key == "singular") {
      spec.singular.push_back(parse_at(line, value));
    } else if (std::regex_match(key, m, box_re)) {
      box_lines.push_back({line, m[1].str() + "=" + value});
    } else if (key == "point") {
      std::vector<double> v;
      for (const auto& item : split_commas(value)) v.push_back(number_at(line, item));
      point_lines.push_back({line, std::move(v)});
    } else if (key == "upsilon") {
      spec.upsilon = parse_at(line, value);
    } else if (key == "sigma") {
      spec.sigma = parse_at(line, value);
    } else if (key == "potential") {
      spec.potential = parse_at(line, value);
    } else {
      throw SpecError(line, "unknown key '" + key + "'");
    }
  }

  if (spec.coords.empty()) throw SpecError(line, "missing 'coords'");
  const int n = spec.dim();
  if (n < 3) throw SpecError(line, "need at least 3 coordinates");
  if (declared_dim && *declared_dim != n)
    throw SpecError(dim_line, "dimension " + std::to_string(*declared_dim) + " does not match " + std::to_string(n) +
                                  " coordinates");

  for (const auto& c : comps) {
    if (c.i >= n || c.j >= n) throw SpecError(c.line, "index out of range for dimension " + std::to_string(n));
    auto key = std::minmax(c.i, c.j);
    auto it = spec.components.find(key);
    if (it != spec.components.end()) {
      if (!(it->second == c.e))
        throw SpecError(c.line, "g[" + std::to_string(c.i) + "][" + std::to_string(c.j) +
                                    "] conflicts with an earlier entry for the symmetric component");
      continue;
    }
    spec.components.emplace(key, c.e);
  }
  for (const auto& [l, item] : box_lines) {
    auto eq = item.find('=');
    std::string coord = item.substr(0, eq);
    if (std::find(spec.coords.begin(), spec.coords.end(), coord) == spec.coords.end())
      throw SpecError(l, "box for unknown coordinate '" + coord + "'");
    auto parts = split_commas(item.substr(eq + 1));
    if (parts.size() != 2) throw SpecError(l, "box needs 'lo, hi'");
    double lo = number_at(l, parts[0]), hi = number_at(l, parts[1]);
    if (!(lo < hi)) throw SpecError(l, "box needs lo < hi");
    spec.box[coord] = {lo, hi};
  }
  for (auto& [l, v] : point_lines) {
    if (static_cast<int>(v.size()) != n) throw SpecError(l, "point needs " + std::to_string(n) + " values");
    spec.points.push_back(std::move(v));
  }

  // every free symbol must be a coordinate or a parameter
  std::set<std::string> known(spec.coords.begin(), spec.coords.end());
  for (const auto& [p, v] : spec.params) {
    if (known.count(p)) throw SpecError(0, "parameter '" + p + "' clashes with a coordinate or another parameter");
    known.insert(p);
  }
  for (const auto& c : comps)
    for (const auto& s : free_symbols(c.e))
      if (!known.count(s)) throw SpecError(c.line, "unknown symbol '" + s + "'");
  return spec;
}

MetricSpec load_metric_spec(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw SpecError(0, "cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_metric_spec(ss.str());
}

Expr bind_params(const MetricSpec& spec, const Expr& e) {
  if (spec.params.empty()) return e;
  std::map<std::string, Expr> repl(spec.params.begin(), spec.params.end());
  return substitute(e, repl);
}

MetricPtr build_metric(const MetricSpec& spec) {
  const int n = spec.dim();
  std::vector<Expr> singular;
  for (const auto& s : spec.singular) singular.push_back(bind_params(spec, s));
  auto chart = std::make_shared<Chart>(spec.coords, singular);
  ExprArray g = ExprArray::cube(n, 2);
  for (const auto& [ij, e] : spec.components) {
    Expr v = bind_params(spec, e);
    g(ij.first, ij.second) = v;
    g(ij.second, ij.first) = v;
  }
  try {
    return std::make_shared<MetricField>(chart, std::move(g));
  } catch (const std::exception& e) {
    throw SpecError(0, std::string("invalid metric: ") + e.what());
  }
}

std::vector<Bindings> spec_points(const MetricSpec& spec, const MetricField& g, int count, std::uint64_t seed) {
  if (!spec.points.empty()) {
    std::vector<Bindings> out;
    for (const auto& p : spec.points) {
      Bindings b = make_point(g.chart(), p);
      std::string why;
      if (!admissible_point(g, b, &why)) throw SpecError(0, "sample point " + format_point(b) + " rejected: " + why);
      out.push_back(std::move(b));
    }
    return out;
  }
  SampleBox box = SampleBox::uniform(spec.dim());
  for (int i = 0; i < spec.dim(); ++i) {
    auto it = spec.box.find(spec.coords[static_cast<std::size_t>(i)]);
    if (it != spec.box.end()) box.ranges[static_cast<std::size_t>(i)] = it->second;
  }
  return sample_points(g, box, count, seed);
}

std::string write_metric_spec(const MetricSpec& spec) {
  std::ostringstream o;
  if (!spec.name.empty()) o << "name = " << spec.name << "\n";
  o << "dimension = " << spec.dim() << "\n";
  o << "coords = ";
  for (std::size_t i = 0; i < spec.coords.size(); ++i) o << (i ? ", " : "") << spec.coords[i];
  o << "\n";
  for (const auto& [p, v] : spec.params) o << "param " << p << " = " << v.str() << "\n";
  for (const auto& [ij, e] : spec.components) o << "g[" << ij.first << "][" << ij.second << "] = " << e.str() << "\n";
  for (const auto& s : spec.singular) o << "singular = " << s.str() << "\n";
  for (const auto& [c, r] : spec.box) o << "box[" << c << "] = " << num(r.first) << ", " << num(r.second) << "\n";
  for (const auto& p : spec.points) {
    o << "point = ";
    for (std::size_t i = 0; i < p.size(); ++i) o << (i ? ", " : "") << num(p[i]);
    o << "\n";
  }
  if (spec.upsilon) o << "upsilon = " << spec.upsilon->str() << "\n";
  if (spec.sigma) o << "sigma = " << spec.sigma->str() << "\n";
  if (spec.potential) o << "potential = " << spec.potential->str() << "\n";
  return o.str();
}

MetricSpec spec_from_catalog(const CatalogEntry& e) {
  MetricSpec s;
  s.name = e.name;
  const Chart& chart = e.metric->chart();
  s.coords = chart.coords;
  const auto& g = e.metric->g().comps;
  for (int i = 0; i < e.n; ++i)
    for (int j = i; j < e.n; ++j)
      if (!g(i, j).is_zero()) s.components.emplace(std::make_pair(i, j), g(i, j));
  s.singular = chart.singular;
  for (int i = 0; i < e.n; ++i) s.box[s.coords[static_cast<std::size_t>(i)]] = e.box.ranges[static_cast<std::size_t>(i)];
  if (e.einstein_scale) s.sigma = e.einstein_scale;
  if (e.cspace_potential) s.potential = e.cspace_potential;
  return s;
}

}  // namespace conformal
