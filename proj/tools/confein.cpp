// confein: decide whether a metric is conformally Einstein.
//
// Exit codes: 0 conformally Einstein, 1 not, 2 inconclusive, 3 input error.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "conformal/report.hpp"

using namespace conformal;
using nlohmann::json;

namespace {

constexpr int kInputError = 3;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string file;
  double tol_rel = 1e-8;
  double tol_abs = 1e-12;
  double rank_tol = 1e-8;
  int points = 10;
  std::uint64_t seed = 0;
  std::string policy = "auto";
  std::string json_out;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("file", c.file, "metric definition file")->required();
  sub->add_option("--tol-rel", c.tol_rel, "relative tolerance")->capture_default_str();
  sub->add_option("--tol-abs", c.tol_abs, "absolute tolerance")->capture_default_str();
  sub->add_option("--rank-tol", c.rank_tol, "relative singular value cutoff")->capture_default_str();
  sub->add_option("--points", c.points, "number of sample points")->capture_default_str();
  sub->add_option("--seed", c.seed, "sampling seed")->capture_default_str();
  sub->add_option("--policy", c.policy, "dual tensor: from-L, from-C, dim4-C3 or auto")->capture_default_str();
  sub->add_option("--json", c.json_out, "write the JSON report here ('-' for stdout)");
}

struct Loaded {
  std::string text;
  MetricSpec spec;
  MetricPtr metric;
  CurvaturePack pack;
  std::vector<Bindings> points;
  RunOptions opts;
};

Loaded load(const Common& c) {
  if (!(c.tol_rel > 0)) throw InputError("--tol-rel must be positive");
  if (!(c.tol_abs >= 0)) throw InputError("--tol-abs must be nonnegative");
  if (!(c.rank_tol > 0)) throw InputError("--rank-tol must be positive");
  if (c.points < 1) throw InputError("--points must be at least 1");
  Loaded l;
  l.opts.tol.rel = c.tol_rel;
  l.opts.tol.abs = c.tol_abs;
  l.opts.tol.rank = c.rank_tol;
  l.opts.points = c.points;
  l.opts.seed = c.seed;
  try {
    l.opts.policy = policy_from_name(c.policy);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }

  std::ifstream f(c.file);
  if (!f) throw InputError("cannot open '" + c.file + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  l.text = ss.str();
  try {
    l.spec = parse_metric_spec(l.text);
    l.metric = build_metric(l.spec);
    l.points = spec_points(l.spec, *l.metric, c.points, c.seed);
    l.pack = curvature_pack(l.metric);
  } catch (const SpecError& e) {
    throw InputError(c.file + ": " + e.what());
  } catch (const GeometryError& e) {
    throw InputError(c.file + ": " + e.what());
  } catch (const EvalError& e) {
    throw InputError(c.file + ": " + e.what());
  }
  return l;
}

// JSON to the requested place; returns true if it went to stdout.
bool emit(const Common& c, const json& j) {
  if (c.json_out.empty()) return false;
  if (c.json_out == "-") {
    std::cout << dump(j);
    return true;
  }
  std::ofstream o(c.json_out, std::ios::binary);
  if (!o) throw InputError("cannot write '" + c.json_out + "'");
  o << dump(j);
  return false;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

int run_classify(const Common& c) {
  Loaded l = load(c);
  const Expr sigma = l.spec.sigma ? bind_params(l.spec, *l.spec.sigma) : Expr();
  ClassifyResult r = classify(l.pack, l.points, l.opts, l.spec.sigma ? &sigma : nullptr);
  json j = report_header("classify", l.text, l.opts, l.points);
  j.update(classify_json(r));
  if (emit(c, j)) return exit_code(r.verdict);

  std::cout << "verdict: " << verdict_name(r.verdict) << "\n";
  if (!r.deciding.empty()) {
    std::cout << "decided by:";
    for (const auto& t : r.deciding) std::cout << " " << t;
    std::cout << "\n";
  }
  std::cout << "reason: " << r.reason << "\n";
  for (const auto& t : j["theorems"]) {
    std::cout << "  " << t["theorem"].get<std::string>() << ": " << t["verdict"].get<std::string>();
    if (!t["reason"].get<std::string>().empty()) std::cout << " (" << t["reason"].get<std::string>() << ")";
    std::cout << "\n";
  }
  if (!j["ratios"].empty()) {
    std::cout << "residuals (max over points, raw / normalized):\n";
    for (auto& [name, v] : j["residuals"].items()) {
      std::cout << "  " << name << " " << fmt(v.get<double>());
      if (j["ratios"].contains(name)) std::cout << " / " << fmt(j["ratios"][name].get<double>());
      std::cout << "\n";
    }
  }
  return exit_code(r.verdict);
}

int run_invariants(const Common& c, const std::string& which_arg) {
  Loaded l = load(c);
  std::vector<std::string> which;
  std::stringstream ss(which_arg);
  for (std::string w; std::getline(ss, w, ',');)
    if (!w.empty()) which.push_back(w);
  if (which.empty()) which = invariant_names();
  std::optional<Expr> potential;
  if (l.spec.potential) potential = bind_params(l.spec, *l.spec.potential);
  json body;
  try {
    body = invariants_json(l.pack, l.points, which, l.opts, potential);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  json j = report_header("invariants", l.text, l.opts, l.points);
  j.update(body);
  if (emit(c, j)) return 0;
  for (auto& [name, v] : j["invariants"].items())
    std::cout << name << ": max " << fmt(v["max"].get<double>()) << ", normalized " << fmt(v["max_ratio"].get<double>())
              << " over " << v["points_used"].get<int>() << " of " << l.points.size() << " points\n";
  if (j.contains("K")) {
    std::cout << "K from " << j["K"]["source"].get<std::string>();
    if (j["K"].contains("agreement")) std::cout << ": " << j["K"]["agreement"].get<std::string>();
    if (j["K"].contains("dual_difference")) std::cout << " (difference " << fmt(j["K"]["dual_difference"].get<double>()) << ")";
    std::cout << "\n";
  }
  return 0;
}

int run_identities(const Common& c) {
  Loaded l = load(c);
  ResidualReport r = identity_suite(l.pack, l.points, l.opts.tol);
  // with a conformal factor in the file, also check the transformation rules
  if (l.spec.upsilon) {
    ResidualReport t = cotton_transform_check(l.pack, bind_params(l.spec, *l.spec.upsilon), l.points, l.opts.tol);
    r.rows.insert(r.rows.end(), t.rows.begin(), t.rows.end());
  }
  json j = report_header("identities", l.text, l.opts, l.points);
  j.update(identities_json(r));
  if (emit(c, j)) return r.all_pass() ? 0 : 1;
  for (const auto& row : r.rows)
    std::cout << (row.pass ? "ok   " : "FAIL ") << row.name << " " << fmt(row.residual) << " / " << fmt(row.ratio) << "\n";
  return r.all_pass() ? 0 : 1;
}

int run_tractor(const Common& c, const std::string& sigma_arg) {
  Loaded l = load(c);
  Expr sigma;
  if (!sigma_arg.empty()) {
    try {
      sigma = bind_params(l.spec, parse(sigma_arg));
    } catch (const ParseError& e) {
      throw InputError(std::string("--sigma: ") + e.what());
    }
  } else if (l.spec.sigma) {
    sigma = bind_params(l.spec, *l.spec.sigma);
  } else {
    throw InputError("no --sigma given and the file has no 'sigma' entry");
  }
  ParallelTractorReport r;
  try {
    r = parallel_tractor_check(l.pack, sigma, l.points, l.opts.tol);
  } catch (const TractorError& e) {
    throw InputError(e.what());
  } catch (const EvalError& e) {
    throw InputError(std::string("sigma: ") + e.what());
  }
  json j = report_header("tractor", l.text, l.opts, l.points);
  j["sigma"] = sigma.str();
  j.update(parallel_json(r));
  if (emit(c, j)) return exit_code(r.verdict);
  std::cout << "Einstein scale: " << j["einstein_scale"].get<std::string>() << "\n";
  std::cout << "reason: " << r.reason << "\n";
  std::cout << "worst |nabla I| / scale: " << fmt(r.worst_ratio) << "\n";
  return exit_code(r.verdict);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decide whether a metric is conformally Einstein"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Common classify_opts, inv_opts, id_opts, tr_opts;
  std::string which, sigma, export_name, export_out;

  auto* cl = app.add_subcommand("classify", "genericity, tensor obstructions and the tractor rank test");
  add_common(cl, classify_opts);
  auto* inv = app.add_subcommand("invariants", "evaluate selected invariants at the sample points");
  add_common(inv, inv_opts);
  inv->add_option("--which", which, "comma separated: F1,F2,E,G,Gbar,dim4,cspace,bach (default all)");
  auto* ids = app.add_subcommand("identities", "Bianchi-type identity residuals");
  add_common(ids, id_opts);
  auto* tr = app.add_subcommand("tractor", "test whether sigma is an Einstein scale");
  add_common(tr, tr_opts);
  tr->add_option("--sigma", sigma, "candidate scale (default: the file's 'sigma')");

  auto* cat = app.add_subcommand("catalog", "built-in example metrics");
  cat->require_subcommand(1);
  auto* cat_list = cat->add_subcommand("list", "list the entries");
  auto* cat_export = cat->add_subcommand("export", "write an entry as a metric definition file");
  cat_export->add_option("name", export_name)->required();
  cat_export->add_option("-o,--output", export_out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (cl->parsed()) return run_classify(classify_opts);
    if (inv->parsed()) return run_invariants(inv_opts, which);
    if (ids->parsed()) return run_identities(id_opts);
    if (tr->parsed()) return run_tractor(tr_opts, sigma);
    if (cat_list->parsed()) {
      for (const auto& name : catalog_names()) {
        CatalogEntry e = catalog_entry(name);
        std::cout << name << " (n = " << e.n << "): " << e.description << "\n";
      }
      return 0;
    }
    if (cat_export->parsed()) {
      CatalogEntry e;
      try {
        e = catalog_entry(export_name);
      } catch (const std::exception& ex) {
        throw InputError(ex.what());
      }
      const std::string text = "# " + e.description + "\n" + write_metric_spec(spec_from_catalog(e));
      if (export_out.empty()) {
        std::cout << text;
      } else {
        std::ofstream o(export_out, std::ios::binary);
        if (!o) throw InputError("cannot write '" + export_out + "'");
        o << text;
      }
      return 0;
    }
  } catch (const InputError& e) {
    std::cerr << "confein: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
