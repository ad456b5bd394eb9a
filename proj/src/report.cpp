#include "conformal/report.hpp"

#include <cstdio>

namespace conformal {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

namespace {

json point_json(const Bindings& b) {
  json j = json::object();
  for (const auto& [k, v] : b) j[k] = v;
  return j;
}

json tensor_summary(const NumTensor& t, double scale) {
  const double m = max_abs(t);
  return {{"max", m}, {"ratio", m / scale}};
}

}  // namespace

json report_header(const std::string& command, std::string_view input, const RunOptions& opts,
                   const std::vector<Bindings>& points) {
  json j;
  j["tool"] = {{"name", "confein"}, {"version", kToolVersion}};
  j["schema_version"] = kSchemaVersion;
  j["command"] = command;
  j["input_digest"] = "fnv1a64:" + hex64(fnv1a64(input));
  j["tolerances"] = {{"rel", opts.tol.rel}, {"abs", opts.tol.abs}, {"rank", opts.tol.rank}, {"nonzero", opts.tol.nonzero}};
  j["policy"] = policy_name(opts.policy);
  j["seed"] = opts.seed;
  json pts = json::array();
  for (const auto& b : points) pts.push_back(point_json(b));
  j["points"] = pts;
  return j;
}

json genericity_json(const GenericityPoint& p) {
  json j;
  j["weakly_generic"] = p.weakly_generic;
  j["weyl_kernel_dim"] = p.weyl_kernel.cols();
  j["lambda2_generic"] = p.lambda2_generic;
  j["lambda2_kernel_dim"] = p.lambda2_kernel_dim;
  j["weyl_det"] = p.weyl_det;
  j["l_det"] = p.l_det;
  j["generic"] = p.generic;
  j["c3_kernel_dim"] = p.c3_kernel_dim;
  j["c3bar_kernel_dim"] = p.c3bar_kernel_dim;
  j["c3starbar_kernel_dim"] = p.c3starbar_kernel_dim;
  j["joint_kernel_dim"] = p.h_joint_kernel_dim;
  j["chain_consistent"] = p.chain_consistent;
  if (p.c3) j["c3"] = *p.c3;
  if (p.star_c3) j["star_c3"] = *p.star_c3;
  return j;
}

json theorem_json(const TheoremVerdict& t) {
  return {{"theorem", t.theorem},
          {"precondition", t.precondition},
          {"verdict", verdict_name(t.verdict)},
          {"reason", t.reason},
          {"points_applicable", t.points_applicable},
          {"worst_ratio", t.worst_ratio}};
}

int exit_code(Verdict v) {
  switch (v) {
    case Verdict::ConformallyEinstein: return 0;
    case Verdict::NotConformallyEinstein: return 1;
    case Verdict::Inconclusive: return 2;
  }
  return 2;
}

ClassifyResult classify(const CurvaturePack& pack, const std::vector<Bindings>& points, const RunOptions& opts,
                        const Expr* sigma) {
  ClassifyResult r;
  VerdictOptions vo;
  vo.policy = opts.policy;
  vo.tol = opts.tol;
  std::optional<std::string> contradiction;
  try {
    r.tensor = conformal_einstein_tensor_verdict(pack, points, vo);
  } catch (const ConsistencyError& e) {
    contradiction = e.what();
    r.tensor.n = pack.dim();
    r.tensor.verdict = Verdict::Inconclusive;
    r.tensor.reason = e.what();
  }
  r.rank = rank_obstruction(pack, points, opts.tol, sigma);

  const Verdict t = r.tensor.verdict;
  const Verdict k = r.rank.verdict;
  if (contradiction) {
    r.verdict = Verdict::Inconclusive;
    r.reason = *contradiction;
  } else if (t != Verdict::Inconclusive && k != Verdict::Inconclusive && t != k) {
    r.verdict = Verdict::Inconclusive;
    r.reason = "tensor test " + r.tensor.deciding_theorem + " (" + verdict_name(t) + ") and " + theorem::kRank + " (" +
               verdict_name(k) + ") disagree";
  } else if (t != Verdict::Inconclusive) {
    r.verdict = t;
    r.deciding.push_back(r.tensor.deciding_theorem);
    if (k == t) r.deciding.push_back(theorem::kRank);
    r.reason = r.tensor.reason;
  } else if (k != Verdict::Inconclusive) {
    r.verdict = k;
    r.deciding.push_back(theorem::kRank);
    r.reason = r.rank.reason;
  } else {
    r.verdict = Verdict::Inconclusive;
    r.reason = r.tensor.reason.empty() ? r.rank.reason : r.tensor.reason;
  }
  return r;
}

json classify_json(const ClassifyResult& r) {
  json j;
  j["dimension"] = r.tensor.n;
  j["verdict"] = verdict_name(r.verdict);
  j["deciding_theorems"] = r.deciding;
  j["reason"] = r.reason;

  json th = json::array();
  for (const auto& t : r.tensor.theorems) th.push_back(theorem_json(t));
  json rank;
  rank["theorem"] = theorem::kRank;
  rank["precondition"] = "weakly generic";
  rank["verdict"] = verdict_name(r.rank.verdict);
  rank["reason"] = r.rank.reason;
  json rows = json::array();
  for (const auto& p : r.rank.points) {
    json q = {{"weakly_generic", p.weakly_generic}, {"rank", p.rank}, {"columns", r.rank.n + 2},
              {"kernel_dim", p.kernel.cols()}};
    if (p.alignment) q["alignment"] = *p.alignment;
    rows.push_back(q);
  }
  rank["points"] = rows;
  th.push_back(rank);
  j["theorems"] = th;

  json gen = json::array();
  for (const auto& g : r.tensor.genericity.points) gen.push_back(genericity_json(g));
  j["genericity"] = gen;

  // residual table: max over points
  json table = json::object();
  json ratios = json::object();
  json per_point = json::array();
  for (const auto& op : r.tensor.points) {
    for (const auto& [name, v] : op.residuals)
      table[name] = table.contains(name) ? std::max(table[name].get<double>(), v) : v;
    for (const auto& [name, v] : op.ratios)
      ratios[name] = ratios.contains(name) ? std::max(ratios[name].get<double>(), v) : v;
    json q = {{"scale", op.scale}, {"residuals", op.residuals}, {"ratios", op.ratios}};
    if (op.policy_ok) q["dual_policy"] = policy_name(op.policy);
    per_point.push_back(q);
  }
  j["residuals"] = table;
  j["ratios"] = ratios;
  j["per_point"] = per_point;

  const PotentialData& pd = r.tensor.potential;
  if (pd.available || !pd.note.empty()) {
    json p = {{"available", pd.available}, {"note", pd.note}};
    if (pd.available) {
      p["closedness"] = pd.closedness;
      p["closed"] = pd.closed;
      p["upsilon"] = pd.upsilon;
      p["path_disagreement"] = pd.path_disagreement;
    }
    j["potential"] = p;
  }
  j["notes"] = r.tensor.notes;
  return j;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& invariant_names() {
  static const std::vector<std::string> names{"F1", "F2", "E", "G", "Gbar", "dim4", "cspace", "bach"};
  return names;
}

json invariants_json(const CurvaturePack& pack, const std::vector<Bindings>& points,
                     const std::vector<std::string>& which, const RunOptions& opts,
                     const std::optional<Expr>& potential) {
  const auto& known = invariant_names();
  for (const auto& w : which)
    if (std::find(known.begin(), known.end(), w) == known.end())
      throw std::invalid_argument("unknown invariant '" + w + "'");
  auto wants = [&](const char* name) { return std::find(which.begin(), which.end(), name) != which.end(); };

  const int n = pack.dim();
  const int N = n * (n - 1) / 2;
  const double k_tol = 10 * opts.tol.rel;
  std::map<std::string, json> rows;
  for (const auto& w : which) rows[w] = json::array();
  double k_diff = 0.0;
  bool k_compared = false;

  for (const auto& b : points) {
    PointCurvature pc = evaluate(pack, b);
    const double s = pc.scale();
    auto put = [&](const std::string& name, json v) { rows[name].push_back(std::move(v)); };
    auto skip = [&](const std::string& name, const std::string& why) { put(name, json{{"unavailable", why}}); };

    WeylOperator wo = weyl_operator(pc, opts.tol);
    const bool l2gen = wo.rank == N;
    for (const char* name : {"F1", "F2"}) {
      if (!wants(name)) continue;
      if (!l2gen) {
        skip(name, "not Lambda^2-generic");
        continue;
      }
      put(name, tensor_summary(std::string(name) == "F1" ? f1_tensor(pc, opts.tol) : f2_tensor(pc, opts.tol), s));
    }
    if (wants("G")) put("G", tensor_summary(g_tensor(pc, opts.tol), s));
    if (wants("Gbar")) put("Gbar", tensor_summary(gbar_tensor(pc, opts.tol), s));
    if (wants("dim4")) {
      if (n != 4)
        skip("dim4", "needs dimension 4");
      else
        put("dim4", tensor_summary(dim4_invariant(pc), s));
    }

    if (!(wants("E") || wants("cspace") || wants("bach"))) continue;
    std::optional<DualCandidate> dual;
    std::string why;
    try {
      dual = dual_candidate(pc, opts.policy, opts.tol);
    } catch (const PreconditionError& e) {
      why = e.what();
    }
    std::optional<NumTensor> Kp;
    if (potential) Kp = upsilon_gradient(*potential, pack.metric->chart(), b);
    std::optional<NumTensor> Kd;
    if (dual) Kd = k_field(*dual, pc);
    if (Kp && Kd) {
      k_compared = true;
      k_diff = std::max(k_diff, max_abs(*Kd - *Kp) / std::max(1.0, max_abs(*Kp)));
    }

    if (wants("E")) {
      if (dual)
        put("E", tensor_summary(e_tensor(pc, *dual), s));
      else
        skip("E", why);
    }
    for (const char* name : {"cspace", "bach"}) {
      if (!wants(name)) continue;
      auto residual = [&](const NumTensor& K) {
        return std::string(name) == "cspace" ? cspace_residual(pc, K) : bach_residual(pc, K);
      };
      json v = json::object();
      if (Kd) v["dual"] = tensor_summary(residual(*Kd), s);
      if (Kp) v["potential"] = tensor_summary(residual(*Kp), s);
      if (!Kd && !Kp) v["unavailable"] = why;
      else if (!Kd) v["dual_unavailable"] = why;
      put(name, v);
    }
  }

  json out = json::object();
  for (auto& [name, pts] : rows) {
    double worst = 0.0, worst_ratio = 0.0;
    int used = 0;
    for (const auto& p : pts) {
      // prefer the potential K when both are present
      const json* q = &p;
      if (p.contains("potential"))
        q = &p["potential"];
      else if (p.contains("dual"))
        q = &p["dual"];
      if (!q->contains("max")) continue;
      ++used;
      worst = std::max(worst, (*q)["max"].get<double>());
      worst_ratio = std::max(worst_ratio, (*q)["ratio"].get<double>());
    }
    out[name] = {{"points", pts}, {"points_used", used}, {"max", worst}, {"max_ratio", worst_ratio}};
  }

  json j;
  j["invariants"] = out;
  if (wants("E") || wants("cspace") || wants("bach")) {
    json k;
    if (k_compared) {
      k["source"] = "potential gradient";
      k["dual_difference"] = k_diff;
      k["agreement"] = k_diff < k_tol ? "potential and dual tensor agree" : "potential and dual tensor disagree";
    } else if (potential) {
      k["source"] = "potential gradient";
      k["agreement"] = "dual tensor unavailable";
    } else {
      k["source"] = std::string("dual tensor, policy ") + policy_name(opts.policy);
    }
    j["K"] = k;
  }
  return j;
}

json identities_json(const ResidualReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"name", row.name}, {"residual", row.residual}, {"ratio", row.ratio}, {"pass", row.pass}});
  return {{"identities", rows}, {"all_pass", r.all_pass()}};
}

json parallel_json(const ParallelTractorReport& r) {
  json pts = json::array();
  for (const auto& p : r.points)
    pts.push_back({{"nabla_I", p.nabla_i},
                   {"scale", p.scale},
                   {"sigma", p.sigma},
                   {"h_II", p.h_ii},
                   {"h_II_expected", p.h_ii_expected},
                   {"trace_free_P", p.trace_free_p}});
  return {{"theorem", theorem::kParallel},
          {"verdict", verdict_name(r.verdict)},
          {"einstein_scale", r.verdict == Verdict::ConformallyEinstein     ? "yes"
                             : r.verdict == Verdict::NotConformallyEinstein ? "no"
                                                                            : "inconclusive"},
          {"reason", r.reason},
          {"worst_ratio", r.worst_ratio},
          {"points", pts}};
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace conformal
