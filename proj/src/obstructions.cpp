#include "conformal/obstructions.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace conformal {

namespace {

std::size_t us(int i) { return static_cast<std::size_t>(i); }

NumTensor raise_vec(const NumTensor& K, const NumTensor& ginv) { return raise_slots(K, ginv, {0}); }

// V^d C_dabc
NumTensor contract_first(const NumTensor& V, const NumTensor& C) {
  const int n = C.dim(0);
  NumTensor out = NumTensor::cube(n, 3, 0.0);
  for (int d = 0; d < n; ++d) {
    if (V(d) == 0.0) continue;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) out(a, b, c) += V(d) * C(d, a, b, c);
  }
  return out;
}

// V^d W^c C_dabc
NumTensor contract_two(const NumTensor& V, const NumTensor& W, const NumTensor& C) {
  const int n = C.dim(0);
  NumTensor out({n, n}, 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double acc = 0.0;
      for (int d = 0; d < n; ++d)
        for (int c = 0; c < n; ++c) acc += V(d) * W(c) * C(d, a, b, c);
      out(a, b) = acc;
    }
  return out;
}

// Y_b = T_bcde A^cde for T with every slot lowered, and nabla_f Y_b.
struct Contracted {
  NumTensor Y;   // Y_b
  NumTensor dY;  // nabla_f Y_b
};

Contracted contract_with_cotton(const PointCurvature& pc, const NumTensor& T, const NumTensor& dT) {
  const int n = pc.n;
  NumTensor Aup = raise_all(pc.A, pc.ginv);
  NumTensor dAup = raise_slots(pc.nablaA, pc.ginv, {1, 2, 3});
  Contracted c{NumTensor({n}, 0.0), NumTensor({n, n}, 0.0)};
  for (int b = 0; b < n; ++b)
    for (int x = 0; x < n; ++x)
      for (int y = 0; y < n; ++y)
        for (int z = 0; z < n; ++z) {
          c.Y(b) += T(b, x, y, z) * Aup(x, y, z);
          for (int f = 0; f < n; ++f) c.dY(f, b) += dT(f, b, x, y, z) * Aup(x, y, z) + T(b, x, y, z) * dAup(f, x, y, z);
        }
  return c;
}

NumTensor outer(const NumTensor& X, const NumTensor& Y) {
  const int n = X.dim(0);
  NumTensor out({n, n});
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out(a, b) = X(a) * Y(b);
  return out;
}

// D^acde = -Ltilde^a_b C^bcde (fully lowered) and its derivative.
struct AdjugateDual {
  double det = 0.0;
  NumTensor ddet;  // nabla_f det
  NumTensor T;     // lowered
  NumTensor dT;
};

AdjugateDual l_adjugate_dual(const PointCurvature& pc, const Tolerances& tol) {
  const int n = pc.n;
  LOperator lo = l_operator(pc, tol);
  auto dLs = l_operator_derivatives(pc);
  auto dadj = adjugate_derivatives(lo.L, dLs);
  NumTensor C1 = raise_slots(pc.C, pc.ginv, {0});
  NumTensor dC1 = raise_slots(pc.nablaC, pc.ginv, {1});
  AdjugateDual out{lo.det, NumTensor({n}), NumTensor::cube(n, 4, 0.0), NumTensor::cube(n, 5, 0.0)};
  NumTensor Dup = NumTensor::cube(n, 4, 0.0);  // D^a_cde
  NumTensor dDup = NumTensor::cube(n, 5, 0.0);
  for (int f = 0; f < n; ++f) out.ddet(f) = determinant_derivative(lo.L, dLs[us(f)]);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d)
          for (int e = 0; e < n; ++e) {
            Dup(a, c, d, e) -= lo.adj(a, b) * C1(b, c, d, e);
            for (int f = 0; f < n; ++f)
              dDup(f, a, c, d, e) -= dadj[us(f)](a, b) * C1(b, c, d, e) + lo.adj(a, b) * dC1(f, b, c, d, e);
          }
  out.T = raise_slots(Dup, pc.g, {0});
  out.dT = raise_slots(dDup, pc.g, {1});
  return out;
}

// Ctilde_bcde (fully lowered) from the adjugate of the Lambda^2 operator.
AdjugateDual weyl_adjugate(const PointCurvature& pc, const Tolerances& tol) {
  const int n = pc.n;
  WeylOperator wo = weyl_operator(pc, tol);
  auto dMs = weyl_operator_derivatives(pc);
  auto dadj = adjugate_derivatives(wo.M, dMs);
  AdjugateDual out{wo.det, NumTensor({n}), raise_slots(wo.Ctilde, pc.g, {2, 3}), NumTensor::cube(n, 5, 0.0)};
  for (int f = 0; f < n; ++f) {
    out.ddet(f) = determinant_derivative(wo.M, dMs[us(f)]);
    NumTensor slab = raise_slots(pairs_tensor(dadj[us(f)], n, 0.5), pc.g, {2, 3});
    std::copy(slab.data().begin(), slab.data().end(), out.dT.data().begin() + static_cast<std::ptrdiff_t>(us(f) * slab.size()));
  }
  return out;
}

// Y^d = Ctilde^defg A_efg
NumTensor ctilde_cotton(const PointCurvature& pc, const WeylOperator& wo) {
  const int n = pc.n;
  NumTensor Ct = raise_slots(wo.Ctilde, pc.ginv, {0, 1});
  NumTensor Y({n}, 0.0);
  for (int d = 0; d < n; ++d)
    for (int e = 0; e < n; ++e)
      for (int f = 0; f < n; ++f)
        for (int g = 0; g < n; ++g) Y(d) += Ct(d, e, f, g) * pc.A(e, f, g);
  return Y;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

NumTensor cspace_residual(const PointCurvature& pc, const NumTensor& K) {
  return pc.A + contract_first(raise_vec(K, pc.ginv), pc.C);
}

NumTensor bach_residual(const PointCurvature& pc, const NumTensor& K) {
  NumTensor Kup = raise_vec(K, pc.ginv);
  return pc.B + static_cast<double>(pc.n - 4) * contract_two(Kup, Kup, pc.C);
}

NumTensor f1_tensor(const PointCurvature& pc, const Tolerances& tol) {
  if (pc.n < 4) throw std::invalid_argument("F1 needs dimension at least 4");
  WeylOperator wo = weyl_operator(pc, tol);
  NumTensor Y = ctilde_cotton(pc, wo);
  return (1.0 - pc.n) * wo.det * pc.A + 2.0 * contract_first(Y, pc.C);
}

NumTensor f2_tensor(const PointCurvature& pc, const Tolerances& tol) {
  if (pc.n < 4) throw std::invalid_argument("F2 needs dimension at least 4");
  WeylOperator wo = weyl_operator(pc, tol);
  NumTensor Y = ctilde_cotton(pc, wo);
  const double k = (pc.n - 1.0) * (pc.n - 1.0) * wo.det * wo.det;
  return k * pc.B + 4.0 * (pc.n - 4.0) * contract_two(Y, Y, pc.C);
}

NumTensor e_bracket(const PointCurvature& pc, const DualCandidate& d) {
  const int n = pc.n;
  NumTensor K = k_field(d, pc);
  NumTensor dK = nabla_k_field(d, pc);  // dK(b, a) = nabla_b K_a
  NumTensor out({n, n});
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out(a, b) = pc.P(a, b) - dK(a, b) + K(a) * K(b);
  return out;
}

NumTensor e_tensor(const PointCurvature& pc, const DualCandidate& d) {
  return trace_free(e_bracket(pc, d), pc.g, pc.ginv);
}

NumTensor g_tensor(const PointCurvature& pc, const Tolerances& tol) {
  if (pc.n < 4) throw std::invalid_argument("G needs dimension at least 4");
  const int n = pc.n;
  AdjugateDual ad = l_adjugate_dual(pc, tol);
  Contracted X = contract_with_cotton(pc, ad.T, ad.dT);
  NumTensor out({n, n});
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      out(a, b) = ad.det * ad.det * pc.P(a, b) - ad.det * X.dY(a, b) + ad.ddet(a) * X.Y(b) + X.Y(a) * X.Y(b);
  return trace_free(out, pc.g, pc.ginv);
}

NumTensor gbar_tensor(const PointCurvature& pc, const Tolerances& tol) {
  if (pc.n < 4) throw std::invalid_argument("Gbar needs dimension at least 4");
  const int n = pc.n;
  const double m = 1.0 - n;
  AdjugateDual ct = weyl_adjugate(pc, tol);
  Contracted X = contract_with_cotton(pc, ct.T, ct.dT);
  NumTensor out({n, n});
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      out(a, b) = m * m * ct.det * ct.det * pc.P(a, b) - 2.0 * m * ct.det * X.dY(a, b) + 2.0 * m * ct.ddet(a) * X.Y(b) +
                  4.0 * X.Y(a) * X.Y(b);
  return trace_free(out, pc.g, pc.ginv);
}

double weyl_norm_squared(const PointCurvature& pc) {
  NumTensor Cup = raise_all(pc.C, pc.ginv);
  double s = 0.0;
  for (std::size_t i = 0; i < Cup.size(); ++i) s += Cup[i] * pc.C[i];
  return s;
}

NumTensor dim4_invariant(const PointCurvature& pc) {
  if (pc.n != 4) throw std::invalid_argument("dim4 invariant needs dimension 4");
  const int n = pc.n;
  NumTensor Cup = raise_all(pc.C, pc.ginv);
  const double c2 = weyl_norm_squared(pc);
  NumTensor dc2({n}, 0.0);
  for (int f = 0; f < n; ++f)
    for (std::size_t i = 0; i < Cup.size(); ++i) dc2(f) += 2.0 * Cup[i] * pc.nablaC[us(f) * Cup.size() + i];
  Contracted X = contract_with_cotton(pc, pc.C, pc.nablaC);
  NumTensor out({n, n});
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      out(a, b) = c2 * c2 * pc.P(a, b) + 4.0 * c2 * X.dY(a, b) - 4.0 * X.Y(b) * dc2(a) + 16.0 * X.Y(a) * X.Y(b);
  return trace_free(out, pc.g, pc.ginv);
}

NumTensor rl2cotton(const PointCurvature& pc, const Tolerances& tol) {
  const int n = pc.n;
  LOperator lo = l_operator(pc, tol);
  NumTensor Cup = raise_all(pc.C, pc.ginv);
  NumTensor U({n}, 0.0);  // C^efgh A_fgh
  for (int e = 0; e < n; ++e)
    for (int f = 0; f < n; ++f)
      for (int g = 0; g < n; ++g)
        for (int h = 0; h < n; ++h) U(e) += Cup(e, f, g, h) * pc.A(f, g, h);
  NumTensor Z({n}, 0.0);
  for (int d = 0; d < n; ++d)
    for (int e = 0; e < n; ++e) Z(d) += lo.adj(d, e) * U(e);
  return lo.det * pc.A - contract_first(Z, pc.C);
}

NumTensor rl2cotton_dim4(const PointCurvature& pc) {
  if (pc.n != 4) throw std::invalid_argument("dimension-4 Cotton invariant needs dimension 4");
  const int n = pc.n;
  NumTensor Cup = raise_all(pc.C, pc.ginv);
  NumTensor U({n}, 0.0);
  for (int d = 0; d < n; ++d)
    for (int e = 0; e < n; ++e)
      for (int f = 0; f < n; ++f)
        for (int g = 0; g < n; ++g) U(d) += Cup(d, e, f, g) * pc.A(e, f, g);
  return weyl_norm_squared(pc) * pc.A - 4.0 * contract_first(U, pc.C);
}

double closedness_residual(const NumTensor& nablaK) {
  const int n = nablaK.dim(0);
  double worst = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) worst = std::max(worst, 0.5 * std::abs(nablaK(a, b) - nablaK(b, a)));
  return worst;
}

// ---------------------------------------------------------------------------

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::ConformallyEinstein: return "conformally Einstein";
    case Verdict::NotConformallyEinstein: return "not conformally Einstein";
    case Verdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

TheoremVerdict decide(std::string theorem, std::string precondition, const std::vector<PointDecision>& pts,
                      const Tolerances& tol) {
  TheoremVerdict tv;
  tv.theorem = std::move(theorem);
  tv.precondition = std::move(precondition);
  int zero = 0;
  int nonzero_at = -1;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    if (!p.applicable) continue;
    ++tv.points_applicable;
    tv.worst_ratio = std::max(tv.worst_ratio, p.residual / p.scale);
    if (tol.is_zero(p.residual, p.scale))
      ++zero;
    else if (tol.is_nonzero(p.residual, p.scale) && nonzero_at < 0)
      nonzero_at = static_cast<int>(i);
  }
  const int total = static_cast<int>(pts.size());
  if (nonzero_at >= 0) {
    tv.verdict = Verdict::NotConformallyEinstein;
    tv.reason = "residual exceeds " + fmt(tol.nonzero) + " x scale at sample point " + std::to_string(nonzero_at);
  } else if (total > 0 && tv.points_applicable == total && zero == total) {
    tv.verdict = Verdict::ConformallyEinstein;
    tv.reason = "residual vanishes at all " + std::to_string(total) + " sample points";
  } else if (tv.points_applicable < total) {
    tv.reason = "precondition '" + tv.precondition + "' fails at " + std::to_string(total - tv.points_applicable) +
                " of " + std::to_string(total) + " sample points";
  } else {
    tv.reason = "borderline residual (ratio " + fmt(tv.worst_ratio) + ")";
  }
  return tv;
}

ObstructionReport conformal_einstein_tensor_verdict(const CurvaturePack& pack, const std::vector<Bindings>& points,
                                                    const VerdictOptions& opts) {
  const Tolerances& tol = opts.tol;
  ObstructionReport rep;
  const int n = pack.dim();
  rep.n = n;

  if (n == 3) {
    std::vector<PointDecision> dec;
    for (const auto& b : points) {
      PointCurvature pc = evaluate(pack, b);
      ObstructionPoint op;
      op.point = b;
      op.scale = pc.scale();
      op.residuals["cotton"] = max_abs(pc.A);
      op.ratios["cotton"] = op.residuals["cotton"] / op.scale;
      dec.push_back({true, max_abs(pc.A), op.scale});
      rep.points.push_back(std::move(op));
    }
    rep.theorems.push_back(decide(theorem::kDim3, "n = 3", dec, tol));
    rep.verdict = rep.theorems.back().verdict;
    rep.deciding_theorem = theorem::kDim3;
    rep.reason = rep.theorems.back().reason;
    rep.notes.push_back("in dimension 3 conformally Einstein metrics are exactly the conformally flat ones, detected by A = 0");
    return rep;
  }

  const int N = n * (n - 1) / 2;
  std::vector<PointDecision> dE, dG, dGbar, dF, d4;
  for (const auto& b : points) {
    PointCurvature pc = evaluate(pack, b);
    GenericityPoint gp = classify_point(pc, tol);
    ObstructionPoint op;
    op.point = b;
    op.scale = pc.scale();
    op.policy = opts.policy;

    // E with the chosen dual
    std::optional<DualCandidate> dual;
    if (gp.weakly_generic) {
      try {
        dual = dual_candidate(pc, opts.policy, tol);
      } catch (const PreconditionError&) {
      }
    }
    double e_scale = op.scale;
    if (dual) {
      op.policy_ok = true;
      op.policy = dual->provenance;
      op.K = k_field(*dual, pc);
      NumTensor dK = nabla_k_field(*dual, pc);
      NumTensor E = e_tensor(pc, *dual);
      e_scale = std::max({op.scale, max_abs(dK), max_abs(outer(op.K, op.K))});
      NumTensor cs = cspace_residual(pc, op.K);
      NumTensor br = bach_residual(pc, op.K);
      op.residuals["cspace"] = max_abs(cs);
      op.residuals["bach"] = max_abs(br);
      op.residuals["E"] = max_abs(E);
      op.residuals["closedness"] = closedness_residual(dK);
      op.residuals["dual_defining"] = dual_defining_residual(*dual, pc);
      op.ratios["cspace"] = op.residuals["cspace"] / op.scale;
      op.ratios["bach"] = op.residuals["bach"] / std::max(op.scale, max_abs(pc.B));
      op.ratios["E"] = op.residuals["E"] / e_scale;
      op.ratios["closedness"] = op.residuals["closedness"] / e_scale;
      dE.push_back({true, op.residuals["E"], e_scale});
    } else {
      dE.push_back({});
    }

    // G, needs ||L|| != 0
    LOperator lo = l_operator(pc, tol);
    if (!weyl_vanishes(pc, tol) && lo.rank == n) {
      NumTensor G = g_tensor(pc, tol);
      DualCandidate dl = dual_candidate(pc, DualPolicy::FromL, tol);
      NumTensor EL = e_tensor(pc, dl);
      const double l2 = lo.det * lo.det;
      const double s = std::max({op.scale, max_abs(nabla_k_field(dl, pc)), max_abs(outer(k_field(dl, pc), k_field(dl, pc)))});
      op.residuals["G"] = max_abs(G);
      op.ratios["G"] = max_abs(G) / (std::abs(l2) * s);
      op.residuals["G_vs_L2E"] = max_abs(G - l2 * EL) / (std::abs(l2) * s);
      dG.push_back({true, max_abs(G) / std::abs(l2), s});
    } else {
      dG.push_back({});
    }

    // Gbar, F1 and F2 need ||C|| != 0
    WeylOperator wo = weyl_operator(pc, tol);
    if (wo.rank == N) {
      NumTensor Gb = gbar_tensor(pc, tol);
      DualCandidate dc = dual_candidate(pc, DualPolicy::FromC, tol);
      NumTensor EC = e_tensor(pc, dc);
      const double c2 = (1.0 - n) * (1.0 - n) * wo.det * wo.det;
      NumTensor Kc = k_field(dc, pc);
      const double s = std::max({op.scale, max_abs(nabla_k_field(dc, pc)), max_abs(outer(Kc, Kc))});
      op.residuals["Gbar"] = max_abs(Gb);
      op.ratios["Gbar"] = max_abs(Gb) / (std::abs(c2) * s);
      op.residuals["Gbar_vs_C2E"] = max_abs(Gb - c2 * EC) / (std::abs(c2) * s);
      dGbar.push_back({true, max_abs(Gb) / std::abs(c2), s});

      NumTensor F1 = f1_tensor(pc, tol);
      NumTensor F2 = f2_tensor(pc, tol);
      const double p1 = std::abs((1.0 - n) * wo.det);
      const double p2 = std::abs(c2);
      op.residuals["F1"] = max_abs(F1);
      op.residuals["F2"] = max_abs(F2);
      const double sf = std::max({op.scale, max_abs(pc.B), max_abs(outer(Kc, Kc)) * max_abs(pc.C)});
      op.ratios["F1"] = max_abs(F1) / (p1 * op.scale);
      op.ratios["F2"] = max_abs(F2) / (p2 * sf);
      if (gp.generic)
        dF.push_back({true, std::max(op.ratios["F1"], op.ratios["F2"]), 1.0});
      else
        dF.push_back({});
    } else {
      dGbar.push_back({});
      dF.push_back({});
    }

    if (n == 4) {
      const double c2 = weyl_norm_squared(pc);
      const double cmax = max_abs(pc.C);
      if (!weyl_vanishes(pc, tol) && std::abs(c2) > tol.rank * cmax * cmax) {
        NumTensor D4 = dim4_invariant(pc);
        // same normalization as E with Dtilde = -4 C / |C|^2
        op.residuals["dim4"] = max_abs(D4);
        op.ratios["dim4"] = max_abs(D4) / (c2 * c2 * e_scale);
        d4.push_back({true, max_abs(D4) / (c2 * c2), e_scale});
      } else {
        d4.push_back({});
      }
    }
    rep.genericity.points.push_back(gp);
    rep.points.push_back(std::move(op));
  }

  rep.theorems.push_back(decide(theorem::kG, "||L|| != 0", dG, tol));
  rep.theorems.push_back(decide(theorem::kGbar, "Lambda^2-generic", dGbar, tol));
  rep.theorems.push_back(decide(theorem::kEtensor, std::string("weakly generic with dual ") + policy_name(opts.policy), dE, tol));
  if (n == 4) rep.theorems.push_back(decide(theorem::kDim4, "|C|^2 != 0", d4, tol));
  rep.theorems.push_back(decide(theorem::kGeneric, "generic", dF, tol));

  const TheoremVerdict* yes = nullptr;
  const TheoremVerdict* no = nullptr;
  for (const auto& t : rep.theorems) {
    if (t.verdict == Verdict::ConformallyEinstein && !yes) yes = &t;
    if (t.verdict == Verdict::NotConformallyEinstein && !no) no = &t;
  }
  if (yes && no)
    throw ConsistencyError("contradictory verdicts: " + yes->theorem + " says conformally Einstein, " + no->theorem +
                           " says not (" + no->reason + ")");
  if (yes || no) {
    const TheoremVerdict* t = yes ? yes : no;
    rep.verdict = t->verdict;
    rep.deciding_theorem = t->theorem;
    rep.reason = t->reason;
  } else {
    rep.verdict = Verdict::Inconclusive;
    if (!rep.genericity.all_weakly_generic()) {
      rep.reason = "not weakly generic";
      bool flat = true;
      bool cotton_flat = true;
      for (const auto& b : points) {
        PointCurvature pc = evaluate(pack, b);
        flat = flat && weyl_vanishes(pc, tol);
        cotton_flat = cotton_flat && tol.is_zero(max_abs(pc.A), pc.scale());
      }
      if (flat) rep.notes.push_back(std::string("Weyl tensor vanishes at the sample points; A = 0 ") + (cotton_flat ? "holds" : "fails"));
    } else {
      rep.reason = "no applicable test was decisive";
    }
  }

  if (rep.verdict == Verdict::ConformallyEinstein && opts.reconstruct_potential) {
    DualPolicy pol = opts.policy;
    for (const auto& op : rep.points)
      if (op.policy_ok) pol = op.policy;
    rep.potential = reconstruct_potential(pack, points, pol, tol);
  }
  return rep;
}

// ---------------------------------------------------------------------------

CottonScaleReport cotton_scale_verdict(const CurvaturePack& pack, const std::vector<Bindings>& points,
                                       DualPolicy policy, const Tolerances& tol) {
  CottonScaleReport rep;
  const int n = pack.dim();
  std::vector<PointDecision> dec;
  if (n == 3) {
    rep.route = "n = 3: A = 0";
    for (const auto& b : points) {
      PointCurvature pc = evaluate(pack, b);
      rep.cspace_ratio.push_back(max_abs(pc.A) / pc.scale());
      dec.push_back({true, max_abs(pc.A), pc.scale()});
    }
  } else {
    std::vector<PointCurvature> pcs;
    bool all_l2 = true;
    for (const auto& b : points) {
      pcs.push_back(evaluate(pack, b));
      all_l2 = all_l2 && weyl_operator(pcs.back(), tol).rank == n * (n - 1) / 2;
    }
    rep.route = all_l2 ? "Lambda^2-generic: F1 and closedness" : "weakly generic: A + K.C and closedness";
    for (const auto& pc : pcs) {
      GenericityPoint gp = classify_point(pc, tol);
      std::optional<DualCandidate> d;
      if (gp.weakly_generic) {
        try {
          d = dual_candidate(pc, all_l2 ? DualPolicy::FromC : policy, tol);
        } catch (const PreconditionError&) {
        }
      }
      if (!d) {
        rep.cspace_ratio.push_back(-1.0);
        rep.closedness_ratio.push_back(-1.0);
        dec.push_back({});
        continue;
      }
      const double s = pc.scale();
      NumTensor K = k_field(*d, pc);
      NumTensor dK = nabla_k_field(*d, pc);
      const double cs = max_abs(cspace_residual(pc, K));
      const double cl = closedness_residual(dK);
      const double sk = std::max(s, max_abs(dK));
      rep.cspace_ratio.push_back(cs / s);
      rep.closedness_ratio.push_back(cl / sk);
      if (all_l2) {
        WeylOperator wo = weyl_operator(pc, tol);
        rep.f1_ratio.push_back(max_abs(f1_tensor(pc, tol)) / (std::abs((1.0 - n) * wo.det) * s));
      }
      LOperator lo = l_operator(pc, tol);
      if (lo.rank == n) rep.rl2cotton_ratio.push_back(max_abs(rl2cotton(pc, tol)) / (std::abs(lo.det) * s));
      if (n == 4) {
        const double c2 = weyl_norm_squared(pc);
        if (c2 != 0.0) rep.rl2cotton_dim4_ratio.push_back(max_abs(rl2cotton_dim4(pc)) / (std::abs(c2) * s));
      }
      dec.push_back({true, std::max(cs / s, cl / sk), 1.0});
    }
  }
  TheoremVerdict tv = decide(theorem::kCotton, rep.route, dec, tol);
  rep.verdict = tv.verdict;
  rep.reason = tv.reason;
  return rep;
}

// ---------------------------------------------------------------------------

PotentialData reconstruct_potential(const CurvaturePack& pack, const std::vector<Bindings>& points, DualPolicy policy,
                                    const Tolerances& tol) {
  PotentialData pd;
  if (points.empty()) return pd;
  const Chart& chart = pack.metric->chart();
  const int n = chart.dim();

  for (const auto& b : points) {
    PointCurvature pc = evaluate(pack, b);
    DualCandidate d = dual_candidate(pc, policy, tol);
    NumTensor dK = nabla_k_field(d, pc);
    pd.closedness = std::max(pd.closedness, closedness_residual(dK) / std::max(pc.scale(), max_abs(dK)));
  }
  pd.closed = tol.is_zero(pd.closedness, 1.0);

  auto K_at = [&](const Bindings& b, int coord) {
    if (!admissible_point(*pack.metric, b)) throw DomainError("integration path leaves the admissible region at " + format_point(b));
    PointCurvature pc = evaluate(pack, b);
    return k_field(dual_candidate(pc, policy, tol), pc)(coord);
  };
  constexpr int kSteps = 64;
  auto integrate = [&](const Bindings& from, const Bindings& to, const std::vector<int>& order) {
    Bindings cur = from;
    double total = 0.0;
    for (int i : order) {
      const std::string& x = chart.coords[us(i)];
      const double a = cur.at(x);
      const double bnd = to.at(x);
      if (a == bnd) continue;
      const double h = (bnd - a) / kSteps;
      double acc = 0.0;
      for (int k = 0; k <= kSteps; ++k) {
        Bindings p = cur;
        p[x] = a + k * h;
        const double w = (k == 0 || k == kSteps) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        acc += w * K_at(p, i);
      }
      total += acc * h / 3.0;
      cur[x] = bnd;
    }
    return total;
  };
  std::vector<int> fwd(us(n)), rev(us(n));
  for (int i = 0; i < n; ++i) {
    fwd[us(i)] = i;
    rev[us(i)] = n - 1 - i;
  }
  try {
    pd.upsilon.push_back(0.0);
    for (std::size_t k = 1; k < points.size(); ++k) {
      const double u1 = integrate(points[0], points[k], fwd);
      const double u2 = integrate(points[0], points[k], rev);
      pd.upsilon.push_back(u1);
      pd.path_disagreement = std::max(pd.path_disagreement, std::abs(u1 - u2));
    }
    pd.available = true;
  } catch (const std::exception& e) {
    pd.upsilon.clear();
    pd.note = e.what();
  }
  return pd;
}

// ---------------------------------------------------------------------------

ExponentFit fit_exponent(const std::vector<CovarianceSample>& samples, double floor) {
  ExponentFit fit;
  double lo = 0.0, hi = 0.0, sum = 0.0;
  for (const auto& s : samples) {
    if (std::abs(s.upsilon) < 1e-12) continue;
    const double mx = max_abs(s.orig);
    if (mx == 0.0) continue;
    for (std::size_t i = 0; i < s.orig.size(); ++i) {
      const double o = s.orig[i];
      const double h = s.hat[i];
      if (std::abs(o) <= floor * mx) continue;
      if ((o > 0) != (h > 0) || h == 0.0) {
        fit.sign_mismatch = true;
        continue;
      }
      const double w = std::log(h / o) / s.upsilon;
      if (fit.samples == 0) lo = hi = w;
      lo = std::min(lo, w);
      hi = std::max(hi, w);
      sum += w;
      ++fit.samples;
    }
  }
  if (fit.samples > 0) {
    fit.exponent = sum / fit.samples;
    fit.spread = hi - lo;
  }
  return fit;
}

}  // namespace conformal
