#include "conformal/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace conformal {

namespace {

using V = Variance;

std::vector<V> downs(int k) { return std::vector<V>(static_cast<std::size_t>(k), V::Down); }

}  // namespace

CurvaturePack curvature_pack(MetricPtr gp, const CurvatureOptions& opts) {
  const MetricField& g = *gp;
  const int n = g.dim();
  const Chart& chart = g.chart();
  ChartPtr cp = g.chart_ptr();
  DiffCache& dc = g.diff_cache();
  const auto& gd = g.g().comps;
  const auto& gi = g.inverse().comps;

  CurvaturePack pack;
  pack.metric = gp;
  pack.gamma = opts.gamma_override ? *opts.gamma_override : christoffel(g);
  const auto& G = pack.gamma.comps;

  // R_ab^c_d
  pack.riemann = TensorField(cp, {V::Down, V::Down, V::Up, V::Down});
  auto& Rm = pack.riemann.comps;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          std::vector<Expr> t;
          t.push_back(dc.diff(G(c, b, d), chart.symbol(a)));
          t.push_back(-dc.diff(G(c, a, d), chart.symbol(b)));
          for (int e = 0; e < n; ++e) {
            if (!G(c, a, e).is_zero() && !G(e, b, d).is_zero()) t.push_back(G(c, a, e) * G(e, b, d));
            if (!G(c, b, e).is_zero() && !G(e, a, d).is_zero()) t.push_back(-(G(c, b, e) * G(e, a, d)));
          }
          Expr v = add(std::move(t));
          Rm(a, b, c, d) = v;
          Rm(b, a, c, d) = v.is_zero() ? v : -v;
        }

  pack.ricci = TensorField(cp, downs(2));
  for (int b = 0; b < n; ++b)
    for (int d = 0; d < n; ++d) {
      std::vector<Expr> t;
      for (int c = 0; c < n; ++c) t.push_back(Rm(c, b, c, d));
      pack.ricci.comps(b, d) = add(std::move(t));
    }
  {
    std::vector<Expr> t;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (!gi(a, b).is_zero() && !pack.ricci.comps(a, b).is_zero()) t.push_back(gi(a, b) * pack.ricci.comps(a, b));
    pack.scalar = add(std::move(t));
  }
  pack.J = pack.scalar * Expr(Rational(1, 2 * (n - 1)));

  pack.schouten = TensorField(cp, downs(2));
  const Expr inv_n2(Rational(1, n - 2));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) pack.schouten.comps(a, b) = (pack.ricci.comps(a, b) - pack.J * gd(a, b)) * inv_n2;
  const auto& P = pack.schouten.comps;

  // Weyl by subtraction from R_abcd = g_ce R_ab^e_d.
  TensorField weyl(cp, downs(4), 2);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = c + 1; d < n; ++d) {
          std::vector<Expr> t;
          for (int e = 0; e < n; ++e)
            if (!gd(c, e).is_zero() && !Rm(a, b, e, d).is_zero()) t.push_back(gd(c, e) * Rm(a, b, e, d));
          t.push_back(-(gd(c, a) * P(b, d)));
          t.push_back(gd(c, b) * P(a, d));
          t.push_back(-(gd(d, b) * P(a, c)));
          t.push_back(gd(d, a) * P(b, c));
          Expr v = add(std::move(t));
          Expr nv = v.is_zero() ? v : -v;
          weyl.comps(a, b, c, d) = v;
          weyl.comps(b, a, c, d) = nv;
          weyl.comps(a, b, d, c) = nv;
          weyl.comps(b, a, d, c) = v;
        }
  if (n == 3) {
    pack.weyl_raw = weyl;
    pack.weyl = TensorField(cp, downs(4), 2);
  } else {
    pack.weyl = std::move(weyl);
  }

  // A_abc = nabla_b P_ca - nabla_c P_ba
  auto nabla_p = [&](int c, int a, int b) {  // nabla_c P_ab
    std::vector<Expr> t{dc.diff(P(a, b), chart.symbol(c))};
    for (int e = 0; e < n; ++e) {
      if (!G(e, c, a).is_zero() && !P(e, b).is_zero()) t.push_back(-(G(e, c, a) * P(e, b)));
      if (!G(e, c, b).is_zero() && !P(a, e).is_zero()) t.push_back(-(G(e, c, b) * P(a, e)));
    }
    return add(std::move(t));
  };
  pack.cotton = TensorField(cp, downs(3));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = b + 1; c < n; ++c) {
        Expr v = nabla_p(b, c, a) - nabla_p(c, b, a);
        pack.cotton.comps(a, b, c) = v;
        pack.cotton.comps(a, c, b) = v.is_zero() ? v : -v;
      }

  std::vector<Expr> outs;
  auto push = [&](const ExprArray& arr) { outs.insert(outs.end(), arr.data().begin(), arr.data().end()); };
  push(gd);
  push(gi);
  push(G);
  push(Rm);
  push(pack.ricci.comps);
  outs.push_back(pack.scalar);
  push(P);
  outs.push_back(pack.J);
  push(pack.weyl.comps);
  push(pack.cotton.comps);
  pack.program = std::make_shared<EvalProgram>(compile(outs));
  return pack;
}

TensorField bach_field(const CurvaturePack& pack) {
  const MetricField& g = *pack.metric;
  const int n = g.dim();
  TensorField nA = covariant_derivative(pack.cotton, g, pack.gamma);  // nabla_d A_abc
  const auto& gi = g.inverse().comps;
  const auto& P = pack.schouten.comps;
  const auto& C = pack.weyl.comps;
  ExprArray Pup = ExprArray::cube(n, 2);
  for (int d = 0; d < n; ++d)
    for (int c = 0; c < n; ++c) {
      std::vector<Expr> t;
      for (int e = 0; e < n; ++e)
        for (int f = 0; f < n; ++f)
          if (!gi(d, e).is_zero() && !gi(c, f).is_zero() && !P(e, f).is_zero()) t.push_back(gi(d, e) * gi(c, f) * P(e, f));
      Pup(d, c) = add(std::move(t));
    }
  TensorField B(g.chart_ptr(), downs(2), -2);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      std::vector<Expr> t;
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) {
          if (!gi(c, d).is_zero() && !nA.comps(d, a, c, b).is_zero()) t.push_back(gi(c, d) * nA.comps(d, a, c, b));
          if (!Pup(d, c).is_zero() && !C(d, a, c, b).is_zero()) t.push_back(Pup(d, c) * C(d, a, c, b));
        }
      B.comps(a, b) = add(std::move(t));
    }
  return B;
}

// ---------------------------------------------------------------------------
// Pointwise evaluation

namespace {

// nabla of an all-lower tensor: out(e, I) = d(e, I) - sum_s Gamma^f_{e I_s} t(I_s -> f)
NumTensor nabla_lower(const NumTensor& d, const NumTensor& t, const NumTensor& gamma) {
  const int n = gamma.dim(0);
  const int r = t.rank();
  NumTensor out = d;
  std::vector<int> src;
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    auto idx = out.unflatten(flat);
    int e = idx[0];
    std::vector<int> I(idx.begin() + 1, idx.end());
    double acc = out[flat];
    for (int s = 0; s < r; ++s) {
      src = I;
      int is = I[static_cast<std::size_t>(s)];
      for (int f = 0; f < n; ++f) {
        double gm = gamma(f, e, is);
        if (gm == 0.0) continue;
        src[static_cast<std::size_t>(s)] = f;
        acc -= gm * t.at(src);
      }
    }
    out[flat] = acc;
  }
  return out;
}

NumTensor slice(const std::vector<double>& v, std::size_t& off, std::vector<int> shape) {
  NumTensor t(std::move(shape));
  std::copy(v.begin() + static_cast<std::ptrdiff_t>(off), v.begin() + static_cast<std::ptrdiff_t>(off + t.size()), t.data().begin());
  off += t.size();
  return t;
}

// derivative slot first: d(c, I) = grads[(base + flat(I)) * n + c]
NumTensor slice_grad(const std::vector<double>& gr, std::size_t base, int n, std::vector<int> shape) {
  std::vector<int> dshape{n};
  dshape.insert(dshape.end(), shape.begin(), shape.end());
  NumTensor t(dshape);
  std::size_t count = t.size() / static_cast<std::size_t>(n);
  for (int c = 0; c < n; ++c)
    for (std::size_t i = 0; i < count; ++i) t[static_cast<std::size_t>(c) * count + i] = gr[(base + i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(c)];
  return t;
}

}  // namespace

double PointCurvature::scale() const { return std::max({1.0, max_abs(C), max_abs(A), max_abs(P)}); }

NumTensor raise_slots(const NumTensor& t, const NumTensor& m, const std::vector<int>& slots) {
  NumTensor out = t;
  const int n = m.dim(0);
  for (int s : slots) {
    NumTensor next(out.shape());
    for (std::size_t f = 0; f < next.size(); ++f) {
      auto idx = next.unflatten(f);
      int a = idx[static_cast<std::size_t>(s)];
      double acc = 0.0;
      for (int b = 0; b < n; ++b) {
        idx[static_cast<std::size_t>(s)] = b;
        acc += m(a, b) * out.at(idx);
      }
      next[f] = acc;
    }
    out = std::move(next);
  }
  return out;
}

NumTensor raise_all(const NumTensor& t, const NumTensor& ginv) {
  std::vector<int> slots(static_cast<std::size_t>(t.rank()));
  std::iota(slots.begin(), slots.end(), 0);
  return raise_slots(t, ginv, slots);
}

NumTensor trace_free(const NumTensor& s, const NumTensor& g, const NumTensor& ginv) {
  const int n = g.dim(0);
  double tr = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) tr += ginv(a, b) * s(a, b);
  NumTensor out = s;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out(a, b) -= tr / n * g(a, b);
  return out;
}

PointCurvature evaluate(const CurvaturePack& pack, const Bindings& point) {
  const int n = pack.dim();
  const auto& prog = *pack.program;
  std::vector<double> vals(prog.output_count());
  std::vector<double> grads(prog.output_count() * static_cast<std::size_t>(n));
  prog.run_jet(point, pack.metric->chart().coords, vals, grads);

  PointCurvature pc;
  pc.point = point;
  pc.n = n;
  std::size_t off = 0;
  std::size_t g_off = off;
  pc.g = slice(vals, off, {n, n});
  pc.ginv = slice(vals, off, {n, n});
  pc.gamma = slice(vals, off, {n, n, n});
  pc.riemann = slice(vals, off, {n, n, n, n});
  pc.ricci = slice(vals, off, {n, n});
  pc.R = vals[off++];
  std::size_t p_off = off;
  pc.P = slice(vals, off, {n, n});
  std::size_t j_off = off;
  pc.J = vals[off++];
  std::size_t c_off = off;
  pc.C = slice(vals, off, {n, n, n, n});
  std::size_t a_off = off;
  pc.A = slice(vals, off, {n, n, n});

  pc.dg = slice_grad(grads, g_off, n, {n, n});
  pc.dJ = NumTensor({n});
  for (int c = 0; c < n; ++c) pc.dJ(c) = grads[j_off * static_cast<std::size_t>(n) + static_cast<std::size_t>(c)];
  pc.dP = slice_grad(grads, p_off, n, {n, n});
  pc.dC = slice_grad(grads, c_off, n, {n, n, n, n});
  pc.dA = slice_grad(grads, a_off, n, {n, n, n});
  pc.nablaP = nabla_lower(pc.dP, pc.P, pc.gamma);
  pc.nablaC = nabla_lower(pc.dC, pc.C, pc.gamma);
  pc.nablaA = nabla_lower(pc.dA, pc.A, pc.gamma);
  pc.nablaG = nabla_lower(pc.dg, pc.g, pc.gamma);

  NumTensor Pup = raise_all(pc.P, pc.ginv);
  pc.B = NumTensor({n, n});
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double acc = 0.0;
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) acc += pc.ginv(c, d) * pc.nablaA(d, a, c, b) + Pup(d, c) * pc.C(d, a, c, b);
      pc.B(a, b) = acc;
    }
  return pc;
}

// ---------------------------------------------------------------------------
// Residual reports

bool ResidualReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const Residual& r) { return r.pass; });
}

const Residual& ResidualReport::at(std::string_view name) const {
  for (const auto& r : rows)
    if (r.name == name) return r;
  throw std::out_of_range("no residual named " + std::string(name));
}

namespace {

void record(ResidualReport& rep, const std::string& name, double residual, double scale, const Tolerances& tol) {
  auto it = std::find_if(rep.rows.begin(), rep.rows.end(), [&](const Residual& r) { return r.name == name; });
  if (it == rep.rows.end()) {
    rep.rows.push_back({name, 0.0, 0.0, true});
    it = rep.rows.end() - 1;
  }
  it->residual = std::max(it->residual, residual);
  it->ratio = std::max(it->ratio, residual / scale);
  if (!tol.is_zero(residual, scale)) it->pass = false;
}

}  // namespace

ResidualReport identity_suite(const CurvaturePack& pack, const std::vector<Bindings>& points, const Tolerances& tol) {
  ResidualReport rep;
  const int n = pack.dim();
  for (const auto& pt : points) {
    PointCurvature pc = evaluate(pack, pt);
    const double scale = pc.scale();
    const auto& gi = pc.ginv;

    // nabla_{a1} A_{b a2 a3} - P_{a1}^c C_{a2 a3 b c}, skewed over a1 a2 a3
    {
      NumTensor Pmix = einsum<double>("ae,ec->ac", {&pc.P, &gi});
      NumTensor t = pc.nablaA - permute(einsum<double>("ac,xybc->abxy", {&Pmix, &pc.C}), {0, 1, 2, 3});
      NumTensor s = permute(t, {0, 2, 3, 1});  // (a1, a2, a3, b)
      record(rep, "cotton_bianchi", max_abs(antisymmetrize(s, {0, 1, 2})), scale, tol);
    }
    // nabla_{a1} C_{a2 a3 cd} - g_{c a1} A_{d a2 a3} + g_{d a1} A_{c a2 a3}, skewed over a1 a2 a3
    {
      NumTensor gA1 = einsum<double>("ca,dxy->axycd", {&pc.g, &pc.A});
      NumTensor gA2 = einsum<double>("da,cxy->axycd", {&pc.g, &pc.A});
      NumTensor t = pc.nablaC - gA1 + gA2;
      record(rep, "weyl_bianchi", max_abs(antisymmetrize(t, {0, 1, 2})), scale, tol);
    }
    {
      NumTensor div = einsum<double>("de,edabc->abc", {&gi, &pc.nablaC});
      record(rep, "weyl_divergence", max_abs(static_cast<double>(n - 3) * pc.A - div), scale, tol);
    }
    {
      NumTensor div = einsum<double>("ac,cab->b", {&gi, &pc.nablaP});
      record(rep, "schouten_divergence", max_abs(div - pc.dJ), scale, tol);
    }
    {
      NumTensor div = einsum<double>("ad,dabc->bc", {&gi, &pc.nablaA});
      record(rep, "cotton_divergence", max_abs(div), scale, tol);
    }
    {
      double m = 0.0;
      m = std::max(m, max_abs(pc.C + permute(pc.C, {1, 0, 2, 3})));
      m = std::max(m, max_abs(pc.C + permute(pc.C, {0, 1, 3, 2})));
      m = std::max(m, max_abs(pc.C - permute(pc.C, {2, 3, 0, 1})));
      m = std::max(m, max_abs(antisymmetrize(pc.C, {0, 1, 2})));
      record(rep, "weyl_symmetries", m, scale, tol);
    }
    {
      NumTensor tr = einsum<double>("ac,abcd->bd", {&gi, &pc.C});
      record(rep, "weyl_trace", max_abs(tr), scale, tol);
    }
    {
      NumTensor t1 = einsum<double>("ab,abc->c", {&gi, &pc.A});
      NumTensor t2 = einsum<double>("ac,abc->b", {&gi, &pc.A});
      record(rep, "cotton_trace", std::max(max_abs(t1), max_abs(t2)), scale, tol);
    }
    {
      record(rep, "bach_symmetry", max_abs(pc.B - permute(pc.B, {1, 0})), scale, tol);
      NumTensor tr = einsum<double>("ab,ab->", {&gi, &pc.B});
      record(rep, "bach_trace", max_abs(tr), scale, tol);
    }
    {
      NumTensor rhs = static_cast<double>(n - 2) * pc.P + pc.J * pc.g;
      record(rep, "ricci_decomposition", max_abs(pc.ricci - rhs), scale, tol);
    }
    record(rep, "metricity", max_abs(pc.nablaG), scale, tol);
    if (n == 3 && !pack.weyl_raw.comps.data().empty()) {
      NumTensor raw = pack.weyl_raw.eval(pt);
      record(rep, "weyl_vanishes_dim3", max_abs(raw), scale, tol);
    }
  }
  return rep;
}

NumTensor upsilon_gradient(const Expr& upsilon, const Chart& chart, const Bindings& b) {
  const int n = chart.dim();
  NumTensor out({n});
  for (int a = 0; a < n; ++a) out(a) = eval(diff(upsilon, chart.symbol(a)), b);
  return out;
}

ResidualReport cotton_transform_check(const CurvaturePack& pack, const Expr& upsilon,
                                      const std::vector<Bindings>& points, const Tolerances& tol) {
  const MetricField& g = *pack.metric;
  const int n = g.dim();
  const Chart& chart = g.chart();
  auto hat = std::make_shared<MetricField>(conformal_rescale(g, upsilon));
  CurvaturePack hp = curvature_pack(hat);

  std::vector<Expr> ups;
  for (int a = 0; a < n; ++a) ups.push_back(diff(upsilon, chart.symbol(a)));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) ups.push_back(diff(ups[static_cast<std::size_t>(a)], chart.symbol(b)));
  EvalProgram up = compile(ups);

  ResidualReport rep;
  for (const auto& pt : points) {
    PointCurvature pc = evaluate(pack, pt);
    PointCurvature ph = evaluate(hp, pt);
    const double scale = std::max(pc.scale(), ph.scale());
    auto uv = up.run(pt);
    NumTensor U({n}), H({n, n});
    for (int a = 0; a < n; ++a) U(a) = uv[static_cast<std::size_t>(a)];
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double h = uv[static_cast<std::size_t>(n + a * n + b)];
        for (int c = 0; c < n; ++c) h -= pc.gamma(c, a, b) * U(c);
        H(a, b) = h;
      }
    NumTensor Uup = einsum<double>("ab,b->a", {&pc.ginv, &U});
    double u2 = 0.0;
    for (int a = 0; a < n; ++a) u2 += Uup(a) * U(a);

    NumTensor Cmix = einsum<double>("ce,abed->abcd", {&pc.ginv, &pc.C});
    NumTensor Chmix = einsum<double>("ce,abed->abcd", {&ph.ginv, &ph.C});
    record(rep, "weyl_invariance", max_abs(Chmix - Cmix), scale, tol);

    NumTensor Pexp = pc.P - H + einsum<double>("a,b->ab", {&U, &U}) - (0.5 * u2) * pc.g;
    record(rep, "schouten_rule", max_abs(ph.P - Pexp), scale, tol);

    NumTensor Aexp = pc.A + einsum<double>("k,kabc->abc", {&Uup, &pc.C});
    record(rep, "cotton_rule", max_abs(ph.A - Aexp), scale, tol);
  }
  return rep;
}

}  // namespace conformal
