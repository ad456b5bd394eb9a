#include "conformal/tractor.hpp"

#include <algorithm>
#include <cmath>

namespace conformal {

namespace {

std::size_t us(int i) { return static_cast<std::size_t>(i); }

NumTensor vec_of(const std::vector<double>& v) {
  NumTensor t({static_cast<int>(v.size())});
  std::copy(v.begin(), v.end(), t.data().begin());
  return t;
}

// t with every entry multiplied by s
NumTensor scaled(NumTensor t, double s) {
  for (auto& x : t.data()) x *= s;
  return t;
}

// Contract the last slot of t with v.
NumTensor contract_last(const NumTensor& t, const NumTensor& v) {
  std::vector<int> shape(t.shape().begin(), t.shape().end() - 1);
  NumTensor out(shape, 0.0);
  const std::size_t k = static_cast<std::size_t>(v.size());
  for (std::size_t f = 0; f < out.size(); ++f) {
    double acc = 0.0;
    for (std::size_t e = 0; e < k; ++e) acc += t[f * k + e] * v[e];
    out[f] = acc;
  }
  return out;
}

}  // namespace

NumTensor tractor_metric(const NumTensor& g) {
  const int n = g.dim(0);
  const int N = tractor_dim(n);
  NumTensor h({N, N}, 0.0);
  h(0, N - 1) = h(N - 1, 0) = 1.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) h(1 + a, 1 + b) = g(a, b);
  return h;
}

NumTensor tractor_metric_inverse(const NumTensor& ginv) { return tractor_metric(ginv); }

Projectors projectors(const NumTensor& g) {
  const int n = g.dim(0);
  const int N = tractor_dim(n);
  Projectors p{NumTensor({N}, 0.0), NumTensor({N}, 0.0), NumTensor({N, n}, 0.0)};
  p.X(0) = 1.0;
  p.Y(N - 1) = 1.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) p.Z(1 + a, b) = g(a, b);
  return p;
}

NumTensor connection_matrices(const NumTensor& g, const NumTensor& ginv, const NumTensor& gamma, const NumTensor& P) {
  const int n = g.dim(0);
  const int N = tractor_dim(n);
  NumTensor m({n, N, N}, 0.0);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      m(a, 0, 1 + b) = -g(a, b);
      m(a, N - 1, 1 + b) = -P(a, b);
      double pab = 0.0;
      for (int c = 0; c < n; ++c) {
        m(a, 1 + b, 1 + c) = gamma(b, a, c);
        pab += P(a, c) * ginv(c, b);
      }
      m(a, 1 + b, 0) = pab;
    }
    m(a, 1 + a, N - 1) = 1.0;
  }
  return m;
}

NumTensor connection_matrices(const PointCurvature& pc) { return connection_matrices(pc.g, pc.ginv, pc.gamma, pc.P); }

// ---------------------------------------------------------------------------

TractorField make_tractor(MetricPtr scale, Expr alpha, std::vector<Expr> mu, Expr tau) {
  const int n = scale->dim();
  if (static_cast<int>(mu.size()) != n) throw TractorError("tractor: mu needs " + std::to_string(n) + " components");
  ExprArray m({n});
  for (int a = 0; a < n; ++a) m(a) = mu[us(a)];
  TensorField mf(scale->chart_ptr(), {Variance::Down}, std::move(m), 1);
  return TractorField{std::move(scale), std::move(alpha), std::move(mf), std::move(tau)};
}

std::vector<Expr> upper_components(const TractorField& t) {
  const int n = t.scale->dim();
  const auto& gi = t.scale->inverse().comps;
  std::vector<Expr> v;
  v.push_back(t.alpha);
  for (int a = 0; a < n; ++a) {
    std::vector<Expr> terms;
    for (int b = 0; b < n; ++b)
      if (!gi(a, b).is_zero() && !t.mu.comps(b).is_zero()) terms.push_back(gi(a, b) * t.mu.comps(b));
    v.push_back(add(std::move(terms)));
  }
  v.push_back(t.tau);
  return v;
}

NumTensor tractor_values(const TractorField& t, const Bindings& b) {
  auto comps = upper_components(t);
  EvalProgram p = compile(comps);
  return vec_of(p.run(b));
}

double tractor_inner(const NumTensor& h, const NumTensor& v, const NumTensor& w) {
  double acc = 0.0;
  for (int i = 0; i < h.dim(0); ++i)
    for (int j = 0; j < h.dim(1); ++j) acc += h(i, j) * v(i) * w(j);
  return acc;
}

ExprArray tractor_connection(const TractorField& t, const CurvaturePack& pack) {
  const MetricField& g = *t.scale;
  const int n = g.dim();
  const int N = tractor_dim(n);
  const auto& gd = g.g().comps;
  const auto& gi = g.inverse().comps;
  const auto& G = pack.gamma.comps;
  const auto& P = pack.schouten.comps;
  const Chart& chart = g.chart();
  auto v = upper_components(t);

  ExprArray out({n, N});
  for (int a = 0; a < n; ++a) {
    auto mult = [&](std::vector<Expr>& terms, const Expr& c, const Expr& x) {
      if (!c.is_zero() && !x.is_zero()) terms.push_back(c * x);
    };
    {
      std::vector<Expr> terms{diff(v[0], chart.symbol(a))};
      for (int b = 0; b < n; ++b) mult(terms, -gd(a, b), v[us(1 + b)]);
      out(a, 0) = add(std::move(terms));
    }
    for (int b = 0; b < n; ++b) {
      std::vector<Expr> terms{diff(v[us(1 + b)], chart.symbol(a))};
      for (int c = 0; c < n; ++c) {
        mult(terms, G(b, a, c), v[us(1 + c)]);
        mult(terms, P(a, c) * gi(c, b), v[0]);
      }
      if (a == b) terms.push_back(v[us(N - 1)]);
      out(a, 1 + b) = add(std::move(terms));
    }
    {
      std::vector<Expr> terms{diff(v[us(N - 1)], chart.symbol(a))};
      for (int b = 0; b < n; ++b) mult(terms, -P(a, b), v[us(1 + b)]);
      out(a, N - 1) = add(std::move(terms));
    }
  }
  return out;
}

TractorField change_scale(const TractorField& t, const Expr& upsilon) {
  const MetricField& g = *t.scale;
  const int n = g.dim();
  const auto& gi = g.inverse().comps;
  auto hat = std::make_shared<MetricField>(conformal_rescale(g, upsilon));
  std::vector<Expr> du;
  for (int a = 0; a < n; ++a) du.push_back(diff(upsilon, g.chart().symbol(a)));
  Expr ep = exp(upsilon), em = exp(-upsilon);
  std::vector<Expr> mu;
  std::vector<Expr> tterms{t.tau};
  for (int a = 0; a < n; ++a) {
    mu.push_back(ep * (t.mu.comps(a) + du[us(a)] * t.alpha));
    for (int b = 0; b < n; ++b) {
      if (gi(a, b).is_zero()) continue;
      tterms.push_back(-(gi(a, b) * du[us(a)] * t.mu.comps(b)));
      tterms.push_back(Expr(Rational(-1, 2)) * gi(a, b) * du[us(a)] * du[us(b)] * t.alpha);
    }
  }
  return make_tractor(hat, ep * t.alpha, std::move(mu), em * add(std::move(tterms)));
}

Mat scale_change_matrix(const NumTensor& g, const NumTensor& ginv, double upsilon, const NumTensor& du) {
  const int n = g.dim(0);
  const int N = tractor_dim(n);
  const double ep = std::exp(upsilon), em = std::exp(-upsilon);
  NumTensor uup = raise_slots(du, ginv, {0});
  double u2 = 0.0;
  for (int a = 0; a < n; ++a) u2 += du(a) * uup(a);
  Mat m = Mat::Zero(N, N);
  m(0, 0) = ep;
  for (int a = 0; a < n; ++a) {
    m(1 + a, 0) = em * uup(a);
    m(1 + a, 1 + a) = em;
    m(N - 1, 1 + a) = -em * du(a);
  }
  m(N - 1, 0) = -0.5 * em * u2;
  m(N - 1, N - 1) = em;
  return m;
}

TractorField tractor_d(const CurvaturePack& pack, const Expr& f, int w) {
  const MetricField& g = *pack.metric;
  const int n = g.dim();
  const auto& gi = g.inverse().comps;
  const auto& G = pack.gamma.comps;
  const Chart& chart = g.chart();
  std::vector<Expr> df;
  for (int a = 0; a < n; ++a) df.push_back(diff(f, chart.symbol(a)));
  std::vector<Expr> lap;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      if (gi(a, b).is_zero()) continue;
      std::vector<Expr> h{diff(df[us(a)], chart.symbol(b))};
      for (int c = 0; c < n; ++c)
        if (!G(c, a, b).is_zero() && !df[us(c)].is_zero()) h.push_back(-(G(c, a, b) * df[us(c)]));
      lap.push_back(gi(a, b) * add(std::move(h)));
    }
  const Expr k(n + 2 * w - 2);
  std::vector<Expr> mu;
  for (int a = 0; a < n; ++a) mu.push_back(k * df[us(a)]);
  Expr box = add(std::move(lap)) + Expr(w) * pack.J * f;
  return make_tractor(pack.metric, k * Expr(w) * f, std::move(mu), -box);
}

TractorField einstein_candidate(const CurvaturePack& pack, const Expr& sigma) {
  TractorField d = tractor_d(pack, sigma, 1);
  const int n = pack.dim();
  const Expr s(Rational(1, n));
  std::vector<Expr> mu;
  for (int a = 0; a < n; ++a) mu.push_back(s * d.mu.comps(a));
  return make_tractor(pack.metric, s * d.alpha, std::move(mu), s * d.tau);
}

// ---------------------------------------------------------------------------

NumTensor coupled_nabla(const NumTensor& t, const NumTensor& d, const std::vector<Slot>& slots, const NumTensor& gamma,
                        const NumTensor& conn) {
  const int n = gamma.dim(0);
  NumTensor out = d;
  std::vector<int> src;
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    auto idx = out.unflatten(flat);
    const int a = idx[0];
    std::vector<int> I(idx.begin() + 1, idx.end());
    double acc = out[flat];
    for (std::size_t s = 0; s < slots.size(); ++s) {
      src = I;
      const int is = I[s];
      switch (slots[s]) {
        case Slot::TensorDown:
          for (int f = 0; f < n; ++f) {
            double gm = gamma(f, a, is);
            if (gm == 0.0) continue;
            src[s] = f;
            acc -= gm * t.at(src);
          }
          break;
        case Slot::TractorUp:
          for (int F = 0; F < conn.dim(1); ++F) {
            double c = conn(a, is, F);
            if (c == 0.0) continue;
            src[s] = F;
            acc += c * t.at(src);
          }
          break;
        case Slot::TractorDown:
          for (int F = 0; F < conn.dim(1); ++F) {
            double c = conn(a, F, is);
            if (c == 0.0) continue;
            src[s] = F;
            acc -= c * t.at(src);
          }
          break;
      }
    }
    out[flat] = acc;
  }
  return out;
}

Jet jet(const EvalProgram& prog, const std::vector<int>& shape, const Chart& chart, const Bindings& b) {
  const int n = chart.dim();
  const std::size_t m = prog.output_count();
  std::vector<double> vals(m), grads(m * us(n));
  prog.run_jet(b, chart.coords, vals, grads);
  Jet j{NumTensor(shape), NumTensor()};
  if (j.value.size() != m) throw std::logic_error("jet: shape does not match program outputs");
  std::copy(vals.begin(), vals.end(), j.value.data().begin());
  std::vector<int> dshape{n};
  dshape.insert(dshape.end(), shape.begin(), shape.end());
  j.d = NumTensor(dshape);
  for (int c = 0; c < n; ++c)
    for (std::size_t i = 0; i < m; ++i) j.d[us(c) * m + i] = grads[i * us(n) + us(c)];
  return j;
}

// ---------------------------------------------------------------------------

NumTensor omega(const PointCurvature& pc) {
  const int n = pc.n;
  const int N = tractor_dim(n);
  NumTensor om({n, n, N, N}, 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        for (int e = 0; e < n; ++e) om(a, b, 1 + c, 1 + e) = pc.C(a, b, c, e);
        om(a, b, 0, 1 + c) = -pc.A(c, a, b);
        om(a, b, 1 + c, 0) = pc.A(c, a, b);
      }
  return om;
}

NumTensor omega_endo(const PointCurvature& pc) {
  return raise_slots(omega(pc), tractor_metric_inverse(pc.ginv), {2});
}

NumTensor div_omega_closed(const PointCurvature& pc) {
  const int n = pc.n;
  const int N = tractor_dim(n);
  NumTensor d({n, N, N}, 0.0);
  for (int c = 0; c < n; ++c)
    for (int e = 0; e < n; ++e) {
      for (int f = 0; f < n; ++f) d(c, 1 + e, 1 + f) = (n - 4) * pc.A(c, e, f);
      d(c, 0, 1 + e) = -pc.B(e, c);
      d(c, 1 + e, 0) = pc.B(e, c);
    }
  return d;
}

NumTensor w_tensor(const PointCurvature& pc, const NumTensor& div) {
  const int n = pc.n;
  const int N = tractor_dim(n);
  NumTensor om = omega(pc);
  NumTensor w({N, N, N, N}, 0.0);
  for (int C = 0; C < N; ++C)
    for (int E = 0; E < N; ++E)
      for (int b = 0; b < n; ++b) {
        for (int a = 0; a < n; ++a) w(1 + a, 1 + b, C, E) = (n - 4) * om(a, b, C, E);
        w(0, 1 + b, C, E) -= div(b, C, E);
        w(1 + b, 0, C, E) += div(b, C, E);
      }
  return w;
}

TractorPoint tractor_point(const CurvaturePack& pack, const Bindings& b) { return tractor_point(evaluate(pack, b)); }

TractorPoint tractor_point(PointCurvature pc) {
  const int n = pc.n;
  const int N = tractor_dim(n);
  TractorPoint tp;
  tp.h = tractor_metric(pc.g);
  tp.hinv = tractor_metric_inverse(pc.ginv);
  tp.conn = connection_matrices(pc);
  tp.omega = omega(pc);

  // partials of Omega_bcDE from those of C and A
  NumTensor dom({n, n, n, N, N}, 0.0);
  for (int f = 0; f < n; ++f)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          for (int e = 0; e < n; ++e) dom(f, a, b, 1 + c, 1 + e) = pc.dC(f, a, b, c, e);
          dom(f, a, b, 0, 1 + c) = -pc.dA(f, c, a, b);
          dom(f, a, b, 1 + c, 0) = pc.dA(f, c, a, b);
        }
  tp.nabla_omega = coupled_nabla(tp.omega, dom, {Slot::TensorDown, Slot::TensorDown, Slot::TractorDown, Slot::TractorDown},
                                 pc.gamma, tp.conn);
  tp.div_omega = NumTensor({n, N, N}, 0.0);
  for (int f = 0; f < n; ++f)
    for (int a = 0; a < n; ++a) {
      const double gi = pc.ginv(f, a);
      if (gi == 0.0) continue;
      for (int c = 0; c < n; ++c)
        for (int D = 0; D < N; ++D)
          for (int E = 0; E < N; ++E) tp.div_omega(c, D, E) += gi * tp.nabla_omega(f, a, c, D, E);
    }
  tp.div_omega_closed = div_omega_closed(pc);
  tp.w = w_tensor(pc, tp.div_omega);
  tp.pc = std::move(pc);
  return tp;
}

double commutator_residual(const TractorField& v, const CurvaturePack& pack, const Bindings& b) {
  const int n = pack.dim();
  const int N = tractor_dim(n);
  ExprArray nv = tractor_connection(v, pack);
  EvalProgram prog = compile(nv.data());
  Jet j = jet(prog, {n, N}, pack.metric->chart(), b);
  PointCurvature pc = evaluate(pack, b);
  NumTensor conn = connection_matrices(pc);
  NumTensor nn = coupled_nabla(j.value, j.d, {Slot::TensorDown, Slot::TractorUp}, pc.gamma, conn);
  NumTensor vals = tractor_values(v, b);
  NumTensor om = omega_endo(pc);
  double worst = 0.0;
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c)
      for (int C = 0; C < N; ++C) {
        double expect = 0.0;
        for (int E = 0; E < N; ++E) expect += om(a, c, C, E) * vals(E);
        worst = std::max(worst, std::abs(nn(a, c, C) - nn(c, a, C) - expect));
      }
  return worst / std::max({1.0, max_abs(vals), max_abs(om)});
}

// ---------------------------------------------------------------------------

ParallelTractorReport parallel_tractor_check(const CurvaturePack& pack, const Expr& sigma,
                                             const std::vector<Bindings>& points, const Tolerances& tol) {
  const int n = pack.dim();
  TractorField I = einstein_candidate(pack, sigma);
  auto comps = upper_components(I);
  ExprArray nI = tractor_connection(I, pack);
  std::vector<Expr> outs = comps;
  outs.insert(outs.end(), nI.data().begin(), nI.data().end());
  EvalProgram prog = compile(outs);

  // curvature of sigma^{-2} g, unless sigma is constant
  std::optional<CurvaturePack> rescaled;
  std::optional<double> constant = sigma.as_double();
  if (!constant) {
    Expr ups = Expr(Rational(-1, 2)) * log(sigma * sigma);
    rescaled = curvature_pack(std::make_shared<MetricField>(conformal_rescale(*pack.metric, ups)));
  }

  ParallelTractorReport rep;
  std::vector<PointDecision> decisions;
  for (const auto& pt : points) {
    auto vals = prog.run(pt);
    ParallelPoint pp;
    pp.sigma = vals[0];
    if (std::abs(pp.sigma) <= tol.abs)
      throw TractorError("sigma vanishes at " + format_point(pt) + "; the rescaled metric is singular there");
    PointCurvature pc = evaluate(pack, pt);
    pp.scale = pc.scale();
    NumTensor v({tractor_dim(n)});
    for (int i = 0; i < tractor_dim(n); ++i) v(i) = vals[us(i)];
    for (std::size_t i = us(tractor_dim(n)); i < vals.size(); ++i) pp.nabla_i = std::max(pp.nabla_i, std::abs(vals[i]));
    pp.h_ii = tractor_inner(tractor_metric(pc.g), v, v);
    if (constant) {
      pp.h_ii_expected = -2.0 / n * (*constant) * (*constant) * pc.J;
      pp.trace_free_p = max_abs(trace_free(pc.P, pc.g, pc.ginv));
    } else {
      PointCurvature hc = evaluate(*rescaled, pt);
      pp.h_ii_expected = -2.0 / n * hc.J;
      pp.trace_free_p = max_abs(trace_free(hc.P, hc.g, hc.ginv));
    }
    rep.worst_ratio = std::max(rep.worst_ratio, pp.nabla_i / pp.scale);
    decisions.push_back({true, pp.nabla_i, pp.scale});
    rep.points.push_back(pp);
  }
  TheoremVerdict tv = decide(theorem::kParallel, "sigma nonvanishing", decisions, tol);
  rep.verdict = tv.verdict;
  rep.reason = tv.verdict == Verdict::ConformallyEinstein ? "(1/n) D sigma is parallel: sigma is an Einstein scale"
               : tv.verdict == Verdict::NotConformallyEinstein ? "nabla (1/n) D sigma " + tv.reason
                                                              : tv.reason;
  return rep;
}

AnnihilationReport annihilation_check(const CurvaturePack& pack, const TractorField& I,
                                      const std::vector<Bindings>& points) {
  const int n = pack.dim();
  const int N = tractor_dim(n);
  auto comps = upper_components(I);
  std::vector<Expr> outs = comps;
  for (int a = 0; a < n; ++a) outs.push_back(I.mu.comps(a));
  EvalProgram prog = compile(outs);

  AnnihilationReport rep;
  for (const auto& pt : points) {
    auto vals = prog.run(pt);
    NumTensor v({N}), mu({n});
    for (int i = 0; i < N; ++i) v(i) = vals[us(i)];
    for (int a = 0; a < n; ++a) mu(a) = vals[us(N + a)];
    TractorPoint tp = tractor_point(pack, pt);
    AnnihilationPoint ap;
    ap.scale = tp.pc.scale() * std::max(1.0, max_abs(v));
    NumTensor oi = contract_last(tp.omega, v);
    ap.omega_i = max_abs(oi);
    ap.nabla_omega_i = max_abs(contract_last(tp.nabla_omega, v));
    ap.div_omega_i = max_abs(contract_last(tp.div_omega, v));
    ap.w_i = max_abs(contract_last(tp.w, v));
    ap.x_i = v(0);
    if (v(0) != 0.0) {
      NumTensor K = scaled(mu, -1.0 / v(0));
      NumTensor cs = cspace_residual(tp.pc, K);
      double worst = 0.0;
      for (int d = 0; d < n; ++d)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c) worst = std::max(worst, std::abs(oi(b, c, 1 + d) - v(0) * cs(d, b, c)));
      ap.cspace_consistency = worst;
    }
    rep.points.push_back(ap);
  }
  return rep;
}

Mat omega_map(const TractorPoint& tp) {
  const int n = tp.pc.n;
  const int N = tractor_dim(n);
  const int pairs = n * (n - 1) / 2;
  Mat m(pairs * N * (n + 1), N);
  int row = 0;
  for (int b = 0; b < n; ++b)
    for (int c = b + 1; c < n; ++c)
      for (int D = 0; D < N; ++D, ++row)
        for (int E = 0; E < N; ++E) m(row, E) = tp.omega(b, c, D, E);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = b + 1; c < n; ++c)
        for (int D = 0; D < N; ++D, ++row)
          for (int E = 0; E < N; ++E) m(row, E) = tp.nabla_omega(a, b, c, D, E);
  return m;
}

RankReport rank_obstruction(const CurvaturePack& pack, const std::vector<Bindings>& points, const Tolerances& tol,
                            const Expr* sigma) {
  const int n = pack.dim();
  const int N = tractor_dim(n);
  RankReport rep;
  rep.n = n;
  std::optional<EvalProgram> iprog;
  if (sigma) iprog = compile(upper_components(einstein_candidate(pack, *sigma)));

  int not_weak = -1, full = -1;
  for (std::size_t i = 0; i < points.size(); ++i) {
    TractorPoint tp = tractor_point(pack, points[i]);
    RankPoint rp;
    rp.weakly_generic = classify_point(tp.pc, tol).weakly_generic;
    Mat m = omega_map(tp);
    rp.rows = static_cast<int>(m.rows());
    RankInfo ri = rank_kernel(m, tol.rank);
    rp.rank = ri.rank;
    rp.kernel = ri.kernel;
    if (iprog && ri.kernel.cols() > 0) {
      auto iv = iprog->run(points[i]);
      Vec I = Eigen::Map<const Vec>(iv.data(), N);
      Vec proj = ri.kernel * (ri.kernel.transpose() * I);
      rp.alignment = I.norm() > 0.0 ? proj.norm() / I.norm() : 0.0;
    }
    if (!rp.weakly_generic && not_weak < 0) not_weak = static_cast<int>(i);
    if (rp.weakly_generic && rp.rank == N && full < 0) full = static_cast<int>(i);
    rep.points.push_back(std::move(rp));
  }
  if (full >= 0) {
    rep.verdict = Verdict::NotConformallyEinstein;
    rep.reason = "rank n+2 = " + std::to_string(N) + " at weakly generic sample point " + std::to_string(full);
  } else if (not_weak >= 0) {
    rep.verdict = Verdict::Inconclusive;
    rep.reason = "not weakly generic at sample point " + std::to_string(not_weak);
  } else {
    rep.verdict = Verdict::ConformallyEinstein;
    rep.reason = "rank <= n+1 at all " + std::to_string(points.size()) + " sample points";
  }
  return rep;
}

}  // namespace conformal
