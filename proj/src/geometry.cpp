#include "conformal/geometry.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <set>

namespace conformal {

Chart::Chart(std::vector<std::string> c, std::vector<Expr> sing) : coords(std::move(c)), singular(std::move(sing)) {
  if (coords.size() < 3) throw GeometryError("chart dimension must be at least 3");
  std::set<std::string> seen;
  for (const auto& name : coords) {
    if (!seen.insert(name).second) throw GeometryError("duplicate coordinate '" + name + "'");
    symbols.push_back(Expr::symbol(name));
  }
}

TensorField::TensorField(ChartPtr c, std::vector<Variance> v, int w)
    : chart(std::move(c)), variance(std::move(v)), weight(w) {
  comps = ExprArray::cube(chart->dim(), static_cast<int>(variance.size()));
}

TensorField::TensorField(ChartPtr c, std::vector<Variance> v, ExprArray a, int w)
    : chart(std::move(c)), variance(std::move(v)), comps(std::move(a)), weight(w) {
  if (comps.rank() != static_cast<int>(variance.size())) throw GeometryError("tensor rank does not match variance list");
}

NumTensor TensorField::eval(const Bindings& b) const {
  auto prog = compile(std::span<const Expr>(comps.data()));
  NumTensor out(comps.shape());
  prog.run(b, out.data());
  return out;
}

// ---------------------------------------------------------------------------
// Determinants by cofactor expansion

namespace {

// dp[mask] = det of the submatrix with the given rows (in order) and the
// columns in mask, for popcount(mask) <= rows.size().
std::vector<Expr> minor_table(const ExprArray& m, const std::vector<int>& rows) {
  const int n = m.dim(1);
  const std::size_t full = std::size_t{1} << n;
  std::vector<Expr> dp(full);
  dp[0] = Expr(1);
  for (std::size_t mask = 1; mask < full; ++mask) {
    int k = std::popcount(mask);
    if (k > static_cast<int>(rows.size())) continue;
    int row = rows[static_cast<std::size_t>(k - 1)];
    std::vector<Expr> terms;
    int pos = 0;
    for (int j = 0; j < n; ++j) {
      if (!(mask & (std::size_t{1} << j))) continue;
      const Expr& entry = m(row, j);
      const Expr& sub = dp[mask & ~(std::size_t{1} << j)];
      if (!entry.is_zero() && !sub.is_zero()) {
        Expr t = entry * sub;
        terms.push_back(((k - 1 + pos) % 2) ? -t : t);
      }
      ++pos;
    }
    dp[mask] = add(std::move(terms));
  }
  return dp;
}

void require_square(const ExprArray& m) {
  if (m.rank() != 2 || m.dim(0) != m.dim(1)) throw GeometryError("matrix must be square");
}

}  // namespace

Expr matrix_det(const ExprArray& m) {
  require_square(m);
  const int n = m.dim(0);
  std::vector<int> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), 0);
  return minor_table(m, rows)[(std::size_t{1} << n) - 1];
}

ExprArray matrix_adjugate(const ExprArray& m) {
  require_square(m);
  const int n = m.dim(0);
  const std::size_t full = (std::size_t{1} << n) - 1;
  ExprArray adj({n, n});
  for (int i = 0; i < n; ++i) {
    std::vector<int> rows;
    for (int r = 0; r < n; ++r)
      if (r != i) rows.push_back(r);
    auto dp = minor_table(m, rows);
    for (int j = 0; j < n; ++j) {
      Expr c = dp[full & ~(std::size_t{1} << j)];
      adj(j, i) = ((i + j) % 2) ? -c : c;
    }
  }
  return adj;
}

ExprArray matrix_inverse(const ExprArray& m) {
  Expr d = matrix_det(m);
  if (d.is_zero()) throw GeometryError("singular matrix");
  Expr inv = pow(d, Expr(-1));
  ExprArray adj = matrix_adjugate(m);
  for (auto& e : adj.data())
    if (!e.is_zero()) e = e * inv;
  return adj;
}

// ---------------------------------------------------------------------------
// Metric

MetricField::MetricField(ChartPtr chart, ExprArray g) : chart_(std::move(chart)), cache_(std::make_shared<DiffCache>()) {
  const int n = chart_->dim();
  if (g.shape() != std::vector<int>{n, n}) throw GeometryError("metric must be an n x n array");
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (!(g(i, j) == g(j, i)) && !(simplify(g(i, j) - g(j, i))).is_zero())
        throw GeometryError("metric is not symmetric in components " + std::to_string(i) + "," + std::to_string(j));
  g_ = TensorField(chart_, {Variance::Down, Variance::Down}, std::move(g), 2);
}

const Expr& MetricField::det() const {
  if (!det_) det_ = std::make_shared<Expr>(matrix_det(g_.comps));
  return *det_;
}

const TensorField& MetricField::inverse() const {
  if (!inverse_) {
    if (det().is_zero()) throw GeometryError("singular metric: determinant vanishes identically");
    ExprArray inv = matrix_inverse(g_.comps);
    inverse_ = std::make_shared<TensorField>(chart_, std::vector<Variance>{Variance::Up, Variance::Up}, std::move(inv), -2);
  }
  return *inverse_;
}

void MetricField::certify(const Bindings& ref) {
  NumTensor gv = eval_metric(*this, ref);
  auto sig = numeric_signature(gv);
  if (certified() && sig != signature_)
    throw GeometryError("metric signature changes at " + format_point(ref));
  signature_ = sig;
  if (det().is_zero()) throw GeometryError("singular metric: determinant vanishes identically");
}

NumTensor eval_metric(const MetricField& g, const Bindings& b) { return g.g().eval(b); }

std::pair<int, int> numeric_signature(const NumTensor& g) {
  const int n = g.dim(0);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = 0.5 * (g(i, j) + g(j, i));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  double big = ev.cwiseAbs().maxCoeff();
  if (!(big > 0.0) || !std::isfinite(big)) throw GeometryError("degenerate metric");
  int p = 0, q = 0;
  for (int i = 0; i < n; ++i) {
    if (std::abs(ev(i)) < 1e-12 * big) throw GeometryError("degenerate metric");
    (ev(i) > 0 ? p : q)++;
  }
  return {p, q};
}

// ---------------------------------------------------------------------------
// Index gymnastics

namespace {

// out[.., a, ..] = sum_b m(a, b) t[.., b, ..] at the given slot.
ExprArray contract_slot(const ExprArray& t, int slot, const ExprArray& m) {
  ExprArray out(t.shape());
  const int n = t.dim(slot);
  std::vector<int> src;
  for (std::size_t f = 0; f < out.size(); ++f) {
    auto idx = out.unflatten(f);
    int a = idx[static_cast<std::size_t>(slot)];
    std::vector<Expr> terms;
    src = idx;
    for (int b = 0; b < n; ++b) {
      const Expr& mab = m(a, b);
      if (mab.is_zero()) continue;
      src[static_cast<std::size_t>(slot)] = b;
      const Expr& v = t.at(src);
      if (v.is_zero()) continue;
      terms.push_back(mab * v);
    }
    out[f] = add(std::move(terms));
  }
  return out;
}

void check_slot(const TensorField& t, int slot) {
  if (slot < 0 || slot >= t.rank()) throw GeometryError("slot " + std::to_string(slot) + " out of range");
}

}  // namespace

TensorField metric_inverse(const MetricField& g) { return g.inverse(); }

TensorField raise_index(const TensorField& t, int slot, const MetricField& g) {
  check_slot(t, slot);
  if (t.variance[static_cast<std::size_t>(slot)] != Variance::Down) throw GeometryError("raise_index on an upper slot");
  TensorField out = t;
  out.comps = contract_slot(t.comps, slot, g.inverse().comps);
  out.variance[static_cast<std::size_t>(slot)] = Variance::Up;
  out.weight -= 2;
  return out;
}

TensorField lower_index(const TensorField& t, int slot, const MetricField& g) {
  check_slot(t, slot);
  if (t.variance[static_cast<std::size_t>(slot)] != Variance::Up) throw GeometryError("lower_index on a lower slot");
  TensorField out = t;
  out.comps = contract_slot(t.comps, slot, g.g().comps);
  out.variance[static_cast<std::size_t>(slot)] = Variance::Down;
  out.weight += 2;
  return out;
}

TensorField christoffel(const MetricField& g) {
  const int n = g.dim();
  const auto& gd = g.g().comps;
  const auto& gi = g.inverse().comps;
  DiffCache& dc = g.diff_cache();
  // dg(c, a, b) = d_c g_ab
  ExprArray dg = ExprArray::cube(n, 3);
  for (int c = 0; c < n; ++c)
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) dg(c, a, b) = dg(c, b, a) = dc.diff(gd(a, b), g.chart().symbol(c));
  // lowered Gamma_{dbc} = 1/2 (d_b g_dc + d_c g_db - d_d g_bc)
  ExprArray low = ExprArray::cube(n, 3);
  Expr half(Rational(1, 2));
  for (int d = 0; d < n; ++d)
    for (int b = 0; b < n; ++b)
      for (int c = b; c < n; ++c) {
        Expr s = add({dg(b, d, c), dg(c, d, b), -dg(d, b, c)});
        low(d, b, c) = low(d, c, b) = s.is_zero() ? s : half * s;
      }
  TensorField gamma(g.chart_ptr(), {Variance::Up, Variance::Down, Variance::Down});
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = b; c < n; ++c) {
        std::vector<Expr> terms;
        for (int d = 0; d < n; ++d)
          if (!gi(a, d).is_zero() && !low(d, b, c).is_zero()) terms.push_back(gi(a, d) * low(d, b, c));
        gamma.comps(a, b, c) = gamma.comps(a, c, b) = add(std::move(terms));
      }
  return gamma;
}

TensorField covariant_derivative(const TensorField& t, const MetricField& g) {
  return covariant_derivative(t, g, christoffel(g));
}

TensorField covariant_derivative(const TensorField& t, const MetricField& g, const TensorField& gamma) {
  const int n = g.dim();
  const int r = t.rank();
  std::vector<Variance> var{Variance::Down};
  var.insert(var.end(), t.variance.begin(), t.variance.end());
  TensorField out(t.chart, var, t.weight);
  DiffCache& dc = g.diff_cache();
  const auto& G = gamma.comps;
  std::vector<int> src(static_cast<std::size_t>(r));
  for (std::size_t f = 0; f < out.comps.size(); ++f) {
    auto idx = out.comps.unflatten(f);
    int a = idx[0];
    std::vector<int> I(idx.begin() + 1, idx.end());
    std::vector<Expr> terms;
    Expr d = dc.diff(t.comps.at(I), g.chart().symbol(a));
    if (!d.is_zero()) terms.push_back(d);
    for (int s = 0; s < r; ++s) {
      src = I;
      const bool up = t.variance[static_cast<std::size_t>(s)] == Variance::Up;
      for (int e = 0; e < n; ++e) {
        src[static_cast<std::size_t>(s)] = e;
        const Expr& v = t.comps.at(src);
        if (v.is_zero()) continue;
        const int i = I[static_cast<std::size_t>(s)];
        const Expr& coeff = up ? G(i, a, e) : G(e, a, i);
        if (coeff.is_zero()) continue;
        terms.push_back(up ? coeff * v : -(coeff * v));
      }
    }
    out.comps[f] = add(std::move(terms));
  }
  return out;
}

TensorField epsilon(const MetricField& g, int orientation) {
  const int n = g.dim();
  Expr det = g.det();
  if (!g.certified()) throw GeometryError("epsilon: certify the metric first, the sign of det g is needed");
  const int q = g.signature().second;
  Expr vol = sqrt(q % 2 ? -det : det);
  if (orientation < 0) vol = -vol;
  TensorField eps(g.chart_ptr(), std::vector<Variance>(static_cast<std::size_t>(n), Variance::Down), n);
  for (const auto& [p, s] : permutations_with_sign(n)) eps.comps.at(p) = s > 0 ? vol : -vol;
  return eps;
}

NumTensor epsilon_at(const NumTensor& g, int orientation) {
  const int n = g.dim(0);
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = g(i, j);
  double vol = std::sqrt(std::abs(m.determinant())) * (orientation < 0 ? -1.0 : 1.0);
  NumTensor eps = NumTensor::cube(n, n);
  for (const auto& [p, s] : permutations_with_sign(n)) eps.at(p) = s * vol;
  return eps;
}

TensorField antisymmetrize(const TensorField& t, const std::vector<int>& slots) {
  for (int s : slots) {
    check_slot(t, s);
    if (t.variance[static_cast<std::size_t>(s)] != t.variance[static_cast<std::size_t>(slots[0])])
      throw GeometryError("antisymmetrize over slots of mixed variance");
  }
  TensorField out = t;
  out.comps = antisymmetrize(t.comps, slots);
  return out;
}

TensorField symmetrize(const TensorField& t, const std::vector<int>& slots) {
  for (int s : slots) {
    check_slot(t, s);
    if (t.variance[static_cast<std::size_t>(s)] != t.variance[static_cast<std::size_t>(slots[0])])
      throw GeometryError("symmetrize over slots of mixed variance");
  }
  TensorField out = t;
  out.comps = symmetrize(t.comps, slots);
  return out;
}

MetricField conformal_rescale(const MetricField& g, const Expr& upsilon) {
  Expr factor = exp(Expr(2) * upsilon);
  ExprArray comps = g.g().comps;
  for (auto& e : comps.data())
    if (!e.is_zero()) e = factor * e;
  MetricField out(g.chart_ptr(), std::move(comps));
  return out;
}

ExprArray coframe_components(const TensorField& t, const ExprArray& theta) {
  ExprArray frame = matrix_inverse(theta);  // frame(mu, A) = e_A^mu
  ExprArray frame_t = permute(frame, {1, 0});  // (A, mu)
  ExprArray out = t.comps;
  for (int s = 0; s < t.rank(); ++s)
    out = contract_slot(out, s, t.variance[static_cast<std::size_t>(s)] == Variance::Up ? theta : frame_t);
  return out;
}

NumTensor coframe_components(const NumTensor& t, const std::vector<Variance>& variance, const NumTensor& theta) {
  const int n = theta.dim(0);
  Eigen::MatrixXd th(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) th(i, j) = theta(i, j);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(th);
  if (!lu.isInvertible()) throw GeometryError("singular coframe");
  Eigen::MatrixXd fr = lu.inverse();  // fr(mu, A)
  NumTensor up({n, n}), down({n, n});
  for (int A = 0; A < n; ++A)
    for (int mu = 0; mu < n; ++mu) {
      up(A, mu) = th(A, mu);
      down(A, mu) = fr(mu, A);
    }
  NumTensor out = t;
  for (std::size_t s = 0; s < variance.size(); ++s) {
    NumTensor next(out.shape());
    const NumTensor& m = variance[s] == Variance::Up ? up : down;
    for (std::size_t f = 0; f < next.size(); ++f) {
      auto idx = next.unflatten(f);
      int A = idx[s];
      double acc = 0.0;
      for (int mu = 0; mu < n; ++mu) {
        idx[s] = mu;
        acc += m(A, mu) * out.at(idx);
      }
      next[f] = acc;
    }
    out = std::move(next);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

SampleBox SampleBox::uniform(int n, double lo, double hi) {
  SampleBox b;
  b.ranges.assign(static_cast<std::size_t>(n), {lo, hi});
  return b;
}

Bindings make_point(const Chart& chart, std::span<const double> values) {
  if (values.size() != chart.coords.size()) throw GeometryError("point has wrong number of coordinates");
  Bindings b;
  for (std::size_t i = 0; i < values.size(); ++i) b[chart.coords[i]] = values[i];
  return b;
}

bool admissible_point(const MetricField& g, const Bindings& b, std::string* why) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  try {
    for (const auto& s : g.chart().singular)
      if (std::abs(eval(s, b)) < 1e-9) return fail("on singular locus " + s.str() + " at " + format_point(b));
    NumTensor gv = eval_metric(g, b);
    for (double v : gv.data())
      if (!std::isfinite(v)) return fail("metric not finite at " + format_point(b));
    auto sig = numeric_signature(gv);
    if (g.certified() && sig != g.signature()) return fail("signature changes at " + format_point(b));
  } catch (const GeometryError& e) {
    return fail(std::string(e.what()) + " at " + format_point(b));
  } catch (const EvalError& e) {
    return fail(e.what());
  }
  return true;
}

std::vector<Bindings> sample_points(const MetricField& g, const SampleBox& box, int count, std::uint64_t seed) {
  const int n = g.dim();
  if (static_cast<int>(box.ranges.size()) != n) throw GeometryError("sample box dimension mismatch");
  std::mt19937_64 rng(seed);
  std::vector<Bindings> out;
  std::vector<double> v(static_cast<std::size_t>(n));
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > 1000 * std::max(count, 1)) throw GeometryError("could not find admissible sample points");
    for (int i = 0; i < n; ++i) {
      auto [lo, hi] = box.ranges[static_cast<std::size_t>(i)];
      v[static_cast<std::size_t>(i)] = lo + (hi - lo) * std::generate_canonical<double, 53>(rng);
    }
    Bindings b = make_point(g.chart(), v);
    if (admissible_point(g, b)) out.push_back(std::move(b));
  }
  return out;
}

}  // namespace conformal
