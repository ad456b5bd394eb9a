#include "conformal/genericity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace conformal {

namespace {

std::size_t us(int i) { return static_cast<std::size_t>(i); }

NumTensor zero_like(const NumTensor& t) { return NumTensor(t.shape(), 0.0); }

// The Weyl tensor with numerical noise flushed to an exact zero.
NumTensor cleaned_weyl(const PointCurvature& pc, const Tolerances& tol) {
  return weyl_vanishes(pc, tol) ? zero_like(pc.C) : pc.C;
}

// Index of the pair (a, b), a < b, in two_form_basis order.
int pair_index(int n, int a, int b) { return a * n - a * (a + 1) / 2 + (b - a - 1); }

Mat pairs_matrix(const NumTensor& t, int n, double factor) {
  auto basis = two_form_basis(n);
  const int N = static_cast<int>(basis.size());
  Mat m(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      auto [a, b] = basis[us(i)];
      auto [c, d] = basis[us(j)];
      m(i, j) = factor * t(a, b, c, d);
    }
  return m;
}

double cube_invariant(const NumTensor& Cmix, int n) {
  // each contraction over an ordered pair is twice the sum over a < b
  Mat m = pairs_matrix(Cmix, n, 2.0);
  return (m * m * m).trace();
}

[[noreturn]] void precondition(DualPolicy p, const std::string& what, double value, const Bindings& b) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  throw PreconditionError(std::string("policy ") + policy_name(p) + ": " + what + " vanishes at " + format_point(b) +
                          " (value " + buf + ")");
}

DualCandidate from_l(const PointCurvature& pc, const Tolerances& tol) {
  const int n = pc.n;
  LOperator lo = l_operator(pc, tol);
  if (lo.rank < n) precondition(DualPolicy::FromL, "||L||", lo.det, pc.point);
  Mat Linv = lo.L.inverse();
  NumTensor C1 = raise_slots(pc.C, pc.ginv, {0});
  NumTensor dC1 = raise_slots(pc.nablaC, pc.ginv, {1});

  NumTensor Dt = NumTensor::cube(n, 4, 0.0);  // Dtilde^a_cde
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double l = Linv(a, b);
      if (l == 0.0) continue;
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d)
          for (int e = 0; e < n; ++e) Dt(a, c, d, e) -= l * C1(b, c, d, e);
    }
  NumTensor dDt = NumTensor::cube(n, 5, 0.0);
  auto dLs = l_operator_derivatives(pc);
  for (int f = 0; f < n; ++f) {
    Mat dLinv = -Linv * dLs[us(f)] * Linv;
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d)
            for (int e = 0; e < n; ++e)
              dDt(f, a, c, d, e) -= dLinv(a, b) * C1(b, c, d, e) + Linv(a, b) * dC1(f, b, c, d, e);
  }
  return {DualPolicy::FromL, raise_slots(Dt, pc.g, {0}), raise_slots(dDt, pc.g, {1})};
}

DualCandidate from_c(const PointCurvature& pc, const Tolerances& tol) {
  const int n = pc.n;
  WeylOperator wo = weyl_operator(pc, tol);
  const int N = static_cast<int>(wo.M.rows());
  if (wo.rank < N) precondition(DualPolicy::FromC, "||C||", wo.det, pc.point);
  Mat Minv = wo.M.inverse();
  const double k = 1.0 / (1.0 - n);
  NumTensor Dmix = pairs_tensor(Minv, n, k);  // Dtilde_ac^de
  NumTensor dDmix = NumTensor::cube(n, 5, 0.0);
  auto dMs = weyl_operator_derivatives(pc);
  for (int f = 0; f < n; ++f) {
    NumTensor slab = pairs_tensor(-Minv * dMs[us(f)] * Minv, n, k);
    std::copy(slab.data().begin(), slab.data().end(), dDmix.data().begin() + static_cast<std::ptrdiff_t>(us(f) * slab.size()));
  }
  return {DualPolicy::FromC, raise_slots(Dmix, pc.g, {2, 3}), raise_slots(dDmix, pc.g, {3, 4})};
}

// Dtilde^acde = k C^de_fg C^fgca / C^3 with k fixed by the defining property.
constexpr double kDim4Factor = 4.0;

DualCandidate dim4_c3(const PointCurvature& pc, const Tolerances& tol) {
  const int n = pc.n;
  if (n != 4) throw PreconditionError("policy dim4-C3 needs dimension 4");
  NumTensor C = cleaned_weyl(pc, tol);
  NumTensor Cmix = raise_slots(C, pc.ginv, {2, 3});
  const double c3 = cube_invariant(Cmix, n);
  const double cmax = max_abs(Cmix);
  if (!(std::abs(c3) > tol.rank * cmax * cmax * cmax)) precondition(DualPolicy::Dim4C3, "C^3", c3, pc.point);
  NumTensor dCmix = raise_slots(pc.nablaC, pc.ginv, {3, 4});

  // X_deca = C_de^fg C_fgca and its derivative
  NumTensor X = NumTensor::cube(n, 4, 0.0);
  NumTensor dX = NumTensor::cube(n, 5, 0.0);
  for (int d = 0; d < n; ++d)
    for (int e = 0; e < n; ++e)
      for (int c = 0; c < n; ++c)
        for (int a = 0; a < n; ++a)
          for (int f = 0; f < n; ++f)
            for (int g = 0; g < n; ++g) {
              X(d, e, c, a) += Cmix(d, e, f, g) * pc.C(f, g, c, a);
              for (int h = 0; h < n; ++h)
                dX(h, d, e, c, a) += dCmix(h, d, e, f, g) * pc.C(f, g, c, a) + Cmix(d, e, f, g) * pc.nablaC(h, f, g, c, a);
            }
  NumTensor dc3({n});
  for (int h = 0; h < n; ++h) {
    double acc = 0.0;
    for (std::size_t i = 0; i < Cmix.size(); ++i) {
      auto idx = Cmix.unflatten(i);
      int a = idx[0], b = idx[1], c = idx[2], d = idx[3];
      double cc = 0.0;
      for (int e = 0; e < n; ++e)
        for (int f = 0; f < n; ++f) cc += Cmix(c, d, e, f) * Cmix(e, f, a, b);
      acc += dCmix(h, a, b, c, d) * cc;
    }
    dc3(h) = 3.0 * acc;
  }
  DualCandidate out{DualPolicy::Dim4C3, NumTensor::cube(n, 4, 0.0), NumTensor::cube(n, 5, 0.0)};
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c)
      for (int d = 0; d < n; ++d)
        for (int e = 0; e < n; ++e) {
          out.D(a, c, d, e) = kDim4Factor * X(d, e, c, a) / c3;
          for (int h = 0; h < n; ++h)
            out.nablaD(h, a, c, d, e) = kDim4Factor * (dX(h, d, e, c, a) / c3 - X(d, e, c, a) * dc3(h) / (c3 * c3));
        }
  return out;
}

}  // namespace

std::vector<std::pair<int, int>> two_form_basis(int n) {
  std::vector<std::pair<int, int>> out;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) out.emplace_back(a, b);
  return out;
}

NumTensor pairs_tensor(const Mat& m, int n, double factor) {
  NumTensor t = NumTensor::cube(n, 4, 0.0);
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = c + 1; d < n; ++d) {
          double v = factor * m(pair_index(n, a, b), pair_index(n, c, d));
          t(a, b, c, d) = v;
          t(b, a, c, d) = -v;
          t(a, b, d, c) = -v;
          t(b, a, d, c) = v;
        }
  return t;
}

std::vector<Mat> weyl_operator_derivatives(const PointCurvature& pc) {
  const int n = pc.n;
  NumTensor dCmix = raise_slots(pc.nablaC, pc.ginv, {3, 4});
  auto basis = two_form_basis(n);
  const int N = static_cast<int>(basis.size());
  std::vector<Mat> out;
  for (int f = 0; f < n; ++f) {
    Mat dM(N, N);
    for (int i = 0; i < N; ++i)
      for (int j = 0; j < N; ++j)
        dM(i, j) = 2.0 * dCmix(f, basis[us(i)].first, basis[us(i)].second, basis[us(j)].first, basis[us(j)].second);
    out.push_back(std::move(dM));
  }
  return out;
}

std::vector<Mat> l_operator_derivatives(const PointCurvature& pc) {
  const int n = pc.n;
  NumTensor Cup = raise_all(pc.C, pc.ginv);
  NumTensor dCup = raise_slots(pc.nablaC, pc.ginv, {1, 2, 3, 4});
  std::vector<Mat> out;
  for (int f = 0; f < n; ++f) {
    Mat dL = Mat::Zero(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double acc = 0.0;
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d)
            for (int e = 0; e < n; ++e)
              acc += dCup(f, a, c, d, e) * pc.C(b, c, d, e) + Cup(a, c, d, e) * pc.nablaC(f, b, c, d, e);
        dL(a, b) = acc;
      }
    out.push_back(std::move(dL));
  }
  return out;
}

bool weyl_vanishes(const PointCurvature& pc, const Tolerances& tol) { return tol.is_zero(max_abs(pc.C), pc.scale()); }

WeylOperator weyl_operator(const PointCurvature& pc, const Tolerances& tol) {
  WeylOperator w;
  w.n = pc.n;
  NumTensor Cmix = raise_slots(cleaned_weyl(pc, tol), pc.ginv, {2, 3});
  w.M = pairs_matrix(Cmix, pc.n, 2.0);
  w.det = determinant(w.M);
  w.adj = adjugate(w.M);
  w.Ctilde = pairs_tensor(w.adj, pc.n, 0.5);
  w.rank = rank_kernel(w.M, tol.rank).rank;
  return w;
}

LOperator l_operator(const PointCurvature& pc, const Tolerances& tol) {
  const int n = pc.n;
  NumTensor C = cleaned_weyl(pc, tol);
  NumTensor Cup = raise_all(C, pc.ginv);
  LOperator l;
  l.L = Mat::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double acc = 0.0;
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d)
          for (int e = 0; e < n; ++e) acc += Cup(a, c, d, e) * C(b, c, d, e);
      l.L(a, b) = acc;
    }
  l.det = determinant(l.L);
  l.adj = adjugate(l.L);
  l.rank = rank_kernel(l.L, tol.rank).rank;
  return l;
}

const char* policy_name(DualPolicy p) {
  switch (p) {
    case DualPolicy::FromL: return "from-L";
    case DualPolicy::FromC: return "from-C";
    case DualPolicy::Dim4C3: return "dim4-C3";
    case DualPolicy::Auto: return "auto";
    case DualPolicy::User: return "user-supplied";
  }
  return "?";
}

DualPolicy policy_from_name(std::string_view s) {
  if (s == "from-L") return DualPolicy::FromL;
  if (s == "from-C") return DualPolicy::FromC;
  if (s == "dim4-C3") return DualPolicy::Dim4C3;
  if (s == "auto") return DualPolicy::Auto;
  throw std::invalid_argument("unknown policy '" + std::string(s) + "' (expected from-L, from-C, dim4-C3 or auto)");
}

DualCandidate dual_candidate(const PointCurvature& pc, DualPolicy policy, const Tolerances& tol) {
  switch (policy) {
    case DualPolicy::FromL: return from_l(pc, tol);
    case DualPolicy::FromC: return from_c(pc, tol);
    case DualPolicy::Dim4C3: return dim4_c3(pc, tol);
    case DualPolicy::Auto: {
      if (weyl_vanishes(pc, tol)) precondition(DualPolicy::Auto, "Weyl tensor", 0.0, pc.point);
      if (l_operator(pc, tol).rank == pc.n) return from_l(pc, tol);
      if (weyl_operator(pc, tol).rank == pc.n * (pc.n - 1) / 2) return from_c(pc, tol);
      if (pc.n == 4) return dim4_c3(pc, tol);
      precondition(DualPolicy::Auto, "||L|| and ||C||", 0.0, pc.point);
    }
    case DualPolicy::User: break;
  }
  throw std::invalid_argument("dual_candidate: a user-supplied tensor cannot be built from a policy");
}

double dual_defining_residual(const DualCandidate& dc, const PointCurvature& pc) {
  const int n = pc.n;
  NumTensor C3 = raise_slots(pc.C, pc.ginv, {1, 2, 3});
  double worst = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      double acc = pc.g(a, b);
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d)
          for (int e = 0; e < n; ++e) acc += dc.D(a, c, d, e) * C3(b, c, d, e);
      worst = std::max(worst, std::abs(acc));
    }
  return worst / std::max(1e-300, max_abs(pc.g));
}

NumTensor k_field(const DualCandidate& dc, const PointCurvature& pc) {
  const int n = pc.n;
  NumTensor Aup = raise_all(pc.A, pc.ginv);
  NumTensor K({n}, 0.0);
  for (int a = 0; a < n; ++a)
    for (int c = 0; c < n; ++c)
      for (int d = 0; d < n; ++d)
        for (int e = 0; e < n; ++e) K(a) += dc.D(a, c, d, e) * Aup(c, d, e);
  return K;
}

NumTensor nabla_k_field(const DualCandidate& dc, const PointCurvature& pc) {
  const int n = pc.n;
  NumTensor Aup = raise_all(pc.A, pc.ginv);
  NumTensor dAup = raise_slots(pc.nablaA, pc.ginv, {1, 2, 3});
  NumTensor dK({n, n}, 0.0);
  for (int b = 0; b < n; ++b)
    for (int a = 0; a < n; ++a) {
      double acc = 0.0;
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d)
          for (int e = 0; e < n; ++e) acc += dc.nablaD(b, a, c, d, e) * Aup(c, d, e) + dc.D(a, c, d, e) * dAup(b, c, d, e);
      dK(b, a) = acc;
    }
  return dK;
}

// ---------------------------------------------------------------------------
// Classification

namespace {

// C*_{b1 S c d} for S = the sorted free indices b2..b(n-2).
// eps_{b1 S}^{a1 a2} C_{a1 a2 cd} = 2 eps_{b1 S e f} C^{ef}_{cd} summed over e < f.
double cstar_entry(const NumTensor& Cup2, double vol, int n, int b1, const std::vector<int>& S, int c, int d) {
  if (std::find(S.begin(), S.end(), b1) != S.end()) return 0.0;
  std::vector<int> perm{b1};
  perm.insert(perm.end(), S.begin(), S.end());
  std::vector<int> rest;
  for (int i = 0; i < n; ++i)
    if (std::find(perm.begin(), perm.end(), i) == perm.end()) rest.push_back(i);
  perm.push_back(rest[0]);
  perm.push_back(rest[1]);
  return 2.0 * vol * permutation_sign(perm) * Cup2(rest[0], rest[1], c, d);
}

std::vector<std::vector<int>> sorted_subsets(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur;
  auto rec = [&](auto&& self, int start) -> void {
    if (static_cast<int>(cur.size()) == k) {
      out.push_back(cur);
      return;
    }
    for (int i = start; i < n; ++i) {
      cur.push_back(i);
      self(self, i + 1);
      cur.pop_back();
    }
  };
  rec(rec, 0);
  return out;
}

void normalize_block(Mat& m) {
  double mx = m.cwiseAbs().maxCoeff();
  if (mx > 0.0) m /= mx;
}

Mat stack(std::initializer_list<const Mat*> blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const Mat* b : blocks) {
    rows += b->rows();
    cols = b->cols();
  }
  Mat out(rows, cols);
  Eigen::Index r = 0;
  for (const Mat* b : blocks) {
    out.block(r, 0, b->rows(), cols) = *b;
    r += b->rows();
  }
  return out;
}

}  // namespace

double weyl_kernel_residual(const PointCurvature& pc, const Vec& v) {
  const int n = pc.n;
  double worst = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        double acc = 0.0;
        for (int d = 0; d < n; ++d) acc += pc.C(a, b, c, d) * v(d);
        worst = std::max(worst, std::abs(acc));
      }
  return worst / (std::max(1.0, max_abs(pc.C)) * std::max(1e-300, v.cwiseAbs().maxCoeff()));
}

NumTensor weyl_star(const PointCurvature& pc) {
  const int n = pc.n;
  if (n > 7) throw std::invalid_argument("weyl_star: dimension too large to materialize");
  NumTensor Cup2 = raise_slots(pc.C, pc.ginv, {0, 1});
  const double vol = std::sqrt(std::abs(determinant(to_matrix(pc.g))));
  NumTensor out = NumTensor::cube(n, n, 0.0);
  for (std::size_t f = 0; f < out.size(); ++f) {
    auto idx = out.unflatten(f);
    std::vector<int> S(idx.begin() + 1, idx.end() - 2);
    std::vector<int> sorted = S;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) continue;
    std::vector<int> ranks;
    for (int s : S) ranks.push_back(static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), s) - sorted.begin()));
    const int sgn = permutation_sign(ranks);
    out[f] = sgn * cstar_entry(Cup2, vol, n, idx[0], sorted, idx[us(n - 2)], idx[us(n - 1)]);
  }
  return out;
}

GenericityPoint classify_point(const PointCurvature& pc, const Tolerances& tol) {
  const int n = pc.n;
  const int N = n * (n - 1) / 2;
  GenericityPoint gp;
  NumTensor C = cleaned_weyl(pc, tol);

  // weakly generic: V -> C_abcd V^d
  Mat mw(n * n * n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c)
        for (int d = 0; d < n; ++d) mw((a * n + b) * n + c, d) = C(a, b, c, d);
  RankInfo rw = rank_kernel(mw, tol.rank);
  gp.weakly_generic = rw.rank == n;
  gp.weyl_kernel = rw.kernel;

  WeylOperator wo = weyl_operator(pc, tol);
  gp.weyl_det = wo.det;
  gp.lambda2_kernel_dim = N - wo.rank;
  gp.lambda2_generic = wo.rank == N;
  gp.l_det = l_operator(pc, tol).det;

  // (c3): C_abcd F^ab = 0, F skew
  Mat m3 = pairs_matrix(permute(C, {2, 3, 0, 1}), n, 2.0);
  gp.c3_kernel_dim = N - rank_kernel(m3, tol.rank).rank;

  // symmetric unknowns H^bd, b <= d
  std::vector<std::pair<int, int>> sym;
  for (int b = 0; b < n; ++b)
    for (int d = b; d < n; ++d) sym.emplace_back(b, d);
  const int S = static_cast<int>(sym.size());
  auto coeff = [&](auto&& entry, int b, int d) { return b == d ? entry(b, d) : entry(b, d) + entry(d, b); };

  Mat trace_row(1, S);
  for (int j = 0; j < S; ++j) trace_row(0, j) = coeff([&](int b, int d) { return pc.g(b, d); }, sym[us(j)].first, sym[us(j)].second);
  normalize_block(trace_row);

  // (c3bar): C_abcd H^bd = 0, rows a <= c
  Mat mbar(S, S);
  for (int i = 0; i < S; ++i) {
    auto [a, c] = sym[us(i)];
    for (int j = 0; j < S; ++j)
      mbar(i, j) = coeff([&](int b, int d) { return C(a, b, c, d); }, sym[us(j)].first, sym[us(j)].second);
  }
  normalize_block(mbar);

  // (c3*bar): C*_{b1 S c d} H^{b1 d} = 0, rows (S, c)
  NumTensor Cup2 = raise_slots(C, pc.ginv, {0, 1});
  const double vol = std::sqrt(std::abs(determinant(to_matrix(pc.g))));
  auto subsets = sorted_subsets(n, n - 3);
  Mat mstar(static_cast<Eigen::Index>(subsets.size()) * n, S);
  for (std::size_t s = 0; s < subsets.size(); ++s)
    for (int c = 0; c < n; ++c)
      for (int j = 0; j < S; ++j)
        mstar(static_cast<Eigen::Index>(s) * n + c, j) = coeff(
            [&](int b1, int d) { return cstar_entry(Cup2, vol, n, b1, subsets[s], c, d); }, sym[us(j)].first,
            sym[us(j)].second);
  normalize_block(mstar);

  gp.c3bar_kernel_dim = S - rank_kernel(stack({&mbar, &trace_row}), tol.rank).rank;
  gp.c3starbar_kernel_dim = S - rank_kernel(stack({&mstar, &trace_row}), tol.rank).rank;
  gp.h_joint_kernel_dim = S - rank_kernel(stack({&mbar, &mstar, &trace_row}), tol.rank).rank;
  gp.generic = gp.c3_kernel_dim == 0 && gp.h_joint_kernel_dim == 0;
  gp.chain_consistent = (!gp.generic || gp.lambda2_generic) && (!gp.lambda2_generic || gp.weakly_generic);
  gp.generic = gp.generic && gp.lambda2_generic;

  if (n == 4) {
    NumTensor Cmix = raise_slots(C, pc.ginv, {2, 3});
    gp.c3 = cube_invariant(Cmix, n);
    // *C_ab^cd = 1/2 eps_ab^ef C_ef^cd
    NumTensor eps = raise_slots(epsilon_at(pc.g), pc.ginv, {2, 3});
    NumTensor star = NumTensor::cube(n, 4, 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          for (int d = 0; d < n; ++d) {
            double acc = 0.0;
            for (int e = 0; e < n; ++e)
              for (int f = 0; f < n; ++f) acc += eps(a, b, e, f) * Cmix(e, f, c, d);
            star(a, b, c, d) = 0.5 * acc;
          }
    Mat ms = pairs_matrix(star, n, 2.0);
    Mat mc = pairs_matrix(Cmix, n, 2.0);
    gp.star_c3 = (ms * mc * mc).trace();
  }
  return gp;
}

bool GenericityReport::all_weakly_generic() const {
  return !points.empty() && std::all_of(points.begin(), points.end(), [](const auto& p) { return p.weakly_generic; });
}
bool GenericityReport::all_lambda2_generic() const {
  return !points.empty() && std::all_of(points.begin(), points.end(), [](const auto& p) { return p.lambda2_generic; });
}
bool GenericityReport::all_generic() const {
  return !points.empty() && std::all_of(points.begin(), points.end(), [](const auto& p) { return p.generic; });
}
bool GenericityReport::any_weakly_generic() const {
  return std::any_of(points.begin(), points.end(), [](const auto& p) { return p.weakly_generic; });
}

GenericityReport classify_genericity(const CurvaturePack& pack, const std::vector<Bindings>& points,
                                     const Tolerances& tol) {
  GenericityReport rep;
  for (const auto& b : points) rep.points.push_back(classify_point(evaluate(pack, b), tol));
  return rep;
}

double four_dim_identity_residual(const PointCurvature& pc) {
  const int n = pc.n;
  if (n != 4) throw std::invalid_argument("four_dim_identity_residual: dimension must be 4");
  NumTensor Cup = raise_all(pc.C, pc.ginv);
  double sq = 0.0;
  for (std::size_t i = 0; i < Cup.size(); ++i) sq += Cup[i] * pc.C[i];
  double worst = 0.0;
  for (int d = 0; d < n; ++d)
    for (int e = 0; e < n; ++e) {
      double acc = 0.0;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          for (int c = 0; c < n; ++c) acc += Cup(a, b, c, d) * pc.C(a, b, c, e);
      worst = std::max(worst, std::abs(4.0 * acc - (d == e ? sq : 0.0)));
    }
  double s = std::max(1.0, max_abs(pc.C));
  return worst / (s * s);
}

}  // namespace conformal
