#include <doctest.h>

#include <cmath>

#include "conformal/catalog.hpp"
#include "conformal/tractor.hpp"

using namespace conformal;

namespace {

Mat slice(const NumTensor& t, int a) {  // t(a, ., .)
  const int N = t.dim(1);
  Mat m(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) m(i, j) = t(a, i, j);
  return m;
}

Mat slice2(const NumTensor& t, int a, int b) {  // t(a, b, ., .)
  const int N = t.dim(2);
  Mat m(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) m(i, j) = t(a, b, i, j);
  return m;
}

Vec vec(const NumTensor& t) {
  Vec v(static_cast<Eigen::Index>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) v(static_cast<Eigen::Index>(i)) = t[i];
  return v;
}

Vec eval_vec(const std::vector<Expr>& e, const Bindings& b) {
  Vec v(static_cast<Eigen::Index>(e.size()));
  for (std::size_t i = 0; i < e.size(); ++i) v(static_cast<Eigen::Index>(i)) = eval(e[i], b);
  return v;
}

// a generic tractor on Schwarzschild-like coordinates (u, r, x1, ...)
TractorField sample_tractor(MetricPtr m) {
  const int n = m->dim();
  std::vector<Expr> mu;
  for (int a = 0; a < n; ++a) mu.push_back(parse("r^2*x1 + u*" + std::to_string(a + 1)));
  return make_tractor(m, parse("r*u + x1"), mu, parse("u*r^3 - x1^2"));
}

struct Fixture {
  CatalogEntry e;
  CurvaturePack pack;
  std::vector<Bindings> pts;
  Fixture(const std::string& name, int count) : e(catalog_entry(name)), pack(curvature_pack(e.metric)), pts(e.sample(count, 3)) {}
};

}  // namespace

TEST_CASE("projector inner products") {
  Fixture f("rt4_r4", 1);
  PointCurvature pc = evaluate(f.pack, f.pts[0]);
  const int n = 4, N = 6;
  Projectors p = projectors(pc.g);
  Mat hinv = to_matrix(tractor_metric_inverse(pc.ginv));
  CHECK((to_matrix(tractor_metric(pc.g)) * hinv - Mat::Identity(N, N)).cwiseAbs().maxCoeff() < 1e-14);
  Vec X = vec(p.X), Y = vec(p.Y);
  CHECK(X.dot(hinv * Y) == doctest::Approx(1.0));
  CHECK(X.dot(hinv * X) == 0.0);
  CHECK(Y.dot(hinv * Y) == 0.0);
  for (int a = 0; a < n; ++a) {
    Vec Za(N);
    for (int A = 0; A < N; ++A) Za(A) = p.Z(A, a);
    CHECK(Za.dot(hinv * X) == 0.0);
    CHECK(Za.dot(hinv * Y) == 0.0);
    for (int b = 0; b < n; ++b) {
      Vec Zb(N);
      for (int A = 0; A < N; ++A) Zb(A) = p.Z(A, b);
      CHECK(Za.dot(hinv * Zb) == doctest::Approx(pc.g(a, b)));
    }
  }
}

TEST_CASE("connection: derivatives of X, Y, Z and of h") {
  Fixture f("rt5_r4", 1);
  PointCurvature pc = evaluate(f.pack, f.pts[0]);
  const int n = 5, N = 7;
  NumTensor conn = connection_matrices(pc);
  Mat h = to_matrix(tractor_metric(pc.g));
  for (int a = 0; a < n; ++a) {
    Mat c = slice(conn, a);
    // nabla_a X = Z_a
    Vec expect = Vec::Zero(N);
    expect(1 + a) = 1.0;
    CHECK((c.col(N - 1) - expect).cwiseAbs().maxCoeff() < 1e-14);
    // nabla_a Y = P_a^b Z_b
    expect.setZero();
    for (int b = 0; b < n; ++b)
      for (int d = 0; d < n; ++d) expect(1 + b) += pc.P(a, d) * pc.ginv(d, b);
    CHECK((c.col(0) - expect).cwiseAbs().maxCoeff() < 1e-12);
    // nabla_a Z_c = -g_ac Y - P_ac X, once the Levi-Civita part of Z_c is removed
    for (int cc = 0; cc < n; ++cc) {
      Vec v = c.col(1 + cc);
      for (int d = 0; d < n; ++d) v(1 + d) -= pc.gamma(d, a, cc);
      expect.setZero();
      expect(0) = -pc.g(a, cc);
      expect(N - 1) = -pc.P(a, cc);
      CHECK((v - expect).cwiseAbs().maxCoeff() < 1e-12);
    }
    // nabla_a h = 0
    Mat dh = Mat::Zero(N, N);
    for (int b = 0; b < n; ++b)
      for (int d = 0; d < n; ++d) dh(1 + b, 1 + d) = pc.dg(a, b, d);
    CHECK((dh - c.transpose() * h - h * c).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("curvature of the connection is Omega") {
  Fixture f("rt4_r4", 2);
  TractorField V = sample_tractor(f.e.metric);
  for (const auto& b : f.pts) CHECK(commutator_residual(V, f.pack, b) < 1e-10);
}

TEST_CASE("closed form of the divergence of Omega") {
  for (std::string name : {"schwarzschild", "rt4_r4", "rt5_r4"}) {
    Fixture f(name, 2);
    for (const auto& b : f.pts) {
      TractorPoint tp = tractor_point(f.pack, b);
      const double scale = std::max(tp.pc.scale(), max_abs(tp.div_omega_closed));
      INFO(name);
      CHECK(max_abs(tp.div_omega - tp.div_omega_closed) < 1e-7 * scale);
    }
  }
}

TEST_CASE("change of scale") {
  Fixture f("rt4_r4", 2);
  const Expr u1 = parse("log(r)"), u2 = parse("3*x1/10");
  TractorField V = sample_tractor(f.e.metric);
  TractorField Vh = change_scale(V, u1);
  CurvaturePack hpack = curvature_pack(Vh.scale);
  const auto up = upper_components(V);
  const auto uph = upper_components(Vh);

  // composition and inverse
  const auto both = upper_components(change_scale(Vh, u2));
  const auto direct = upper_components(change_scale(V, u1 + u2));
  const auto back = upper_components(change_scale(Vh, -u1));

  ExprArray nV = tractor_connection(V, f.pack);
  ExprArray nVh = tractor_connection(Vh, hpack);
  for (const auto& b : f.pts) {
    PointCurvature pc = evaluate(f.pack, b);
    PointCurvature ph = evaluate(hpack, b);
    CHECK((eval_vec(both, b) - eval_vec(direct, b)).cwiseAbs().maxCoeff() < 1e-10 * eval_vec(direct, b).cwiseAbs().maxCoeff());
    CHECK((eval_vec(back, b) - eval_vec(up, b)).cwiseAbs().maxCoeff() < 1e-10 * eval_vec(up, b).cwiseAbs().maxCoeff());

    // the tractor metric is scale independent
    Vec v = eval_vec(up, b), vh = eval_vec(uph, b);
    const double hv = v.dot(to_matrix(tractor_metric(pc.g)) * v);
    CHECK(vh.dot(to_matrix(tractor_metric(ph.g)) * vh) == doctest::Approx(hv).epsilon(1e-10));

    // the connection commutes with the change of scale
    Mat M = scale_change_matrix(pc.g, pc.ginv, eval(u1, b), upsilon_gradient(u1, f.e.metric->chart(), b));
    CHECK((M * v - vh).cwiseAbs().maxCoeff() < 1e-10 * vh.cwiseAbs().maxCoeff());
    for (int a = 0; a < 4; ++a) {
      Vec x(6), y(6);
      for (int C = 0; C < 6; ++C) {
        x(C) = eval(nV(a, C), b);
        y(C) = eval(nVh(a, C), b);
      }
      CHECK((M * x - y).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, y.cwiseAbs().maxCoeff()));
    }

    // Omega is invariant; its divergence picks up (n-4) Upsilon^a Omega_ab and the weight e^{-2 Upsilon}
    TractorPoint tp = tractor_point(pc), th = tractor_point(ph);
    Mat Mi = M.inverse();
    NumTensor U = upsilon_gradient(u1, f.e.metric->chart(), b);
    NumTensor Uup = raise_slots(U, pc.ginv, {0});
    const double w = std::exp(-2 * eval(u1, b));
    for (int a = 0; a < 4; ++a) {
      for (int c = 0; c < 4; ++c) {
        Mat d = Mi.transpose() * slice2(tp.omega, a, c) * Mi - slice2(th.omega, a, c);
        CHECK(d.cwiseAbs().maxCoeff() < 1e-10 * std::max(1.0, max_abs(th.omega)));
      }
      Mat D = slice(tp.div_omega, a);
      for (int c = 0; c < 4; ++c) D += 0.0 * Uup(c) * slice2(tp.omega, c, a);  // (n - 4) = 0 here
      Mat Dh = slice(th.div_omega, a);
      CHECK((w * Mi.transpose() * D * Mi - Dh).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, max_abs(th.div_omega)));
    }
  }
}

TEST_CASE("divergence of Omega transforms with the (n-4) term in dimension 5") {
  Fixture f("rt5_r4", 2);
  const Expr ups = parse("log(r)");
  CurvaturePack hpack = curvature_pack(std::make_shared<MetricField>(conformal_rescale(*f.e.metric, ups)));
  const int n = 5;
  for (const auto& b : f.pts) {
    PointCurvature pc = evaluate(f.pack, b);
    TractorPoint tp = tractor_point(pc), th = tractor_point(hpack, b);
    Mat M = scale_change_matrix(pc.g, pc.ginv, eval(ups, b), upsilon_gradient(ups, f.e.metric->chart(), b));
    Mat Mi = M.inverse();
    NumTensor Uup = raise_slots(upsilon_gradient(ups, f.e.metric->chart(), b), pc.ginv, {0});
    const double w = std::exp(-2 * eval(ups, b));
    for (int a = 0; a < n; ++a) {
      Mat D = slice(tp.div_omega, a);
      for (int c = 0; c < n; ++c) D += (n - 4) * Uup(c) * slice2(tp.omega, c, a);
      CHECK((w * Mi.transpose() * D * Mi - slice(th.div_omega, a)).cwiseAbs().maxCoeff() <
            1e-9 * std::max(1.0, max_abs(th.div_omega)));
    }
  }
}

TEST_CASE("the D operator is conformally invariant") {
  Fixture f("rt4_r4", 2);
  const Expr ups = parse("log(r) + x1/4");
  const Expr fexpr = parse("r*u + x1^2");
  for (int w : {1, -1, 2}) {
    TractorField D = tractor_d(f.pack, fexpr, w);
    TractorField Dh = change_scale(D, ups);
    CurvaturePack hpack = curvature_pack(Dh.scale);
    // a density of weight w has components e^{w Upsilon} f in the new scale;
    // D f has weight w - 1 while change_scale treats its input as weight 0
    TractorField D2 = tractor_d(hpack, exp(Expr(w) * ups) * fexpr, w);
    for (const auto& b : f.pts) {
      Vec x = std::exp((w - 1) * eval(ups, b)) * eval_vec(upper_components(Dh), b);
      Vec y = eval_vec(upper_components(D2), b);
      INFO("w = " << w);
      CHECK((x - y).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, y.cwiseAbs().maxCoeff()));
    }
  }
}

TEST_CASE("Einstein scales give parallel tractors") {
  for (std::string name : {"schwarzschild", "sds5", "sphere4", "hyperkahler"}) {
    Fixture f(name, 3);
    ParallelTractorReport r = parallel_tractor_check(f.pack, Expr(1), f.pts);
    INFO(name << ": " << r.reason);
    CHECK(r.verdict == Verdict::ConformallyEinstein);
    CHECK(r.worst_ratio < 1e-9);
    for (const auto& p : r.points) CHECK(p.h_ii == doctest::Approx(p.h_ii_expected).epsilon(1e-8));

    TractorField I = einstein_candidate(f.pack, Expr(1));
    for (const auto& p : annihilation_check(f.pack, I, f.pts).points) {
      CHECK(p.omega_i < 1e-10 * p.scale);
      CHECK(p.nabla_omega_i < 1e-10 * p.scale);
      CHECK(p.div_omega_i < 1e-10 * p.scale);
      CHECK(p.w_i < 1e-10 * p.scale);
      CHECK(p.x_i == doctest::Approx(1.0));
    }
  }
}

TEST_CASE("a rescaled Einstein metric: the right sigma is found, sigma = 1 is rejected") {
  CatalogEntry e = catalog_entry("schwarzschild");
  const Expr ups = parse("x1/5 + log(r)/3");
  auto hat = std::make_shared<MetricField>(conformal_rescale(*e.metric, ups));
  CurvaturePack pack = curvature_pack(hat);
  auto pts = sample_points(*hat, e.box, 3, 6);
  // sigma^{-2} hat = g exactly when sigma = e^{Upsilon}
  CHECK(parallel_tractor_check(pack, exp(ups), pts).verdict == Verdict::ConformallyEinstein);
  CHECK(parallel_tractor_check(pack, Expr(1), pts).verdict == Verdict::NotConformallyEinstein);
  CHECK_THROWS_AS(parallel_tractor_check(pack, Expr(0), pts), TractorError);
}

TEST_CASE("rank of the Omega map") {
  {
    Fixture f("schwarzschild", 3);
    Expr one(1);
    RankReport r = rank_obstruction(f.pack, f.pts, {}, &one);
    CHECK(r.verdict == Verdict::ConformallyEinstein);
    for (const auto& p : r.points) {
      CHECK(p.rank == 5);
      REQUIRE(p.alignment);
      CHECK(*p.alignment > 1 - 1e-6);
    }
  }
  {
    Fixture f("rt4_r4", 3);
    RankReport r = rank_obstruction(f.pack, f.pts);
    CHECK(r.verdict == Verdict::NotConformallyEinstein);
    for (const auto& p : r.points) CHECK(p.rank == 6);
  }
  {
    Fixture f("ppwave4", 2);
    CHECK(rank_obstruction(f.pack, f.pts).verdict == Verdict::Inconclusive);
  }
}
