#include <doctest.h>

#include <cmath>

#include "conformal/catalog.hpp"
#include "conformal/curvature.hpp"
#include "conformal/genericity.hpp"

using namespace conformal;

namespace {

double weyl_sq(const PointCurvature& pc) {
  NumTensor up = raise_all(pc.C, pc.ginv);
  double s = 0.0;
  for (std::size_t i = 0; i < up.size(); ++i) s += up[i] * pc.C[i];
  return s;
}

// h = r^4 by hand: h' = 4 r^3, h'' = 12 r^2
double rt_r4_scalar(int n, int kappa, double r) {
  const double h = std::pow(r, 4);
  return (n - 2) * ((n - 3) * (kappa + 2 * h) / (r * r) + 16 * r * r) + 24 * r * r;
}

double rt_r4_psi(int n, int kappa, double r) { return (kappa / (r * r) + 6 * r * r) / ((n - 1.0) * (n - 2.0)); }

}  // namespace

TEST_CASE("names resolve") {
  for (const auto& name : catalog_names()) {
    CatalogEntry e = catalog_entry(name);
    CHECK(e.name == name);
    CHECK(e.metric->dim() == e.n);
    CHECK(e.sample(2).size() == 2);
  }
  CHECK_THROWS_AS(catalog_entry("nope"), std::invalid_argument);
  CHECK_THROWS_AS(robinson_trautman(3, 1, Expr(1)), std::invalid_argument);
  CHECK_THROWS_AS(robinson_trautman(4, 2, Expr(1)), std::invalid_argument);
}

TEST_CASE("Robinson-Trautman scalar curvature") {
  const Expr h = parse("r^4");
  for (int n : {4, 5, 6}) {
    CatalogEntry e = robinson_trautman(n, 1, h);
    CurvaturePack pack = curvature_pack(e.metric);
    for (const auto& b : e.sample(4, 5)) {
      const double want = rt_r4_scalar(n, 1, b.at("r"));
      INFO("n = " << n);
      CHECK(std::abs(evaluate(pack, b).R - want) < 1e-9 * std::abs(want));
      CHECK(eval(rt_scalar_curvature(n, 1, h), b) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("Robinson-Trautman Weyl tensor in the null coframe") {
  for (int n : {4, 5}) {
    CatalogEntry e = robinson_trautman(n, 1, parse("r^4"));
    CurvaturePack pack = curvature_pack(e.metric);
    for (const auto& b : e.sample(3, 2)) {
      PointCurvature pc = evaluate(pack, b);
      NumTensor theta({n, n});
      for (int A = 0; A < n; ++A)
        for (int mu = 0; mu < n; ++mu) theta(A, mu) = eval((*e.coframe)(A, mu), b);
      NumTensor gf = coframe_components(pc.g, {Variance::Down, Variance::Down}, theta);
      NumTensor Cf = coframe_components(pc.C, std::vector<Variance>(4, Variance::Down), theta);
      const double psi = rt_r4_psi(n, 1, b.at("r"));
      CHECK(eval(*e.psi, b) == doctest::Approx(psi).epsilon(1e-12));
      CHECK(gf(0, 1) == doctest::Approx(1.0));
      const double tol = 1e-8 * std::abs(psi);
      // + = 0, - = 1
      CHECK(std::abs(Cf(0, 1, 0, 1) - (3 - n) * (n - 2) * psi) < tol * (n - 2) * (n - 3));
      for (int i = 2; i < n; ++i)
        for (int k = 2; k < n; ++k) CHECK(std::abs(Cf(1, i, 0, k) - (3 - n) * psi * gf(i, k)) < tol * (n - 3));
    }
  }
}

TEST_CASE("Schwarzschild has Psi = m / r^3") {
  CatalogEntry e = catalog_entry("schwarzschild");
  for (const auto& b : e.sample(3)) CHECK(eval(*e.psi, b) == doctest::Approx(std::pow(b.at("r"), -3)));
}

TEST_CASE("pp-waves") {
  CatalogEntry harmonic = catalog_entry("ppwave4");
  CurvaturePack hp = curvature_pack(harmonic.metric);
  for (const auto& b : harmonic.sample(3)) CHECK(max_abs(evaluate(hp, b).ricci) < 1e-12);
  CHECK(*harmonic.truth.einstein.value);

  CatalogEntry cubic = catalog_entry("ppwave4_cubic");
  CurvaturePack cp = curvature_pack(cubic.metric);
  // from the curvature forms Omega_i+ = -h_,ik theta^k ^ theta^+: R_i+k+ = -h_,ik, so
  // R_++ = -g^ij h_,ij and C_i+j+ = -h_,ij + g_ij g^kl h_,kl / (n - 2). d/dr is in the
  // kernel, so the + components equal the u components.
  for (const auto& b : cubic.sample(3)) {
    PointCurvature pc = evaluate(cp, b);
    const double h11 = 6 * b.at("x1") * b.at("u");
    CHECK(pc.ricci(0, 0) == doctest::Approx(-h11));
    CHECK(pc.C(2, 0, 2, 0) == doctest::Approx(-h11 + h11 / 2));
    CHECK(pc.C(3, 0, 3, 0) == doctest::Approx(h11 / 2));
    CHECK(std::abs(pc.C(2, 0, 3, 0)) < 1e-12);
  }
  CHECK_FALSE(*cubic.truth.einstein.value);
}

TEST_CASE("hyperKaehler example") {
  CatalogEntry e = catalog_entry("hyperkahler");
  CurvaturePack pack = curvature_pack(e.metric);
  auto pts = e.sample(5, 6);
  pts.push_back({{"x1", 1.0}, {"y1", 0.3}, {"x2", 0.0}, {"y2", 0.0}});  // rho = 2
  for (const auto& b : pts) {
    PointCurvature pc = evaluate(pack, b);
    const double rho = 2 * b.at("x1") - 2 * (b.at("x2") * b.at("x2") + b.at("y2") * b.at("y2"));
    CHECK(max_abs(pc.ricci) < 1e-8 * pc.scale());
    CHECK(std::abs(weyl_sq(pc) - 24 / std::pow(rho, 3)) < 1e-8 * 24 / std::pow(rho, 3));
  }
  CHECK(weyl_sq(evaluate(pack, pts.back())) == doctest::Approx(3.0).epsilon(1e-10));
}

TEST_CASE("expected truth is reproduced by the genericity classifier") {
  for (const auto& name : catalog_names()) {
    CatalogEntry e = catalog_entry(name);
    if (!e.truth.weakly_generic.value) continue;
    CurvaturePack pack = curvature_pack(e.metric);
    GenericityReport rep = classify_genericity(pack, e.sample(2, 3));
    INFO(name);
    CHECK(rep.all_weakly_generic() == *e.truth.weakly_generic.value);
    if (e.truth.lambda2_generic.value) CHECK(rep.all_lambda2_generic() == *e.truth.lambda2_generic.value);
    if (e.truth.generic.value) CHECK(rep.all_generic() == *e.truth.generic.value);
  }
}
