#include <doctest.h>

#include <cmath>

#include "conformal/catalog.hpp"
#include "conformal/curvature.hpp"

using namespace conformal;

namespace {

MetricPtr lumpy4() {
  const char* rows[4][4] = {{"2 + x*y", "x/5", "y*z/7", "0"},
                            {"x/5", "3 + z^2", "x*y/3", "w/4"},
                            {"y*z/7", "x*y/3", "1 + x^2", "z*w/6"},
                            {"0", "w/4", "z*w/6", "2 + y^2*w"}};
  auto chart = std::make_shared<Chart>(std::vector<std::string>{"x", "y", "z", "w"});
  ExprArray g = ExprArray::cube(4, 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) g(i, j) = parse(rows[i][j]);
  return std::make_shared<MetricField>(chart, std::move(g));
}

double weyl_sq(const PointCurvature& pc) {
  NumTensor up = raise_all(pc.C, pc.ginv);
  double s = 0.0;
  for (std::size_t i = 0; i < up.size(); ++i) s += up[i] * pc.C[i];
  return s;
}

}  // namespace

TEST_CASE("constant curvature spaces") {
  for (int n : {3, 4, 5}) {
    CatalogEntry e = constant_curvature(n, 1);
    CurvaturePack pack = curvature_pack(e.metric);
    for (const auto& b : e.sample(3, 2)) {
      PointCurvature pc = evaluate(pack, b);
      INFO("n = " << n);
      CHECK(pc.R == doctest::Approx(n * (n - 1.0)));
      CHECK(pc.J == doctest::Approx(n / 2.0));
      CHECK(max_abs(pc.P - 0.5 * pc.g) < 1e-12);
      CHECK(max_abs(pc.C) < 1e-12);
      CHECK(max_abs(pc.A) < 1e-12);
      CHECK(max_abs(pc.B) < 1e-12);
    }
  }
}

TEST_CASE("Schwarzschild: Ricci flat with Kretschmann 48 m^2 / r^6") {
  CatalogEntry e = catalog_entry("schwarzschild");
  CurvaturePack pack = curvature_pack(e.metric);
  for (const auto& b : e.sample(4, 3)) {
    PointCurvature pc = evaluate(pack, b);
    const double r = b.at("r");
    CHECK(max_abs(pc.ricci) < 1e-12);
    CHECK(weyl_sq(pc) == doctest::Approx(48.0 / std::pow(r, 6)).epsilon(1e-12));
    CHECK(max_abs(pc.A) < 1e-12);
  }
}

TEST_CASE("identity suite on a metric without symmetry") {
  auto m = lumpy4();
  CurvaturePack pack = curvature_pack(m);
  auto pts = sample_points(*m, SampleBox::uniform(4, 0.1, 0.6), 4, 5);
  ResidualReport rep = identity_suite(pack, pts);
  for (const auto& row : rep.rows) {
    INFO(row.name << " ratio " << row.ratio);
    CHECK(row.pass);
  }
  // nonzero curvature, so the checks are not vacuous
  PointCurvature pc = evaluate(pack, pts[0]);
  CHECK(max_abs(pc.C) > 1e-3);
  CHECK(max_abs(pc.A) > 1e-3);
}

TEST_CASE("pointwise Bach agrees with the symbolic Bach tensor") {
  auto m = lumpy4();
  CurvaturePack pack = curvature_pack(m);
  TensorField B = bach_field(pack);
  const Bindings b{{"x", 0.3}, {"y", 0.2}, {"z", 0.4}, {"w", 0.5}};
  PointCurvature pc = evaluate(pack, b);
  CHECK(max_abs(B.eval(b) - pc.B) < 1e-10 * std::max(1.0, max_abs(pc.B)));
}

TEST_CASE("a wrong connection fails the identity suite") {
  auto m = lumpy4();
  TensorField gamma = christoffel(*m);
  gamma.comps(0, 1, 2) = gamma.comps(0, 1, 2) + parse("x/10");
  gamma.comps(0, 2, 1) = gamma.comps(0, 2, 1) + parse("x/10");
  CurvatureOptions opts;
  opts.gamma_override = gamma;
  CurvaturePack pack = curvature_pack(m, opts);
  auto pts = sample_points(*m, SampleBox::uniform(4, 0.1, 0.6), 2, 5);
  ResidualReport rep = identity_suite(pack, pts);
  CHECK_FALSE(rep.at("metricity").pass);
  CHECK_FALSE(rep.all_pass());
}

TEST_CASE("conformal transformation rules") {
  auto m = lumpy4();
  CurvaturePack pack = curvature_pack(m);
  auto pts = sample_points(*m, SampleBox::uniform(4, 0.1, 0.6), 2, 9);
  ResidualReport rep = cotton_transform_check(pack, parse("x*y - z/3"), pts);
  for (const auto& row : rep.rows) {
    INFO(row.name << " ratio " << row.ratio);
    CHECK(row.pass);
  }
}

TEST_CASE("dimension 3: Weyl vanishes identically") {
  auto chart = std::make_shared<Chart>(std::vector<std::string>{"x", "y", "z"});
  ExprArray g = ExprArray::cube(3, 2);
  g(0, 0) = parse("1 + x^2*y");
  g(1, 1) = parse("2 + z");
  g(2, 2) = parse("1 + y*x");
  g(0, 2) = g(2, 0) = parse("z/5");
  auto m = std::make_shared<MetricField>(chart, g);
  CurvaturePack pack = curvature_pack(m);
  auto pts = sample_points(*m, SampleBox::uniform(3, 0.2, 0.7), 3, 1);
  ResidualReport rep = identity_suite(pack, pts);
  CHECK(rep.at("weyl_vanishes_dim3").pass);
  CHECK(rep.all_pass());
  CHECK(max_abs(evaluate(pack, pts[0]).A) > 1e-3);
}

TEST_CASE("scale is at least one") {
  CatalogEntry e = flat(4);
  CurvaturePack pack = curvature_pack(e.metric);
  CHECK(evaluate(pack, e.sample(1)[0]).scale() == 1.0);
}
