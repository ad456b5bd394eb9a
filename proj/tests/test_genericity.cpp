#include <doctest.h>

#include "conformal/catalog.hpp"
#include "conformal/genericity.hpp"

using namespace conformal;

namespace {

struct Fixture {
  CatalogEntry entry;
  CurvaturePack pack;
  std::vector<Bindings> pts;
  explicit Fixture(const std::string& name, int count = 3)
      : entry(catalog_entry(name)), pack(curvature_pack(entry.metric)), pts(entry.sample(count, 11)) {}
};

// nabla_f (D_acde C_b^cde) = 0 since D.C = -g, from D, nablaD, C and nablaC
double dual_derivative_residual(const DualCandidate& d, const PointCurvature& pc) {
  const int n = pc.n;
  NumTensor C3 = raise_slots(pc.C, pc.ginv, {1, 2, 3});
  NumTensor dC3 = raise_slots(pc.nablaC, pc.ginv, {2, 3, 4});
  double w = 0.0;
  for (int f = 0; f < n; ++f)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double acc = 0.0;
        for (int c = 0; c < n; ++c)
          for (int dd = 0; dd < n; ++dd)
            for (int e = 0; e < n; ++e)
              acc += d.nablaD(f, a, c, dd, e) * C3(b, c, dd, e) + d.D(a, c, dd, e) * dC3(f, b, c, dd, e);
        w = std::max(w, std::abs(acc));
      }
  return w;
}

}  // namespace

TEST_CASE("conformally flat metrics are not weakly generic") {
  for (const char* name : {"flat4", "sphere4"}) {
    Fixture f(name, 2);
    GenericityReport rep = classify_genericity(f.pack, f.pts);
    CHECK_FALSE(rep.any_weakly_generic());
    CHECK(weyl_vanishes(evaluate(f.pack, f.pts[0])));
  }
}

TEST_CASE("pp-wave: d/dr lies in the Weyl kernel") {
  Fixture f("ppwave4");
  for (const auto& b : f.pts) {
    PointCurvature pc = evaluate(f.pack, b);
    GenericityPoint gp = classify_point(pc);
    CHECK_FALSE(gp.weakly_generic);
    Vec dr = Vec::Zero(4);
    dr(1) = 1.0;
    CHECK(weyl_kernel_residual(pc, dr) < 1e-10);
    CHECK(max_abs(pc.C) > 1e-3);
  }
}

TEST_CASE("Schwarzschild is generic and the duals agree") {
  Fixture f("schwarzschild");
  for (const auto& b : f.pts) {
    PointCurvature pc = evaluate(f.pack, b);
    GenericityPoint gp = classify_point(pc);
    CHECK(gp.weakly_generic);
    CHECK(gp.lambda2_generic);
    CHECK(gp.generic);
    CHECK(gp.chain_consistent);
    CHECK(four_dim_identity_residual(pc) < 1e-9);

    std::optional<NumTensor> K0;
    for (DualPolicy p : {DualPolicy::FromL, DualPolicy::FromC, DualPolicy::Dim4C3}) {
      DualCandidate d = dual_candidate(pc, p);
      INFO(policy_name(p));
      CHECK(dual_defining_residual(d, pc) < 1e-10);
      CHECK(dual_derivative_residual(d, pc) < 1e-8 * pc.scale());
      NumTensor K = k_field(d, pc);
      if (K0)
        CHECK(max_abs(K - *K0) < 1e-9 * std::max(1.0, max_abs(*K0)));
      else
        K0 = K;
    }
  }
}

TEST_CASE("hyperKaehler: half flat Weyl, Lambda^2 kernel of dimension 3") {
  Fixture f("hyperkahler");
  for (const auto& b : f.pts) {
    GenericityPoint gp = classify_point(evaluate(f.pack, b));
    CHECK(gp.weakly_generic);
    CHECK_FALSE(gp.lambda2_generic);
    CHECK(gp.lambda2_kernel_dim == 3);
  }
}

TEST_CASE("four dimensional identity on a metric without symmetry") {
  auto chart = std::make_shared<Chart>(std::vector<std::string>{"x", "y", "z", "w"});
  ExprArray g = ExprArray::cube(4, 2);
  g(0, 0) = parse("2 + x*y");
  g(1, 1) = parse("3 + z^2");
  g(2, 2) = parse("-1 - x^2");
  g(3, 3) = parse("2 + y^2*w");
  g(0, 1) = g(1, 0) = parse("x/5");
  g(1, 3) = g(3, 1) = parse("w/4");
  g(2, 3) = g(3, 2) = parse("z*w/6");
  auto m = std::make_shared<MetricField>(chart, g);
  CurvaturePack pack = curvature_pack(m);
  for (const auto& b : sample_points(*m, SampleBox::uniform(4, 0.1, 0.6), 3, 4)) {
    PointCurvature pc = evaluate(pack, b);
    CHECK(four_dim_identity_residual(pc) < 1e-9);
  }
}

TEST_CASE("policies") {
  for (DualPolicy p : {DualPolicy::FromL, DualPolicy::FromC, DualPolicy::Dim4C3, DualPolicy::Auto})
    CHECK(policy_from_name(policy_name(p)) == p);
  CHECK_THROWS_AS(policy_from_name("bogus"), std::invalid_argument);

  Fixture f("rt5_r4", 1);
  PointCurvature pc = evaluate(f.pack, f.pts[0]);
  CHECK_THROWS_AS(dual_candidate(pc, DualPolicy::Dim4C3), PreconditionError);
  CHECK_NOTHROW(dual_candidate(pc, DualPolicy::Auto));
}

TEST_CASE("Robinson-Trautman n = 5 is generic") {
  Fixture f("rt5_r4", 2);
  GenericityReport rep = classify_genericity(f.pack, f.pts);
  CHECK(rep.all_weakly_generic());
  CHECK(rep.all_lambda2_generic());
  CHECK(rep.all_generic());
}
