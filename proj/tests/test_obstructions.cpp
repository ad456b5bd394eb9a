#include <doctest.h>

#include <cmath>

#include "conformal/catalog.hpp"
#include "conformal/obstructions.hpp"

using namespace conformal;

namespace {

const TheoremVerdict& find(const ObstructionReport& r, const std::string& id) {
  for (const auto& t : r.theorems)
    if (t.theorem == id) return t;
  throw std::out_of_range(id);
}

double max_ratio(const ObstructionReport& r, const std::string& name) {
  double m = 0.0;
  for (const auto& p : r.points) m = std::max(m, p.ratios.at(name));
  return m;
}

// the *_vs_* cross-checks are stored already normalized
double max_residual(const ObstructionReport& r, const std::string& name) {
  double m = 0.0;
  for (const auto& p : r.points) m = std::max(m, p.residuals.at(name));
  return m;
}

VerdictOptions quick() {
  VerdictOptions o;
  o.reconstruct_potential = false;
  return o;
}

}  // namespace

TEST_CASE("decide combines per-point decisions") {
  Tolerances tol;
  auto v = [&](std::vector<PointDecision> d) { return decide("t", "p", d, tol).verdict; };
  CHECK(v({{true, 0.0, 1.0}, {true, 1e-12, 1.0}}) == Verdict::ConformallyEinstein);
  CHECK(v({{true, 0.0, 1.0}, {true, 0.5, 1.0}}) == Verdict::NotConformallyEinstein);
  CHECK(v({{true, 0.0, 1.0}, {}}) == Verdict::Inconclusive);           // precondition fails somewhere
  CHECK(v({{}, {}}) == Verdict::Inconclusive);                        // nowhere applicable
  CHECK(v({{true, 1e-5, 1.0}, {true, 0.0, 1.0}}) == Verdict::Inconclusive);  // borderline
  CHECK(v({{}, {true, 0.5, 1.0}}) == Verdict::NotConformallyEinstein);  // one clear counterexample suffices
}

TEST_CASE("exponent fit") {
  std::vector<CovarianceSample> s;
  for (double u : {0.3, -0.7}) {
    NumTensor o({3}), h({3});
    o(0) = 2.0;
    o(1) = -5.0;
    o(2) = 1e-9;  // below the floor, ignored
    for (int i = 0; i < 3; ++i) h(i) = std::exp(-6.0 * u) * o(i);
    h(2) = 7.0;
    s.push_back({o, h, u});
  }
  ExponentFit f = fit_exponent(s);
  CHECK(f.exponent == doctest::Approx(-6.0));
  CHECK(f.spread < 1e-12);
  CHECK(f.samples == 4);
  CHECK_FALSE(f.sign_mismatch);
  s[0].hat(1) = 3.0;
  CHECK(fit_exponent(s).sign_mismatch);
}

TEST_CASE("Schwarzschild-de Sitter is conformally Einstein") {
  for (std::string name : {"schwarzschild", "sds4"}) {
    CatalogEntry e = catalog_entry(name);
    CurvaturePack pack = curvature_pack(e.metric);
    ObstructionReport r = conformal_einstein_tensor_verdict(pack, e.sample(4, 1), quick());
    INFO(name << ": " << r.reason);
    CHECK(r.verdict == Verdict::ConformallyEinstein);
    CHECK(find(r, theorem::kEtensor).verdict == Verdict::ConformallyEinstein);
    CHECK(find(r, theorem::kDim4).verdict == Verdict::ConformallyEinstein);
    CHECK(find(r, theorem::kGeneric).verdict == Verdict::ConformallyEinstein);
    CHECK(max_residual(r, "G_vs_L2E") < 1e-7);
    CHECK(max_residual(r, "Gbar_vs_C2E") < 1e-7);
  }
}

TEST_CASE("Robinson-Trautman with h = r^4 is not conformally Einstein") {
  CatalogEntry e = catalog_entry("rt4_r4");
  CurvaturePack pack = curvature_pack(e.metric);
  auto pts = e.sample(3, 1);
  ObstructionReport r = conformal_einstein_tensor_verdict(pack, pts, quick());
  CHECK(r.verdict == Verdict::NotConformallyEinstein);
  CHECK(find(r, theorem::kEtensor).verdict == Verdict::NotConformallyEinstein);
  CHECK(max_ratio(r, "E") > 1e-3);
  // still a conformal C-space: K from the explicit potential solves A + K.C = 0
  for (const auto& b : pts) {
    PointCurvature pc = evaluate(pack, b);
    NumTensor K = upsilon_gradient(*e.cspace_potential, e.metric->chart(), b);
    CHECK(max_abs(cspace_residual(pc, K)) < 1e-8 * pc.scale());
    CHECK(max_abs(bach_residual(pc, K)) > 1e-3 * pc.scale());
    DualCandidate d = dual_candidate(pc, DualPolicy::Auto);
    CHECK(max_abs(k_field(d, pc) - K) < 1e-7 * std::max(1.0, max_abs(K)));
  }
  CottonScaleReport cs = cotton_scale_verdict(pack, pts);
  CHECK(cs.verdict == Verdict::ConformallyEinstein);
}

TEST_CASE("conformally flat input is inconclusive, not a false verdict") {
  CatalogEntry e = catalog_entry("sphere4");
  CurvaturePack pack = curvature_pack(e.metric);
  ObstructionReport r = conformal_einstein_tensor_verdict(pack, e.sample(3, 1), quick());
  CHECK(r.verdict == Verdict::Inconclusive);
  CHECK(r.reason == "not weakly generic");
}

TEST_CASE("dimension 3 uses the Cotton tensor") {
  CatalogEntry e = catalog_entry("sphere3");
  CurvaturePack pack = curvature_pack(e.metric);
  ObstructionReport r = conformal_einstein_tensor_verdict(pack, e.sample(3, 1), quick());
  CHECK(r.verdict == Verdict::ConformallyEinstein);
  CHECK(r.deciding_theorem == theorem::kDim3);
}

TEST_CASE("potential reconstruction recovers the conformal factor") {
  CatalogEntry e = catalog_entry("schwarzschild");
  const Expr ups = parse("x1/5 + log(r)/2");
  auto hat = std::make_shared<MetricField>(conformal_rescale(*e.metric, ups));
  CurvaturePack pack = curvature_pack(hat);
  auto pts = sample_points(*hat, e.box, 3, 4);
  PotentialData pd = reconstruct_potential(pack, pts, DualPolicy::Auto);
  REQUIRE(pd.available);
  CHECK(pd.closed);
  CHECK(pd.path_disagreement < 1e-8);
  for (std::size_t k = 1; k < pts.size(); ++k)
    CHECK(pd.upsilon[k] == doctest::Approx(-(eval(ups, pts[k]) - eval(ups, pts[0]))).epsilon(1e-8));
}

TEST_CASE("Weyl determinant has weight -n(n-1)") {
  CatalogEntry e = catalog_entry("schwarzschild");
  const Expr ups = parse("log(r)");
  CurvaturePack pack = curvature_pack(e.metric);
  CurvaturePack hat = curvature_pack(std::make_shared<MetricField>(conformal_rescale(*e.metric, ups)));
  std::vector<CovarianceSample> s;
  for (const auto& b : e.sample(2, 8)) {
    NumTensor o({1}), h({1});
    o(0) = weyl_operator(evaluate(pack, b)).det;
    h(0) = weyl_operator(evaluate(hat, b)).det;
    s.push_back({o, h, eval(ups, b)});
  }
  ExponentFit f = fit_exponent(s);
  CHECK(f.exponent == doctest::Approx(-12.0).epsilon(1e-9));
}
