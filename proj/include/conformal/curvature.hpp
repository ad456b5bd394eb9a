#pragma once

// Riemann, Ricci, Schouten, Weyl, Cotton and Bach tensors of a metric.
//
// Conventions:
//   (nabla_a nabla_b - nabla_b nabla_a) V^c = R_ab^c_d V^d
//   Ric_bd = R_cb^c_d,  P = (Ric - J g)/(n-2),  J = R / (2(n-1))
//   C_abcd = R_abcd - (g_ca P_bd - g_cb P_ad + g_db P_ac - g_da P_bc)
//   A_abc = nabla_b P_ca - nabla_c P_ba
//   B_ab = nabla^c A_acb + P^dc C_dacb
//
// Up to the Cotton tensor everything is symbolic. Derivatives of Weyl, Cotton
// and Schouten at a point come from forward-mode evaluation of the compiled
// components, so the Bach tensor needs no further symbolic differentiation.

#include <optional>

#include "conformal/geometry.hpp"

namespace conformal {

struct Tolerances {
  double rel = 1e-8;
  double abs = 1e-12;
  double rank = 1e-8;
  double nonzero = 1e-3;  // "clearly nonzero" threshold relative to scale

  bool is_zero(double residual, double scale) const { return residual < rel * scale + abs; }
  bool is_nonzero(double residual, double scale) const { return residual > nonzero * scale; }
};

struct CurvatureOptions {
  std::optional<TensorField> gamma_override;  // replaces the Levi-Civita symbols
};

struct CurvaturePack {
  MetricPtr metric;
  TensorField gamma;     // Gamma^a_bc
  TensorField riemann;   // R_ab^c_d
  TensorField ricci;     // R_ab
  Expr scalar;           // R
  TensorField schouten;  // P_ab
  Expr J;
  TensorField weyl;      // C_abcd
  TensorField cotton;    // A_abc
  TensorField weyl_raw;  // subtraction formula, kept separately when n = 3 (where C is set to 0)

  std::shared_ptr<const EvalProgram> program;
  int dim() const { return metric->dim(); }
};

CurvaturePack curvature_pack(MetricPtr g, const CurvatureOptions& opts = {});

/// Symbolic Bach tensor (one more symbolic derivative of the Cotton tensor).
/// Only for small checks; the evaluator computes B pointwise.
TensorField bach_field(const CurvaturePack& pack);

/// Numeric curvature data at one point. Derivative slots are leftmost.
struct PointCurvature {
  Bindings point;
  int n = 0;
  NumTensor g, ginv, gamma, riemann, ricci, P, C, A;
  double R = 0.0, J = 0.0;
  NumTensor dg;      // d_c g_ab
  NumTensor dJ;      // d_a J
  NumTensor dP;      // d_c P_ab (partials)
  NumTensor dC;      // d_e C_abcd (partials)
  NumTensor dA;      // d_d A_abc (partials)
  NumTensor nablaP;  // nabla_c P_ab
  NumTensor nablaC;  // nabla_e C_abcd
  NumTensor nablaA;  // nabla_d A_abc
  NumTensor B;       // B_ab
  NumTensor nablaG;  // nabla_c g_ab (metricity check)

  double scale() const;  // max(1, |C|, |A|, |P|)
};

PointCurvature evaluate(const CurvaturePack& pack, const Bindings& point);

// ---------------------------------------------------------------------------
// Identity harness

struct Residual {
  std::string name;
  double residual = 0.0;  // max over points of the raw max-norm
  double ratio = 0.0;     // max over points of residual / scale
  bool pass = true;
};

struct ResidualReport {
  std::vector<Residual> rows;
  bool all_pass() const;
  const Residual& at(std::string_view name) const;
};

ResidualReport identity_suite(const CurvaturePack& pack, const std::vector<Bindings>& points,
                              const Tolerances& tol = {});

/// Compare curvature of e^{2 upsilon} g with the transformation rules for
/// Weyl, Schouten and Cotton.
ResidualReport cotton_transform_check(const CurvaturePack& pack, const Expr& upsilon,
                                      const std::vector<Bindings>& points, const Tolerances& tol = {});

// Small numeric helpers shared by later modules.
NumTensor raise_all(const NumTensor& t, const NumTensor& ginv);  // every slot
/// Contract each listed slot with m (ginv raises, g lowers).
NumTensor raise_slots(const NumTensor& t, const NumTensor& m, const std::vector<int>& slots);
NumTensor trace_free(const NumTensor& s, const NumTensor& g, const NumTensor& ginv);
NumTensor upsilon_gradient(const Expr& upsilon, const Chart& chart, const Bindings& b);

}  // namespace conformal
