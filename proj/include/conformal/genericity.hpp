#pragma once

// Pointwise Weyl-operator algebra and the genericity classes.

#include <optional>

#include "conformal/curvature.hpp"
#include "conformal/linalg.hpp"

namespace conformal {

class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Index pairs (a, b), a < b, in lexicographic order.
std::vector<std::pair<int, int>> two_form_basis(int n);

/// W_ab -> C_ab^cd W_cd on 2-forms: M_{(ab),(cd)} = 2 C_ab^cd.
struct WeylOperator {
  int n = 0;
  Mat M;
  double det = 0.0;  // ||C||
  Mat adj;
  NumTensor Ctilde;  // Ctilde_ef^ab = adj_{(ef),(ab)} / 2, skew in each pair
  int rank = 0;
};

/// L^a_b = C^acde C_bcde.
struct LOperator {
  Mat L;
  double det = 0.0;  // ||L||
  Mat adj;
  int rank = 0;
};

WeylOperator weyl_operator(const PointCurvature& pc, const Tolerances& tol = {});
LOperator l_operator(const PointCurvature& pc, const Tolerances& tol = {});

/// Covariant derivatives nabla_f of the operator matrices, one per f.
std::vector<Mat> weyl_operator_derivatives(const PointCurvature& pc);
std::vector<Mat> l_operator_derivatives(const PointCurvature& pc);

/// Rank-4 tensor skew in slots (0,1) and (2,3) from a matrix over index pairs.
NumTensor pairs_tensor(const Mat& m, int n, double factor);

/// Whether the Weyl tensor at the point is numerically zero.
bool weyl_vanishes(const PointCurvature& pc, const Tolerances& tol = {});

enum class DualPolicy { FromL, FromC, Dim4C3, Auto, User };

const char* policy_name(DualPolicy p);
DualPolicy policy_from_name(std::string_view s);

/// A tensor Dtilde with Dtilde^ac_d^e C_bc^d_e = -delta^a_b, stored fully
/// lowered together with its covariant derivative.
struct DualCandidate {
  DualPolicy provenance = DualPolicy::User;
  NumTensor D;       // D_acde
  NumTensor nablaD;  // nabla_f D_acde
};

DualCandidate dual_candidate(const PointCurvature& pc, DualPolicy policy, const Tolerances& tol = {});

/// max |D_acde C_b^cde + g_ab|, relative to max |g|.
double dual_defining_residual(const DualCandidate& d, const PointCurvature& pc);

/// K_a = D_acde A^cde and nabla_b K_a.
NumTensor k_field(const DualCandidate& d, const PointCurvature& pc);
NumTensor nabla_k_field(const DualCandidate& d, const PointCurvature& pc);

// ---------------------------------------------------------------------------

struct GenericityPoint {
  bool weakly_generic = false;
  Mat weyl_kernel;  // kernel of V -> C_abcd V^d
  bool lambda2_generic = false;
  double weyl_det = 0.0;
  int lambda2_kernel_dim = 0;
  int c3_kernel_dim = 0;
  int c3bar_kernel_dim = 0;
  int c3starbar_kernel_dim = 0;
  int h_joint_kernel_dim = 0;
  bool generic = false;
  bool chain_consistent = true;
  double l_det = 0.0;
  std::optional<double> c3;       // n = 4 only
  std::optional<double> star_c3;  // n = 4 only
};

GenericityPoint classify_point(const PointCurvature& pc, const Tolerances& tol = {});

struct GenericityReport {
  std::vector<GenericityPoint> points;
  bool all_weakly_generic() const;
  bool all_lambda2_generic() const;
  bool all_generic() const;
  bool any_weakly_generic() const;
};

GenericityReport classify_genericity(const CurvaturePack& pack, const std::vector<Bindings>& points,
                                     const Tolerances& tol = {});

/// Residual of 4 C^abcd C_abce - |C|^2 delta^d_e (n = 4).
double four_dim_identity_residual(const PointCurvature& pc);

/// max |C_abcd V^d| relative to max(1, |C|) |V|.
double weyl_kernel_residual(const PointCurvature& pc, const Vec& v);

/// C*_{b1..b(n-2) c d} = eps_{b1..b(n-2)}^{a1 a2} C_{a1 a2 c d}.
NumTensor weyl_star(const PointCurvature& pc);  // n <= 7

}  // namespace conformal
