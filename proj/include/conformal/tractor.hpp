#pragma once

// Standard tractor calculus in a fixed scale.
//
// Tractor slots have dimension n+2. A standard tractor V^A = Y^A alpha +
// Z^Aa mu_a + X^A tau is stored by the coordinates (alpha, mu^a, tau):
// slot 0 is the Y direction, slots 1..n the Z directions (tensor index
// raised), slot n+1 the X direction. In these coordinates
//   h_AB = [[0, 0, 1], [0, g_ab, 0], [1, 0, 0]],
// lower tractor indices use the dual coordinates, so X_A = e_0, Y_A = e_{n+1}
// and Z_A^a = e_{1+a}. Densities are trivialized by the scale metric.

#include "conformal/genericity.hpp"
#include "conformal/obstructions.hpp"

namespace conformal {

class TractorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline int tractor_dim(int n) { return n + 2; }

NumTensor tractor_metric(const NumTensor& g);             // h_AB
NumTensor tractor_metric_inverse(const NumTensor& ginv);  // h^AB

/// X_A, Y_A (rank 1) and Z_Ab (rank 2, tractor slot first), all lower.
/// h^AB X_A Y_B = 1, h^AB Z_Aa Z_Bb = g_ab, all other pairings vanish.
struct Projectors {
  NumTensor X, Y, Z;
};
Projectors projectors(const NumTensor& g);

/// nabla_a V = d_a V + conn(a) V on upper coordinates, Levi-Civita part of
/// the mu slot included. Shape (n, n+2, n+2).
NumTensor connection_matrices(const NumTensor& g, const NumTensor& ginv, const NumTensor& gamma, const NumTensor& P);
NumTensor connection_matrices(const PointCurvature& pc);

// ---------------------------------------------------------------------------
// Symbolic standard tractors

struct TractorField {
  MetricPtr scale;
  Expr alpha;     // weight 1
  TensorField mu;  // mu_a, weight 1
  Expr tau;       // weight -1
};

TractorField make_tractor(MetricPtr scale, Expr alpha, std::vector<Expr> mu, Expr tau);

/// (alpha, mu^a, tau) as expressions.
std::vector<Expr> upper_components(const TractorField& t);
NumTensor tractor_values(const TractorField& t, const Bindings& b);

double tractor_inner(const NumTensor& h, const NumTensor& v, const NumTensor& w);

/// nabla_a V^C as expressions, shape (n, n+2), upper coordinates. The pack
/// must belong to t.scale.
ExprArray tractor_connection(const TractorField& t, const CurvaturePack& pack);

/// The same tractor in the splitting and trivialization of e^{2 upsilon} g.
TractorField change_scale(const TractorField& t, const Expr& upsilon);

/// Upper-coordinate map of change_scale at a point, from the value and the
/// gradient of upsilon.
Mat scale_change_matrix(const NumTensor& g, const NumTensor& ginv, double upsilon, const NumTensor& dupsilon);

/// D_A f for f of weight w, returned with its index raised. The result has
/// weight w - 1; change_scale treats its input as weight 0.
TractorField tractor_d(const CurvaturePack& pack, const Expr& f, int w);

/// (1/n) D_A sigma.
TractorField einstein_candidate(const CurvaturePack& pack, const Expr& sigma);

// ---------------------------------------------------------------------------
// Coupled connection on numeric mixed tensors

enum class Slot : std::uint8_t { TensorDown, TractorUp, TractorDown };

/// out(a, I) = d(a, I) + connection terms for each slot of t.
NumTensor coupled_nabla(const NumTensor& t, const NumTensor& d, const std::vector<Slot>& slots, const NumTensor& gamma,
                        const NumTensor& conn);

/// Value and first partials of a batch of expressions, shaped like `shape`.
struct Jet {
  NumTensor value;
  NumTensor d;  // derivative slot first
};
Jet jet(const EvalProgram& prog, const std::vector<int>& shape, const Chart& chart, const Bindings& b);

// ---------------------------------------------------------------------------
// Tractor curvature

/// Omega_abCE with both tractor indices lower.
NumTensor omega(const PointCurvature& pc);
/// Omega_ab^C_E.
NumTensor omega_endo(const PointCurvature& pc);

struct TractorPoint {
  PointCurvature pc;
  NumTensor h, hinv;
  NumTensor conn;
  NumTensor omega;              // Omega_bcDE
  NumTensor nabla_omega;        // nabla_a Omega_bcDE, coupled connection
  NumTensor div_omega;          // nabla^a Omega_acDE from nabla_omega
  NumTensor div_omega_closed;   // (n-4) ZZ A - X Z B + X Z B
  NumTensor w;                  // W_ABCE
};

TractorPoint tractor_point(const CurvaturePack& pack, const Bindings& b);
TractorPoint tractor_point(PointCurvature pc);

/// nabla^a Omega_acDE by the closed form in A and B.
NumTensor div_omega_closed(const PointCurvature& pc);
/// W_ABCE = (n-4) Z_A^a Z_B^b Omega_abCE - 2 X_[A Z_B]^b nabla^p Omega_pbCE.
NumTensor w_tensor(const PointCurvature& pc, const NumTensor& div_omega);

/// [nabla_a, nabla_b] V^C - Omega_ab^C_E V^E by differentiating the
/// symbolic nabla V once more. Relative to max(1, |V|, |Omega|).
double commutator_residual(const TractorField& v, const CurvaturePack& pack, const Bindings& b);

// ---------------------------------------------------------------------------
// Einstein scales and the annihilation conditions

struct ParallelPoint {
  double nabla_i = 0.0;   // max |nabla_a I^B|
  double scale = 1.0;
  double sigma = 0.0;
  double h_ii = 0.0;           // h(I, I)
  double h_ii_expected = 0.0;  // -(2/n) J of sigma^{-2} g
  double trace_free_p = 0.0;   // max |trace-free P| of sigma^{-2} g
};

struct ParallelTractorReport {
  std::vector<ParallelPoint> points;
  double worst_ratio = 0.0;
  Verdict verdict = Verdict::Inconclusive;  // ConformallyEinstein: sigma is an Einstein scale
  std::string reason;
};

/// Throws TractorError if sigma vanishes at a sample point.
ParallelTractorReport parallel_tractor_check(const CurvaturePack& pack, const Expr& sigma,
                                             const std::vector<Bindings>& points, const Tolerances& tol = {});

struct AnnihilationPoint {
  double omega_i = 0.0;        // |Omega_bcDE I^E|
  double nabla_omega_i = 0.0;  // |nabla_a Omega_bcDE I^E|
  double div_omega_i = 0.0;    // |nabla^a Omega_abCD I^D|
  double w_i = 0.0;            // |W_BCDE I^E|
  double x_i = 0.0;            // X_A I^A
  double cspace_consistency = 0.0;  // Z part of Omega.I against sigma (A + K.C), K = -mu/sigma
  double scale = 1.0;
};

struct AnnihilationReport {
  std::vector<AnnihilationPoint> points;
};

AnnihilationReport annihilation_check(const CurvaturePack& pack, const TractorField& I,
                                      const std::vector<Bindings>& points);

struct RankPoint {
  bool weakly_generic = false;
  int rank = 0;
  int rows = 0;
  Mat kernel;
  std::optional<double> alignment;  // |cos| between the kernel and (1/n) D sigma
};

struct RankReport {
  int n = 0;
  std::vector<RankPoint> points;
  Verdict verdict = Verdict::Inconclusive;
  std::string reason;
};

/// Rank of (Omega_bcD., nabla_a Omega_bcD.) with n+2 columns at each point.
RankReport rank_obstruction(const CurvaturePack& pack, const std::vector<Bindings>& points,
                            const Tolerances& tol = {}, const Expr* sigma = nullptr);

/// The matrix used by rank_obstruction.
Mat omega_map(const TractorPoint& tp);

}  // namespace conformal
