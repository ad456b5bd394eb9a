#pragma once

// Obstructions to conformally Einstein metrics and the tensor-level verdict.

#include <map>

#include "conformal/genericity.hpp"

namespace conformal {

class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Pointwise invariants. K is a one-form K_a.

NumTensor cspace_residual(const PointCurvature& pc, const NumTensor& K);  // A_abc + K^d C_dabc
NumTensor bach_residual(const PointCurvature& pc, const NumTensor& K);    // B_ab + (n-4) K^d K^c C_dabc

NumTensor f1_tensor(const PointCurvature& pc, const Tolerances& tol = {});
NumTensor f2_tensor(const PointCurvature& pc, const Tolerances& tol = {});

/// P_ab - nabla_a K_b + K_a K_b with K_b = D_bcde A^cde, before the trace-free part.
NumTensor e_bracket(const PointCurvature& pc, const DualCandidate& d);
NumTensor e_tensor(const PointCurvature& pc, const DualCandidate& d);

/// Expanded polynomial displays. They use adjugates only, never inverses.
NumTensor g_tensor(const PointCurvature& pc, const Tolerances& tol = {});
NumTensor gbar_tensor(const PointCurvature& pc, const Tolerances& tol = {});
NumTensor dim4_invariant(const PointCurvature& pc);

/// ||L|| A_abc - C^efgh A_fgh Ltilde^d_e C_dabc, and the n = 4 form
/// |C|^2 A_abc - 4 C^defg A_efg C_dabc.
NumTensor rl2cotton(const PointCurvature& pc, const Tolerances& tol = {});
NumTensor rl2cotton_dim4(const PointCurvature& pc);

/// max |nabla_[a K_b]| from nabla_b K_a.
double closedness_residual(const NumTensor& nablaK);

/// |C|^2 = C^abcd C_abcd.
double weyl_norm_squared(const PointCurvature& pc);

// ---------------------------------------------------------------------------
// Verdicts

enum class Verdict { ConformallyEinstein, NotConformallyEinstein, Inconclusive };
const char* verdict_name(Verdict v);

/// Identifiers cited by reports; README lists them.
namespace theorem {
inline constexpr const char* kDim3 = "dim3-cotton";           // n = 3: conformally flat iff A = 0
inline constexpr const char* kGeneric = "generic-F1F2";       // generic: F1 = F2 = 0
inline constexpr const char* kEtensor = "weakly-generic-E";   // weakly generic: E = 0
inline constexpr const char* kG = "L-invariant-G";            // ||L|| != 0: G = 0
inline constexpr const char* kGbar = "lambda2-invariant-Gbar";  // Lambda^2-generic: Gbar = 0
inline constexpr const char* kDim4 = "dim4-invariant";        // n = 4, |C|^2 != 0
inline constexpr const char* kRank = "tractor-rank";          // rank of the Omega map
inline constexpr const char* kParallel = "parallel-tractor";  // (1/n) D sigma parallel iff sigma Einstein
inline constexpr const char* kCotton = "cotton-scale";        // conformal to a Cotton-flat metric
}  // namespace theorem

struct TheoremVerdict {
  std::string theorem;
  std::string precondition;
  Verdict verdict = Verdict::Inconclusive;
  std::string reason;
  int points_applicable = 0;
  double worst_ratio = 0.0;  // max residual / scale over applicable points
};

struct PotentialData {
  double closedness = 0.0;  // max over points of |nabla_[a K_b]| / scale
  bool closed = false;
  std::vector<double> upsilon;     // at each sample point, relative to the first
  double path_disagreement = 0.0;  // two integration orders
  bool available = false;
  std::string note;
};

struct ObstructionPoint {
  Bindings point;
  double scale = 1.0;
  std::map<std::string, double> residuals;  // name -> raw max-norm
  std::map<std::string, double> ratios;     // name -> normalized residual / scale
  NumTensor K;
  DualPolicy policy = DualPolicy::Auto;
  bool policy_ok = false;
};

struct ObstructionReport {
  int n = 0;
  GenericityReport genericity;
  std::vector<ObstructionPoint> points;
  std::vector<TheoremVerdict> theorems;
  Verdict verdict = Verdict::Inconclusive;
  std::string deciding_theorem;
  std::string reason;
  PotentialData potential;
  std::vector<std::string> notes;
};

struct VerdictOptions {
  DualPolicy policy = DualPolicy::Auto;
  Tolerances tol;
  bool reconstruct_potential = true;
};

ObstructionReport conformal_einstein_tensor_verdict(const CurvaturePack& pack, const std::vector<Bindings>& points,
                                                    const VerdictOptions& opts = {});

/// Per-point input to a decision: residual and scale, or a failed precondition.
struct PointDecision {
  bool applicable = false;
  double residual = 0.0;
  double scale = 1.0;
};

/// Combine per-point decisions for one theorem: "not" needs a clearly
/// nonzero residual at an applicable point, "yes" needs zero residuals at
/// every point, anything else is inconclusive.
TheoremVerdict decide(std::string theorem, std::string precondition, const std::vector<PointDecision>& pts,
                      const Tolerances& tol);

struct CottonScaleReport {
  Verdict verdict = Verdict::Inconclusive;  // ConformallyEinstein here means "conformal to a Cotton metric"
  std::string route;
  std::string reason;
  std::vector<double> cspace_ratio;
  std::vector<double> closedness_ratio;
  std::vector<double> f1_ratio;
  std::vector<double> rl2cotton_ratio;
  std::vector<double> rl2cotton_dim4_ratio;
};

CottonScaleReport cotton_scale_verdict(const CurvaturePack& pack, const std::vector<Bindings>& points,
                                       DualPolicy policy = DualPolicy::Auto, const Tolerances& tol = {});

/// Integrate K along axis-parallel segments from points[0] to each point
/// (64-step composite Simpson per segment).
PotentialData reconstruct_potential(const CurvaturePack& pack, const std::vector<Bindings>& points, DualPolicy policy,
                                    const Tolerances& tol = {});

// ---------------------------------------------------------------------------
// Conformal covariance

/// Fit w in hat = e^{w upsilon} orig over components above floor * max|orig|.
struct ExponentFit {
  double exponent = 0.0;
  double spread = 0.0;  // max - min over fitted components
  int samples = 0;
  bool sign_mismatch = false;
};

struct CovarianceSample {
  NumTensor orig;
  NumTensor hat;
  double upsilon = 0.0;
};

ExponentFit fit_exponent(const std::vector<CovarianceSample>& samples, double floor = 1e-4);

}  // namespace conformal
