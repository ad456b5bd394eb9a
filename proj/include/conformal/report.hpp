#pragma once

// Machine-readable reports for the command line driver.
//
// Every report is a JSON object with sorted keys and no timestamps, so a
// fixed seed gives byte-identical output. The schema is described in
// README.md; bump kSchemaVersion on incompatible changes.

#include <json.hpp>

#include "conformal/metric_spec.hpp"
#include "conformal/tractor.hpp"

namespace conformal {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr int kSchemaVersion = 1;

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t v);

struct RunOptions {
  Tolerances tol;
  DualPolicy policy = DualPolicy::Auto;
  int points = 10;
  std::uint64_t seed = 0;
};

/// tool, schema, command, input digest, tolerances, policy, seed and the points.
nlohmann::json report_header(const std::string& command, std::string_view input, const RunOptions& opts,
                             const std::vector<Bindings>& points);

nlohmann::json genericity_json(const GenericityPoint& p);
nlohmann::json theorem_json(const TheoremVerdict& t);

// ---------------------------------------------------------------------------
// classify: tensor obstructions plus the tractor rank test

struct ClassifyResult {
  ObstructionReport tensor;
  RankReport rank;
  Verdict verdict = Verdict::Inconclusive;
  std::vector<std::string> deciding;  // theorem ids that support the verdict
  std::string reason;
};

ClassifyResult classify(const CurvaturePack& pack, const std::vector<Bindings>& points, const RunOptions& opts,
                        const Expr* sigma = nullptr);

/// Verdicts, deciding theorems, per-point genericity and the residual table.
nlohmann::json classify_json(const ClassifyResult& r);

/// 0 conformally Einstein, 1 not, 2 inconclusive.
int exit_code(Verdict v);

// ---------------------------------------------------------------------------
// invariants

/// Names accepted by invariants_json.
const std::vector<std::string>& invariant_names();

/// Max-norm of each requested invariant per point. With a potential, K is
/// also taken from its gradient and compared with the dual-tensor K.
nlohmann::json invariants_json(const CurvaturePack& pack, const std::vector<Bindings>& points,
                               const std::vector<std::string>& which, const RunOptions& opts,
                               const std::optional<Expr>& potential);

nlohmann::json identities_json(const ResidualReport& r);
nlohmann::json parallel_json(const ParallelTractorReport& r);

/// Pretty JSON with a trailing newline.
std::string dump(const nlohmann::json& j);

}  // namespace conformal
