#pragma once

// Example metrics with known answers.

#include <optional>

#include "conformal/geometry.hpp"

namespace conformal {

/// A known property together with where the answer comes from.
struct Truth {
  std::optional<bool> value;  // nullopt: not known / not asserted
  std::string source;         // "closed form", "derived", "trivial"
};

struct ExpectedTruth {
  Truth einstein;
  Truth conformally_einstein;
  Truth conformally_flat;
  Truth weakly_generic;
  Truth lambda2_generic;
  Truth generic;
  Truth cspace;  // conformal to a Cotton-flat metric
};

struct CatalogEntry {
  std::string name;
  std::string description;
  int n = 0;
  std::vector<std::pair<std::string, std::string>> params;  // for display and export
  MetricPtr metric;
  SampleBox box;
  ExpectedTruth truth;

  std::optional<Expr> psi;                // Robinson-Trautman Weyl scalar
  std::optional<ExprArray> coframe;       // theta^A_mu
  std::optional<Expr> cspace_potential;   // K_a = d_a of this
  std::optional<Expr> einstein_scale;     // sigma with sigma^{-2} g Einstein
  std::optional<Expr> profile;            // h

  std::vector<Bindings> sample(int count, std::uint64_t seed = 0) const;
};

/// 2 du (dr + h du) + r^2 g_ij dx^i dx^j / (1 + kappa |x|^2 / 4)^2 in
/// coordinates (u, r, x1..x(n-2)); g_ij = diag(signs), default all +1.
CatalogEntry robinson_trautman(int n, int kappa, const Expr& h, std::vector<int> signs = {},
                               std::string name = "");

/// Robinson-Trautman with h = -kappa/2 + m / r^(n-3) + Lambda r^2 / (2(n-1)).
CatalogEntry schwarzschild_de_sitter(int n, int kappa, Rational m, Rational lambda, std::string name = "");

/// 2 du (dr + h du) + g_ij dx^i dx^j, h = h(u, x), coordinates (u, r, x1..).
CatalogEntry pp_wave(int n, const Expr& h, std::vector<int> signs = {}, std::string name = "");

/// Ricci-flat hyperKaehler metric on {rho > 0}, rho = 2 x1 - 2 (x2^2 + y2^2).
CatalogEntry hyperkahler_example();

/// delta_ij dx^i dx^j / (1 + kappa |x|^2 / 4)^2 (Riemannian).
CatalogEntry constant_curvature(int n, int kappa);

/// diag(+1 x p, -1 x q).
CatalogEntry flat(int p, int q = 0);

/// Names of the built-in entries, and lookup by name.
std::vector<std::string> catalog_names();
CatalogEntry catalog_entry(std::string_view name);

/// log[r^((1-n)/(n-3)) Psi^(1/(3-n))] as an expression, Psi given.
Expr rt_cspace_potential(int n, const Expr& psi);

/// [(kappa + 2h)/r^2 - 2h'/r + h''] / ((n-1)(n-2)).
Expr rt_psi(int n, int kappa, const Expr& h);

/// (n-2)[(n-3)(kappa + 2h)/r^2 + 4h'/r] + 2h''.
Expr rt_scalar_curvature(int n, int kappa, const Expr& h);

}  // namespace conformal
