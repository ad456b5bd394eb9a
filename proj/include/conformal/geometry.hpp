#pragma once

// Charts, tensor fields over a chart, metrics and the Levi-Civita machinery.

#include <cstdint>
#include <memory>
#include <random>
#include <utility>

#include "conformal/expr.hpp"
#include "conformal/tensor.hpp"

namespace conformal {

class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Chart {
  Chart(std::vector<std::string> coords, std::vector<Expr> singular = {});

  int dim() const { return static_cast<int>(coords.size()); }
  const Expr& symbol(int i) const { return symbols[static_cast<std::size_t>(i)]; }

  std::vector<std::string> coords;
  std::vector<Expr> symbols;
  std::vector<Expr> singular;  // loci to keep away from when sampling
};

using ChartPtr = std::shared_ptr<const Chart>;

/// Multi-index Expr array on a chart; every slot has dimension n.
struct TensorField {
  TensorField() = default;
  TensorField(ChartPtr c, std::vector<Variance> v, int w = 0);
  TensorField(ChartPtr c, std::vector<Variance> v, ExprArray comps, int w = 0);

  int dim() const { return chart->dim(); }
  int rank() const { return static_cast<int>(variance.size()); }
  NumTensor eval(const Bindings& b) const;

  ChartPtr chart;
  std::vector<Variance> variance;
  ExprArray comps;
  int weight = 0;
};

/// Symmetric nondegenerate (0,2) field with cached inverse and signature.
class MetricField {
 public:
  MetricField(ChartPtr chart, ExprArray g);

  const Chart& chart() const { return *chart_; }
  const ChartPtr& chart_ptr() const { return chart_; }
  int dim() const { return chart_->dim(); }
  const TensorField& g() const { return g_; }
  const TensorField& inverse() const;  // computed on first use
  const Expr& det() const;

  /// Evaluate g at a point and record the signature there. Throws on a
  /// degenerate metric or a signature different from an earlier reference.
  void certify(const Bindings& ref);
  bool certified() const { return signature_.first + signature_.second > 0; }
  std::pair<int, int> signature() const { return signature_; }  // (positive, negative)

  DiffCache& diff_cache() const { return *cache_; }

 private:
  ChartPtr chart_;
  TensorField g_;
  mutable std::shared_ptr<TensorField> inverse_;
  mutable std::shared_ptr<Expr> det_;
  std::pair<int, int> signature_{0, 0};
  std::shared_ptr<DiffCache> cache_;
};

using MetricPtr = std::shared_ptr<const MetricField>;

/// Determinant and adjugate of a square Expr matrix by cofactor expansion
/// over column subsets (no divisions).
Expr matrix_det(const ExprArray& m);
ExprArray matrix_adjugate(const ExprArray& m);
ExprArray matrix_inverse(const ExprArray& m);

TensorField metric_inverse(const MetricField& g);
TensorField raise_index(const TensorField& t, int slot, const MetricField& g);
TensorField lower_index(const TensorField& t, int slot, const MetricField& g);

/// Gamma^a_{bc}, shape (n, n, n).
TensorField christoffel(const MetricField& g);

/// Extra leftmost down slot. Gamma may be overridden (used for fault injection).
TensorField covariant_derivative(const TensorField& t, const MetricField& g);
TensorField covariant_derivative(const TensorField& t, const MetricField& g, const TensorField& gamma);

/// Volume form orientation * sqrt|det g| * sign. Needs a certified metric.
TensorField epsilon(const MetricField& g, int orientation = 1);
NumTensor epsilon_at(const NumTensor& g, int orientation = 1);

TensorField antisymmetrize(const TensorField& t, const std::vector<int>& slots);
TensorField symmetrize(const TensorField& t, const std::vector<int>& slots);

/// e^{2 upsilon} g.
MetricField conformal_rescale(const MetricField& g, const Expr& upsilon);

/// Components in a coframe theta^A_mu (rows A, columns mu).
ExprArray coframe_components(const TensorField& t, const ExprArray& theta);
NumTensor coframe_components(const NumTensor& t, const std::vector<Variance>& variance, const NumTensor& theta);

// ---------------------------------------------------------------------------
// Sampling

struct SampleBox {
  std::vector<std::pair<double, double>> ranges;  // per coordinate

  static SampleBox uniform(int n, double lo = 0.5, double hi = 1.5);
};

/// Numeric metric at a point.
NumTensor eval_metric(const MetricField& g, const Bindings& b);

/// Whether a point is acceptable: off singular loci, metric evaluates,
/// nondegenerate and, if the metric is certified, of the same signature.
bool admissible_point(const MetricField& g, const Bindings& b, std::string* why = nullptr);

/// Draw points uniformly from the box, rejecting inadmissible ones.
std::vector<Bindings> sample_points(const MetricField& g, const SampleBox& box, int count, std::uint64_t seed);

Bindings make_point(const Chart& chart, std::span<const double> values);

/// Signature (positive, negative) of a symmetric matrix; throws if singular.
std::pair<int, int> numeric_signature(const NumTensor& g);

}  // namespace conformal
