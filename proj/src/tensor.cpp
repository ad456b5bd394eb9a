#include "conformal/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace conformal {

EinsumPlan plan_einsum(std::string_view spec, const std::vector<std::vector<int>>& shapes,
                       const std::vector<std::vector<std::size_t>>& operand_strides) {
  EinsumPlan plan;
  auto arrow = spec.find("->");
  if (arrow == std::string_view::npos) throw std::invalid_argument("einsum: missing '->' in " + std::string(spec));
  std::string_view lhs = spec.substr(0, arrow);
  plan.output = std::string(spec.substr(arrow + 2));
  std::size_t start = 0;
  for (;;) {
    auto comma = lhs.find(',', start);
    plan.inputs.emplace_back(lhs.substr(start, comma == std::string_view::npos ? lhs.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (plan.inputs.size() != shapes.size()) throw std::invalid_argument("einsum: operand count mismatch");

  plan.letters = plan.output;
  for (const auto& in : plan.inputs)
    for (char c : in)
      if (plan.letters.find(c) == std::string::npos) plan.letters.push_back(c);
  plan.sizes.assign(plan.letters.size(), -1);
  plan.strides.assign(shapes.size(), std::vector<std::size_t>(plan.letters.size(), 0));
  for (std::size_t k = 0; k < shapes.size(); ++k) {
    const auto& in = plan.inputs[k];
    if (in.size() != shapes[k].size()) throw std::invalid_argument("einsum: rank mismatch for operand " + in);
    for (std::size_t s = 0; s < in.size(); ++s) {
      std::size_t l = plan.letters.find(in[s]);
      if (plan.sizes[l] >= 0 && plan.sizes[l] != shapes[k][s])
        throw std::invalid_argument(std::string("einsum: size mismatch for index ") + in[s]);
      plan.sizes[l] = shapes[k][s];
      plan.strides[k][l] += operand_strides[k][s];
    }
  }
  for (std::size_t l = 0; l < plan.output.size(); ++l)
    if (plan.sizes[l] < 0) throw std::invalid_argument("einsum: output index not in inputs");
  plan.out_strides.assign(plan.output.size(), 1);
  std::size_t total = 1;
  for (std::size_t l = plan.output.size(); l-- > 0;) {
    plan.out_strides[l] = total;
    total *= static_cast<std::size_t>(plan.sizes[l]);
  }
  return plan;
}

int permutation_sign(std::span<const int> p) {
  int sign = 1;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j) {
      if (p[i] == p[j]) return 0;
      if (p[i] > p[j]) sign = -sign;
    }
  return sign;
}

std::vector<std::pair<std::vector<int>, int>> permutations_with_sign(int k) {
  std::vector<int> p(static_cast<std::size_t>(k));
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::pair<std::vector<int>, int>> out;
  do {
    out.emplace_back(p, permutation_sign(p));
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

namespace {

template <class T, class Combine>
Array<T> project(const Array<T>& t, const std::vector<int>& slots, bool skew, Combine combine) {
  auto perms = permutations_with_sign(static_cast<int>(slots.size()));
  Array<T> out(t.shape());
  std::vector<int> src;
  for (std::size_t f = 0; f < t.size(); ++f) {
    auto idx = t.unflatten(f);
    std::vector<std::pair<T, int>> terms;
    for (const auto& [p, s] : perms) {
      src = idx;
      for (std::size_t i = 0; i < slots.size(); ++i)
        src[static_cast<std::size_t>(slots[i])] = idx[static_cast<std::size_t>(slots[static_cast<std::size_t>(p[i])])];
      terms.emplace_back(t.at(src), skew ? s : 1);
    }
    out[f] = combine(terms, perms.size());
  }
  return out;
}

double combine_num(const std::vector<std::pair<double, int>>& terms, std::size_t count) {
  double acc = 0.0;
  for (const auto& [v, s] : terms) acc += s * v;
  return acc / static_cast<double>(count);
}

Expr combine_expr(const std::vector<std::pair<Expr, int>>& terms, std::size_t count) {
  std::vector<Expr> ts;
  for (const auto& [v, s] : terms)
    if (!v.is_zero()) ts.push_back(s == 1 ? v : -v);
  return add(std::move(ts)) * Expr(Rational(1, static_cast<std::int64_t>(count)));
}

}  // namespace

NumTensor antisymmetrize(const NumTensor& t, const std::vector<int>& slots) {
  return project(t, slots, true, combine_num);
}
NumTensor symmetrize(const NumTensor& t, const std::vector<int>& slots) {
  return project(t, slots, false, combine_num);
}
ExprArray antisymmetrize(const ExprArray& t, const std::vector<int>& slots) {
  return project(t, slots, true, combine_expr);
}
ExprArray symmetrize(const ExprArray& t, const std::vector<int>& slots) {
  return project(t, slots, false, combine_expr);
}

double max_abs(const NumTensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

NumTensor operator-(const NumTensor& a, const NumTensor& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("tensor shape mismatch");
  NumTensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

NumTensor operator+(const NumTensor& a, const NumTensor& b) {
  if (a.shape() != b.shape()) throw std::invalid_argument("tensor shape mismatch");
  NumTensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

NumTensor operator*(double s, const NumTensor& a) {
  NumTensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = s * a[i];
  return out;
}

}  // namespace conformal
