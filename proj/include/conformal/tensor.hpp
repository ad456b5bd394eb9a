#pragma once

// Dense multi-index arrays and a small einsum for contractions.

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "conformal/expr.hpp"

namespace conformal {

enum class Variance : std::uint8_t { Up, Down };

template <class T>
class Array {
 public:
  Array() = default;
  explicit Array(std::vector<int> shape, const T& fill = T()) : shape_(std::move(shape)) {
    strides_.assign(shape_.size(), 1);
    std::size_t total = 1;
    for (std::size_t i = shape_.size(); i-- > 0;) {
      strides_[i] = total;
      total *= static_cast<std::size_t>(shape_[i]);
    }
    data_.assign(total, fill);
  }
  static Array cube(int dim, int rank, const T& fill = T()) {
    return Array(std::vector<int>(static_cast<std::size_t>(rank), dim), fill);
  }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int slot) const { return shape_[static_cast<std::size_t>(slot)]; }
  std::size_t size() const { return data_.size(); }
  std::size_t stride(int slot) const { return strides_[static_cast<std::size_t>(slot)]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  template <class... I>
  T& operator()(I... idx) {
    return data_[offset_of(idx...)];
  }
  template <class... I>
  const T& operator()(I... idx) const {
    return data_[offset_of(idx...)];
  }

  std::size_t offset(std::span<const int> idx) const {
    std::size_t off = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) off += strides_[i] * static_cast<std::size_t>(idx[i]);
    return off;
  }
  T& at(std::span<const int> idx) { return data_[offset(idx)]; }
  const T& at(std::span<const int> idx) const { return data_[offset(idx)]; }

  // Multi-index of a flat offset.
  std::vector<int> unflatten(std::size_t flat) const {
    std::vector<int> idx(shape_.size());
    for (std::size_t i = 0; i < shape_.size(); ++i) {
      idx[i] = static_cast<int>(flat / strides_[i]);
      flat %= strides_[i];
    }
    return idx;
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

 private:
  template <class... I>
  std::size_t offset_of(I... idx) const {
    std::size_t off = 0;
    std::size_t k = 0;
    ((off += strides_[k++] * static_cast<std::size_t>(idx)), ...);
    return off;
  }

  std::vector<int> shape_;
  std::vector<std::size_t> strides_;
  std::vector<T> data_;
};

using NumTensor = Array<double>;
using ExprArray = Array<Expr>;

/// Parsed einsum specification such as "abcd,cd->ab".
struct EinsumPlan {
  std::vector<std::string> inputs;
  std::string output;
  std::string letters;  // output letters first, then summed letters
  std::vector<int> sizes;  // per letter
  std::vector<std::vector<std::size_t>> strides;  // per operand, per letter
  std::vector<std::size_t> out_strides;
};

EinsumPlan plan_einsum(std::string_view spec, const std::vector<std::vector<int>>& shapes,
                       const std::vector<std::vector<std::size_t>>& operand_strides);

template <class T>
Array<T> einsum(std::string_view spec, std::initializer_list<const Array<T>*> operands) {
  std::vector<const Array<T>*> ops(operands);
  std::vector<std::vector<int>> shapes;
  std::vector<std::vector<std::size_t>> strides;
  for (const auto* op : ops) {
    shapes.push_back(op->shape());
    std::vector<std::size_t> st;
    for (int i = 0; i < op->rank(); ++i) st.push_back(op->stride(i));
    strides.push_back(std::move(st));
  }
  EinsumPlan plan = plan_einsum(spec, shapes, strides);
  std::vector<int> out_shape;
  for (std::size_t i = 0; i < plan.output.size(); ++i) out_shape.push_back(plan.sizes[i]);
  Array<T> out(out_shape);
  const std::size_t nl = plan.letters.size();
  const std::size_t no = plan.output.size();
  std::vector<int> idx(nl, 0);
  std::vector<T> terms;
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    // output part of the multi-index
    std::size_t rem = flat;
    for (std::size_t l = 0; l < no; ++l) {
      idx[l] = static_cast<int>(rem / plan.out_strides[l]);
      rem %= plan.out_strides[l];
    }
    for (std::size_t l = no; l < nl; ++l) idx[l] = 0;
    terms.clear();
    T acc{};
    for (;;) {
      bool zero = false;
      T prod{};
      for (std::size_t k = 0; k < ops.size(); ++k) {
        std::size_t o = 0;
        for (std::size_t l = 0; l < nl; ++l) o += plan.strides[k][l] * static_cast<std::size_t>(idx[l]);
        const T& v = (*ops[k])[o];
        if constexpr (std::is_same_v<T, Expr>) {
          if (v.is_zero()) {
            zero = true;
            break;
          }
          prod = k == 0 ? v : prod * v;
        } else {
          prod = k == 0 ? v : prod * v;
        }
      }
      if constexpr (std::is_same_v<T, Expr>) {
        if (!zero) terms.push_back(prod);
      } else {
        (void)zero;
        acc += prod;
      }
      // advance summed letters
      bool carry = true;
      for (std::size_t l = nl; carry && l > no;) {
        --l;
        if (++idx[l] < plan.sizes[l])
          carry = false;
        else
          idx[l] = 0;
      }
      if (carry) break;
    }
    if constexpr (std::is_same_v<T, Expr>) {
      out[flat] = add(std::move(terms));
      terms = {};
    } else {
      out[flat] = acc;
    }
  }
  return out;
}

/// Transpose: out[i_perm[0], ..., ] -- out slot k takes input slot perm[k].
template <class T>
Array<T> permute(const Array<T>& a, const std::vector<int>& perm) {
  std::vector<int> shape;
  for (int p : perm) shape.push_back(a.dim(p));
  Array<T> out(shape);
  std::vector<int> src(static_cast<std::size_t>(a.rank()));
  for (std::size_t f = 0; f < out.size(); ++f) {
    auto idx = out.unflatten(f);
    for (std::size_t k = 0; k < perm.size(); ++k) src[static_cast<std::size_t>(perm[k])] = idx[k];
    out[f] = a.at(src);
  }
  return out;
}

/// Sign of a permutation given as a sequence of distinct ints (0 if repeated).
int permutation_sign(std::span<const int> p);

/// All permutations of 0..k-1 with their signs.
std::vector<std::pair<std::vector<int>, int>> permutations_with_sign(int k);

/// (Anti)symmetrize over the listed slots, with the 1/k! normalization.
NumTensor antisymmetrize(const NumTensor& t, const std::vector<int>& slots);
NumTensor symmetrize(const NumTensor& t, const std::vector<int>& slots);
ExprArray antisymmetrize(const ExprArray& t, const std::vector<int>& slots);
ExprArray symmetrize(const ExprArray& t, const std::vector<int>& slots);

double max_abs(const NumTensor& t);
NumTensor operator-(const NumTensor& a, const NumTensor& b);
NumTensor operator+(const NumTensor& a, const NumTensor& b);
NumTensor operator*(double s, const NumTensor& a);

}  // namespace conformal
