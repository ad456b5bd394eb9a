#pragma once

// Immutable symbolic scalar expressions.
//
// Nodes are hash-consed: two structurally equal canonical expressions share
// one node, so structural equality is pointer equality. Every constructor
// returns a canonical form:
//   * sums and products are flattened and their children sorted;
//   * like terms in a sum and equal bases in a product are merged;
//   * a numeric coefficient is stored as the leading child of a product;
//   * a - b is a + (-1)*b, a / b is a * b^(-1), sqrt(a) is a^(1/2).

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace conformal {

/// Exact rational with int64 parts; denominator > 0, reduced.
class Rational {
 public:
  constexpr Rational() = default;
  Rational(std::int64_t num, std::int64_t den = 1);

  std::int64_t num() const { return num_; }
  std::int64_t den() const { return den_; }
  bool is_zero() const { return num_ == 0; }
  bool is_one() const { return num_ == 1 && den_ == 1; }
  bool is_integer() const { return den_ == 1; }
  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  // Checked arithmetic: std::nullopt on int64 overflow.
  static std::optional<Rational> add(const Rational& a, const Rational& b);
  static std::optional<Rational> mul(const Rational& a, const Rational& b);
  static std::optional<Rational> pow(const Rational& a, std::int64_t k);

  friend bool operator==(const Rational&, const Rational&) = default;
  friend bool operator<(const Rational& a, const Rational& b);

  std::string str() const;

 private:
  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

enum class Kind : std::uint8_t { Number, Float, Symbol, Function, Power, Product, Sum };
enum class Func : std::uint8_t { Exp, Log, Sin, Cos };

struct Node;

class Expr {
 public:
  Expr();  // zero
  Expr(int v);
  Expr(Rational r);
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static Expr number(Rational r);
  static Expr floating(double v);
  static Expr symbol(std::string_view name);

  const Node& node() const { return *node_; }
  const Node* get() const { return node_.get(); }
  Kind kind() const;

  bool is_zero() const;
  bool is_one() const;
  bool is_number() const;  // exact rational
  bool is_numeric() const;  // rational or float
  std::optional<Rational> as_rational() const;
  std::optional<double> as_double() const;  // for numeric constants only

  std::uint64_t hash() const;
  std::uint64_t symbol_mask() const;
  std::size_t node_count() const;  // distinct nodes in the DAG

  std::string str() const;

  friend bool operator==(const Expr& a, const Expr& b) { return a.node_ == b.node_; }

 private:
  std::shared_ptr<const Node> node_;
};

struct Node {
  Kind kind;
  Func func = Func::Exp;
  Rational rat;
  double fval = 0.0;
  std::string name;
  std::vector<Expr> children;
  std::uint64_t hash = 0;
  std::uint64_t symbols = 0;  // bloom mask of free symbols
};

struct ExprHash {
  std::size_t operator()(const Expr& e) const { return static_cast<std::size_t>(e.hash()); }
};

// Canonicalizing constructors.
Expr add(std::vector<Expr> terms);
Expr mul(std::vector<Expr> factors);
Expr pow(const Expr& base, const Expr& exponent);
Expr apply(Func f, const Expr& arg);
inline Expr exp(const Expr& a) { return apply(Func::Exp, a); }
inline Expr log(const Expr& a) { return apply(Func::Log, a); }
inline Expr sin(const Expr& a) { return apply(Func::Sin, a); }
inline Expr cos(const Expr& a) { return apply(Func::Cos, a); }
Expr sqrt(const Expr& a);

Expr operator+(const Expr& a, const Expr& b);
Expr operator-(const Expr& a, const Expr& b);
Expr operator-(const Expr& a);
Expr operator*(const Expr& a, const Expr& b);
Expr operator/(const Expr& a, const Expr& b);
Expr& operator+=(Expr& a, const Expr& b);
Expr& operator*=(Expr& a, const Expr& b);

const char* func_name(Func f);
std::optional<Func> func_from_name(std::string_view name);

/// Deterministic total order used to sort children.
bool canonical_less(const Expr& a, const Expr& b);

/// Memo table for repeated differentiation of related expressions.
class DiffCache {
 public:
  Expr diff(const Expr& e, const Expr& sym);
  std::size_t size() const { return memo_.size(); }

 private:
  struct Key {
    const Node* node;
    const Node* sym;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& k) const {
      return std::hash<const void*>()(k.node) * 31u ^ std::hash<const void*>()(k.sym);
    }
  };
  std::unordered_map<Key, Expr, KeyHash> memo_;
  std::vector<Expr> keep_;  // keeps keyed nodes alive
};

/// Exact partial derivative with respect to a symbol.
Expr diff(const Expr& e, const Expr& sym);
inline Expr diff(const Expr& e, std::string_view sym) { return diff(e, Expr::symbol(sym)); }

/// Bounded fixed-point simplifier (at most 8 passes).
Expr simplify(const Expr& e);

/// Replace symbols by expressions.
Expr substitute(const Expr& e, const std::map<std::string, Expr>& repl);

/// Names of free symbols, sorted.
std::vector<std::string> free_symbols(const Expr& e);

// ---------------------------------------------------------------------------
// Parsing

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, const std::string& msg);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

Expr parse(std::string_view text);

// ---------------------------------------------------------------------------
// Evaluation

using Bindings = std::map<std::string, double>;

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for log of nonpositive, negative base with fractional exponent,
/// division by zero. The message names the sample point.
class DomainError : public EvalError {
 public:
  using EvalError::EvalError;
};

std::string format_point(const Bindings& b);

/// Direct recursive evaluation (memoized over the DAG).
double eval(const Expr& e, const Bindings& b);

/// Flat single-assignment tape with common subexpressions shared across a
/// batch of outputs.
class EvalProgram {
 public:
  enum class Op : std::uint8_t { Const, Input, Add, Mul, PowInt, PowConst, PowGen, Exp, Log, Sin, Cos };
  struct Instr {
    Op op;
    std::uint32_t a = 0;
    std::uint32_t b = 0;
    std::int64_t k = 0;
    double imm = 0.0;
  };

  EvalProgram() = default;

  const std::vector<std::string>& inputs() const { return inputs_; }
  std::size_t size() const { return tape_.size(); }
  std::size_t output_count() const { return outputs_.size(); }

  /// Evaluate every output. Every input symbol must be bound.
  std::vector<double> run(const Bindings& b) const;
  void run(const Bindings& b, std::span<double> out) const;

  /// Values and first partial derivatives with respect to `vars`;
  /// grads is laid out [output][var].
  void run_jet(const Bindings& b, std::span<const std::string> vars, std::span<double> values,
               std::span<double> grads) const;

 private:
  friend EvalProgram compile(std::span<const Expr> exprs);
  std::vector<Instr> tape_;
  std::vector<std::string> inputs_;
  std::vector<std::uint32_t> input_slots_;
  std::vector<std::uint32_t> outputs_;
};

EvalProgram compile(std::span<const Expr> exprs);
inline EvalProgram compile(const Expr& e) { return compile(std::span<const Expr>(&e, 1)); }
double eval(const EvalProgram& p, const Bindings& b);

}  // namespace conformal
