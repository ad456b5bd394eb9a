#include "conformal/expr.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_map>

namespace conformal {

std::string format_point(const Bindings& b) {
  std::string s;
  for (const auto& [k, v] : b) {
    if (!s.empty()) s += ", ";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    s += k + "=" + buf;
  }
  return s;
}

namespace {

[[noreturn]] void domain(const std::string& what, const Bindings& b) {
  throw DomainError(what + " at " + format_point(b));
}

double ipow(double x, std::int64_t k) {
  bool inv = k < 0;
  std::uint64_t m = inv ? static_cast<std::uint64_t>(-k) : static_cast<std::uint64_t>(k);
  double acc = 1.0;
  while (m) {
    if (m & 1) acc *= x;
    m >>= 1;
    if (m) x *= x;
  }
  return inv ? 1.0 / acc : acc;
}

double checked_pow(double base, double e, const Bindings& b) {
  if (base == 0.0 && e < 0.0) domain("division by zero", b);
  if (base < 0.0 && std::floor(e) != e) domain("fractional power of negative base", b);
  return std::pow(base, e);
}

double checked_ipow(double base, std::int64_t k, const Bindings& b) {
  if (base == 0.0 && k < 0) domain("division by zero", b);
  return ipow(base, k);
}

double checked_log(double x, const Bindings& b) {
  if (!(x > 0.0)) domain("log of nonpositive value", b);
  return std::log(x);
}

double eval_rec(const Expr& e, const Bindings& b, std::unordered_map<const Node*, double>& memo) {
  const Node& n = e.node();
  switch (n.kind) {
    case Kind::Number: return n.rat.to_double();
    case Kind::Float: return n.fval;
    case Kind::Symbol: {
      auto it = b.find(n.name);
      if (it == b.end()) throw EvalError("unbound symbol '" + n.name + "'");
      return it->second;
    }
    default: break;
  }
  if (auto it = memo.find(e.get()); it != memo.end()) return it->second;
  double v = 0.0;
  switch (n.kind) {
    case Kind::Sum:
      for (const auto& c : n.children) v += eval_rec(c, b, memo);
      break;
    case Kind::Product:
      v = 1.0;
      for (const auto& c : n.children) v *= eval_rec(c, b, memo);
      break;
    case Kind::Power: {
      double base = eval_rec(n.children[0], b, memo);
      auto r = n.children[1].as_rational();
      if (r && r->is_integer())
        v = checked_ipow(base, r->num(), b);
      else
        v = checked_pow(base, eval_rec(n.children[1], b, memo), b);
      break;
    }
    case Kind::Function: {
      double a = eval_rec(n.children[0], b, memo);
      switch (n.func) {
        case Func::Exp: v = std::exp(a); break;
        case Func::Log: v = checked_log(a, b); break;
        case Func::Sin: v = std::sin(a); break;
        case Func::Cos: v = std::cos(a); break;
      }
      break;
    }
    default: break;
  }
  memo.emplace(e.get(), v);
  return v;
}

}  // namespace

double eval(const Expr& e, const Bindings& b) {
  std::unordered_map<const Node*, double> memo;
  return eval_rec(e, b, memo);
}

// ---------------------------------------------------------------------------
// Tape compilation

namespace {

class Compiler {
 public:
  explicit Compiler(std::vector<EvalProgram::Instr>& tape, std::vector<std::string>& inputs,
                    std::vector<std::uint32_t>& slots)
      : tape_(tape), inputs_(inputs), slots_(slots) {}

  std::uint32_t emit(const Expr& e) {
    if (auto it = slot_.find(e.get()); it != slot_.end()) return it->second;
    const Node& n = e.node();
    using Op = EvalProgram::Op;
    EvalProgram::Instr ins{};
    switch (n.kind) {
      case Kind::Number:
      case Kind::Float:
        ins.op = Op::Const;
        ins.imm = *e.as_double();
        break;
      case Kind::Symbol:
        ins.op = Op::Input;
        ins.a = static_cast<std::uint32_t>(inputs_.size());
        inputs_.push_back(n.name);
        break;
      case Kind::Sum:
      case Kind::Product: {
        std::uint32_t acc = emit(n.children[0]);
        for (std::size_t i = 1; i < n.children.size(); ++i) {
          std::uint32_t rhs = emit(n.children[i]);
          EvalProgram::Instr step{};
          step.op = n.kind == Kind::Sum ? Op::Add : Op::Mul;
          step.a = acc;
          step.b = rhs;
          tape_.push_back(step);
          acc = static_cast<std::uint32_t>(tape_.size() - 1);
        }
        slot_.emplace(e.get(), acc);
        return acc;
      }
      case Kind::Power: {
        ins.a = emit(n.children[0]);
        const Expr& x = n.children[1];
        auto r = x.as_rational();
        if (r && r->is_integer()) {
          ins.op = Op::PowInt;
          ins.k = r->num();
        } else if (x.is_numeric()) {
          ins.op = Op::PowConst;
          ins.imm = *x.as_double();
        } else {
          ins.op = Op::PowGen;
          ins.b = emit(x);
        }
        break;
      }
      case Kind::Function:
        ins.a = emit(n.children[0]);
        switch (n.func) {
          case Func::Exp: ins.op = Op::Exp; break;
          case Func::Log: ins.op = Op::Log; break;
          case Func::Sin: ins.op = Op::Sin; break;
          case Func::Cos: ins.op = Op::Cos; break;
        }
        break;
    }
    tape_.push_back(ins);
    auto idx = static_cast<std::uint32_t>(tape_.size() - 1);
    if (ins.op == Op::Input) slots_.push_back(idx);
    slot_.emplace(e.get(), idx);
    keep_.push_back(e);
    return idx;
  }

 private:
  std::vector<EvalProgram::Instr>& tape_;
  std::vector<std::string>& inputs_;
  std::vector<std::uint32_t>& slots_;
  std::unordered_map<const Node*, std::uint32_t> slot_;
  std::vector<Expr> keep_;
};

}  // namespace

EvalProgram compile(std::span<const Expr> exprs) {
  EvalProgram p;
  Compiler c(p.tape_, p.inputs_, p.input_slots_);
  for (const auto& e : exprs) p.outputs_.push_back(c.emit(e));
  return p;
}

void EvalProgram::run(const Bindings& b, std::span<double> out) const {
  if (out.size() < outputs_.size()) throw std::invalid_argument("EvalProgram::run: output span too small");
  std::vector<double> reg(tape_.size());
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    auto it = b.find(inputs_[i]);
    if (it == b.end()) throw EvalError("unbound symbol '" + inputs_[i] + "'");
    reg[input_slots_[i]] = it->second;
  }
  for (std::size_t i = 0; i < tape_.size(); ++i) {
    const Instr& in = tape_[i];
    switch (in.op) {
      case Op::Const: reg[i] = in.imm; break;
      case Op::Input: break;
      case Op::Add: reg[i] = reg[in.a] + reg[in.b]; break;
      case Op::Mul: reg[i] = reg[in.a] * reg[in.b]; break;
      case Op::PowInt: reg[i] = checked_ipow(reg[in.a], in.k, b); break;
      case Op::PowConst: reg[i] = checked_pow(reg[in.a], in.imm, b); break;
      case Op::PowGen: reg[i] = checked_pow(reg[in.a], reg[in.b], b); break;
      case Op::Exp: reg[i] = std::exp(reg[in.a]); break;
      case Op::Log: reg[i] = checked_log(reg[in.a], b); break;
      case Op::Sin: reg[i] = std::sin(reg[in.a]); break;
      case Op::Cos: reg[i] = std::cos(reg[in.a]); break;
    }
  }
  for (std::size_t i = 0; i < outputs_.size(); ++i) out[i] = reg[outputs_[i]];
}

void EvalProgram::run_jet(const Bindings& b, std::span<const std::string> vars, std::span<double> values,
                          std::span<double> grads) const {
  const std::size_t m = vars.size();
  if (values.size() < outputs_.size() || grads.size() < outputs_.size() * m)
    throw std::invalid_argument("EvalProgram::run_jet: output span too small");
  std::vector<double> reg(tape_.size());
  std::vector<double> d(tape_.size() * m, 0.0);
  for (std::size_t i = 0; i < inputs_.size(); ++i) {
    auto it = b.find(inputs_[i]);
    if (it == b.end()) throw EvalError("unbound symbol '" + inputs_[i] + "'");
    std::uint32_t slot = input_slots_[i];
    reg[slot] = it->second;
    for (std::size_t k = 0; k < m; ++k)
      if (vars[k] == inputs_[i]) d[slot * m + k] = 1.0;
  }
  for (std::size_t i = 0; i < tape_.size(); ++i) {
    const Instr& in = tape_[i];
    double* di = &d[i * m];
    const double* da = &d[in.a * m];
    const double* db = &d[in.b * m];
    const double x = reg[in.a];
    switch (in.op) {
      case Op::Const:
      case Op::Input: break;
      case Op::Add:
        reg[i] = x + reg[in.b];
        for (std::size_t k = 0; k < m; ++k) di[k] = da[k] + db[k];
        break;
      case Op::Mul: {
        const double y = reg[in.b];
        reg[i] = x * y;
        for (std::size_t k = 0; k < m; ++k) di[k] = x * db[k] + y * da[k];
        break;
      }
      case Op::PowInt: {
        reg[i] = checked_ipow(x, in.k, b);
        const double f = static_cast<double>(in.k) * checked_ipow(x, in.k - 1, b);
        for (std::size_t k = 0; k < m; ++k) di[k] = f * da[k];
        break;
      }
      case Op::PowConst: {
        reg[i] = checked_pow(x, in.imm, b);
        const double f = in.imm * checked_pow(x, in.imm - 1.0, b);
        for (std::size_t k = 0; k < m; ++k) di[k] = f * da[k];
        break;
      }
      case Op::PowGen: {
        const double y = reg[in.b];
        const double v = checked_pow(x, y, b);
        reg[i] = v;
        const double lx = x > 0.0 ? std::log(x) : 0.0;
        for (std::size_t k = 0; k < m; ++k) {
          double g = 0.0;
          if (db[k] != 0.0) g += v * lx * db[k];
          if (da[k] != 0.0) g += y * checked_pow(x, y - 1.0, b) * da[k];
          di[k] = g;
        }
        break;
      }
      case Op::Exp: {
        reg[i] = std::exp(x);
        for (std::size_t k = 0; k < m; ++k) di[k] = reg[i] * da[k];
        break;
      }
      case Op::Log: {
        reg[i] = checked_log(x, b);
        for (std::size_t k = 0; k < m; ++k) di[k] = da[k] / x;
        break;
      }
      case Op::Sin: {
        reg[i] = std::sin(x);
        const double c = std::cos(x);
        for (std::size_t k = 0; k < m; ++k) di[k] = c * da[k];
        break;
      }
      case Op::Cos: {
        reg[i] = std::cos(x);
        const double s = -std::sin(x);
        for (std::size_t k = 0; k < m; ++k) di[k] = s * da[k];
        break;
      }
    }
    if (in.op == Op::Const) reg[i] = in.imm;
  }
  for (std::size_t i = 0; i < outputs_.size(); ++i) {
    values[i] = reg[outputs_[i]];
    for (std::size_t k = 0; k < m; ++k) grads[i * m + k] = d[outputs_[i] * m + k];
  }
}

std::vector<double> EvalProgram::run(const Bindings& b) const {
  std::vector<double> out(outputs_.size());
  run(b, out);
  return out;
}

double eval(const EvalProgram& p, const Bindings& b) {
  if (p.output_count() != 1) throw std::invalid_argument("eval: program has several outputs");
  return p.run(b)[0];
}

}  // namespace conformal
