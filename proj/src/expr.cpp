#include "conformal/expr.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <mutex>
#include <numeric>
#include <unordered_set>

namespace conformal {

// ---------------------------------------------------------------------------
// Rational

namespace {

std::int64_t gcd64(std::int64_t a, std::int64_t b) {
  a = a < 0 ? -a : a;
  b = b < 0 ? -b : b;
  while (b != 0) {
    std::int64_t t = a % b;
    a = b;
    b = t;
  }
  return a;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw std::invalid_argument("Rational: zero denominator");
  if (den < 0) {
    if (num == INT64_MIN || den == INT64_MIN) throw std::overflow_error("Rational: overflow");
    num = -num;
    den = -den;
  }
  std::int64_t g = gcd64(num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
  num_ = num;
  den_ = den;
}

std::optional<Rational> Rational::add(const Rational& a, const Rational& b) {
  std::int64_t g = gcd64(a.den_, b.den_);
  std::int64_t ad = a.den_ / g;
  std::int64_t bd = b.den_ / g;
  std::int64_t x, y, s, d;
  if (__builtin_mul_overflow(a.num_, bd, &x)) return std::nullopt;
  if (__builtin_mul_overflow(b.num_, ad, &y)) return std::nullopt;
  if (__builtin_add_overflow(x, y, &s)) return std::nullopt;
  if (__builtin_mul_overflow(a.den_, bd, &d)) return std::nullopt;
  return Rational(s, d);
}

std::optional<Rational> Rational::mul(const Rational& a, const Rational& b) {
  std::int64_t g1 = gcd64(a.num_, b.den_);
  std::int64_t g2 = gcd64(b.num_, a.den_);
  if (g1 == 0) g1 = 1;
  if (g2 == 0) g2 = 1;
  std::int64_t n, d;
  if (__builtin_mul_overflow(a.num_ / g1, b.num_ / g2, &n)) return std::nullopt;
  if (__builtin_mul_overflow(a.den_ / g2, b.den_ / g1, &d)) return std::nullopt;
  return Rational(n, d);
}

std::optional<Rational> Rational::pow(const Rational& a, std::int64_t k) {
  if (k == 0) return Rational(1);
  Rational base = a;
  if (k < 0) {
    if (a.num_ == 0) return std::nullopt;
    base = Rational(a.den_, a.num_);
    k = -k;
  }
  Rational acc(1);
  while (k > 0) {
    if (k & 1) {
      auto r = mul(acc, base);
      if (!r) return std::nullopt;
      acc = *r;
    }
    k >>= 1;
    if (k > 0) {
      auto r = mul(base, base);
      if (!r) return std::nullopt;
      base = *r;
    }
  }
  return acc;
}

bool operator<(const Rational& a, const Rational& b) {
  __int128 l = static_cast<__int128>(a.num_) * b.den_;
  __int128 r = static_cast<__int128>(b.num_) * a.den_;
  return l < r;
}

std::string Rational::str() const {
  if (den_ == 1) return std::to_string(num_);
  return std::to_string(num_) + "/" + std::to_string(den_);
}

// ---------------------------------------------------------------------------
// Hash-consing

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
  v *= 0x9E3779B97F4A7C15ull;
  v ^= v >> 29;
  h ^= v;
  h *= kFnvPrime;
  h ^= h >> 31;
  return h;
}

std::uint64_t hash_string(std::string_view s) {
  std::uint64_t h = kFnvOffset;
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

void finalize_hash(Node& n) {
  std::uint64_t h = mix(kFnvOffset, static_cast<std::uint64_t>(n.kind) + 1);
  switch (n.kind) {
    case Kind::Number:
      h = mix(h, static_cast<std::uint64_t>(n.rat.num()));
      h = mix(h, static_cast<std::uint64_t>(n.rat.den()));
      n.symbols = 0;
      break;
    case Kind::Float: {
      std::uint64_t bits;
      std::memcpy(&bits, &n.fval, sizeof bits);
      h = mix(h, bits);
      n.symbols = 0;
      break;
    }
    case Kind::Symbol: {
      std::uint64_t sh = hash_string(n.name);
      h = mix(h, sh);
      n.symbols = 1ull << (sh % 64);
      break;
    }
    default:
      h = mix(h, static_cast<std::uint64_t>(n.func));
      n.symbols = 0;
      for (const auto& c : n.children) {
        h = mix(h, c.hash());
        n.symbols |= c.symbol_mask();
      }
      break;
  }
  n.hash = h;
}

bool shallow_equal(const Node& a, const Node& b) {
  if (a.kind != b.kind || a.func != b.func) return false;
  switch (a.kind) {
    case Kind::Number:
      return a.rat == b.rat;
    case Kind::Float:
      return std::memcmp(&a.fval, &b.fval, sizeof(double)) == 0;
    case Kind::Symbol:
      return a.name == b.name;
    default:
      if (a.children.size() != b.children.size()) return false;
      for (std::size_t i = 0; i < a.children.size(); ++i)
        if (!(a.children[i] == b.children[i])) return false;
      return true;
  }
}

class InternTable {
 public:
  Expr intern(Node&& proto) {
    finalize_hash(proto);
    std::lock_guard<std::mutex> lock(mu_);
    auto range = table_.equal_range(proto.hash);
    for (auto it = range.first; it != range.second; ++it) {
      if (auto sp = it->second.lock()) {
        if (shallow_equal(*sp, proto)) return Expr(std::move(sp));
      }
    }
    std::shared_ptr<const Node> sp(new Node(std::move(proto)));
    table_.emplace(sp->hash, sp);
    if (table_.size() > purge_at_) purge();
    return Expr(std::move(sp));
  }

 private:
  void purge() {
    for (auto it = table_.begin(); it != table_.end();) {
      if (it->second.expired())
        it = table_.erase(it);
      else
        ++it;
    }
    purge_at_ = std::max<std::size_t>(1u << 16, table_.size() * 2);
  }

  std::mutex mu_;
  std::unordered_multimap<std::uint64_t, std::weak_ptr<const Node>> table_;
  std::size_t purge_at_ = 1u << 16;
};

InternTable& table() {
  static InternTable* t = new InternTable();  // never destroyed: nodes may outlive statics
  return *t;
}

Expr make_number(Rational r) {
  Node n;
  n.kind = Kind::Number;
  n.rat = r;
  return table().intern(std::move(n));
}

Expr make_float(double v) {
  if (v == 0.0) v = 0.0;  // fold -0.0
  Node n;
  n.kind = Kind::Float;
  n.fval = v;
  return table().intern(std::move(n));
}

Expr make_composite(Kind k, std::vector<Expr> children, Func f = Func::Exp) {
  Node n;
  n.kind = k;
  n.func = f;
  n.children = std::move(children);
  return table().intern(std::move(n));
}

const Expr& zero_expr() {
  static const Expr z = make_number(Rational(0));
  return z;
}

const Expr& one_expr() {
  static const Expr o = make_number(Rational(1));
  return o;
}

}  // namespace

// ---------------------------------------------------------------------------
// Expr basics

Expr::Expr() : Expr(zero_expr()) {}
Expr::Expr(int v) : Expr(make_number(Rational(v))) {}
Expr::Expr(Rational r) : Expr(make_number(r)) {}

Expr Expr::number(Rational r) { return make_number(r); }
Expr Expr::floating(double v) { return make_float(v); }
Expr Expr::symbol(std::string_view name) {
  Node n;
  n.kind = Kind::Symbol;
  n.name = std::string(name);
  return table().intern(std::move(n));
}

Kind Expr::kind() const { return node_->kind; }
bool Expr::is_zero() const { return node_->kind == Kind::Number && node_->rat.is_zero(); }
bool Expr::is_one() const { return node_->kind == Kind::Number && node_->rat.is_one(); }
bool Expr::is_number() const { return node_->kind == Kind::Number; }
bool Expr::is_numeric() const { return node_->kind == Kind::Number || node_->kind == Kind::Float; }
std::uint64_t Expr::hash() const { return node_->hash; }
std::uint64_t Expr::symbol_mask() const { return node_->symbols; }

std::optional<Rational> Expr::as_rational() const {
  if (node_->kind == Kind::Number) return node_->rat;
  return std::nullopt;
}

std::optional<double> Expr::as_double() const {
  if (node_->kind == Kind::Number) return node_->rat.to_double();
  if (node_->kind == Kind::Float) return node_->fval;
  return std::nullopt;
}

std::size_t Expr::node_count() const {
  std::unordered_set<const Node*> seen;
  std::vector<const Node*> stack{get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    for (const auto& c : n->children) stack.push_back(c.get());
  }
  return seen.size();
}

const char* func_name(Func f) {
  switch (f) {
    case Func::Exp: return "exp";
    case Func::Log: return "log";
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
  }
  return "?";
}

std::optional<Func> func_from_name(std::string_view name) {
  if (name == "exp") return Func::Exp;
  if (name == "log") return Func::Log;
  if (name == "sin") return Func::Sin;
  if (name == "cos") return Func::Cos;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Ordering

namespace {

int kind_rank(Kind k) {
  switch (k) {
    case Kind::Number:
    case Kind::Float: return 0;
    case Kind::Symbol: return 1;
    case Kind::Function: return 2;
    case Kind::Power: return 3;
    case Kind::Product: return 4;
    case Kind::Sum: return 5;
  }
  return 6;
}

int compare(const Expr& a, const Expr& b);

int compare_children(const Node& x, const Node& y) {
  if (x.children.size() != y.children.size()) return x.children.size() < y.children.size() ? -1 : 1;
  if (x.hash != y.hash) return x.hash < y.hash ? -1 : 1;
  for (std::size_t i = 0; i < x.children.size(); ++i) {
    int c = compare(x.children[i], y.children[i]);
    if (c != 0) return c;
  }
  return 0;
}

int compare(const Expr& a, const Expr& b) {
  if (a == b) return 0;
  const Node& x = a.node();
  const Node& y = b.node();
  int rx = kind_rank(x.kind), ry = kind_rank(y.kind);
  if (rx != ry) return rx < ry ? -1 : 1;
  switch (x.kind) {
    case Kind::Number:
    case Kind::Float: {
      double vx = *a.as_double(), vy = *b.as_double();
      if (vx != vy) return vx < vy ? -1 : 1;
      if (x.kind != y.kind) return x.kind == Kind::Number ? -1 : 1;
      if (x.kind == Kind::Number) {
        if (x.rat < y.rat) return -1;
        if (y.rat < x.rat) return 1;
      }
      return 0;
    }
    case Kind::Symbol:
      return x.name < y.name ? -1 : (x.name == y.name ? 0 : 1);
    case Kind::Function:
      if (x.func != y.func) return x.func < y.func ? -1 : 1;
      return compare(x.children[0], y.children[0]);
    case Kind::Power: {
      int c = compare(x.children[0], y.children[0]);
      if (c != 0) return c;
      return compare(x.children[1], y.children[1]);
    }
    default:
      return compare_children(x, y);
  }
}

}  // namespace

bool canonical_less(const Expr& a, const Expr& b) { return compare(a, b) < 0; }

// ---------------------------------------------------------------------------
// Numeric coefficient helper: exact while possible, float after overflow or
// contact with a float constant.

namespace {

struct Coeff {
  bool is_float = false;
  Rational r{0};
  double f = 0.0;

  static Coeff from(const Expr& e) {
    Coeff c;
    if (e.kind() == Kind::Float) {
      c.is_float = true;
      c.f = e.node().fval;
    } else {
      c.r = e.node().rat;
    }
    return c;
  }
  static Coeff one() {
    Coeff c;
    c.r = Rational(1);
    return c;
  }
  double value() const { return is_float ? f : r.to_double(); }
  void add(const Coeff& o) {
    if (!is_float && !o.is_float) {
      if (auto s = Rational::add(r, o.r)) {
        r = *s;
        return;
      }
    }
    f = value() + o.value();
    is_float = true;
  }
  void mul(const Coeff& o) {
    if (!is_float && !o.is_float) {
      if (auto s = Rational::mul(r, o.r)) {
        r = *s;
        return;
      }
    }
    f = value() * o.value();
    is_float = true;
  }
  bool is_zero() const { return is_float ? f == 0.0 : r.is_zero(); }
  bool is_one() const { return !is_float && r.is_one(); }
  Expr expr() const { return is_float ? make_float(f) : make_number(r); }
};

// Split c*rest.
std::pair<Coeff, Expr> split_coeff(const Expr& t) {
  if (t.kind() == Kind::Product && t.node().children[0].is_numeric()) {
    const auto& ch = t.node().children;
    Coeff c = Coeff::from(ch[0]);
    if (ch.size() == 2) return {c, ch[1]};
    std::vector<Expr> rest(ch.begin() + 1, ch.end());
    return {c, make_composite(Kind::Product, std::move(rest))};
  }
  return {Coeff::one(), t};
}

// Rebuild c*rest where rest is already canonical and not numeric.
Expr join_coeff(const Coeff& c, const Expr& rest) {
  if (c.is_zero()) return zero_expr();
  if (c.is_one()) return rest;
  std::vector<Expr> ch;
  ch.push_back(c.expr());
  if (rest.kind() == Kind::Product) {
    for (const auto& f : rest.node().children) ch.push_back(f);
  } else {
    ch.push_back(rest);
  }
  return make_composite(Kind::Product, std::move(ch));
}

}  // namespace

// ---------------------------------------------------------------------------
// Constructors

Expr add(std::vector<Expr> terms) {
  std::vector<Expr> flat;
  flat.reserve(terms.size());
  for (auto& t : terms) {
    if (t.kind() == Kind::Sum) {
      for (const auto& c : t.node().children) flat.push_back(c);
    } else {
      flat.push_back(std::move(t));
    }
  }
  Coeff constant;
  bool have_float_const = false;
  std::vector<std::pair<Expr, Coeff>> groups;
  std::unordered_map<const Node*, std::size_t> index;
  for (const auto& t : flat) {
    if (t.is_numeric()) {
      if (t.kind() == Kind::Float) have_float_const = true;
      constant.add(Coeff::from(t));
      continue;
    }
    auto [c, rest] = split_coeff(t);
    auto it = index.find(rest.get());
    if (it == index.end()) {
      index.emplace(rest.get(), groups.size());
      groups.emplace_back(rest, c);
    } else {
      groups[it->second].second.add(c);
    }
  }
  std::vector<Expr> out;
  out.reserve(groups.size() + 1);
  for (const auto& [rest, c] : groups) {
    if (c.is_zero()) continue;
    out.push_back(join_coeff(c, rest));
  }
  std::sort(out.begin(), out.end(), canonical_less);
  bool keep_const = !constant.is_zero();
  if (keep_const || (have_float_const && out.empty())) {
    out.insert(out.begin(), constant.expr());
  }
  if (out.empty()) return zero_expr();
  if (out.size() == 1) return out[0];
  return make_composite(Kind::Sum, std::move(out));
}

namespace {

std::pair<Expr, Expr> split_power(const Expr& f) {
  if (f.kind() == Kind::Power) return {f.node().children[0], f.node().children[1]};
  return {f, one_expr()};
}

bool is_exp(const Expr& e) { return e.kind() == Kind::Function && e.node().func == Func::Exp; }

}  // namespace

Expr mul(std::vector<Expr> factors) {
  std::vector<Expr> flat;
  flat.reserve(factors.size());
  for (auto& f : factors) {
    if (f.kind() == Kind::Product) {
      for (const auto& c : f.node().children) flat.push_back(c);
    } else {
      flat.push_back(std::move(f));
    }
  }
  Coeff coeff = Coeff::one();
  std::vector<Expr> exp_args;
  std::vector<std::pair<Expr, std::vector<Expr>>> groups;
  std::unordered_map<const Node*, std::size_t> index;
  for (const auto& f : flat) {
    if (f.is_numeric()) {
      coeff.mul(Coeff::from(f));
      continue;
    }
    if (is_exp(f)) {
      exp_args.push_back(f.node().children[0]);
      continue;
    }
    auto [base, e] = split_power(f);
    auto it = index.find(base.get());
    if (it == index.end()) {
      index.emplace(base.get(), groups.size());
      groups.push_back({base, {e}});
    } else {
      groups[it->second].second.push_back(e);
    }
  }
  if (coeff.is_zero()) return zero_expr();
  std::vector<Expr> out;
  out.reserve(groups.size() + 1);
  auto absorb = [&](const Expr& p) {
    if (p.is_numeric()) {
      coeff.mul(Coeff::from(p));
    } else if (p.kind() == Kind::Product) {
      for (const auto& c : p.node().children) {
        if (c.is_numeric())
          coeff.mul(Coeff::from(c));
        else
          out.push_back(c);
      }
    } else {
      out.push_back(p);
    }
  };
  for (auto& [base, exps] : groups) {
    Expr e = exps.size() == 1 ? exps[0] : add(std::move(exps));
    if (e.is_zero()) continue;
    absorb(pow(base, e));
  }
  if (!exp_args.empty()) {
    Expr arg = add(std::move(exp_args));
    if (!arg.is_zero()) absorb(exp(arg));
  }
  if (coeff.is_zero()) return zero_expr();
  // A merged power can collapse into another factor (x^(1/2)*x^(1/2) -> x);
  // re-merge when bases repeat.
  {
    std::unordered_set<const Node*> bases;
    bool repeat = false;
    for (const auto& f : out) {
      if (!bases.insert(split_power(f).first.get()).second) repeat = true;
      if (is_exp(f) && !bases.insert(nullptr).second) repeat = true;
    }
    if (repeat) {
      out.push_back(coeff.expr());
      return mul(std::move(out));
    }
  }
  std::sort(out.begin(), out.end(), canonical_less);
  if (out.empty()) return coeff.expr();
  if (out.size() == 1 && coeff.is_one()) return out[0];
  if (!coeff.is_one()) out.insert(out.begin(), coeff.expr());
  return make_composite(Kind::Product, std::move(out));
}

Expr pow(const Expr& base, const Expr& e) {
  if (e.is_zero()) return one_expr();
  if (e.is_one()) return base;
  if (base.is_one()) return one_expr();
  auto er = e.as_rational();
  if (base.is_zero()) {
    if (er && er->num() > 0) return zero_expr();
  }
  if (base.is_number() && er && er->is_integer()) {
    if (auto r = Rational::pow(base.node().rat, er->num())) return make_number(*r);
    if (!base.is_zero()) return make_float(std::pow(base.node().rat.to_double(), er->to_double()));
  }
  if (base.kind() == Kind::Float && e.is_numeric()) {
    double b = base.node().fval;
    double x = *e.as_double();
    bool integral = er ? er->is_integer() : std::floor(x) == x;
    if (b > 0.0 || (b < 0.0 && integral)) return make_float(std::pow(b, x));
  }
  if (base.is_number() && e.kind() == Kind::Float && base.node().rat.num() > 0) {
    return make_float(std::pow(base.node().rat.to_double(), e.node().fval));
  }
  if (base.kind() == Kind::Power && er && er->is_integer()) {
    return pow(base.node().children[0], mul({base.node().children[1], e}));
  }
  if (base.kind() == Kind::Product && er && er->is_integer()) {
    std::vector<Expr> fs;
    for (const auto& f : base.node().children) fs.push_back(pow(f, e));
    return mul(std::move(fs));
  }
  if (is_exp(base)) return exp(mul({e, base.node().children[0]}));
  return make_composite(Kind::Power, {base, e});
}

Expr sqrt(const Expr& a) { return pow(a, make_number(Rational(1, 2))); }

namespace {

// Rewrite sum/log terms inside exp: exp(c*log(x) + rest) -> x^c * exp(rest).
std::optional<Expr> exp_of_logs(const Expr& arg) {
  std::vector<Expr> terms;
  if (arg.kind() == Kind::Sum)
    terms = arg.node().children;
  else
    terms = {arg};
  std::vector<Expr> powers, rest;
  for (const auto& t : terms) {
    auto [c, r] = split_coeff(t);
    if (r.kind() == Kind::Function && r.node().func == Func::Log) {
      powers.push_back(pow(r.node().children[0], c.expr()));
    } else {
      rest.push_back(t);
    }
  }
  if (powers.empty()) return std::nullopt;
  Expr tail = add(std::move(rest));
  if (!tail.is_zero()) powers.push_back(make_composite(Kind::Function, {tail}, Func::Exp));
  return mul(std::move(powers));
}

}  // namespace

Expr apply(Func f, const Expr& a) {
  switch (f) {
    case Func::Exp:
      if (a.is_zero()) return one_expr();
      if (a.kind() == Kind::Float) return make_float(std::exp(a.node().fval));
      if (auto r = exp_of_logs(a)) return *r;
      break;
    case Func::Log:
      if (a.is_one()) return zero_expr();
      if (is_exp(a)) return a.node().children[0];
      if (a.kind() == Kind::Float && a.node().fval > 0.0) return make_float(std::log(a.node().fval));
      break;
    case Func::Sin:
      if (a.is_zero()) return zero_expr();
      if (a.kind() == Kind::Float) return make_float(std::sin(a.node().fval));
      break;
    case Func::Cos:
      if (a.is_zero()) return one_expr();
      if (a.kind() == Kind::Float) return make_float(std::cos(a.node().fval));
      break;
  }
  return make_composite(Kind::Function, {a}, f);
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  return add({a, b});
}
Expr operator-(const Expr& a) { return mul({make_number(Rational(-1)), a}); }
Expr operator-(const Expr& a, const Expr& b) {
  if (b.is_zero()) return a;
  return add({a, -b});
}
Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_zero() || b.is_zero()) return zero_expr();
  if (a.is_one()) return b;
  if (b.is_one()) return a;
  return mul({a, b});
}
Expr operator/(const Expr& a, const Expr& b) {
  if (a.is_zero()) return zero_expr();
  if (b.is_one()) return a;
  return mul({a, pow(b, make_number(Rational(-1)))});
}
Expr& operator+=(Expr& a, const Expr& b) { return a = a + b; }
Expr& operator*=(Expr& a, const Expr& b) { return a = a * b; }

// ---------------------------------------------------------------------------
// Differentiation

Expr DiffCache::diff(const Expr& e, const Expr& sym) {
  if ((e.symbol_mask() & sym.symbol_mask()) == 0) return zero_expr();
  const Node& n = e.node();
  if (n.kind == Kind::Symbol) return e == sym ? one_expr() : zero_expr();
  Key key{e.get(), sym.get()};
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;

  Expr result;
  switch (n.kind) {
    case Kind::Sum: {
      std::vector<Expr> ts;
      for (const auto& c : n.children) {
        Expr d = diff(c, sym);
        if (!d.is_zero()) ts.push_back(d);
      }
      result = add(std::move(ts));
      break;
    }
    case Kind::Product: {
      std::vector<Expr> ts;
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        Expr d = diff(n.children[i], sym);
        if (d.is_zero()) continue;
        std::vector<Expr> fs;
        fs.reserve(n.children.size());
        for (std::size_t j = 0; j < n.children.size(); ++j) fs.push_back(j == i ? d : n.children[j]);
        ts.push_back(mul(std::move(fs)));
      }
      result = add(std::move(ts));
      break;
    }
    case Kind::Power: {
      const Expr& b = n.children[0];
      const Expr& x = n.children[1];
      Expr db = diff(b, sym);
      if (x.is_numeric()) {
        if (db.is_zero()) {
          result = zero_expr();
        } else {
          Expr xm1 = add({x, make_number(Rational(-1))});
          result = mul({x, pow(b, xm1), db});
        }
      } else {
        Expr dx = diff(x, sym);
        std::vector<Expr> ts;
        if (!dx.is_zero()) ts.push_back(mul({dx, log(b)}));
        if (!db.is_zero()) ts.push_back(mul({x, db, pow(b, make_number(Rational(-1)))}));
        result = mul({e, add(std::move(ts))});
      }
      break;
    }
    case Kind::Function: {
      const Expr& a = n.children[0];
      Expr da = diff(a, sym);
      if (da.is_zero()) {
        result = zero_expr();
        break;
      }
      switch (n.func) {
        case Func::Exp: result = mul({e, da}); break;
        case Func::Log: result = mul({da, pow(a, make_number(Rational(-1)))}); break;
        case Func::Sin: result = mul({cos(a), da}); break;
        case Func::Cos: result = mul({make_number(Rational(-1)), sin(a), da}); break;
      }
      break;
    }
    default:
      result = zero_expr();
  }
  memo_.emplace(key, result);
  keep_.push_back(e);
  keep_.push_back(sym);
  return result;
}

Expr diff(const Expr& e, const Expr& sym) {
  DiffCache cache;
  return cache.diff(e, sym);
}

// ---------------------------------------------------------------------------
// Simplification, substitution

namespace {

Expr rebuild(const Expr& e, std::unordered_map<const Node*, Expr>& memo, bool expand) {
  const Node& n = e.node();
  if (n.children.empty()) return e;
  if (auto it = memo.find(e.get()); it != memo.end()) return it->second;
  std::vector<Expr> ch;
  ch.reserve(n.children.size());
  for (const auto& c : n.children) ch.push_back(rebuild(c, memo, expand));
  Expr out;
  switch (n.kind) {
    case Kind::Sum: out = add(std::move(ch)); break;
    case Kind::Product: {
      out = mul(ch);
      if (expand && out.kind() == Kind::Product) {
        // Distribute over sum factors while the expansion stays small.
        std::vector<Expr> acc{one_expr()};
        bool any_sum = false;
        for (const auto& f : out.node().children) {
          if (f.kind() == Kind::Sum) {
            any_sum = true;
            std::vector<Expr> next;
            for (const auto& a : acc)
              for (const auto& t : f.node().children) next.push_back(mul({a, t}));
            acc = std::move(next);
          } else {
            for (auto& a : acc) a = mul({a, f});
          }
          if (acc.size() > 64) {
            any_sum = false;
            break;
          }
        }
        if (any_sum) out = add(std::move(acc));
      }
      break;
    }
    case Kind::Power: out = pow(ch[0], ch[1]); break;
    case Kind::Function: out = apply(n.func, ch[0]); break;
    default: out = e;
  }
  memo.emplace(e.get(), out);
  return out;
}

}  // namespace

Expr simplify(const Expr& e) {
  Expr cur = e;
  for (int pass = 0; pass < 8; ++pass) {
    std::unordered_map<const Node*, Expr> memo;
    Expr next = rebuild(cur, memo, true);
    if (next == cur) break;
    cur = next;
  }
  return cur;
}

Expr substitute(const Expr& e, const std::map<std::string, Expr>& repl) {
  std::unordered_map<const Node*, Expr> memo;
  std::uint64_t mask = 0;
  for (const auto& [k, v] : repl) mask |= Expr::symbol(k).symbol_mask();
  auto rec = [&](auto&& self, const Expr& x) -> Expr {
    if ((x.symbol_mask() & mask) == 0) return x;
    const Node& n = x.node();
    if (n.kind == Kind::Symbol) {
      auto it = repl.find(n.name);
      return it == repl.end() ? x : it->second;
    }
    if (auto it = memo.find(x.get()); it != memo.end()) return it->second;
    std::vector<Expr> ch;
    for (const auto& c : n.children) ch.push_back(self(self, c));
    Expr out;
    switch (n.kind) {
      case Kind::Sum: out = add(std::move(ch)); break;
      case Kind::Product: out = mul(std::move(ch)); break;
      case Kind::Power: out = pow(ch[0], ch[1]); break;
      case Kind::Function: out = apply(n.func, ch[0]); break;
      default: out = x;
    }
    memo.emplace(x.get(), out);
    return out;
  };
  return rec(rec, e);
}

std::vector<std::string> free_symbols(const Expr& e) {
  std::unordered_set<const Node*> seen;
  std::vector<std::string> names;
  std::vector<const Node*> stack{e.get()};
  while (!stack.empty()) {
    const Node* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    if (n->kind == Kind::Symbol) names.push_back(n->name);
    for (const auto& c : n->children) stack.push_back(c.get());
  }
  std::sort(names.begin(), names.end());
  return names;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s(buf);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

std::string print(const Expr& e);

bool is_negative_term(const Expr& t) {
  if (t.is_numeric()) return *t.as_double() < 0;
  if (t.kind() == Kind::Product) {
    const Expr& c = t.node().children[0];
    return c.is_numeric() && *c.as_double() < 0;
  }
  return false;
}

std::string print_atom(const Expr& e) {
  switch (e.kind()) {
    case Kind::Symbol:
    case Kind::Function:
      return print(e);
    case Kind::Number:
      if (e.node().rat.is_integer() && e.node().rat.num() >= 0) return print(e);
      return "(" + print(e) + ")";
    default:
      return "(" + print(e) + ")";
  }
}

std::string print_power(const Expr& base, const Expr& x) {
  if (x.is_one()) return print_atom(base);
  std::string s = print_atom(base) + "^";
  if (x.is_number() && x.node().rat.is_integer() && x.node().rat.num() >= 0)
    s += print(x);
  else if (x.kind() == Kind::Symbol)
    s += print(x);
  else
    s += "(" + print(x) + ")";
  return s;
}

std::string print_factor(const Expr& f) {
  if (f.kind() == Kind::Power) return print_power(f.node().children[0], f.node().children[1]);
  if (f.kind() == Kind::Sum || f.kind() == Kind::Product) return "(" + print(f) + ")";
  return print(f);
}

std::string print_product(const Expr& e) {
  const auto& ch = e.node().children;
  std::string sign;
  std::vector<std::string> num, den;
  std::size_t start = 0;
  if (ch[0].is_number()) {
    Rational r = ch[0].node().rat;
    std::int64_t p = r.num();
    if (p < 0) {
      sign = "-";
      p = -p;
    }
    if (p != 1) num.push_back(std::to_string(p));
    if (r.den() != 1) den.push_back(std::to_string(r.den()));
    start = 1;
  } else if (ch[0].kind() == Kind::Float) {
    double v = ch[0].node().fval;
    if (v < 0) {
      sign = "-";
      v = -v;
    }
    num.push_back(format_double(v));
    start = 1;
  }
  for (std::size_t i = start; i < ch.size(); ++i) {
    const Expr& f = ch[i];
    if (f.kind() == Kind::Power) {
      auto xr = f.node().children[1].as_rational();
      if (xr && xr->num() < 0) {
        Rational pos(-xr->num(), xr->den());
        den.push_back(print_power(f.node().children[0], make_number(pos)));
        continue;
      }
    }
    num.push_back(print_factor(f));
  }
  std::string s = sign;
  if (num.empty()) {
    s += "1";
  } else {
    for (std::size_t i = 0; i < num.size(); ++i) s += (i ? "*" : "") + num[i];
  }
  if (!den.empty()) {
    s += "/";
    if (den.size() == 1) {
      s += den[0];
    } else {
      s += "(";
      for (std::size_t i = 0; i < den.size(); ++i) s += (i ? "*" : "") + den[i];
      s += ")";
    }
  }
  return s;
}

std::string print(const Expr& e) {
  const Node& n = e.node();
  switch (n.kind) {
    case Kind::Number: return n.rat.str();
    case Kind::Float: return format_double(n.fval);
    case Kind::Symbol: return n.name;
    case Kind::Function: return std::string(func_name(n.func)) + "(" + print(n.children[0]) + ")";
    case Kind::Power: return print_power(n.children[0], n.children[1]);
    case Kind::Product: return print_product(e);
    case Kind::Sum: {
      std::string s;
      for (std::size_t i = 0; i < n.children.size(); ++i) {
        const Expr& t = n.children[i];
        if (is_negative_term(t)) {
          s += i ? " - " : "-";
          s += print(-t);
        } else {
          if (i) s += " + ";
          s += print(t);
        }
      }
      return s;
    }
  }
  return "?";
}

}  // namespace

std::string Expr::str() const { return print(*this); }

}  // namespace conformal
