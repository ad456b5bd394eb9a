#include <doctest.h>

#include <cmath>

#include "conformal/expr.hpp"

using namespace conformal;

namespace {

// central difference, step chosen for ~1e-10 accuracy on smooth inputs
double fd(const Expr& e, const std::string& var, Bindings b) {
  const double h = 1e-5;
  const double x = b[var];
  b[var] = x + h;
  const double p = eval(e, b);
  b[var] = x - h;
  const double m = eval(e, b);
  return (p - m) / (2 * h);
}

}  // namespace

TEST_CASE("canonical forms are shared") {
  CHECK(parse("x + y") == parse("y + x"));
  CHECK(parse("2*x + 3*x") == parse("5*x"));
  CHECK(parse("x - x").is_zero());
  CHECK(parse("x*y*x") == parse("x^2*y"));
  CHECK(parse("(x^2)^3") == parse("x^6"));
  CHECK(parse("2^-1") == Expr(Rational(1, 2)));
  CHECK(parse("6/4").as_rational() == Rational(3, 2));
}

TEST_CASE("printing round-trips through the parser") {
  for (const char* s : {"r^2/(1 + (x^2 + y^2)/4)^2", "-1/2 + m/r", "sqrt(x)*y^(-3/2)", "exp(2*log(r))", "-x^2",
                        "1.5e3*x - 0.25", "-3*m/(2*r^2)", "sin(u)*cos(u)^2 + (u - 1)^(1/3)", "(a + b)*(a - b)"}) {
    const Expr e = parse(s);
    INFO(s << " printed as " << e.str());
    CHECK(parse(e.str()) == e);
  }
}

TEST_CASE("parse errors carry the offset") {
  CHECK_THROWS_AS(parse("(x"), ParseError);
  CHECK_THROWS_AS(parse("foo(x)"), ParseError);
  CHECK_THROWS_AS(parse("x +"), ParseError);
  try {
    parse("x + * y");
    FAIL("no throw");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
  }
}

TEST_CASE("derivatives agree with finite differences") {
  const Bindings b{{"x", 0.7}, {"y", 1.3}, {"r", 2.1}};
  for (const char* s : {"x^3*y - y^(1/2)/x", "exp(x*y)*log(r)", "sin(x)^2*cos(y*r)", "r^2/(1 + (x^2 + y^2)/4)^2",
                        "(x + y)^(-5/2)*r^(1/3)"}) {
    const Expr e = parse(s);
    for (const char* v : {"x", "y", "r"}) {
      INFO(s << " d/d" << v);
      const double exact = eval(diff(e, v), b);
      CHECK(exact == doctest::Approx(fd(e, v, b)).epsilon(1e-8));
    }
  }
}

TEST_CASE("derivative rules") {
  const Expr x = Expr::symbol("x");
  CHECK(diff(parse("x^5"), x) == parse("5*x^4"));
  CHECK(diff(parse("exp(x)"), x) == parse("exp(x)"));
  CHECK(diff(parse("log(x)"), x) == parse("1/x"));
  CHECK(diff(parse("y^2"), x).is_zero());
  DiffCache cache;
  const Expr e = parse("x^2*sin(x)");
  CHECK(cache.diff(e, x) == diff(e, x));
  CHECK(cache.diff(e, x) == cache.diff(e, x));
}

TEST_CASE("simplify and substitute") {
  CHECK(simplify(parse("sqrt(x)*sqrt(x)")) == parse("x"));
  CHECK(substitute(parse("m/r + m"), {{"m", Expr(2)}}) == parse("2/r + 2"));
  CHECK(free_symbols(parse("a*b + exp(c) + 1")) == std::vector<std::string>{"a", "b", "c"});
}

TEST_CASE("compiled tape matches direct evaluation") {
  std::vector<Expr> outs{parse("x^2*y + exp(x)"), parse("sqrt(x + y)/r"), parse("log(r)*x^(-3) + sin(y)")};
  EvalProgram p = compile(outs);
  const Bindings b{{"x", 0.9}, {"y", 0.4}, {"r", 1.7}};
  auto v = p.run(b);
  REQUIRE(v.size() == 3);
  for (std::size_t i = 0; i < outs.size(); ++i) CHECK(v[i] == doctest::Approx(eval(outs[i], b)).epsilon(1e-14));

  std::vector<std::string> vars{"x", "y", "r"};
  std::vector<double> vals(3), grads(9);
  p.run_jet(b, vars, vals, grads);
  for (std::size_t i = 0; i < outs.size(); ++i)
    for (std::size_t k = 0; k < vars.size(); ++k)
      CHECK(grads[i * 3 + k] == doctest::Approx(eval(diff(outs[i], vars[k]), b)).epsilon(1e-12));
}

TEST_CASE("domain errors name the point") {
  CHECK_THROWS_AS(eval(parse("1/r"), {{"r", 0.0}}), DomainError);
  CHECK_THROWS_AS(eval(parse("log(r)"), {{"r", -1.0}}), DomainError);
  CHECK_THROWS_AS(eval(parse("(r - 2)^(1/2)"), {{"r", 1.0}}), DomainError);
  CHECK_THROWS_AS(eval(parse("x + q"), {{"x", 1.0}}), EvalError);
  try {
    eval(parse("1/r"), {{"r", 0.0}});
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("r=0") != std::string::npos);
  }
}

TEST_CASE("rational arithmetic is exact") {
  Rational a(1, 3), b(1, 6);
  CHECK(a + b == Rational(1, 2));
  CHECK(a * b == Rational(1, 18));
  CHECK(eval(parse("1/3 + 1/6"), {}) == 0.5);
}
