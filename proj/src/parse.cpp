#include "conformal/expr.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

namespace conformal {

ParseError::ParseError(std::size_t offset, const std::string& msg)
    : std::runtime_error("parse error at offset " + std::to_string(offset) + ": " + msg), offset_(offset) {}

namespace {

// Recursive descent. Precedence from loosest: + -, * /, unary -, ^ (right
// associative). The exponent of ^ may itself carry a unary sign.
class Parser {
 public:
  explicit Parser(std::string_view s) : s_(s) {}

  Expr run() {
    Expr e = expr();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(pos_, msg); }

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  Expr expr() {
    std::vector<Expr> terms{term()};
    for (;;) {
      if (accept('+'))
        terms.push_back(term());
      else if (accept('-'))
        terms.push_back(-term());
      else
        break;
    }
    return terms.size() == 1 ? terms[0] : add(std::move(terms));
  }

  Expr term() {
    Expr acc = unary();
    for (;;) {
      if (accept('*')) {
        acc = acc * unary();
      } else if (accept('/')) {
        std::size_t at = pos_;
        Expr d = unary();
        if (d.is_zero()) {
          pos_ = at;
          fail("division by literal zero");
        }
        acc = acc / d;
      } else {
        break;
      }
    }
    return acc;
  }

  Expr unary() {
    if (accept('-')) return -unary();
    if (accept('+')) return unary();
    return power();
  }

  Expr power() {
    Expr base = primary();
    if (accept('^')) {
      Expr e = unary();
      return pow(base, e);
    }
    return base;
  }

  Expr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      std::string name(s_.substr(start, pos_ - start));
      skip();
      if (pos_ < s_.size() && s_[pos_] == '(') {
        ++pos_;
        Expr arg = expr();
        expect(')');
        if (name == "sqrt") return sqrt(arg);
        auto f = func_from_name(name);
        if (!f) {
          pos_ = start;
          fail("unknown function '" + name + "'");
        }
        return apply(*f, arg);
      }
      return Expr::symbol(name);
    }
    fail(std::string("unexpected '") + c + "'");
  }

  Expr number() {
    std::size_t start = pos_;
    bool decimal = false;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      decimal = true;
      ++pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }
    if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
      std::size_t save = pos_;
      ++pos_;
      if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        decimal = true;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    std::string_view tok = s_.substr(start, pos_ - start);
    if (tok == ".") {
      pos_ = start;
      fail("malformed number");
    }
    if (!decimal) {
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec == std::errc() && p == tok.data() + tok.size()) return Expr::number(Rational(v));
    }
    std::string buf(tok);
    char* end = nullptr;
    double v = std::strtod(buf.c_str(), &end);
    if (end != buf.c_str() + buf.size()) {
      pos_ = start;
      fail("malformed number");
    }
    return Expr::floating(v);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

Expr parse(std::string_view text) { return Parser(text).run(); }

}  // namespace conformal
