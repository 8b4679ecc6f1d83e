#pragma once

// Coefficient expressions in x, y, z: parsing, evaluation, symbolic
// differentiation and a flat compiled form for hot loops.

#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "arsgeo/dual.hpp"
#include "arsgeo/errors.hpp"

namespace ars {

using Vec3 = Eigen::Vector3d;

enum class Var : std::uint8_t { X = 0, Y = 1, Z = 2 };

// Sign is internal: it only appears as the derivative of abs.
enum class Fn : std::uint8_t { Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Tanh, Sinh, Cosh, Sign };

inline const char* fn_name(Fn f) {
  switch (f) {
    case Fn::Sin: return "sin";
    case Fn::Cos: return "cos";
    case Fn::Tan: return "tan";
    case Fn::Exp: return "exp";
    case Fn::Log: return "log";
    case Fn::Sqrt: return "sqrt";
    case Fn::Abs: return "abs";
    case Fn::Tanh: return "tanh";
    case Fn::Sinh: return "sinh";
    case Fn::Cosh: return "cosh";
    case Fn::Sign: return "sign";
  }
  return "?";
}

namespace detail {

template <class T>
T apply_fn(Fn f, const T& a) {
  using std::abs, std::cos, std::cosh, std::exp, std::log, std::sin, std::sinh, std::sqrt,
      std::tan, std::tanh;
  switch (f) {
    case Fn::Sin: return sin(a);
    case Fn::Cos: return cos(a);
    case Fn::Tan: return tan(a);
    case Fn::Exp: return exp(a);
    case Fn::Log:
      if (!(value_of(a) > 0.0)) throw EvalError("log of non-positive argument");
      return log(a);
    case Fn::Sqrt:
      if (value_of(a) < 0.0) throw EvalError("sqrt of negative argument");
      return sqrt(a);
    case Fn::Abs: return abs(a);
    case Fn::Tanh: return tanh(a);
    case Fn::Sinh: return sinh(a);
    case Fn::Cosh: return cosh(a);
    case Fn::Sign: {
      const double v = value_of(a);
      return T(v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0));
    }
  }
  return a;
}

template <class T>
T int_pow(const T& base, int n) {
  if (n < 0) {
    if (value_of(base) == 0.0) throw EvalError("division by zero");
    return T(1.0) / int_pow(base, -n);
  }
  T result(1.0);
  T b = base;
  while (n > 0) {
    if (n & 1) result = result * b;
    b = b * b;
    n >>= 1;
  }
  return result;
}

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Immutable expression tree with value semantics. Construction through the
/// arithmetic operators folds constants and drops neutral elements, so
/// derivative trees stay small.
class Expr {
public:
  enum class Kind : std::uint8_t { Const, Variable, Add, Sub, Mul, Div, Neg, Pow, Func };

  Expr() : Expr(constant(0.0)) {}

  static Expr constant(double v) { return Expr(std::make_shared<Node>(Node{Kind::Const, v})); }

  static Expr variable(Var v) {
    Node n{Kind::Variable};
    n.var = v;
    return Expr(std::make_shared<Node>(std::move(n)));
  }

  Kind kind() const { return node_->kind; }
  bool is_constant() const { return node_->kind == Kind::Const; }
  bool is_constant(double v) const { return is_constant() && node_->value == v; }
  double constant_value() const { return node_->value; }

  double operator()(const Vec3& q) const { return eval(q.x(), q.y(), q.z()); }
  double operator()(double x, double y, double z) const { return eval(x, y, z); }

  template <class T>
  T eval(const T& x, const T& y, const T& z) const {
    const std::array<const T*, 3> vars{&x, &y, &z};
    return eval_node(*node_, vars);
  }

  /// Fully parenthesized text that parses back to an equivalent expression.
  std::string str() const { return to_string(*node_); }

  friend Expr operator+(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return constant(a.constant_value() + b.constant_value());
    if (a.is_constant(0.0)) return b;
    if (b.is_constant(0.0)) return a;
    return binary(Kind::Add, a, b);
  }

  friend Expr operator-(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return constant(a.constant_value() - b.constant_value());
    if (b.is_constant(0.0)) return a;
    if (a.is_constant(0.0)) return -b;
    return binary(Kind::Sub, a, b);
  }

  friend Expr operator*(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant()) return constant(a.constant_value() * b.constant_value());
    if (a.is_constant(0.0) || b.is_constant(0.0)) return constant(0.0);
    if (a.is_constant(1.0)) return b;
    if (b.is_constant(1.0)) return a;
    if (a.is_constant(-1.0)) return -b;
    if (b.is_constant(-1.0)) return -a;
    return binary(Kind::Mul, a, b);
  }

  friend Expr operator/(const Expr& a, const Expr& b) {
    if (a.is_constant() && b.is_constant() && b.constant_value() != 0.0)
      return constant(a.constant_value() / b.constant_value());
    if (a.is_constant(0.0)) return constant(0.0);
    if (b.is_constant(1.0)) return a;
    return binary(Kind::Div, a, b);
  }

  friend Expr operator-(const Expr& a) {
    if (a.is_constant()) return constant(-a.constant_value());
    if (a.kind() == Kind::Neg) return a.child(0);
    Node n{Kind::Neg};
    n.children = {a};
    return Expr(std::make_shared<Node>(std::move(n)));
  }

  friend Expr pow(const Expr& a, int n) {
    if (n == 0) return constant(1.0);
    if (n == 1) return a;
    if (a.is_constant() && (n > 0 || a.constant_value() != 0.0))
      return constant(detail::int_pow(a.constant_value(), n));
    Node node{Kind::Pow};
    node.exponent = n;
    node.children = {a};
    return Expr(std::make_shared<Node>(std::move(node)));
  }

  friend Expr apply(Fn f, const Expr& a) {
    if (a.is_constant()) {
      try {
        return constant(detail::apply_fn(f, a.constant_value()));
      } catch (const EvalError&) {
        // keep symbolic; evaluation will raise at use
      }
    }
    Node n{Kind::Func};
    n.fn = f;
    n.children = {a};
    return Expr(std::make_shared<Node>(std::move(n)));
  }

  const Expr& child(std::size_t i) const { return node_->children[i]; }
  std::size_t arity() const { return node_->children.size(); }
  Var var() const { return node_->var; }
  Fn fn() const { return node_->fn; }
  int exponent() const { return node_->exponent; }

private:
  struct Node {
    Kind kind;
    double value = 0.0;
    Var var = Var::X;
    Fn fn = Fn::Sin;
    int exponent = 0;
    std::vector<Expr> children;
  };

  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static Expr binary(Kind k, const Expr& a, const Expr& b) {
    Node n{k};
    n.children = {a, b};
    return Expr(std::make_shared<Node>(std::move(n)));
  }

  template <class T>
  static T eval_node(const Node& n, const std::array<const T*, 3>& vars) {
    switch (n.kind) {
      case Kind::Const: return T(n.value);
      case Kind::Variable: return *vars[static_cast<int>(n.var)];
      case Kind::Add:
        return eval_node(*n.children[0].node_, vars) + eval_node(*n.children[1].node_, vars);
      case Kind::Sub:
        return eval_node(*n.children[0].node_, vars) - eval_node(*n.children[1].node_, vars);
      case Kind::Mul:
        return eval_node(*n.children[0].node_, vars) * eval_node(*n.children[1].node_, vars);
      case Kind::Div: {
        const T den = eval_node(*n.children[1].node_, vars);
        if (value_of(den) == 0.0) throw EvalError("division by zero");
        return eval_node(*n.children[0].node_, vars) / den;
      }
      case Kind::Neg: return -eval_node(*n.children[0].node_, vars);
      case Kind::Pow: return detail::int_pow(eval_node(*n.children[0].node_, vars), n.exponent);
      case Kind::Func: return detail::apply_fn(n.fn, eval_node(*n.children[0].node_, vars));
    }
    return T(0.0);
  }

  static std::string to_string(const Node& n) {
    switch (n.kind) {
      case Kind::Const: {
        const std::string s = detail::format_number(n.value);
        return n.value < 0 ? "(" + s + ")" : s;
      }
      case Kind::Variable: return std::string(1, "xyz"[static_cast<int>(n.var)]);
      case Kind::Add: return "(" + n.children[0].str() + "+" + n.children[1].str() + ")";
      case Kind::Sub: return "(" + n.children[0].str() + "-" + n.children[1].str() + ")";
      case Kind::Mul: return "(" + n.children[0].str() + "*" + n.children[1].str() + ")";
      case Kind::Div: return "(" + n.children[0].str() + "/" + n.children[1].str() + ")";
      case Kind::Neg: return "(-" + n.children[0].str() + ")";
      case Kind::Pow:
        return "(" + n.children[0].str() + "^" +
               (n.exponent < 0 ? "(" + std::to_string(n.exponent) + ")" : std::to_string(n.exponent)) +
               ")";
      case Kind::Func: return std::string(fn_name(n.fn)) + "(" + n.children[0].str() + ")";
    }
    return "?";
  }

  std::shared_ptr<const Node> node_;
};

inline Expr operator+(const Expr& a, double b) { return a + Expr::constant(b); }
inline Expr operator+(double a, const Expr& b) { return Expr::constant(a) + b; }
inline Expr operator-(const Expr& a, double b) { return a - Expr::constant(b); }
inline Expr operator-(double a, const Expr& b) { return Expr::constant(a) - b; }
inline Expr operator*(const Expr& a, double b) { return a * Expr::constant(b); }
inline Expr operator*(double a, const Expr& b) { return Expr::constant(a) * b; }
inline Expr operator/(const Expr& a, double b) { return a / Expr::constant(b); }
inline Expr operator/(double a, const Expr& b) { return Expr::constant(a) / b; }

inline Expr sin(const Expr& a) { return apply(Fn::Sin, a); }
inline Expr cos(const Expr& a) { return apply(Fn::Cos, a); }
inline Expr exp(const Expr& a) { return apply(Fn::Exp, a); }
inline Expr sqrt(const Expr& a) { return apply(Fn::Sqrt, a); }

/// Symbolic partial derivative with respect to one coordinate.
inline Expr differentiate(const Expr& e, Var v) {
  using K = Expr::Kind;
  switch (e.kind()) {
    case K::Const: return Expr::constant(0.0);
    case K::Variable: return Expr::constant(e.var() == v ? 1.0 : 0.0);
    case K::Add: return differentiate(e.child(0), v) + differentiate(e.child(1), v);
    case K::Sub: return differentiate(e.child(0), v) - differentiate(e.child(1), v);
    case K::Mul: {
      const Expr& a = e.child(0);
      const Expr& b = e.child(1);
      return differentiate(a, v) * b + a * differentiate(b, v);
    }
    case K::Div: {
      const Expr& a = e.child(0);
      const Expr& b = e.child(1);
      const Expr da = differentiate(a, v);
      const Expr db = differentiate(b, v);
      if (db.is_constant(0.0)) return da / b;
      return (da * b - a * db) / pow(b, 2);
    }
    case K::Neg: return -differentiate(e.child(0), v);
    case K::Pow: {
      const int n = e.exponent();
      return Expr::constant(n) * pow(e.child(0), n - 1) * differentiate(e.child(0), v);
    }
    case K::Func: {
      const Expr& u = e.child(0);
      const Expr du = differentiate(u, v);
      if (du.is_constant(0.0)) return Expr::constant(0.0);
      switch (e.fn()) {
        case Fn::Sin: return apply(Fn::Cos, u) * du;
        case Fn::Cos: return -(apply(Fn::Sin, u) * du);
        case Fn::Tan: return du / pow(apply(Fn::Cos, u), 2);
        case Fn::Exp: return e * du;
        case Fn::Log: return du / u;
        case Fn::Sqrt: return du / (2.0 * e);
        case Fn::Abs: return apply(Fn::Sign, u) * du;
        case Fn::Tanh: return du / pow(apply(Fn::Cosh, u), 2);
        case Fn::Sinh: return apply(Fn::Cosh, u) * du;
        case Fn::Cosh: return apply(Fn::Sinh, u) * du;
        case Fn::Sign: return Expr::constant(0.0);
      }
    }
  }
  return Expr::constant(0.0);
}

/// Flat postfix form of an Expr, evaluated on a small stack. Roughly an
/// order of magnitude faster than walking the tree.
class Program {
public:
  Program() = default;

  explicit Program(const Expr& e) {
    emit(e);
    if (code_.size() == 1 && code_[0].op == Op::Const) constant_ = code_[0].value;
  }

  bool is_constant() const { return constant_.has_value; }

  double operator()(const Vec3& q) const { return eval(q.x(), q.y(), q.z()); }

  template <class T>
  T eval(const T& x, const T& y, const T& z) const {
    if (constant_.has_value) return T(constant_.value);
    thread_local std::vector<T> stack;
    stack.clear();
    for (const Instr& ins : code_) {
      switch (ins.op) {
        case Op::Const: stack.emplace_back(ins.value); break;
        case Op::X: stack.push_back(x); break;
        case Op::Y: stack.push_back(y); break;
        case Op::Z: stack.push_back(z); break;
        case Op::Add: { T b = stack.back(); stack.pop_back(); stack.back() = stack.back() + b; break; }
        case Op::Sub: { T b = stack.back(); stack.pop_back(); stack.back() = stack.back() - b; break; }
        case Op::Mul: { T b = stack.back(); stack.pop_back(); stack.back() = stack.back() * b; break; }
        case Op::Div: {
          T b = stack.back();
          stack.pop_back();
          if (value_of(b) == 0.0) throw EvalError("division by zero");
          stack.back() = stack.back() / b;
          break;
        }
        case Op::Neg: stack.back() = -stack.back(); break;
        case Op::Pow: stack.back() = detail::int_pow(stack.back(), ins.arg); break;
        case Op::Func: stack.back() = detail::apply_fn(static_cast<Fn>(ins.arg), stack.back()); break;
      }
    }
    return stack.back();
  }

private:
  enum class Op : std::uint8_t { Const, X, Y, Z, Add, Sub, Mul, Div, Neg, Pow, Func };
  struct Instr {
    Op op;
    int arg = 0;
    double value = 0.0;
  };
  struct MaybeConst {
    bool has_value = false;
    double value = 0.0;
    MaybeConst& operator=(double v) {
      has_value = true;
      value = v;
      return *this;
    }
  };

  void emit(const Expr& e) {
    using K = Expr::Kind;
    switch (e.kind()) {
      case K::Const: code_.push_back({Op::Const, 0, e.constant_value()}); return;
      case K::Variable:
        code_.push_back({static_cast<Op>(static_cast<int>(Op::X) + static_cast<int>(e.var()))});
        return;
      case K::Add: case K::Sub: case K::Mul: case K::Div: {
        emit(e.child(0));
        emit(e.child(1));
        const Op op = e.kind() == K::Add   ? Op::Add
                      : e.kind() == K::Sub ? Op::Sub
                      : e.kind() == K::Mul ? Op::Mul
                                           : Op::Div;
        code_.push_back({op});
        return;
      }
      case K::Neg: emit(e.child(0)); code_.push_back({Op::Neg}); return;
      case K::Pow: emit(e.child(0)); code_.push_back({Op::Pow, e.exponent()}); return;
      case K::Func: emit(e.child(0)); code_.push_back({Op::Func, static_cast<int>(e.fn())}); return;
    }
  }

  std::vector<Instr> code_;
  MaybeConst constant_;
};

namespace detail {

/// Recursive-descent parser over a window [begin, end) of a larger source;
/// error positions are reported against the whole source.
class ExprParser {
public:
  ExprParser(std::string_view source, std::size_t begin, std::size_t end)
      : src_(source), pos_(begin), end_(end) {}

  Expr parse() {
    skip_ws();
    if (pos_ >= end_) fail("expected expression", pos_);
    Expr e = parse_sum();
    skip_ws();
    if (pos_ < end_) {
      if (src_[pos_] == ')') fail("unbalanced parenthesis", pos_);
      fail(std::string("unexpected character '") + src_[pos_] + "'", pos_);
    }
    return e;
  }

  [[noreturn]] void fail(const std::string& msg, std::size_t at) const {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < at && i < src_.size(); ++i) {
      if (src_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError(msg, line, col);
  }

private:
  void skip_ws() {
    while (pos_ < end_ && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < end_ && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_sum() {
    Expr lhs = parse_product();
    for (;;) {
      if (accept('+')) lhs = lhs + parse_product();
      else if (accept('-')) lhs = lhs - parse_product();
      else return lhs;
    }
  }

  Expr parse_product() {
    Expr lhs = parse_unary();
    for (;;) {
      if (accept('*')) lhs = lhs * parse_unary();
      else if (accept('/')) lhs = lhs / parse_unary();
      else return lhs;
    }
  }

  Expr parse_unary() {
    if (accept('-')) return -parse_unary();
    if (accept('+')) return parse_unary();
    return parse_power();
  }

  Expr parse_power() {
    Expr base = parse_primary();
    while (accept('^')) base = pow(base, parse_exponent());
    return base;
  }

  int parse_exponent() {
    skip_ws();
    const std::size_t start = pos_;
    const bool paren = accept('(');
    skip_ws();
    bool negative = false;
    if (pos_ < end_ && (src_[pos_] == '-' || src_[pos_] == '+')) {
      negative = src_[pos_] == '-';
      ++pos_;
    }
    skip_ws();
    const std::size_t digits = pos_;
    while (pos_ < end_ && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (pos_ == digits || pos_ - digits > 6) fail("malformed exponent", start);
    if (pos_ < end_ && (src_[pos_] == '.' || std::isalpha(static_cast<unsigned char>(src_[pos_]))))
      fail("malformed exponent", start);
    if (paren && !accept(')')) fail("malformed exponent", start);
    const int n = std::stoi(std::string(src_.substr(digits, pos_ - digits)));
    return negative ? -n : n;
  }

  Expr parse_primary() {
    skip_ws();
    if (pos_ >= end_) {
      if (!open_parens_.empty()) fail("unbalanced parenthesis", open_parens_.back());
      fail("expected expression", pos_);
    }
    const char c = src_[pos_];
    if (c == '(') {
      open_parens_.push_back(pos_);
      ++pos_;
      Expr inner = parse_sum();
      if (!accept(')')) fail("unbalanced parenthesis", open_parens_.back());
      open_parens_.pop_back();
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
    fail(std::string("unexpected character '") + c + "'", pos_);
  }

  Expr parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      const std::size_t s = pos_;
      while (pos_ < end_ && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      return pos_ - s;
    };
    std::size_t n = digits();
    if (pos_ < end_ && src_[pos_] == '.') {
      ++pos_;
      n += digits();
    }
    if (n == 0) fail("malformed number", start);
    if (pos_ < end_ && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      const std::size_t mark = pos_;
      ++pos_;
      if (pos_ < end_ && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail("malformed number", mark);
    }
    return Expr::constant(std::stod(std::string(src_.substr(start, pos_ - start))));
  }

  Expr parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < end_ &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string_view id = src_.substr(start, pos_ - start);
    if (id == "x") return Expr::variable(Var::X);
    if (id == "y") return Expr::variable(Var::Y);
    if (id == "z") return Expr::variable(Var::Z);
    if (id == "pi") return Expr::constant(std::numbers::pi);
    static constexpr std::array<std::pair<std::string_view, Fn>, 10> kFns{{
        {"sin", Fn::Sin}, {"cos", Fn::Cos}, {"tan", Fn::Tan}, {"exp", Fn::Exp},
        {"log", Fn::Log}, {"sqrt", Fn::Sqrt}, {"abs", Fn::Abs}, {"tanh", Fn::Tanh},
        {"sinh", Fn::Sinh}, {"cosh", Fn::Cosh},
    }};
    for (const auto& [name, fn] : kFns) {
      if (id != name) continue;
      skip_ws();
      if (pos_ >= end_ || src_[pos_] != '(') fail("expected '(' after " + std::string(id), pos_);
      open_parens_.push_back(pos_);
      ++pos_;
      Expr arg = parse_sum();
      if (!accept(')')) fail("unbalanced parenthesis", open_parens_.back());
      open_parens_.pop_back();
      return apply(fn, arg);
    }
    fail("unknown identifier '" + std::string(id) + "'", start);
  }

  std::string_view src_;
  std::size_t pos_;
  std::size_t end_;
  std::vector<std::size_t> open_parens_;
};

}  // namespace detail

/// Parses infix arithmetic over x, y, z with integer powers and the
/// elementary functions. Throws ParseError.
inline Expr parse_expression(std::string_view text) {
  return detail::ExprParser(text, 0, text.size()).parse();
}

}  // namespace ars
