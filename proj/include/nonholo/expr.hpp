#pragma once

// A small expression language for Lagrangians, constraints and potentials.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | power
//   power   := primary ('^' unary)?          right-associative
//   primary := number | name | name '(' expr ')' | '(' expr ')'
//
// Names matching x<k>, xb<k>, y<k>, yb<k> (k >= 1) or `t` are chart
// variables; every other name is a parameter. Evaluation is generic over
// the scalar type, so the same tree gives values or jets.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "nonholo/errors.hpp"
#include "nonholo/scalar.hpp"

namespace nonholo::expr {

enum class Op { Num, Var, Param, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Fn { Sqrt, Sin, Cos, Tan, Exp, Log, Abs };

struct Node {
  Op op = Op::Num;
  double number = 0.0;
  std::string name;
  Fn fn = Fn::Sqrt;
  std::shared_ptr<const Node> lhs;
  std::shared_ptr<const Node> rhs;
};

using NodePtr = std::shared_ptr<const Node>;

inline std::optional<Fn> function_from_name(std::string_view name) {
  if (name == "sqrt") return Fn::Sqrt;
  if (name == "sin") return Fn::Sin;
  if (name == "cos") return Fn::Cos;
  if (name == "tan") return Fn::Tan;
  if (name == "exp") return Fn::Exp;
  if (name == "log") return Fn::Log;
  if (name == "abs") return Fn::Abs;
  return std::nullopt;
}

inline const char* function_name(Fn fn) {
  switch (fn) {
    case Fn::Sqrt: return "sqrt";
    case Fn::Sin: return "sin";
    case Fn::Cos: return "cos";
    case Fn::Tan: return "tan";
    case Fn::Exp: return "exp";
    case Fn::Log: return "log";
    case Fn::Abs: return "abs";
  }
  return "?";
}

/// True for chart variable names: t, x<k>, xb<k>, y<k>, yb<k>.
inline bool is_chart_variable(std::string_view name) {
  if (name == "t") return true;
  std::string_view rest;
  if (name.starts_with("xb") || name.starts_with("yb")) {
    rest = name.substr(2);
  } else if (name.starts_with("x") || name.starts_with("y")) {
    rest = name.substr(1);
  } else {
    return false;
  }
  if (rest.empty() || rest.front() == '0') return false;
  for (char c : rest) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

/// Shortest decimal text that reads back to the same double.
inline std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error("number formatting failed");
  return std::string(buf, end);
}

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  NodePtr parse() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("empty expression", pos_);
    NodePtr e = parse_expr();
    skip_ws();
    if (pos_ != src_.size()) throw ParseError("unexpected character '" + std::string(1, src_[pos_]) + "'", pos_);
    return e;
  }

 private:
  static NodePtr make(Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    return n;
  }

  void skip_ws() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' || src_[pos_] == '\r')) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr parse_expr() {
    NodePtr lhs = parse_term();
    for (;;) {
      if (accept('+')) {
        lhs = make(Op::Add, lhs, parse_term());
      } else if (accept('-')) {
        lhs = make(Op::Sub, lhs, parse_term());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_unary();
    for (;;) {
      if (accept('*')) {
        lhs = make(Op::Mul, lhs, parse_unary());
      } else if (accept('/')) {
        lhs = make(Op::Div, lhs, parse_unary());
      } else {
        return lhs;
      }
    }
  }

  NodePtr parse_unary() {
    if (accept('-')) return make(Op::Neg, parse_unary());
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_primary();
    if (accept('^')) return make(Op::Pow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary() {
    skip_ws();
    if (pos_ >= src_.size()) throw ParseError("unexpected end of expression", pos_);
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      NodePtr e = parse_expr();
      if (!accept(')')) throw ParseError("expected ')'", pos_);
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.') return parse_number();
    if (is_ident_start(c)) {
      const std::size_t start = pos_;
      while (pos_ < src_.size() && is_ident_char(src_[pos_])) ++pos_;
      std::string name(src_.substr(start, pos_ - start));
      skip_ws();
      if (pos_ < src_.size() && src_[pos_] == '(') {
        auto fn = function_from_name(name);
        if (!fn) throw UnknownFunction(name, start);
        ++pos_;
        NodePtr arg = parse_expr();
        if (!accept(')')) throw ParseError("expected ')'", pos_);
        auto n = std::make_shared<Node>();
        n->op = Op::Call;
        n->fn = *fn;
        n->lhs = std::move(arg);
        return n;
      }
      auto n = std::make_shared<Node>();
      n->op = is_chart_variable(name) ? Op::Var : Op::Param;
      n->name = std::move(name);
      return n;
    }
    throw ParseError("unexpected character '" + std::string(1, c) + "'", pos_);
  }

  NodePtr parse_number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && ((src_[pos_] >= '0' && src_[pos_] <= '9') || src_[pos_] == '.')) ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
      if (p < src_.size() && src_[p] >= '0' && src_[p] <= '9') {
        pos_ = p;
        while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9') ++pos_;
      }
    }
    double v = 0.0;
    const char* first = src_.data() + start;
    const char* last = src_.data() + pos_;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last) throw ParseError("malformed number", start);
    auto n = std::make_shared<Node>();
    n->op = Op::Num;
    n->number = v;
    return n;
  }

  static bool is_ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
  static bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

  std::string_view src_;
  std::size_t pos_ = 0;
};

template <typename S>
S apply_function(Fn fn, const S& a) {
  using std::abs;
  using std::cos;
  using std::exp;
  using std::log;
  using std::sin;
  using std::sqrt;
  using std::tan;
  switch (fn) {
    case Fn::Sqrt:
      if (scalar_value(a) < 0.0) throw DomainError("sqrt of a negative number");
      return sqrt(a);
    case Fn::Sin: return sin(a);
    case Fn::Cos: return cos(a);
    case Fn::Tan: return tan(a);
    case Fn::Exp: return exp(a);
    case Fn::Log:
      if (scalar_value(a) <= 0.0) throw DomainError("log of a non-positive number");
      return log(a);
    case Fn::Abs: return abs(a);
  }
  throw Error("unreachable");
}

template <typename S>
S apply_binary(Op op, const S& a, const S& b) {
  using std::pow;
  switch (op) {
    case Op::Add: return a + b;
    case Op::Sub: return a - b;
    case Op::Mul: return a * b;
    case Op::Div:
      if (scalar_value(b) == 0.0) throw DomainError("division by zero");
      return a / b;
    case Op::Pow: return pow(a, b);
    default: throw Error("not a binary operator");
  }
}

inline int precedence(Op op) {
  switch (op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    default: return 5;
  }
}

inline void print(const Node& n, std::string& out) {
  auto child = [&](const NodePtr& c, bool wrap) {
    if (wrap) out += '(';
    print(*c, out);
    if (wrap) out += ')';
  };
  switch (n.op) {
    case Op::Num: out += format_number(n.number); return;
    case Op::Var:
    case Op::Param: out += n.name; return;
    case Op::Call:
      out += function_name(n.fn);
      out += '(';
      print(*n.lhs, out);
      out += ')';
      return;
    case Op::Neg:
      out += '-';
      child(n.lhs, precedence(n.lhs->op) < precedence(Op::Neg));
      return;
    case Op::Pow:
      // Base binds tighter than any operator; exponent may be a unary.
      child(n.lhs, precedence(n.lhs->op) <= precedence(Op::Pow));
      out += '^';
      child(n.rhs, precedence(n.rhs->op) < precedence(Op::Neg));
      return;
    default: {
      const int p = precedence(n.op);
      const char sym = n.op == Op::Add ? '+' : n.op == Op::Sub ? '-' : n.op == Op::Mul ? '*' : '/';
      child(n.lhs, precedence(n.lhs->op) < p);
      out += sym;
      // Left-associative: an equal-precedence right operand needs parentheses.
      child(n.rhs, precedence(n.rhs->op) <= p);
      return;
    }
  }
}

inline bool equal(const Node& a, const Node& b) {
  if (a.op != b.op) return false;
  switch (a.op) {
    case Op::Num: return a.number == b.number || (std::isnan(a.number) && std::isnan(b.number));
    case Op::Var:
    case Op::Param: return a.name == b.name;
    case Op::Call: return a.fn == b.fn && equal(*a.lhs, *b.lhs);
    case Op::Neg: return equal(*a.lhs, *b.lhs);
    default: return equal(*a.lhs, *b.lhs) && equal(*a.rhs, *b.rhs);
  }
}

inline void collect(const Node& n, std::set<std::string>& vars, std::set<std::string>& params, bool& nonsmooth) {
  switch (n.op) {
    case Op::Num: return;
    case Op::Var: vars.insert(n.name); return;
    case Op::Param: params.insert(n.name); return;
    case Op::Call:
      if (n.fn == Fn::Abs) nonsmooth = true;
      collect(*n.lhs, vars, params, nonsmooth);
      return;
    case Op::Neg: collect(*n.lhs, vars, params, nonsmooth); return;
    default:
      collect(*n.lhs, vars, params, nonsmooth);
      collect(*n.rhs, vars, params, nonsmooth);
      return;
  }
}

}  // namespace detail

/// Immutable parsed expression.
class Expr {
 public:
  Expr() = default;
  explicit Expr(NodePtr root) : root_(std::move(root)) {}

  static Expr parse(std::string_view source) { return Expr(detail::Parser(source).parse()); }

  const Node& root() const { return *root_; }
  bool empty() const { return root_ == nullptr; }

  std::string to_string() const {
    std::string out;
    detail::print(*root_, out);
    return out;
  }

  bool structurally_equal(const Expr& other) const { return detail::equal(*root_, *other.root_); }

  std::set<std::string> variables() const {
    std::set<std::string> v, p;
    bool ns = false;
    detail::collect(*root_, v, p, ns);
    return v;
  }
  std::set<std::string> parameters() const {
    std::set<std::string> v, p;
    bool ns = false;
    detail::collect(*root_, v, p, ns);
    return p;
  }
  /// Uses a function that is not differentiable everywhere (abs).
  bool uses_nonsmooth() const {
    std::set<std::string> v, p;
    bool ns = false;
    detail::collect(*root_, v, p, ns);
    return ns;
  }

  /// Evaluates with every name looked up in env.
  template <typename S>
  S eval(const std::map<std::string, S>& env) const {
    return eval_node<S>(*root_, env);
  }

 private:
  template <typename S>
  static S eval_node(const Node& n, const std::map<std::string, S>& env) {
    switch (n.op) {
      case Op::Num: return S(n.number);
      case Op::Var:
      case Op::Param: {
        auto it = env.find(n.name);
        if (it == env.end()) throw UnboundName(n.name);
        return it->second;
      }
      case Op::Neg: return -eval_node<S>(*n.lhs, env);
      case Op::Call: return detail::apply_function(n.fn, eval_node<S>(*n.lhs, env));
      default: return detail::apply_binary(n.op, eval_node<S>(*n.lhs, env), eval_node<S>(*n.rhs, env));
    }
  }

  NodePtr root_;
};

/// Expression compiled to a postfix program whose variables read from a slot
/// array and whose parameters are folded to numbers.
class Program {
 public:
  using SlotLookup = std::function<std::optional<std::size_t>(const std::string&)>;

  Program() = default;

  static Program compile(const Expr& e, const SlotLookup& slot_of,
                         const std::map<std::string, double>& params) {
    Program p;
    p.emit(e.root(), slot_of, params);
    return p;
  }

  template <typename S>
  S operator()(std::span<const S> slots) const {
    std::vector<S> stack;
    stack.reserve(code_.size());
    for (const auto& ins : code_) {
      switch (ins.op) {
        case Op::Num: stack.emplace_back(S(ins.number)); break;
        case Op::Var: stack.push_back(slots[ins.slot]); break;
        case Op::Neg: stack.back() = -stack.back(); break;
        case Op::Call: stack.back() = detail::apply_function(ins.fn, stack.back()); break;
        default: {
          S rhs = std::move(stack.back());
          stack.pop_back();
          stack.back() = detail::apply_binary(ins.op, stack.back(), rhs);
          break;
        }
      }
    }
    return std::move(stack.back());
  }

 private:
  struct Instr {
    Op op;
    double number = 0.0;
    std::size_t slot = 0;
    Fn fn = Fn::Sqrt;
  };

  void emit(const Node& n, const SlotLookup& slot_of, const std::map<std::string, double>& params) {
    switch (n.op) {
      case Op::Num: code_.push_back({Op::Num, n.number}); return;
      case Op::Var:
      case Op::Param: {
        if (auto s = slot_of(n.name)) {
          code_.push_back({Op::Var, 0.0, *s});
          return;
        }
        auto it = params.find(n.name);
        if (it == params.end()) throw UnboundName(n.name);
        code_.push_back({Op::Num, it->second});
        return;
      }
      case Op::Neg:
        emit(*n.lhs, slot_of, params);
        code_.push_back({Op::Neg});
        return;
      case Op::Call:
        emit(*n.lhs, slot_of, params);
        code_.push_back({Op::Call, 0.0, 0, n.fn});
        return;
      default:
        emit(*n.lhs, slot_of, params);
        emit(*n.rhs, slot_of, params);
        code_.push_back({n.op});
        return;
    }
  }

  std::vector<Instr> code_;
};

}  // namespace nonholo::expr
