#pragma once

// Small arithmetic expression language for custom kinetics:
// numbers, variables, + - * / ^, unary minus, exp log sin cos sqrt, parentheses.

#include <cctype>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "errors.hpp"

namespace swtaxis {

class Expression {
 public:
  Expression() = default;

  // variables are bound by position at evaluation time; constants are folded in.
  Expression(const std::string& text, const std::vector<std::string>& variables,
             const std::map<std::string, double>& constants = {})
      : text_(text) {
    Parser p{text, variables, constants, 0, nodes_};
    root_ = p.parse_expr();
    p.skip_space();
    if (p.pos != text.size()) p.fail("unexpected '" + std::string(1, text[p.pos]) + "'");
  }

  double operator()(const std::vector<double>& vars) const { return eval(root_, vars.data()); }
  double operator()(double a, double b) const {
    const double v[2] = {a, b};
    return eval(root_, v);
  }

  const std::string& text() const { return text_; }

 private:
  enum class Op { number, variable, add, sub, mul, div, pow, neg, exp, log, sin, cos, sqrt };
  struct Node {
    Op op;
    double value = 0.0;
    int var = 0;
    int lhs = -1, rhs = -1;
  };

  struct Parser {
    const std::string& s;
    const std::vector<std::string>& vars;
    const std::map<std::string, double>& consts;
    std::size_t pos;
    std::vector<Node>& nodes;

    [[noreturn]] void fail(const std::string& what) const {
      throw ConfigError("expression '" + s + "' at column " + std::to_string(pos + 1) + ": " + what);
    }
    void skip_space() {
      while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    }
    bool accept(char c) {
      skip_space();
      if (pos < s.size() && s[pos] == c) {
        ++pos;
        return true;
      }
      return false;
    }
    int add(Node n) {
      nodes.push_back(n);
      return static_cast<int>(nodes.size()) - 1;
    }

    int parse_expr() {
      int lhs = parse_term();
      for (;;) {
        if (accept('+')) lhs = add({Op::add, 0.0, 0, lhs, parse_term()});
        else if (accept('-')) lhs = add({Op::sub, 0.0, 0, lhs, parse_term()});
        else return lhs;
      }
    }
    int parse_term() {
      int lhs = parse_unary();
      for (;;) {
        if (accept('*')) lhs = add({Op::mul, 0.0, 0, lhs, parse_unary()});
        else if (accept('/')) lhs = add({Op::div, 0.0, 0, lhs, parse_unary()});
        else return lhs;
      }
    }
    int parse_unary() {
      if (accept('-')) return add({Op::neg, 0.0, 0, parse_unary(), -1});
      if (accept('+')) return parse_unary();
      return parse_power();
    }
    int parse_power() {
      int base = parse_primary();
      if (accept('^')) return add({Op::pow, 0.0, 0, base, parse_unary()});
      return base;
    }
    int parse_primary() {
      skip_space();
      if (pos >= s.size()) fail("unexpected end of input");
      if (accept('(')) {
        int e = parse_expr();
        if (!accept(')')) fail("expected ')'");
        return e;
      }
      const char c = s[pos];
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(s.substr(pos), &used);
        } catch (const std::exception&) {
          fail("bad number");
        }
        pos += used;
        return add({Op::number, v});
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        const std::size_t start = pos;
        while (pos < s.size() && (std::isalnum(static_cast<unsigned char>(s[pos])) || s[pos] == '_')) ++pos;
        const std::string name = s.substr(start, pos - start);
        static const std::map<std::string, Op> functions{
            {"exp", Op::exp}, {"log", Op::log}, {"sin", Op::sin}, {"cos", Op::cos}, {"sqrt", Op::sqrt}};
        if (auto fn = functions.find(name); fn != functions.end()) {
          if (!accept('(')) fail("expected '(' after " + name);
          int arg = parse_expr();
          if (!accept(')')) fail("expected ')'");
          return add({fn->second, 0.0, 0, arg, -1});
        }
        for (std::size_t i = 0; i < vars.size(); ++i)
          if (vars[i] == name) return add({Op::variable, 0.0, static_cast<int>(i)});
        if (auto it = consts.find(name); it != consts.end()) return add({Op::number, it->second});
        pos = start;
        fail("unknown name '" + name + "'");
      }
      fail("unexpected '" + std::string(1, c) + "'");
    }
  };

  double eval(int i, const double* v) const {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    switch (n.op) {
      case Op::number: return n.value;
      case Op::variable: return v[n.var];
      case Op::add: return eval(n.lhs, v) + eval(n.rhs, v);
      case Op::sub: return eval(n.lhs, v) - eval(n.rhs, v);
      case Op::mul: return eval(n.lhs, v) * eval(n.rhs, v);
      case Op::div: return eval(n.lhs, v) / eval(n.rhs, v);
      case Op::pow: return std::pow(eval(n.lhs, v), eval(n.rhs, v));
      case Op::neg: return -eval(n.lhs, v);
      case Op::exp: return std::exp(eval(n.lhs, v));
      case Op::log: return std::log(eval(n.lhs, v));
      case Op::sin: return std::sin(eval(n.lhs, v));
      case Op::cos: return std::cos(eval(n.lhs, v));
      case Op::sqrt: return std::sqrt(eval(n.lhs, v));
    }
    return 0.0;
  }

  std::string text_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

}  // namespace swtaxis
