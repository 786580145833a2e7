#pragma once

#include <charconv>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "niqc/errors.hpp"

// Arithmetic expressions over state and input variables, used to describe
// nonlinear dynamics. Grammar:
//
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/') factor)*
//   factor := base ('^' unsigned-integer)?
//   base   := number | var | func '(' expr ')' | '(' expr ')' | '-' base
//
// with var one of x1..x9, u1..u9 and func one of sin, cos, tanh, exp, abs,
// sqrt. Parsing compiles to a small postfix program so evaluation inside the
// integrator inner loop is just a flat array walk.

namespace niqc::expr {

class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " (at offset " + std::to_string(position) + ")"),
        position_(position) {}
  std::size_t position() const { return position_; }

private:
  std::size_t position_;
};

class EvaluationError : public Error {
public:
  using Error::Error;
};

class Expression {
public:
  static Expression parse(std::string_view text) {
    Parser p{text, 0};
    Expression e;
    e.text_ = std::string(text);
    p.parse_expr(e);
    p.skip_ws();
    if (p.pos != text.size())
      throw ParseError("unexpected trailing input", p.pos);
    return e;
  }

  double eval(std::span<const double> x, std::span<const double> u) const {
    double stack[64];
    int top = -1;
    for (const Instr& in : prog_) {
      switch (in.op) {
        case Op::push_const: stack[++top] = in.value; break;
        case Op::push_x: stack[++top] = x[in.index]; break;
        case Op::push_u: stack[++top] = u[in.index]; break;
        case Op::add: --top; stack[top] += stack[top + 1]; break;
        case Op::sub: --top; stack[top] -= stack[top + 1]; break;
        case Op::mul: --top; stack[top] *= stack[top + 1]; break;
        case Op::div: {
          --top;
          const double den = stack[top + 1];
          if (std::abs(den) < 1e-300)
            throw EvaluationError("division by zero in '" + text_ + "'");
          stack[top] /= den;
          break;
        }
        case Op::neg: stack[top] = -stack[top]; break;
        case Op::pow_int: {
          double base = stack[top], r = 1.0;
          for (int e = in.index; e > 0; e >>= 1) {
            if (e & 1) r *= base;
            base *= base;
          }
          stack[top] = r;
          break;
        }
        case Op::f_sin: stack[top] = std::sin(stack[top]); break;
        case Op::f_cos: stack[top] = std::cos(stack[top]); break;
        case Op::f_tanh: stack[top] = std::tanh(stack[top]); break;
        case Op::f_exp: stack[top] = std::exp(stack[top]); break;
        case Op::f_abs: stack[top] = std::abs(stack[top]); break;
        case Op::f_sqrt:
          if (stack[top] < 0)
            throw EvaluationError("sqrt of negative value in '" + text_ + "'");
          stack[top] = std::sqrt(stack[top]);
          break;
      }
    }
    const double r = stack[0];
    if (!std::isfinite(r))
      throw EvaluationError("non-finite value from '" + text_ + "'");
    return r;
  }

  // Highest 1-based variable index referenced; 0 when the class is unused.
  int max_state_index() const { return max_x_; }
  int max_input_index() const { return max_u_; }
  bool references_input() const { return max_u_ > 0; }
  const std::string& text() const { return text_; }

private:
  enum class Op : unsigned char {
    push_const, push_x, push_u, add, sub, mul, div, neg, pow_int,
    f_sin, f_cos, f_tanh, f_exp, f_abs, f_sqrt,
  };
  struct Instr {
    Op op;
    double value = 0;
    int index = 0;
  };

  std::vector<Instr> prog_;
  std::string text_;
  int max_x_ = 0;
  int max_u_ = 0;

  struct Parser {
    std::string_view s;
    std::size_t pos;

    void skip_ws() {
      while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t')) ++pos;
    }
    char peek() {
      skip_ws();
      return pos < s.size() ? s[pos] : '\0';
    }

    void parse_expr(Expression& e) {
      parse_term(e);
      while (true) {
        const char c = peek();
        if (c != '+' && c != '-') break;
        ++pos;
        parse_term(e);
        e.prog_.push_back({c == '+' ? Op::add : Op::sub});
      }
    }

    void parse_term(Expression& e) {
      parse_factor(e);
      while (true) {
        const char c = peek();
        if (c != '*' && c != '/') break;
        ++pos;
        parse_factor(e);
        e.prog_.push_back({c == '*' ? Op::mul : Op::div});
      }
    }

    void parse_factor(Expression& e) {
      parse_base(e);
      if (peek() == '^') {
        ++pos;
        skip_ws();
        const std::size_t start = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        if (pos == start)
          throw ParseError("expected unsigned integer exponent", start);
        int exp = 0;
        std::from_chars(s.data() + start, s.data() + pos, exp);
        e.prog_.push_back({Op::pow_int, 0.0, exp});
      }
    }

    void parse_base(Expression& e) {
      const char c = peek();
      const std::size_t at = pos;
      if (c == '\0') throw ParseError("expected expression", at);
      if (c == '-') {
        ++pos;
        parse_base(e);
        e.prog_.push_back({Op::neg});
        return;
      }
      if (c == '(') {
        ++pos;
        parse_expr(e);
        if (peek() != ')') throw ParseError("expected ')'", pos);
        ++pos;
        return;
      }
      if ((c >= '0' && c <= '9') || c == '.') {
        double v = 0;
        const auto [ptr, ec] =
            std::from_chars(s.data() + pos, s.data() + s.size(), v);
        if (ec != std::errc{}) throw ParseError("malformed number", at);
        pos = static_cast<std::size_t>(ptr - s.data());
        e.prog_.push_back({Op::push_const, v});
        return;
      }
      if (c >= 'a' && c <= 'z') {
        std::size_t end = pos;
        while (end < s.size() && s[end] >= 'a' && s[end] <= 'z') ++end;
        const std::string_view word = s.substr(pos, end - pos);
        // variable: single letter x/u followed by one digit 1..9
        if ((word == "x" || word == "u") && end < s.size() && s[end] >= '1' &&
            s[end] <= '9') {
          const int idx = s[end] - '1';
          pos = end + 1;
          if (word == "x") {
            e.prog_.push_back({Op::push_x, 0.0, idx});
            e.max_x_ = std::max(e.max_x_, idx + 1);
          } else {
            e.prog_.push_back({Op::push_u, 0.0, idx});
            e.max_u_ = std::max(e.max_u_, idx + 1);
          }
          return;
        }
        Op fop;
        if (word == "sin") fop = Op::f_sin;
        else if (word == "cos") fop = Op::f_cos;
        else if (word == "tanh") fop = Op::f_tanh;
        else if (word == "exp") fop = Op::f_exp;
        else if (word == "abs") fop = Op::f_abs;
        else if (word == "sqrt") fop = Op::f_sqrt;
        else throw ParseError("unknown identifier '" + std::string(word) + "'", at);
        pos = end;
        if (peek() != '(') throw ParseError("expected '(' after function", pos);
        ++pos;
        parse_expr(e);
        if (peek() != ')') throw ParseError("expected ')'", pos);
        ++pos;
        e.prog_.push_back({fop});
        return;
      }
      throw ParseError(std::string("unexpected character '") + c + "'", at);
    }
  };
};

}  // namespace niqc::expr
