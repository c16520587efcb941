#include "nsift/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>

#include "nsift/detail/forward.hpp"

namespace nsift {

namespace {

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { kNumber, kIdent, kString, kSymbol, kEnd };

struct Token {
  Tok kind = Tok::kEnd;
  std::string text;
  double number = 0.0;
  char sym = 0;
  int line = 1;
  int col = 1;
};

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t k) {
    for (std::size_t j = 0; j < k; ++j) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    const char c = src[i];
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c)) || c == ';') {
      advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && i + 1 < src.size() &&
                                                        std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i;
      while (j < src.size() && (std::isdigit(static_cast<unsigned char>(src[j])) || src[j] == '.')) ++j;
      if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
        if (k < src.size() && std::isdigit(static_cast<unsigned char>(src[k]))) {
          j = k;
          while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
        }
      }
      t.kind = Tok::kNumber;
      t.text = std::string(src.substr(i, j - i));
      char* end = nullptr;
      t.number = std::strtod(t.text.c_str(), &end);
      if (end != t.text.c_str() + t.text.size()) {
        throw ParseError(ParseError::Kind::kSyntax, line, col, "malformed number '" + t.text + "'");
      }
      advance(j - i);
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = i;
      while (j < src.size() && (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_')) ++j;
      t.kind = Tok::kIdent;
      t.text = std::string(src.substr(i, j - i));
      advance(j - i);
    } else if (c == '"') {
      std::size_t j = i + 1;
      while (j < src.size() && src[j] != '"' && src[j] != '\n') ++j;
      if (j >= src.size() || src[j] != '"') {
        throw ParseError(ParseError::Kind::kSyntax, line, col, "unterminated string");
      }
      t.kind = Tok::kString;
      t.text = std::string(src.substr(i + 1, j - i - 1));
      advance(j - i + 1);
    } else if (std::string_view("+-*/^()[],=").find(c) != std::string_view::npos) {
      t.kind = Tok::kSymbol;
      t.sym = c;
      t.text = std::string(1, c);
      advance(1);
    } else {
      throw ParseError(ParseError::Kind::kSyntax, line, col, std::string("unexpected character '") + c + "'");
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.kind = Tok::kEnd;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------------------
// Parser

struct VarRef {
  int node;
  int line;
  int col;
};

class Parser {
 public:
  Parser(std::string_view text, const std::map<std::string, double>& overrides)
      : toks_(lex(text)), overrides_(overrides) {}

  ProblemDef run() {
    std::map<int, int> comp_by_index;  // 1-based component -> node
    std::map<int, Token> comp_tok;
    bool have_n = false;
    while (peek().kind != Tok::kEnd) {
      const Token head = expect_ident("statement");
      if (head.text == "param") {
        const Token name = expect_ident("parameter name");
        expect_sym('=');
        double v = constant_expression();
        if (auto it = overrides_.find(name.text); it != overrides_.end()) {
          v = it->second;
          used_overrides_.insert(name.text);
        }
        p_.params[name.text] = v;
        continue;
      }
      expect_sym('=');
      if (head.text == "name") {
        const Token& t = next();
        if (t.kind != Tok::kIdent && t.kind != Tok::kString && t.kind != Tok::kNumber) {
          fail(t, "expected a name");
        }
        p_.name = t.text;
      } else if (head.text == "n" || head.text == "m") {
        const Token t = next();
        if (t.kind != Tok::kNumber || t.number < 0 || t.number != std::floor(t.number)) {
          fail(t, "expected a nonnegative integer");
        }
        (head.text == "n" ? p_.n : p_.m) = static_cast<int>(t.number);
        if (head.text == "n") have_n = true;
      } else if (head.text == "A") {
        a_tok_ = head;
        std::vector<std::vector<double>> rows;
        expect_sym('[');
        do {
          rows.push_back(number_list());
        } while (accept_sym(','));
        expect_sym(']');
        const auto r = static_cast<Eigen::Index>(rows.size());
        const auto c = static_cast<Eigen::Index>(rows.front().size());
        Mat a(r, c);
        for (Eigen::Index i = 0; i < r; ++i) {
          if (static_cast<Eigen::Index>(rows[i].size()) != c) {
            throw ParseError(ParseError::Kind::kDimension, head.line, head.col, "A has ragged rows");
          }
          for (Eigen::Index j = 0; j < c; ++j) a(i, j) = rows[i][j];
        }
        p_.A = a;
      } else if (head.text == "xi") {
        xi_tok_ = head;
        const auto v = number_list();
        p_.xi = Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
      } else if (head.text == "box") {
        box_tok_ = head;
        Box b;
        do {
          expect_sym('[');
          const double lo = constant_expression();
          expect_sym(',');
          const double hi = constant_expression();
          const Token& close = peek();
          expect_sym(']');
          if (!(lo <= hi)) fail(close, "box factor has lo > hi");
          b.emplace_back(lo, hi);
        } while (peek().kind == Tok::kIdent && peek().text == "x" && (next(), true));
        p_.box = b;
      } else if (head.text.size() > 1 && head.text[0] == 'F' && all_digits(head.text.substr(1))) {
        const int k = std::atoi(head.text.c_str() + 1);
        if (k < 1) fail(head, "component indices start at 1");
        if (comp_by_index.count(k)) fail(head, "component " + head.text + " defined twice");
        comp_by_index[k] = expression();
        comp_tok[k] = head;
      } else {
        throw ParseError(ParseError::Kind::kUnknownName, head.line, head.col,
                         "unknown statement '" + head.text + "'");
      }
    }

    for (const auto& [name, value] : overrides_) {
      if (!used_overrides_.count(name)) {
        throw ParseError(ParseError::Kind::kUnknownName, 0, 0, "override for undeclared parameter '" + name + "'");
      }
    }
    const Token& eof = toks_.back();
    if (!have_n) throw ParseError(ParseError::Kind::kDimension, eof.line, eof.col, "missing 'n = <int>'");
    for (const auto& ref : var_refs_) {
      const ExprNode& nd = p_.nodes[ref.node];
      const int limit = nd.block == Block::kX ? p_.n : p_.m;
      if (nd.index >= limit) {
        const std::string nm = std::string(nd.block == Block::kX ? "x" : "y") + std::to_string(nd.index + 1);
        throw ParseError(ParseError::Kind::kDimension, ref.line, ref.col,
                         "variable " + nm + " out of range (" + (nd.block == Block::kX ? "n" : "m") +
                             " = " + std::to_string(limit) + ")");
      }
    }
    for (const auto& [k, tok] : comp_tok) {
      if (k > p_.n) {
        throw ParseError(ParseError::Kind::kDimension, tok.line, tok.col,
                         "component F" + std::to_string(k) + " exceeds n = " + std::to_string(p_.n));
      }
    }
    if (static_cast<int>(comp_by_index.size()) != p_.n) {
      throw ParseError(ParseError::Kind::kDimension, eof.line, eof.col,
                       "expected " + std::to_string(p_.n) + " components, found " +
                           std::to_string(comp_by_index.size()));
    }
    for (const auto& [k, node] : comp_by_index) p_.components.push_back(node);
    if (p_.A && (p_.A->rows() != p_.n || p_.A->cols() != p_.n)) {
      throw ParseError(ParseError::Kind::kDimension, a_tok_.line, a_tok_.col, "A must be n x n");
    }
    if (p_.xi && p_.xi->size() != p_.n) {
      throw ParseError(ParseError::Kind::kDimension, xi_tok_.line, xi_tok_.col, "xi must have n entries");
    }
    if (p_.box && static_cast<int>(p_.box->size()) != p_.n &&
        static_cast<int>(p_.box->size()) != p_.n + p_.m) {
      throw ParseError(ParseError::Kind::kDimension, box_tok_.line, box_tok_.col,
                       "box must have n or n + m factors");
    }
    return std::move(p_);
  }

 private:
  static bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    }
    return true;
  }

  [[noreturn]] void fail(const Token& t, const std::string& msg) {
    throw ParseError(ParseError::Kind::kSyntax, t.line, t.col, msg);
  }

  const Token& peek() const { return toks_[pos_]; }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (t.kind != Tok::kEnd) ++pos_;
    return t;
  }
  bool accept_sym(char c) {
    if (peek().kind == Tok::kSymbol && peek().sym == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect_sym(char c) {
    if (!accept_sym(c)) fail(peek(), std::string("expected '") + c + "', found '" + describe(peek()) + "'");
  }
  Token expect_ident(const char* what) {
    const Token& t = next();
    if (t.kind != Tok::kIdent) fail(t, std::string("expected ") + what + ", found '" + describe(t) + "'");
    return t;
  }
  static std::string describe(const Token& t) { return t.kind == Tok::kEnd ? "end of input" : t.text; }

  int add(ExprNode nd) {
    if (nd.kind == NodeKind::kAbs) nd.abs_id = abs_count_++;
    p_.nodes.push_back(nd);
    return static_cast<int>(p_.nodes.size()) - 1;
  }
  int constant(double v) { return add({NodeKind::kConstant, -1, -1, v}); }
  int binary(NodeKind k, int a, int b) { return add({k, a, b}); }

  std::vector<double> number_list() {
    std::vector<double> v;
    expect_sym('[');
    do {
      v.push_back(constant_expression());
    } while (accept_sym(','));
    expect_sym(']');
    return v;
  }

  // Header values may use arithmetic (e.g. -40/3) and parameters but no
  // variables. The temporary nodes are discarded.
  double constant_expression() {
    const std::size_t mark = p_.nodes.size();
    const int saved_abs = abs_count_;
    const std::size_t saved_refs = var_refs_.size();
    const Token& start = peek();
    const int node = expression();
    if (var_refs_.size() != saved_refs) fail(start, "header values cannot reference variables");
    ProblemDef tmp;
    tmp.nodes.assign(p_.nodes.begin(), p_.nodes.end());
    struct R {
      double constant(double v) const { return v; }
      double div(double a, double b, int nd) const {
        if (b == 0.0) throw EvalError(nd, "division by zero in header value");
        return a / b;
      }
      double pow(double a, int k) const {
        double r = 1.0;
        for (int i = 0; i < k; ++i) r *= a;
        return r;
      }
      double abs(double a, int, int) const { return std::abs(a); }
    } rules;
    const auto values = detail::forward<double>(tmp, std::span<const double>(), std::span<const double>(), rules);
    const double v = values[node];
    p_.nodes.resize(mark);
    abs_count_ = saved_abs;
    return v;
  }

  int expression() {
    int lhs = term();
    while (peek().kind == Tok::kSymbol && (peek().sym == '+' || peek().sym == '-')) {
      const char op = next().sym;
      const int rhs = term();
      lhs = binary(op == '+' ? NodeKind::kAdd : NodeKind::kSub, lhs, rhs);
    }
    return lhs;
  }

  int term() {
    int lhs = unary();
    while (peek().kind == Tok::kSymbol && (peek().sym == '*' || peek().sym == '/')) {
      const char op = next().sym;
      const int rhs = unary();
      lhs = binary(op == '*' ? NodeKind::kMul : NodeKind::kDiv, lhs, rhs);
    }
    return lhs;
  }

  int unary() {
    if (accept_sym('+')) return unary();
    if (accept_sym('-')) {
      // A bare literal folds into a negative constant unless it is the base
      // of a power (-2^2 is -(2^2)).
      const Token& t = peek();
      const Token& after = toks_[std::min(pos_ + 1, toks_.size() - 1)];
      if (t.kind == Tok::kNumber && !(after.kind == Tok::kSymbol && after.sym == '^')) {
        next();
        return constant(-t.number);
      }
      const int child = unary();
      return add({NodeKind::kNeg, child});
    }
    return power();
  }

  int power() {
    const int base = primary();
    if (accept_sym('^')) {
      const Token t = next();
      if (t.kind != Tok::kNumber || t.number < 0 || t.number != std::floor(t.number) || t.number > 64) {
        fail(t, "exponent must be an integer literal in [0, 64]");
      }
      ExprNode nd{NodeKind::kPow, base};
      nd.index = static_cast<int>(t.number);
      return add(nd);
    }
    return base;
  }

  int primary() {
    const Token t = next();
    if (t.kind == Tok::kNumber) return constant(t.number);
    if (t.kind == Tok::kSymbol && t.sym == '(') {
      const int e = expression();
      expect_sym(')');
      return e;
    }
    if (t.kind != Tok::kIdent) fail(t, "expected an operand, found '" + describe(t) + "'");
    if (t.text == "abs" || t.text == "min" || t.text == "max") {
      expect_sym('(');
      const int a = expression();
      if (t.text == "abs") {
        expect_sym(')');
        return add({NodeKind::kAbs, a});
      }
      expect_sym(',');
      const int b = expression();
      expect_sym(')');
      // min(a,b) = (a + b - |a - b|)/2, max(a,b) = (a + b + |a - b|)/2
      const int sum = binary(NodeKind::kAdd, a, b);
      const int gap = add({NodeKind::kAbs, binary(NodeKind::kSub, a, b)});
      const int num = binary(t.text == "min" ? NodeKind::kSub : NodeKind::kAdd, sum, gap);
      return binary(NodeKind::kDiv, num, constant(2.0));
    }
    if (auto it = p_.params.find(t.text); it != p_.params.end()) return constant(it->second);
    if ((t.text[0] == 'x' || t.text[0] == 'y') && all_digits(std::string_view(t.text).substr(1))) {
      const int idx = std::atoi(t.text.c_str() + 1);
      if (idx < 1) {
        throw ParseError(ParseError::Kind::kUnknownName, t.line, t.col, "variables are numbered from 1");
      }
      ExprNode nd{NodeKind::kVariable};
      nd.index = idx - 1;
      nd.block = t.text[0] == 'x' ? Block::kX : Block::kY;
      const int node = add(nd);
      var_refs_.push_back({node, t.line, t.col});
      return node;
    }
    throw ParseError(ParseError::Kind::kUnknownName, t.line, t.col, "unknown name '" + t.text + "'");
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  const std::map<std::string, double>& overrides_;
  std::set<std::string> used_overrides_;
  ProblemDef p_;
  int abs_count_ = 0;
  std::vector<VarRef> var_refs_;
  Token a_tok_, xi_tok_, box_tok_;
};

// ---------------------------------------------------------------------------
// Evaluation rules

double ipow(double a, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r *= a;
  return r;
}

struct DoubleRules {
  double constant(double v) const { return v; }
  double div(double a, double b, int node) const {
    if (b == 0.0) throw EvalError(node, "division by zero at node " + std::to_string(node));
    return a / b;
  }
  double pow(double a, int k) const { return ipow(a, k); }
  double abs(double a, int, int) const { return std::abs(a); }
};

struct SelectionRules {
  std::span<const int> signs;
  int n = 0;
  bool kink = false;  // some abs argument was exactly zero with a nonzero gradient
  bool use_actual_signs = false;

  detail::Dual constant(double v) const { return {v, Vec::Zero(n)}; }
  detail::Dual div(const detail::Dual& a, const detail::Dual& b, int node) const {
    if (b.v == 0.0) throw EvalError(node, "division by zero at node " + std::to_string(node));
    return {a.v / b.v, (a.g * b.v - b.g * a.v) / (b.v * b.v)};
  }
  detail::Dual pow(const detail::Dual& a, int k) const {
    if (k == 0) return {1.0, Vec::Zero(n)};
    return {ipow(a.v, k), a.g * (k * ipow(a.v, k - 1))};
  }
  detail::Dual abs(const detail::Dual& a, int abs_id, int) {
    double s;
    if (use_actual_signs) {
      // A zero argument with zero gradient (|x1 - x1|) is still differentiable.
      if (a.v == 0.0 && !a.g.isZero(0.0)) kink = true;
      s = a.v < 0.0 ? -1.0 : 1.0;
    } else {
      s = signs[abs_id] < 0 ? -1.0 : 1.0;
    }
    return {s * a.v, a.g * s};
  }
};

struct IntervalRules {
  Interval constant(double v) const { return Interval(v); }
  Interval div(const Interval& a, const Interval& b, int node) const {
    if (b.contains_zero()) {
      throw EvalError(node, "interval division by a range containing zero at node " + std::to_string(node));
    }
    return a / b;
  }
  Interval pow(const Interval& a, int k) const { return nsift::pow(a, k); }
  Interval abs(const Interval& a, int, int) const { return nsift::abs(a); }
};

std::vector<double> as_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void check_dims(const ProblemDef& p, const Vec& x, const Vec& y) {
  if (x.size() != p.n || y.size() != p.m) {
    throw std::invalid_argument("dimension mismatch: expected x in R^" + std::to_string(p.n) + " and y in R^" +
                                std::to_string(p.m));
  }
}

// Copies the nodes of `src` into `dst` and returns the offset of the copy.
int append_nodes(ProblemDef& dst, const ProblemDef& src) {
  const int offset = static_cast<int>(dst.nodes.size());
  int abs_base = dst.abs_count();
  for (ExprNode nd : src.nodes) {
    if (nd.lhs >= 0) nd.lhs += offset;
    if (nd.rhs >= 0) nd.rhs += offset;
    if (nd.kind == NodeKind::kAbs) nd.abs_id = abs_base++;
    dst.nodes.push_back(nd);
  }
  return offset;
}

int push(ProblemDef& p, ExprNode nd) {
  p.nodes.push_back(nd);
  return static_cast<int>(p.nodes.size()) - 1;
}

}  // namespace

ParseError::ParseError(Kind kind, int line, int column, const std::string& what)
    : std::runtime_error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
      kind_(kind),
      line_(line),
      column_(column) {}

int ProblemDef::abs_count() const {
  int k = 0;
  for (const auto& nd : nodes) k += nd.kind == NodeKind::kAbs;
  return k;
}

std::vector<int> ProblemDef::abs_nodes() const {
  std::vector<int> ids(abs_count(), -1);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].kind == NodeKind::kAbs) ids[nodes[i].abs_id] = static_cast<int>(i);
  }
  return ids;
}

Box ProblemDef::x_box() const {
  if (box) return Box(box->begin(), box->begin() + n);
  return Box(n, Interval(-10.0, 10.0));
}

Box ProblemDef::xy_box() const {
  Box b = x_box();
  if (box && static_cast<int>(box->size()) == n + m) {
    b.insert(b.end(), box->begin() + n, box->end());
  } else {
    b.insert(b.end(), m, Interval(-10.0, 10.0));
  }
  return b;
}

ProblemDef parse_problem(std::string_view text, const std::map<std::string, double>& param_overrides) {
  return Parser(text, param_overrides).run();
}

std::string print_expression(const ProblemDef& p, int node) {
  const ExprNode& nd = p.nodes[node];
  switch (nd.kind) {
    case NodeKind::kConstant:
      return nd.value < 0.0 || std::signbit(nd.value) ? "(" + format_double(nd.value) + ")" : format_double(nd.value);
    case NodeKind::kVariable:
      return (nd.block == Block::kX ? "x" : "y") + std::to_string(nd.index + 1);
    case NodeKind::kAdd:
      return "(" + print_expression(p, nd.lhs) + " + " + print_expression(p, nd.rhs) + ")";
    case NodeKind::kSub:
      return "(" + print_expression(p, nd.lhs) + " - " + print_expression(p, nd.rhs) + ")";
    case NodeKind::kMul:
      return "(" + print_expression(p, nd.lhs) + " * " + print_expression(p, nd.rhs) + ")";
    case NodeKind::kDiv:
      return "(" + print_expression(p, nd.lhs) + " / " + print_expression(p, nd.rhs) + ")";
    case NodeKind::kPow:
      return "(" + print_expression(p, nd.lhs) + "^" + std::to_string(nd.index) + ")";
    case NodeKind::kNeg:
      return "(-(" + print_expression(p, nd.lhs) + "))";
    case NodeKind::kAbs:
      return "abs(" + print_expression(p, nd.lhs) + ")";
  }
  return {};
}

std::string print_problem(const ProblemDef& p) {
  std::ostringstream os;
  if (!p.name.empty()) os << "name = \"" << p.name << "\"\n";
  for (const auto& [k, v] : p.params) os << "param " << k << " = " << format_double(v) << "\n";
  os << "n = " << p.n << "\nm = " << p.m << "\n";
  if (p.A) {
    os << "A = [";
    for (Eigen::Index i = 0; i < p.A->rows(); ++i) {
      os << (i ? ", [" : "[");
      for (Eigen::Index j = 0; j < p.A->cols(); ++j) os << (j ? ", " : "") << format_double((*p.A)(i, j));
      os << "]";
    }
    os << "]\n";
  }
  if (p.xi) {
    os << "xi = [";
    for (Eigen::Index i = 0; i < p.xi->size(); ++i) os << (i ? ", " : "") << format_double((*p.xi)[i]);
    os << "]\n";
  }
  if (p.box) {
    os << "box = ";
    for (std::size_t i = 0; i < p.box->size(); ++i) {
      os << (i ? " x " : "") << "[" << format_double((*p.box)[i].lo()) << ", " << format_double((*p.box)[i].hi())
         << "]";
    }
    os << "\n";
  }
  for (std::size_t k = 0; k < p.components.size(); ++k) {
    os << "F" << k + 1 << " = " << print_expression(p, p.components[k]) << "\n";
  }
  return os.str();
}

bool structurally_equal(const ProblemDef& a, const ProblemDef& b) {
  if (a.n != b.n || a.m != b.m || a.components.size() != b.components.size()) return false;
  if (a.A.has_value() != b.A.has_value() || (a.A && *a.A != *b.A)) return false;
  if (a.xi.has_value() != b.xi.has_value() || (a.xi && *a.xi != *b.xi)) return false;
  if (a.box != b.box || a.params != b.params) return false;
  std::function<bool(int, int)> same = [&](int i, int j) {
    const ExprNode& u = a.nodes[i];
    const ExprNode& v = b.nodes[j];
    if (u.kind != v.kind) return false;
    switch (u.kind) {
      case NodeKind::kConstant:
        return u.value == v.value && std::signbit(u.value) == std::signbit(v.value);
      case NodeKind::kVariable:
        return u.index == v.index && u.block == v.block;
      case NodeKind::kPow:
        return u.index == v.index && same(u.lhs, v.lhs);
      case NodeKind::kNeg:
      case NodeKind::kAbs:
        return same(u.lhs, v.lhs);
      default:
        return same(u.lhs, v.lhs) && same(u.rhs, v.rhs);
    }
  };
  for (std::size_t k = 0; k < a.components.size(); ++k) {
    if (!same(a.components[k], b.components[k])) return false;
  }
  return true;
}

Vec eval(const ProblemDef& p, const Vec& x, const Vec& y) {
  check_dims(p, x, y);
  const auto xs = as_std(x);
  const auto ys = as_std(y);
  DoubleRules rules;
  const auto v = detail::forward<double>(p, xs, ys, rules);
  Vec out(p.n);
  for (int i = 0; i < p.n; ++i) out[i] = v[p.components[i]];
  return out;
}

Mat eval_selection_jacobian(const ProblemDef& p, const Vec& x, const Vec& y, std::span<const int> signs) {
  check_dims(p, x, y);
  if (static_cast<int>(signs.size()) != p.abs_count()) {
    throw std::invalid_argument("one sign per abs node required");
  }
  std::vector<detail::Dual> xd, yd;
  detail::seed_duals(x, y, xd, yd);
  SelectionRules rules{signs, p.n};
  const auto v = detail::forward<detail::Dual>(p, xd, yd, rules);
  Mat J(p.n, p.n);
  for (int i = 0; i < p.n; ++i) J.row(i) = v[p.components[i]].g.transpose();
  return J;
}

std::vector<int> argument_signs(const ProblemDef& p, const Vec& x, const Vec& y) {
  std::vector<int> s;
  for (const auto& r : activity(p, x, y, 0.0)) s.push_back(r.argument < 0.0 ? -1 : 1);
  return s;
}

PhiValue eval_phi(const ProblemDef& p, const Vec& x, const Vec& y) {
  check_dims(p, x, y);
  std::vector<detail::Dual> xd, yd;
  detail::seed_duals(x, y, xd, yd);
  SelectionRules rules{{}, p.n};
  rules.use_actual_signs = true;
  const auto v = detail::forward<detail::Dual>(p, xd, yd, rules);
  PhiValue out;
  out.residual.resize(p.n);
  Vec g = Vec::Zero(p.n);
  for (int i = 0; i < p.n; ++i) {
    const auto& c = v[p.components[i]];
    out.residual[i] = c.v;
    g += c.g * c.v;
  }
  out.value = 0.5 * out.residual.squaredNorm();
  if (!rules.kink) out.gradient = g;
  return out;
}

std::vector<ActivityRecord> activity(const ProblemDef& p, const Vec& x, const Vec& y, double eta) {
  check_dims(p, x, y);
  const auto xs = as_std(x);
  const auto ys = as_std(y);
  DoubleRules rules;
  const auto v = detail::forward<double>(p, xs, ys, rules);
  std::vector<ActivityRecord> out;
  for (int node : p.abs_nodes()) {
    const double arg = v[p.nodes[node].lhs];
    out.push_back({node, p.nodes[node].abs_id, arg, std::abs(arg) <= eta});
  }
  return out;
}

double default_eta(const Vec& x, const Vec& y) {
  double m = 0.0;
  if (x.size()) m = std::max(m, x.cwiseAbs().maxCoeff());
  if (y.size()) m = std::max(m, y.cwiseAbs().maxCoeff());
  return 1e-10 * (1.0 + m);
}

std::vector<Interval> eval_interval(const ProblemDef& p, const Box& x, const Box& y) {
  if (static_cast<int>(x.size()) != p.n || static_cast<int>(y.size()) != p.m) {
    throw std::invalid_argument("eval_interval: box dimension mismatch");
  }
  IntervalRules rules;
  const auto v = detail::forward<Interval>(p, x, y, rules);
  std::vector<Interval> out;
  for (int c : p.components) out.push_back(v[c]);
  return out;
}

ProblemDef with_target(const ProblemDef& f) {
  if (f.m != 0) throw std::invalid_argument("with_target: map must have m = 0");
  ProblemDef g;
  g.name = f.name.empty() ? "target" : f.name + "_target";
  g.n = f.n;
  g.m = f.n;
  g.params = f.params;
  append_nodes(g, f);
  for (int i = 0; i < f.n; ++i) {
    ExprNode y{NodeKind::kVariable};
    y.index = i;
    y.block = Block::kY;
    const int yn = push(g, y);
    g.components.push_back(push(g, {NodeKind::kSub, f.components[i], yn}));
  }
  g.box = f.x_box();
  return g;
}

ProblemDef algebraic_residual(const ProblemDef& p, AlgebraicForm form) {
  if (!p.A) throw std::invalid_argument("algebraic_residual: problem has no matrix A");
  if (p.m != 0) throw std::invalid_argument("algebraic_residual: problem must have m = 0");
  ProblemDef g;
  g.name = p.name;
  g.n = p.n;
  g.m = p.n;
  g.params = p.params;
  append_nodes(g, p);
  const Mat& A = *p.A;
  for (int i = 0; i < p.n; ++i) {
    int ax = -1;
    for (int j = 0; j < p.n; ++j) {
      if (A(i, j) == 0.0) continue;
      const int c = push(g, {NodeKind::kConstant, -1, -1, A(i, j)});
      ExprNode xv{NodeKind::kVariable};
      xv.index = j;
      const int term = push(g, {NodeKind::kMul, c, push(g, xv)});
      ax = ax < 0 ? term : push(g, {NodeKind::kAdd, ax, term});
    }
    if (ax < 0) ax = push(g, {NodeKind::kConstant, -1, -1, 0.0});
    ExprNode yv{NodeKind::kVariable};
    yv.index = i;
    yv.block = Block::kY;
    const int xi = push(g, yv);
    int comp;
    if (form == AlgebraicForm::kAxMinusF) {
      comp = push(g, {NodeKind::kSub, push(g, {NodeKind::kSub, ax, p.components[i]}), xi});
    } else {
      comp = push(g, {NodeKind::kAdd, push(g, {NodeKind::kSub, p.components[i], ax}), xi});
    }
    g.components.push_back(comp);
  }
  Box b = p.x_box();
  const Vec xi = p.xi.value_or(Vec::Zero(p.n));
  for (int i = 0; i < p.n; ++i) b.emplace_back(xi[i]);
  g.box = b;
  g.xi = p.xi;
  return g;
}

Vec parse_vector(std::string_view text) {
  std::vector<double> v;
  std::string s(text);
  for (char& c : s) {
    if (c == '[' || c == ']' || c == ',') c = ' ';
  }
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) {
    char* end = nullptr;
    const double d = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) throw std::invalid_argument("not a number: '" + tok + "'");
    v.push_back(d);
  }
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace nsift
