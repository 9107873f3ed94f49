#include "phdae/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>

namespace phdae {

namespace {

ExprPtr make_node(ExprNode n) { return std::make_shared<const ExprNode>(std::move(n)); }

ExprPtr const_node(double v) {
  ExprNode n;
  n.kind = ExprNode::Kind::constant;
  n.value = v;
  return make_node(std::move(n));
}

ExprPtr var_node(int i) {
  ExprNode n;
  n.kind = ExprNode::Kind::variable;
  n.var = i;
  return make_node(std::move(n));
}

bool is_const(const ExprPtr& p, double v) {
  return p->kind == ExprNode::Kind::constant && p->value == v;
}

bool is_const(const ExprPtr& p) { return p->kind == ExprNode::Kind::constant; }

double eval_unary(UnaryFn fn, double x) {
  switch (fn) {
    case UnaryFn::neg:
      return -x;
    case UnaryFn::sin:
      return std::sin(x);
    case UnaryFn::cos:
      return std::cos(x);
    case UnaryFn::exp:
      return std::exp(x);
    case UnaryFn::ln:
      if (x <= 0.0) throw DomainError("ln of non-positive value");
      return std::log(x);
    case UnaryFn::sqrt:
      if (x < 0.0) throw DomainError("sqrt of negative value");
      return std::sqrt(x);
    case UnaryFn::tanh:
      return std::tanh(x);
  }
  throw DomainError("unknown unary function");
}

bool integral_exponent(double c) {
  return std::nearbyint(c) == c && std::abs(c) < 2147483647.0;
}

double eval_power(double base, double c) {
  if (!integral_exponent(c)) {
    if (base < 0.0) throw DomainError("negative base with non-integer exponent");
  }
  if (base == 0.0 && c < 0.0) throw DomainError("zero base with negative exponent");
  const double r = std::pow(base, c);
  if (!std::isfinite(r)) throw DomainError("non-finite power result");
  return r;
}

double check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw DomainError(std::string("non-finite result in ") + what);
  return v;
}

ExprPtr neg_node(const ExprPtr& a);

ExprPtr unary_node(UnaryFn fn, const ExprPtr& a) {
  if (fn == UnaryFn::neg) return neg_node(a);
  if (is_const(a)) {
    try {
      return const_node(eval_unary(fn, a->value));
    } catch (const DomainError&) {
      // keep the node; evaluation reports the error at the right place
    }
  }
  ExprNode n;
  n.kind = ExprNode::Kind::unary;
  n.fn = fn;
  n.a = a;
  return make_node(std::move(n));
}

ExprPtr neg_node(const ExprPtr& a) {
  if (is_const(a)) return const_node(-a->value);
  if (a->kind == ExprNode::Kind::unary && a->fn == UnaryFn::neg) return a->a;
  ExprNode n;
  n.kind = ExprNode::Kind::unary;
  n.fn = UnaryFn::neg;
  n.a = a;
  return make_node(std::move(n));
}

ExprPtr bin_node(BinOp op, const ExprPtr& a, const ExprPtr& b) {
  switch (op) {
    case BinOp::add:
      if (is_const(a) && is_const(b)) return const_node(a->value + b->value);
      if (is_const(a, 0.0)) return b;
      if (is_const(b, 0.0)) return a;
      break;
    case BinOp::sub:
      if (is_const(a) && is_const(b)) return const_node(a->value - b->value);
      if (is_const(b, 0.0)) return a;
      if (is_const(a, 0.0)) return neg_node(b);
      break;
    case BinOp::mul:
      if (is_const(a) && is_const(b)) return const_node(a->value * b->value);
      if (is_const(a, 0.0) || is_const(b, 0.0)) return const_node(0.0);
      if (is_const(a, 1.0)) return b;
      if (is_const(b, 1.0)) return a;
      if (is_const(a, -1.0)) return neg_node(b);
      if (is_const(b, -1.0)) return neg_node(a);
      // flatten nested constant products: c1*(c2*t) -> (c1 c2)*t
      if (is_const(a) && b->kind == ExprNode::Kind::binary && b->op == BinOp::mul) {
        if (is_const(b->a)) return bin_node(BinOp::mul, const_node(a->value * b->a->value), b->b);
        if (is_const(b->b)) return bin_node(BinOp::mul, const_node(a->value * b->b->value), b->a);
      }
      if (is_const(b) && a->kind == ExprNode::Kind::binary && a->op == BinOp::mul) {
        if (is_const(a->a)) return bin_node(BinOp::mul, const_node(b->value * a->a->value), a->b);
        if (is_const(a->b)) return bin_node(BinOp::mul, const_node(b->value * a->b->value), a->a);
      }
      break;
    case BinOp::div:
      if (is_const(a, 0.0)) return const_node(0.0);
      if (is_const(b, 1.0)) return a;
      if (is_const(a) && is_const(b) && b->value != 0.0)
        return const_node(a->value / b->value);
      break;
  }
  ExprNode n;
  n.kind = ExprNode::Kind::binary;
  n.op = op;
  n.a = a;
  n.b = b;
  return make_node(std::move(n));
}

ExprPtr pow_node(const ExprPtr& a, double c) {
  if (c == 0.0) return const_node(1.0);
  if (c == 1.0) return a;
  if (is_const(a)) {
    try {
      return const_node(eval_power(a->value, c));
    } catch (const DomainError&) {
    }
  }
  ExprNode n;
  n.kind = ExprNode::Kind::power;
  n.exponent = c;
  n.a = a;
  return make_node(std::move(n));
}

double eval_node(const ExprNode& n, std::span<const double> point) {
  switch (n.kind) {
    case ExprNode::Kind::constant:
      return n.value;
    case ExprNode::Kind::variable:
      return point[static_cast<std::size_t>(n.var)];
    case ExprNode::Kind::unary:
      return check_finite(eval_unary(n.fn, eval_node(*n.a, point)), "unary function");
    case ExprNode::Kind::binary: {
      const double x = eval_node(*n.a, point);
      const double y = eval_node(*n.b, point);
      switch (n.op) {
        case BinOp::add:
          return check_finite(x + y, "addition");
        case BinOp::sub:
          return check_finite(x - y, "subtraction");
        case BinOp::mul:
          return check_finite(x * y, "multiplication");
        case BinOp::div:
          if (y == 0.0) throw DomainError("division by zero");
          return check_finite(x / y, "division");
      }
      throw DomainError("unknown binary operator");
    }
    case ExprNode::Kind::power:
      return eval_power(eval_node(*n.a, point), n.exponent);
  }
  throw DomainError("unknown node kind");
}

ExprPtr diff_node(const ExprPtr& p, int var) {
  const ExprNode& n = *p;
  switch (n.kind) {
    case ExprNode::Kind::constant:
      return const_node(0.0);
    case ExprNode::Kind::variable:
      return const_node(n.var == var ? 1.0 : 0.0);
    case ExprNode::Kind::unary: {
      ExprPtr da = diff_node(n.a, var);
      switch (n.fn) {
        case UnaryFn::neg:
          return neg_node(da);
        case UnaryFn::sin:
          return bin_node(BinOp::mul, unary_node(UnaryFn::cos, n.a), da);
        case UnaryFn::cos:
          return neg_node(bin_node(BinOp::mul, unary_node(UnaryFn::sin, n.a), da));
        case UnaryFn::exp:
          return bin_node(BinOp::mul, p, da);
        case UnaryFn::ln:
          return bin_node(BinOp::div, da, n.a);
        case UnaryFn::sqrt:
          return bin_node(BinOp::div, da, bin_node(BinOp::mul, const_node(2.0), p));
        case UnaryFn::tanh:
          // d tanh(u) = (1 - tanh(u)^2) u'
          return bin_node(BinOp::mul,
                          bin_node(BinOp::sub, const_node(1.0), pow_node(p, 2.0)), da);
      }
      throw DomainError("unknown unary function");
    }
    case ExprNode::Kind::binary: {
      ExprPtr da = diff_node(n.a, var);
      ExprPtr db = diff_node(n.b, var);
      switch (n.op) {
        case BinOp::add:
          return bin_node(BinOp::add, da, db);
        case BinOp::sub:
          return bin_node(BinOp::sub, da, db);
        case BinOp::mul:
          return bin_node(BinOp::add, bin_node(BinOp::mul, da, n.b),
                          bin_node(BinOp::mul, n.a, db));
        case BinOp::div:
          // (u/v)' = u'/v - u v' / v^2
          return bin_node(
              BinOp::sub, bin_node(BinOp::div, da, n.b),
              bin_node(BinOp::div, bin_node(BinOp::mul, n.a, db), pow_node(n.b, 2.0)));
      }
      throw DomainError("unknown binary operator");
    }
    case ExprNode::Kind::power: {
      ExprPtr da = diff_node(n.a, var);
      return bin_node(BinOp::mul, const_node(n.exponent),
                      bin_node(BinOp::mul, pow_node(n.a, n.exponent - 1.0), da));
    }
  }
  throw DomainError("unknown node kind");
}

std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

const char* fn_name(UnaryFn fn) {
  switch (fn) {
    case UnaryFn::neg:
      return "-";
    case UnaryFn::sin:
      return "sin";
    case UnaryFn::cos:
      return "cos";
    case UnaryFn::exp:
      return "exp";
    case UnaryFn::ln:
      return "ln";
    case UnaryFn::sqrt:
      return "sqrt";
    case UnaryFn::tanh:
      return "tanh";
  }
  return "?";
}

// Precedence levels: sum 1, product 2, unary minus 2.5, power 3, atom 4.
double node_prec(const ExprNode& n) {
  switch (n.kind) {
    case ExprNode::Kind::constant:
      return n.value < 0.0 ? 2.5 : 4.0;
    case ExprNode::Kind::variable:
      return 4.0;
    case ExprNode::Kind::unary:
      return n.fn == UnaryFn::neg ? 2.5 : 4.0;
    case ExprNode::Kind::binary:
      return (n.op == BinOp::add || n.op == BinOp::sub) ? 1.0 : 2.0;
    case ExprNode::Kind::power:
      return 3.0;
  }
  return 4.0;
}

void print_node(const ExprNode& n, const std::vector<std::string>& names,
                std::string& out, double parent_prec) {
  const double prec = node_prec(n);
  const bool parens = prec < parent_prec;
  if (parens) out += '(';
  switch (n.kind) {
    case ExprNode::Kind::constant:
      out += format_number(n.value);
      break;
    case ExprNode::Kind::variable:
      out += names[static_cast<std::size_t>(n.var)];
      break;
    case ExprNode::Kind::unary:
      if (n.fn == UnaryFn::neg) {
        out += '-';
        print_node(*n.a, names, out, 2.5);
      } else {
        out += fn_name(n.fn);
        out += '(';
        print_node(*n.a, names, out, 0.0);
        out += ')';
      }
      break;
    case ExprNode::Kind::binary: {
      const bool sum = n.op == BinOp::add || n.op == BinOp::sub;
      print_node(*n.a, names, out, prec);
      if (sum) {
        // fold `a + (-b)` into `a - b` for readability
        if (n.op == BinOp::add && n.b->kind == ExprNode::Kind::unary &&
            n.b->fn == UnaryFn::neg) {
          out += " - ";
          print_node(*n.b->a, names, out, prec + 0.5);
          break;
        }
        out += (n.op == BinOp::add) ? " + " : " - ";
      } else {
        out += (n.op == BinOp::mul) ? "*" : "/";
      }
      print_node(*n.b, names, out, prec + 0.5);
      break;
    }
    case ExprNode::Kind::power:
      print_node(*n.a, names, out, 3.5);
      out += '^';
      out += format_number(n.exponent);
      break;
  }
  if (parens) out += ')';
}

ExprPtr substitute_node(const ExprPtr& p, const std::vector<ExprPtr>& repl) {
  const ExprNode& n = *p;
  switch (n.kind) {
    case ExprNode::Kind::constant:
      return p;
    case ExprNode::Kind::variable:
      return repl[static_cast<std::size_t>(n.var)];
    case ExprNode::Kind::unary:
      return unary_node(n.fn, substitute_node(n.a, repl));
    case ExprNode::Kind::binary:
      return bin_node(n.op, substitute_node(n.a, repl), substitute_node(n.b, repl));
    case ExprNode::Kind::power:
      return pow_node(substitute_node(n.a, repl), n.exponent);
  }
  throw DomainError("unknown node kind");
}

// ---------------------------------------------------------------------------
// Recursive-descent parser.

class Parser {
public:
  Parser(const std::string& src, const VarList& vars) : src_(src), vars_(vars) {}

  ExprTree run() {
    skip_ws();
    ExprPtr e = parse_expr();
    skip_ws();
    if (pos_ != src_.size())
      throw SyntaxError("unexpected trailing input", pos_);
    return ExprTree(e, vars_);
  }

private:
  const std::string& src_;
  const VarList& vars_;
  std::size_t pos_ = 0;

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < src_.size() && src_[pos_] == c;
  }

  bool accept(char c) {
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c, const char* what) {
    if (!accept(c)) throw SyntaxError(std::string("expected ") + what, pos_);
  }

  ExprPtr parse_expr() {
    ExprPtr e = parse_term();
    for (;;) {
      if (accept('+'))
        e = bin_node(BinOp::add, e, parse_term());
      else if (accept('-'))
        e = bin_node(BinOp::sub, e, parse_term());
      else
        return e;
    }
  }

  ExprPtr parse_term() {
    ExprPtr e = parse_factor();
    for (;;) {
      if (accept('*'))
        e = bin_node(BinOp::mul, e, parse_factor());
      else if (accept('/'))
        e = bin_node(BinOp::div, e, parse_factor());
      else
        return e;
    }
  }

  // '^' binds tighter than unary minus: -x^2 parses as -(x^2).
  ExprPtr parse_factor() {
    if (accept('-')) return neg_node(parse_factor());
    ExprPtr b = parse_base();
    if (accept('^')) return pow_node(b, parse_exponent());
    return b;
  }

  double parse_exponent() {
    skip_ws();
    bool negate = false;
    if (accept('-')) negate = true;
    skip_ws();
    if (pos_ >= src_.size() || !std::isdigit(static_cast<unsigned char>(src_[pos_])))
      throw SyntaxError("exponent must be a numeric constant", pos_);
    const double v = parse_number();
    return negate ? -v : v;
  }

  ExprPtr parse_base() {
    skip_ws();
    if (pos_ >= src_.size()) throw SyntaxError("unexpected end of input", pos_);
    const char c = src_[pos_];
    if (accept('(')) {
      ExprPtr e = parse_expr();
      expect(')', "')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return const_node(parse_number());
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    throw SyntaxError(std::string("unexpected character '") + c + "'", pos_);
  }

  double parse_number() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t mark = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      } else {
        pos_ = mark;  // 'e' starts an identifier, not an exponent part
      }
    }
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, value);
    if (ec != std::errc() || ptr != src_.data() + pos_)
      throw SyntaxError("malformed number", start);
    return value;
  }

  ExprPtr parse_ident() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string name = src_.substr(start, pos_ - start);
    static const std::map<std::string, UnaryFn> kFuncs = {
        {"sin", UnaryFn::sin}, {"cos", UnaryFn::cos},   {"exp", UnaryFn::exp},
        {"ln", UnaryFn::ln},   {"sqrt", UnaryFn::sqrt}, {"tanh", UnaryFn::tanh}};
    auto fn = kFuncs.find(name);
    if (fn != kFuncs.end() && peek('(')) {
      expect('(', "'('");
      ExprPtr arg = parse_expr();
      expect(')', "')'");
      return unary_node(fn->second, arg);
    }
    for (std::size_t i = 0; i < vars_->size(); ++i)
      if ((*vars_)[i] == name) return var_node(static_cast<int>(i));
    throw UnknownVariable("unknown variable '" + name + "' (at position " +
                          std::to_string(start) + ")");
  }
};

void check_same_vars(const ExprTree& a, const ExprTree& b) {
  if (a.variables() != b.variables() &&
      (!a.variables() || !b.variables() || *a.variables() != *b.variables()))
    throw DimensionMismatch("expression trees use different variable lists");
}

}  // namespace

VarList make_variables(std::vector<std::string> names) {
  return std::make_shared<const std::vector<std::string>>(std::move(names));
}

double ExprTree::eval(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != arity())
    throw DimensionMismatch("eval: point length " + std::to_string(point.size()) +
                            " != variable count " + std::to_string(arity()));
  return eval_node(*root_, point);
}

ExprTree ExprTree::derivative(int var) const {
  return ExprTree(diff_node(root_, var), vars_);
}

Vec ExprTree::grad(const Vec& point) const {
  Vec g(point.size());
  for (std::size_t i = 0; i < point.size(); ++i)
    g[i] = derivative(static_cast<int>(i)).eval(point);
  return g;
}

Mat ExprTree::hessian(const Vec& point) const {
  const int n = static_cast<int>(point.size());
  Mat h(n, n);
  for (int i = 0; i < n; ++i) {
    ExprTree di = derivative(i);
    for (int j = i; j < n; ++j) {
      const double v = di.derivative(j).eval(point);
      h(i, j) = v;
      h(j, i) = v;  // mirrored; symmetry asserted independently in tests
    }
  }
  return h;
}

bool ExprTree::is_zero() const {
  return root_ && root_->kind == ExprNode::Kind::constant && root_->value == 0.0;
}

std::optional<double> ExprTree::as_constant() const {
  if (root_ && root_->kind == ExprNode::Kind::constant) return root_->value;
  return std::nullopt;
}

std::string ExprTree::to_string() const {
  std::string out;
  print_node(*root_, *vars_, out, 0.0);
  return out;
}

ExprTree parse(const std::string& src, const std::vector<std::string>& variables) {
  return parse(src, make_variables(variables));
}

ExprTree parse(const std::string& src, const VarList& variables) {
  return Parser(src, variables).run();
}

ExprTree constant(const VarList& vars, double v) { return ExprTree(const_node(v), vars); }

ExprTree variable(const VarList& vars, int index) {
  if (index < 0 || index >= static_cast<int>(vars->size()))
    throw DimensionMismatch("variable index out of range");
  return ExprTree(var_node(index), vars);
}

ExprTree operator+(const ExprTree& a, const ExprTree& b) {
  check_same_vars(a, b);
  return ExprTree(bin_node(BinOp::add, a.root(), b.root()), a.variables());
}

ExprTree operator-(const ExprTree& a, const ExprTree& b) {
  check_same_vars(a, b);
  return ExprTree(bin_node(BinOp::sub, a.root(), b.root()), a.variables());
}

ExprTree operator*(const ExprTree& a, const ExprTree& b) {
  check_same_vars(a, b);
  return ExprTree(bin_node(BinOp::mul, a.root(), b.root()), a.variables());
}

ExprTree operator/(const ExprTree& a, const ExprTree& b) {
  check_same_vars(a, b);
  return ExprTree(bin_node(BinOp::div, a.root(), b.root()), a.variables());
}

ExprTree operator-(const ExprTree& a) { return ExprTree(neg_node(a.root()), a.variables()); }

ExprTree pow(const ExprTree& a, double exponent) {
  return ExprTree(pow_node(a.root(), exponent), a.variables());
}

ExprTree apply(UnaryFn fn, const ExprTree& a) {
  return ExprTree(unary_node(fn, a.root()), a.variables());
}

ExprTree substitute(const ExprTree& t, const std::vector<ExprTree>& replacements,
                    const VarList& new_vars) {
  if (static_cast<int>(replacements.size()) != t.arity())
    throw DimensionMismatch("substitute: replacement count != variable count");
  std::vector<ExprPtr> roots;
  roots.reserve(replacements.size());
  for (const ExprTree& r : replacements) roots.push_back(r.root());
  return ExprTree(substitute_node(t.root(), roots), new_vars);
}

ExprTree remap_variables(const ExprTree& t, const std::vector<int>& index_map,
                         const VarList& new_vars) {
  std::vector<ExprTree> repl;
  repl.reserve(index_map.size());
  for (int idx : index_map) repl.push_back(variable(new_vars, idx));
  return substitute(t, repl, new_vars);
}

Mat MatrixExpr::eval(const Vec& point) const {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = (*this)(i, j).eval(point);
  return m;
}

MatrixExpr zero_matrix_expr(const VarList& vars, int rows, int cols) {
  MatrixExpr m(rows, cols);
  for (auto& e : m.entries) e = constant(vars, 0.0);
  return m;
}

}  // namespace phdae
