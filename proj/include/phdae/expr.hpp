#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phdae/errors.hpp"
#include "phdae/numerics.hpp"

namespace phdae {

enum class UnaryFn { neg, sin, cos, exp, ln, sqrt, tanh };
enum class BinOp { add, sub, mul, div };

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

/// Immutable expression-graph node. Trees are shared freely; nothing
/// mutates a node after construction, so concurrent evaluation is safe.
struct ExprNode {
  enum class Kind { constant, variable, unary, binary, power };
  Kind kind;
  double value = 0.0;   // constant
  int var = -1;         // variable index
  UnaryFn fn{};         // unary
  BinOp op{};           // binary
  double exponent = 0;  // power (constant exponent only)
  ExprPtr a, b;
};

using VarList = std::shared_ptr<const std::vector<std::string>>;

VarList make_variables(std::vector<std::string> names);

/// A scalar expression over an ordered, named variable list.
///
/// Supports exact evaluation and structural differentiation; the
/// derivative of a tree is again a tree over the same variables, so
/// gradients and Hessians compose without finite differences.
class ExprTree {
public:
  ExprTree() = default;
  ExprTree(ExprPtr root, VarList vars) : root_(std::move(root)), vars_(std::move(vars)) {}

  const ExprPtr& root() const { return root_; }
  const VarList& variables() const { return vars_; }
  int arity() const { return vars_ ? static_cast<int>(vars_->size()) : 0; }

  double eval(std::span<const double> point) const;
  double eval(const Vec& point) const { return eval(std::span<const double>(point)); }

  /// Structural partial derivative with respect to variable `var`.
  ExprTree derivative(int var) const;

  Vec grad(const Vec& point) const;
  Mat hessian(const Vec& point) const;

  /// True when the tree folded to the literal constant 0.
  bool is_zero() const;
  std::optional<double> as_constant() const;

  std::string to_string() const;

private:
  ExprPtr root_;
  VarList vars_;
};

/// Parse `src` against the fixed grammar:
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := '-' factor | base ('^' exponent)?
///   base   := number | ident | '(' expr ')' | func '(' expr ')'
///   func   in {sin, cos, exp, ln, sqrt, tanh}
/// '^' takes a constant (optionally negated) numeric exponent and binds
/// tighter than unary minus.
ExprTree parse(const std::string& src, const std::vector<std::string>& variables);
ExprTree parse(const std::string& src, const VarList& variables);

// Tree builders (constant folding and the domain-safe identity
// eliminations happen here, so derivative trees stay small).
ExprTree constant(const VarList& vars, double v);
ExprTree variable(const VarList& vars, int index);
ExprTree operator+(const ExprTree& a, const ExprTree& b);
ExprTree operator-(const ExprTree& a, const ExprTree& b);
ExprTree operator*(const ExprTree& a, const ExprTree& b);
ExprTree operator/(const ExprTree& a, const ExprTree& b);
ExprTree operator-(const ExprTree& a);
ExprTree pow(const ExprTree& a, double exponent);
ExprTree apply(UnaryFn fn, const ExprTree& a);

/// Rebuild `t` over a new variable list, replacing each old variable i by
/// `replacements[i]` (a tree over the new list).
ExprTree substitute(const ExprTree& t, const std::vector<ExprTree>& replacements,
                    const VarList& new_vars);

/// Variable-index renaming: old variable i becomes new index `index_map[i]`.
ExprTree remap_variables(const ExprTree& t, const std::vector<int>& index_map,
                         const VarList& new_vars);

/// Dense grid of scalar trees sharing one variable list.
struct MatrixExpr {
  int rows = 0;
  int cols = 0;
  std::vector<ExprTree> entries;  // row-major, rows*cols

  MatrixExpr() = default;
  MatrixExpr(int r, int c) : rows(r), cols(c), entries(static_cast<std::size_t>(r) * c) {}

  const ExprTree& operator()(int i, int j) const {
    return entries[static_cast<std::size_t>(i) * cols + j];
  }
  ExprTree& operator()(int i, int j) {
    return entries[static_cast<std::size_t>(i) * cols + j];
  }

  Mat eval(const Vec& point) const;
};

MatrixExpr zero_matrix_expr(const VarList& vars, int rows, int cols);

}  // namespace phdae
