#pragma once

#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "nsift/interval.hpp"

namespace nsift {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class NodeKind { kConstant, kVariable, kAdd, kSub, kMul, kDiv, kPow, kNeg, kAbs };
enum class Block { kX, kY };

/// One node of the expression forest. Children always precede their parent
/// in ProblemDef::nodes, so a single forward sweep evaluates everything.
struct ExprNode {
  NodeKind kind = NodeKind::kConstant;
  int lhs = -1;
  int rhs = -1;
  double value = 0.0;  // kConstant
  int index = 0;       // kVariable: 0-based variable index; kPow: exponent
  Block block = Block::kX;
  int abs_id = -1;     // kAbs: position among abs nodes
};

/// A parsed map F: R^n x R^m -> R^n, optionally with the algebraic data of
/// A x = F(x) + xi.
struct ProblemDef {
  std::string name;
  int n = 0;
  int m = 0;
  std::vector<ExprNode> nodes;
  std::vector<int> components;
  std::optional<Mat> A;
  std::optional<Vec> xi;
  std::optional<Box> box;  // over (x, y) when it has n + m factors, else over x
  std::map<std::string, double> params;

  int abs_count() const;
  /// Node ids of abs nodes, ordered by abs_id.
  std::vector<int> abs_nodes() const;

  /// x-part of the declared box, or [-10,10]^n.
  Box x_box() const;
  /// Full (x, y) region; y factors default to [-10,10] when not declared.
  Box xy_box() const;
};

class ParseError : public std::runtime_error {
 public:
  enum class Kind { kSyntax, kDimension, kUnknownName };
  ParseError(Kind kind, int line, int column, const std::string& what);
  Kind kind() const { return kind_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  Kind kind_;
  int line_;
  int column_;
};

class EvalError : public std::runtime_error {
 public:
  EvalError(int node, const std::string& what) : std::runtime_error(what), node_(node) {}
  int node() const { return node_; }

 private:
  int node_;
};

/// Parses a problem file. `param_overrides` replace `param` declarations of
/// the same name before any component is parsed.
ProblemDef parse_problem(std::string_view text,
                         const std::map<std::string, double>& param_overrides = {});

/// Canonical text form; parse_problem(print_problem(p)) is structurally equal
/// to p.
std::string print_problem(const ProblemDef& p);
std::string print_expression(const ProblemDef& p, int node);

bool structurally_equal(const ProblemDef& a, const ProblemDef& b);

Vec eval(const ProblemDef& p, const Vec& x, const Vec& y);

/// x-block Jacobian of the smooth selection obtained by replacing each
/// |u| with s*u, s = signs[abs_id].
Mat eval_selection_jacobian(const ProblemDef& p, const Vec& x, const Vec& y,
                            std::span<const int> signs);

/// Signs of the abs arguments at (x, y); zero arguments get +1.
std::vector<int> argument_signs(const ProblemDef& p, const Vec& x, const Vec& y);

struct ActivityRecord {
  int abs_node = -1;
  int abs_id = -1;
  double argument = 0.0;
  bool active = false;
};

std::vector<ActivityRecord> activity(const ProblemDef& p, const Vec& x, const Vec& y, double eta);

/// Scale-aware activity tolerance 1e-10 * (1 + ||(x, y)||_inf).
double default_eta(const Vec& x, const Vec& y);

/// Natural interval extension of every component over the box.
std::vector<Interval> eval_interval(const ProblemDef& p, const Box& x, const Box& y);

/// Residual value and selection gradient of phi(x) = 1/2 ||F(x, y)||^2.
/// Returns nullopt for the gradient when an abs argument is exactly zero with a
/// nonzero gradient.
struct PhiValue {
  double value = 0.0;
  Vec residual;
  std::optional<Vec> gradient;
};
PhiValue eval_phi(const ProblemDef& p, const Vec& x, const Vec& y);

/// F(x, y) := f(x) - y for a pure map f (m = 0); y has dimension n.
ProblemDef with_target(const ProblemDef& f);

enum class AlgebraicForm {
  kAxMinusF,  // G(x, xi) = A x - F(x) - xi
  kFMinusAx,  // G(x, xi) = F(x) - A x + xi
};

/// Residual of A x = F(x) + xi as an implicit problem with xi as the y-block.
ProblemDef algebraic_residual(const ProblemDef& p, AlgebraicForm form);

Vec parse_vector(std::string_view text);

}  // namespace nsift
