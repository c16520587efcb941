#pragma once

#include <span>
#include <vector>

#include "nsift/expr.hpp"

namespace nsift::detail {

// Evaluates every node of the forest over the scalar type T.
//
// Rules supplies the operations that differ between scalar types:
//   T constant(double) const
//   T div(const T&, const T&, int node)
//   T pow(const T&, int k)
//   T abs(const T&, int abs_id, int node)
// Addition, subtraction, multiplication and negation use T's operators.
template <class T, class Rules>
std::vector<T> forward(const ProblemDef& p, std::span<const T> x, std::span<const T> y,
                       Rules& rules) {
  std::vector<T> v;
  v.reserve(p.nodes.size());
  for (std::size_t i = 0; i < p.nodes.size(); ++i) {
    const ExprNode& nd = p.nodes[i];
    switch (nd.kind) {
      case NodeKind::kConstant:
        v.push_back(rules.constant(nd.value));
        break;
      case NodeKind::kVariable:
        v.push_back(nd.block == Block::kX ? x[nd.index] : y[nd.index]);
        break;
      case NodeKind::kAdd:
        v.push_back(v[nd.lhs] + v[nd.rhs]);
        break;
      case NodeKind::kSub:
        v.push_back(v[nd.lhs] - v[nd.rhs]);
        break;
      case NodeKind::kMul:
        v.push_back(v[nd.lhs] * v[nd.rhs]);
        break;
      case NodeKind::kDiv:
        v.push_back(rules.div(v[nd.lhs], v[nd.rhs], static_cast<int>(i)));
        break;
      case NodeKind::kPow:
        v.push_back(rules.pow(v[nd.lhs], nd.index));
        break;
      case NodeKind::kNeg:
        v.push_back(-v[nd.lhs]);
        break;
      case NodeKind::kAbs:
        v.push_back(rules.abs(v[nd.lhs], nd.abs_id, static_cast<int>(i)));
        break;
    }
  }
  return v;
}

// Value plus gradient with respect to the n x-variables.
struct Dual {
  double v = 0.0;
  Vec g;

  friend Dual operator+(const Dual& a, const Dual& b) { return {a.v + b.v, a.g + b.g}; }
  friend Dual operator-(const Dual& a, const Dual& b) { return {a.v - b.v, a.g - b.g}; }
  friend Dual operator*(const Dual& a, const Dual& b) { return {a.v * b.v, a.g * b.v + b.g * a.v}; }
  friend Dual operator-(const Dual& a) { return {-a.v, -a.g}; }
};

// Seeds x-variables with unit gradients and y-variables with zero gradients.
inline void seed_duals(const Vec& x, const Vec& y, std::vector<Dual>& xd, std::vector<Dual>& yd) {
  const auto n = x.size();
  xd.clear();
  yd.clear();
  for (Eigen::Index i = 0; i < n; ++i) xd.push_back({x[i], Vec::Unit(n, i)});
  for (Eigen::Index i = 0; i < y.size(); ++i) yd.push_back({y[i], Vec::Zero(n)});
}

}  // namespace nsift::detail
