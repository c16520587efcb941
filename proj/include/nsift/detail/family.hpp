#pragma once

#include <vector>

#include "nsift/clarke.hpp"
#include "nsift/interval.hpp"

namespace nsift::detail {

/// Dense n x n matrix of intervals, row-major.
struct IntervalMatrix {
  int n = 0;
  std::vector<Interval> a;

  explicit IntervalMatrix(int dim = 0) : n(dim), a(static_cast<std::size_t>(dim) * dim, Interval(0.0)) {}
  Interval& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * n + j]; }
  const Interval& operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * n + j]; }
};

/// Family enclosure over a box of (x, y): entries of J0 and of every E_i
/// enclose their values for all points of the box.
struct IntervalFamily {
  IntervalMatrix J0;
  std::vector<IntervalMatrix> E;
};

IntervalFamily interval_family(const ProblemDef& p, const Box& xy, FamilyMode mode);

/// J0 + sum_i [-1,1] E_i entrywise.
IntervalMatrix family_hull(const IntervalFamily& f);

/// Cofactor-expansion determinant enclosure (n <= 6).
Interval interval_det(const IntervalMatrix& m);

}  // namespace nsift::detail
