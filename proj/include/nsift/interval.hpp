#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace nsift {

/// Closed interval [lo, hi] with outward-rounded arithmetic.
///
/// Every operation returns an enclosure of the exact real result over all
/// members of the operands. Rounding is detected with error-free
/// transformations (TwoSum, FMA residuals), so results that are exactly
/// representable stay degenerate: [4,4] - [4,4] is [0,0], not a
/// few-ulp-wide interval around zero.
class Interval {
 public:
  constexpr Interval() = default;
  constexpr Interval(double v) : lo_(v), hi_(v) {}  // NOLINT(google-explicit-constructor)
  Interval(double lo, double hi);

  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double mid() const;
  double width() const { return hi_ - lo_; }
  double mag() const;  // max |v|
  double mig() const;  // min |v|

  bool contains(double v) const { return lo_ <= v && v <= hi_; }
  bool contains(const Interval& o) const { return lo_ <= o.lo_ && o.hi_ <= hi_; }
  bool contains_zero() const { return lo_ <= 0.0 && 0.0 <= hi_; }
  bool degenerate() const { return lo_ == hi_; }

  std::pair<Interval, Interval> bisect() const;

  friend Interval operator+(const Interval& a, const Interval& b);
  friend Interval operator-(const Interval& a, const Interval& b);
  friend Interval operator*(const Interval& a, const Interval& b);
  /// Throws std::domain_error when the divisor contains zero.
  friend Interval operator/(const Interval& a, const Interval& b);
  friend Interval operator-(const Interval& a) { return {-a.hi_, -a.lo_, Raw{}}; }

  Interval& operator+=(const Interval& o) { return *this = *this + o; }
  Interval& operator-=(const Interval& o) { return *this = *this - o; }
  Interval& operator*=(const Interval& o) { return *this = *this * o; }

  friend bool operator==(const Interval& a, const Interval& b) = default;

 private:
  struct Raw {};
  constexpr Interval(double lo, double hi, Raw) : lo_(lo), hi_(hi) {}

  double lo_ = 0.0;
  double hi_ = 0.0;
};

Interval abs(const Interval& x);
Interval pow(const Interval& x, int k);
Interval hull(const Interval& a, const Interval& b);

std::string to_string(const Interval& x);
std::ostream& operator<<(std::ostream& os, const Interval& x);

/// Axis-aligned box, one interval per coordinate.
using Box = std::vector<Interval>;

std::string to_string(const Box& box);

namespace rounding {
// Directed-rounding primitives; exact in round-to-nearest mode.
double add_down(double a, double b);
double add_up(double a, double b);
double mul_down(double a, double b);
double mul_up(double a, double b);
double div_down(double a, double b);
double div_up(double a, double b);
}  // namespace rounding

}  // namespace nsift
