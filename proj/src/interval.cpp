#include "nsift/interval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace nsift {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Below this magnitude FMA residuals may themselves be rounded (gradual
// underflow), so the exactness test is not trusted.
constexpr double kTiny = std::numeric_limits<double>::min() * 9007199254740992.0;

double next_down(double v) { return std::nextafter(v, -kInf); }
double next_up(double v) { return std::nextafter(v, kInf); }

// Sign of (computed - exact): +1 computed too high, -1 too low, 0 exact,
// 2 unknown.
int add_error_sign(double a, double b, double s) {
  if (!std::isfinite(s)) return 2;
  const double bb = s - a;
  const double err = (a - (s - bb)) + (b - bb);  // exact = s + err
  if (err > 0) return -1;
  if (err < 0) return 1;
  return 0;
}

int mul_error_sign(double a, double b, double p) {
  if (!std::isfinite(p)) return 2;
  if (p != 0.0 && std::abs(p) < kTiny) return 2;
  if (p == 0.0 && a != 0.0 && b != 0.0) return 2;
  const double e = std::fma(a, b, -p);  // exact = p + e
  if (e > 0) return -1;
  if (e < 0) return 1;
  return 0;
}

int div_error_sign(double a, double b, double q) {
  if (!std::isfinite(q)) return 2;
  if (q != 0.0 && std::abs(q) < kTiny) return 2;
  if (q == 0.0 && a != 0.0) return 2;
  const double r = std::fma(q, b, -a);  // q - exact = r / b
  if (r == 0.0) return 0;
  return ((r > 0) == (b > 0)) ? 1 : -1;
}

double round_down(double v, int err_sign) {
  if (err_sign == 0 || err_sign == -1) return v;
  if (std::isinf(v) && v > 0 && err_sign == 2) return std::numeric_limits<double>::max();
  return next_down(v);
}

double round_up(double v, int err_sign) {
  if (err_sign == 0 || err_sign == 1) return v;
  if (std::isinf(v) && v < 0 && err_sign == 2) return -std::numeric_limits<double>::max();
  return next_up(v);
}

// x^k for x >= 0 with directed rounding.
double pow_nonneg_down(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r = rounding::mul_down(r, x);
  return r;
}

double pow_nonneg_up(double x, int k) {
  double r = 1.0;
  for (int i = 0; i < k; ++i) r = rounding::mul_up(r, x);
  return r;
}

}  // namespace

namespace rounding {

double add_down(double a, double b) {
  const double s = a + b;
  return round_down(s, add_error_sign(a, b, s));
}
double add_up(double a, double b) {
  const double s = a + b;
  return round_up(s, add_error_sign(a, b, s));
}
double mul_down(double a, double b) {
  const double p = a * b;
  return round_down(p, mul_error_sign(a, b, p));
}
double mul_up(double a, double b) {
  const double p = a * b;
  return round_up(p, mul_error_sign(a, b, p));
}
double div_down(double a, double b) {
  const double q = a / b;
  return round_down(q, div_error_sign(a, b, q));
}
double div_up(double a, double b) {
  const double q = a / b;
  return round_up(q, div_error_sign(a, b, q));
}

}  // namespace rounding

Interval::Interval(double lo, double hi) : lo_(lo), hi_(hi) {
  if (std::isnan(lo) || std::isnan(hi) || lo > hi) {
    throw std::invalid_argument("interval: lower bound exceeds upper bound");
  }
}

double Interval::mid() const {
  if (lo_ == -hi_) return 0.0;
  return 0.5 * lo_ + 0.5 * hi_;
}

double Interval::mag() const { return std::max(std::abs(lo_), std::abs(hi_)); }

double Interval::mig() const {
  if (contains_zero()) return 0.0;
  return std::min(std::abs(lo_), std::abs(hi_));
}

std::pair<Interval, Interval> Interval::bisect() const {
  const double m = mid();
  return {Interval(lo_, m), Interval(m, hi_)};
}

Interval operator+(const Interval& a, const Interval& b) {
  return {rounding::add_down(a.lo_, b.lo_), rounding::add_up(a.hi_, b.hi_), Interval::Raw{}};
}

Interval operator-(const Interval& a, const Interval& b) {
  return {rounding::add_down(a.lo_, -b.hi_), rounding::add_up(a.hi_, -b.lo_), Interval::Raw{}};
}

Interval operator*(const Interval& a, const Interval& b) {
  // Degenerate zero operands annihilate; avoids 0 * inf style surprises.
  if ((a.lo_ == 0.0 && a.hi_ == 0.0) || (b.lo_ == 0.0 && b.hi_ == 0.0)) return Interval(0.0);
  const double ends[4][2] = {{a.lo_, b.lo_}, {a.lo_, b.hi_}, {a.hi_, b.lo_}, {a.hi_, b.hi_}};
  double lo = kInf;
  double hi = -kInf;
  for (const auto& e : ends) {
    lo = std::min(lo, rounding::mul_down(e[0], e[1]));
    hi = std::max(hi, rounding::mul_up(e[0], e[1]));
  }
  return {lo, hi, Interval::Raw{}};
}

Interval operator/(const Interval& a, const Interval& b) {
  if (b.contains_zero()) throw std::domain_error("interval division by an interval containing zero");
  const double ends[4][2] = {{a.lo_, b.lo_}, {a.lo_, b.hi_}, {a.hi_, b.lo_}, {a.hi_, b.hi_}};
  double lo = kInf;
  double hi = -kInf;
  for (const auto& e : ends) {
    lo = std::min(lo, rounding::div_down(e[0], e[1]));
    hi = std::max(hi, rounding::div_up(e[0], e[1]));
  }
  return {lo, hi, Interval::Raw{}};
}

Interval abs(const Interval& x) {
  if (x.lo() >= 0.0) return x;
  if (x.hi() <= 0.0) return -x;
  return {0.0, x.mag()};
}

Interval pow(const Interval& x, int k) {
  if (k < 0) throw std::invalid_argument("interval pow: negative exponent");
  if (k == 0) return Interval(1.0);
  if (k == 1) return x;
  const bool even = (k % 2) == 0;
  if (x.lo() >= 0.0) return {pow_nonneg_down(x.lo(), k), pow_nonneg_up(x.hi(), k)};
  if (x.hi() <= 0.0) {
    const double a = -x.hi();  // smaller magnitude
    const double b = -x.lo();
    if (even) return {pow_nonneg_down(a, k), pow_nonneg_up(b, k)};
    return {-pow_nonneg_up(b, k), -pow_nonneg_down(a, k)};
  }
  if (even) return {0.0, pow_nonneg_up(x.mag(), k)};
  return {-pow_nonneg_up(-x.lo(), k), pow_nonneg_up(x.hi(), k)};
}

Interval hull(const Interval& a, const Interval& b) {
  return {std::min(a.lo(), b.lo()), std::max(a.hi(), b.hi())};
}

std::string to_string(const Interval& x) {
  std::ostringstream os;
  os.precision(17);
  os << '[' << x.lo() << ',' << x.hi() << ']';
  return os.str();
}

std::ostream& operator<<(std::ostream& os, const Interval& x) { return os << to_string(x); }

std::string to_string(const Box& box) {
  std::string out;
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (i) out += 'x';
    out += to_string(box[i]);
  }
  return out;
}

}  // namespace nsift
