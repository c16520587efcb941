#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "nsift/interval.hpp"

using nsift::Interval;

namespace {

// The exact real value is p + e with e the rounding error of p.
bool encloses(const Interval& x, double p, double e) {
  const bool above = p > x.lo() || (p == x.lo() && e >= 0);
  const bool below = p < x.hi() || (p == x.hi() && e <= 0);
  return above && below;
}

double two_sum_error(double a, double b, double s) {
  const double bb = s - a;
  return (a - (s - bb)) + (b - bb);
}

struct Sampler {
  std::mt19937_64 rng{123};

  double wild() {
    std::uniform_real_distribution<double> mant(-1, 1);
    std::uniform_int_distribution<int> ex(-40, 40);
    return std::ldexp(mant(rng), ex(rng));
  }
  Interval interval() {
    double a = wild();
    double b = (rng() % 4 == 0) ? a : a + std::abs(wild());
    return Interval(std::min(a, b), std::max(a, b));
  }
  double member(const Interval& x) {
    switch (rng() % 4) {
      case 0: return x.lo();
      case 1: return x.hi();
      default: {
        std::uniform_real_distribution<double> u(0, 1);
        const double v = x.lo() + u(rng) * (x.hi() - x.lo());
        return std::clamp(v, x.lo(), x.hi());
      }
    }
  }
};

}  // namespace

TEST_CASE("construction and accessors") {
  const Interval x(-1, 3);
  CHECK(x.lo() == -1);
  CHECK(x.hi() == 3);
  CHECK(x.width() == 4);
  CHECK(x.mid() == 1);
  CHECK(x.mag() == 3);
  CHECK(x.mig() == 0);
  CHECK(Interval(2, 5).mig() == 2);
  CHECK(x.contains_zero());
  CHECK_FALSE(Interval(0.5, 1).contains_zero());
  CHECK(Interval(4).degenerate());
  CHECK_THROWS(Interval(2, 1));
  auto [l, r] = x.bisect();
  CHECK(l.lo() == -1);
  CHECK(l.hi() == r.lo());
  CHECK(r.hi() == 3);
}

TEST_CASE("elementary results") {
  CHECK((Interval(1, 2) + Interval(3, 4)).contains(Interval(4, 6)));
  CHECK((Interval(1, 2) - Interval(3, 4)).contains(Interval(-3, -1)));
  CHECK((Interval(-1, 2) * Interval(3, 4)).contains(Interval(-4, 8)));
  CHECK((Interval(1, 2) / Interval(4, 8)).contains(Interval(0.125, 0.5)));
  CHECK(abs(Interval(-3, 2)) == Interval(0, 3));
  CHECK(abs(Interval(-3, -2)) == Interval(2, 3));
  CHECK(pow(Interval(-2, 1), 2) == Interval(0, 4));
  CHECK(pow(Interval(-2, 1), 3) == Interval(-8, 1));
  CHECK(pow(Interval(-2, 3), 0) == Interval(1));
  CHECK(hull(Interval(0, 1), Interval(3, 4)) == Interval(0, 4));
}

TEST_CASE("division by an interval containing zero is rejected") {
  CHECK_THROWS((Interval(1, 2) / Interval(-1, 1)));
}

TEST_CASE("directed rounding brackets the exact result") {
  const double a = 0.1, b = 0.2;
  CHECK(nsift::rounding::add_down(a, b) <= nsift::rounding::add_up(a, b));
  CHECK(nsift::rounding::add_down(a, b) < nsift::rounding::add_up(a, b));
  CHECK(nsift::rounding::mul_down(1.0 / 3, 3.0) <= 1.0);
  CHECK(nsift::rounding::mul_up(1.0 / 3, 3.0) >= 1.0 - 1e-300);
  CHECK(nsift::rounding::div_down(1, 3) < nsift::rounding::div_up(1, 3));
  CHECK(nsift::rounding::add_down(1, 2) == 3);
  CHECK(nsift::rounding::add_up(1, 2) == 3);
}

TEST_CASE("outward rounding contains the exact real result of every operation") {
  Sampler s;
  int checks = 0;
  for (int i = 0; i < 25000; ++i) {
    const Interval x = s.interval();
    const Interval y = s.interval();
    const double a = s.member(x);
    const double b = s.member(y);

    const double sum = a + b;
    CHECK(encloses(x + y, sum, two_sum_error(a, b, sum)));
    const double diff = a - b;
    CHECK(encloses(x - y, diff, two_sum_error(a, -b, diff)));
    const double prod = a * b;
    CHECK(encloses(x * y, prod, std::fma(a, b, -prod)));
    if (!y.contains_zero()) {
      const double q = a / b;
      const double r = std::fma(-q, b, a);  // exact remainder
      CHECK(encloses(x / y, q, r / b));
    }
    const double sq = a * a;
    CHECK(encloses(pow(x, 2), sq, std::fma(a, a, -sq)));
    CHECK(abs(x).contains(std::abs(a)));
    checks += 5;
  }
  CHECK(checks >= 100000);
}

TEST_CASE("higher powers enclose compensated member products") {
  Sampler s;
  for (int i = 0; i < 5000; ++i) {
    const Interval x = s.interval();
    const double a = s.member(x);
    for (int k = 3; k <= 6; ++k) {
      // a^k carried in double-double; the low part stands in for the error sign.
      double hi = a, lo = 0;
      for (int j = 1; j < k; ++j) {
        const double p = hi * a;
        const double e = std::fma(hi, a, -p) + lo * a;
        hi = p + e;
        lo = e - (hi - p);
      }
      CHECK(encloses(pow(x, k), hi, lo));
    }
  }
}

TEST_CASE("printing") {
  CHECK_FALSE(nsift::to_string(Interval(1, 2)).empty());
  CHECK_FALSE(nsift::to_string(nsift::Box{Interval(0, 1), Interval(-1, 1)}).empty());
}
