#pragma once

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "nsift/expr.hpp"
#include "nsift/fixtures.hpp"

namespace testing {

inline nsift::ProblemDef fixture(const std::string& name, const std::map<std::string, double>& params = {}) {
  auto text = nsift::fixture_text(name);
  if (!text) throw std::runtime_error("missing fixture " + name);
  return nsift::parse_problem(*text, params);
}

inline nsift::Vec vec(std::initializer_list<double> v) {
  nsift::Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) out(i++) = d;
  return out;
}

// Smallest singular value of a 2x2 from the eigenvalues of A^T A, taken as
// |det| / sigma_max so that tiny values keep their relative accuracy.
inline double sigma_min_2x2(double a, double b, double c, double d) {
  const double s = a * a + b * b + c * c + d * d;
  const double det = a * d - b * c;
  const double disc = std::sqrt(std::max(0.0, s * s - 4.0 * det * det));
  const double smax = std::sqrt((s + disc) / 2.0);
  return smax > 0 ? std::abs(det) / smax : 0.0;
}

// Root of a continuous g on [lo, hi] with a sign change, by plain bisection.
template <class G>
double bisect(G&& g, double lo, double hi, int steps = 200) {
  double glo = g(lo);
  for (int i = 0; i < steps; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm <= 0) == (glo <= 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Random expression text over x1..xn, y1..ym with depth-limited recursion.
class ExprGen {
 public:
  ExprGen(int n, int m, std::uint64_t seed, bool allow_div = true)
      : n_(n), m_(m), rng_(seed), allow_div_(allow_div) {}

  std::string operator()(int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 9);
    switch (pick(rng_)) {
      case 0: return leaf();
      case 1: return constant();
      case 2: return "(" + (*this)(depth - 1) + " + " + (*this)(depth - 1) + ")";
      case 3: return "(" + (*this)(depth - 1) + " - " + (*this)(depth - 1) + ")";
      case 4: return "(" + (*this)(depth - 1) + " * " + (*this)(depth - 1) + ")";
      case 5:
        if (allow_div_) return "(" + (*this)(depth - 1) + " / (2 + abs(" + (*this)(depth - 1) + ")))";
        return "(-" + (*this)(depth - 1) + ")";
      case 6: return "(" + (*this)(depth - 1) + ")^" + std::to_string(1 + static_cast<int>(rng_() % 3));
      case 7: return "abs(" + (*this)(depth - 1) + ")";
      case 8: return "max(" + (*this)(depth - 1) + ", " + (*this)(depth - 1) + ")";
      default: return "min(" + (*this)(depth - 1) + ", " + (*this)(depth - 1) + ")";
    }
  }

  std::string problem(int depth) {
    std::string text = "n = " + std::to_string(n_) + "\nm = " + std::to_string(m_) + "\n";
    for (int i = 1; i <= n_; ++i) text += "F" + std::to_string(i) + " = " + (*this)(depth) + "\n";
    return text;
  }

 private:
  std::string leaf() {
    const int total = n_ + m_;
    const int k = static_cast<int>(rng_() % static_cast<std::uint64_t>(total));
    return k < n_ ? "x" + std::to_string(k + 1) : "y" + std::to_string(k - n_ + 1);
  }
  std::string constant() {
    // Kept below 1 so nested powers do not swamp difference quotients.
    std::uniform_int_distribution<int> d(1, 9);
    return "0." + std::to_string(d(rng_)) + std::to_string(d(rng_));
  }

  int n_;
  int m_;
  std::mt19937_64 rng_;
  bool allow_div_;
};

}  // namespace testing
