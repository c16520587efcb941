#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "nsift/theorems.hpp"

using nsift::ConditionProfile;
using nsift::Mat;
using nsift::ProblemDef;
using nsift::ProfileVerdict;
using nsift::Vec;
using testing::fixture;
using testing::sigma_min_2x2;
using testing::vec;

namespace {

void check_profile_invariants(const ConditionProfile& p, const nsift::DecayRule& rule = {}) {
  REQUIRE(p.t.size() == p.value.size());
  REQUIRE(p.t.size() == p.integral.size());
  for (double v : p.value) CHECK(v >= 0);
  for (std::size_t i = 1; i < p.integral.size(); ++i) CHECK(p.integral[i] >= p.integral[i - 1]);
  if (p.verdict == ProfileVerdict::kDivergesLikely) CHECK(p.fit.exponent >= -1 + rule.margin);
  if (p.verdict == ProfileVerdict::kConvergesLikely) {
    CHECK(p.fit.exponent <= -1 - rule.margin);
    if (std::isfinite(p.fit.exponent)) CHECK(p.fit.residual <= rule.max_residual);
  }
}

const nsift::ConditionRow& row(const nsift::ComparisonReport& r, const std::string& name) {
  for (const auto& x : r.rows)
    if (x.name == name) return x;
  throw std::runtime_error("no row " + name);
}

// sigma_min of [[1 + a s, 0], [3 x^2, 1]] over the two kink branches.
double fa_sigma(double a, double x) {
  if (x == 0) return std::min(sigma_min_2x2(1 + a, 0, 0, 1), sigma_min_2x2(1 - a, 0, 0, 1));
  const double s = x > 0 ? 1 : -1;
  return sigma_min_2x2(1 + a * s, 0, 3 * x * x, 1);
}

}  // namespace

TEST_CASE("matrix lower bound examples") {
  CHECK(nsift::matrix_lower_bound(Mat::Identity(3, 3)) == doctest::Approx(1));
  Mat q(2, 2);
  q << 1, 0, 12, 1;
  CHECK(nsift::matrix_lower_bound(q) == doctest::Approx(sigma_min_2x2(1, 0, 12, 1)).epsilon(1e-12));
  CHECK(nsift::matrix_lower_bound(q) == doctest::Approx(0.0828).epsilon(1e-2));
  Mat d = Mat::Zero(2, 2);
  d(0, 0) = 2;
  d(1, 1) = 5;
  CHECK(nsift::matrix_lower_bound(d) == doctest::Approx(2));
}

TEST_CASE("matrix lower bound is the reciprocal of the inverse norm") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + trial % 2;
    Mat A(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) A(i, j) = g(rng);
    const Mat inv = A.inverse();
    const double inv_norm = Eigen::JacobiSVD<Mat>(inv).singularValues()(0);
    CHECK(nsift::matrix_lower_bound(A) * inv_norm == doctest::Approx(1).epsilon(1e-9));
  }
}

TEST_CASE("decay verdicts on synthetic profiles") {
  auto make = [](auto fn) {
    ConditionProfile p;
    p.t = nsift::default_profile_grid();
    for (double t : p.t) p.value.push_back(fn(t));
    nsift::finish_profile(p);
    return p;
  };
  const auto fast = make([](double t) { return 1 / (1 + t * t); });
  CHECK(fast.verdict == ProfileVerdict::kConvergesLikely);
  CHECK(fast.fit.exponent == doctest::Approx(-2).epsilon(0.02));
  check_profile_invariants(fast);
  const auto slow = make([](double t) { return 1 / std::sqrt(1 + t); });
  CHECK(slow.verdict == ProfileVerdict::kDivergesLikely);
  check_profile_invariants(slow);
  const auto border = make([](double t) { return 1 / (1 + t); });
  CHECK(border.verdict == ProfileVerdict::kInconclusive);
  const auto dead = make([](double t) { return t < 1 ? 1 - t : 0.0; });
  CHECK(dead.verdict == ProfileVerdict::kConvergesLikely);
  check_profile_invariants(dead);
  // Trapezoid integral of a constant.
  const auto flat = make([](double) { return 3.0; });
  CHECK(flat.integral.back() == doctest::Approx(3 * (flat.t.back() - flat.t.front())));
}

TEST_CASE("profile grid") {
  const auto t = nsift::default_profile_grid();
  REQUIRE(t.size() == 41);
  CHECK(t[0] == 0);
  CHECK(t[1] == doctest::Approx(0.1));
  CHECK(t.back() == doctest::Approx(100));
  for (std::size_t i = 1; i < t.size(); ++i) CHECK(t[i] > t[i - 1]);
}

TEST_CASE("m(t) of linear maps is constant") {
  const auto id = nsift::pourciau_m(nsift::parse_problem("n = 1\nF1 = x1\n"));
  for (double v : id.value) CHECK(v == doctest::Approx(1));
  CHECK(id.verdict == ProfileVerdict::kDivergesLikely);
  check_profile_invariants(id);
  const auto two = nsift::pourciau_m(nsift::parse_problem("n = 2\nF1 = 2*x1\nF2 = 2*x2\n"));
  for (double v : two.value) CHECK(v == doctest::Approx(2));
  CHECK(two.verdict == ProfileVerdict::kDivergesLikely);
}

TEST_CASE("m(t) of f_a decays like t^-2") {
  for (double a : {-0.5, 0.0, 0.5}) {
    const auto prof = nsift::pourciau_m(fixture("fa", {{"a", a}}));
    CHECK(prof.verdict == ProfileVerdict::kConvergesLikely);
    CHECK(prof.fit.exponent >= -2.3);
    CHECK(prof.fit.exponent <= -1.7);
    check_profile_invariants(prof);
    // Oracle: m(t) is the worst sigma_min over |x| <= t, attained at |x| = t.
    for (std::size_t i = 0; i < prof.t.size(); ++i) {
      const double t = prof.t[i];
      const double oracle = std::min(fa_sigma(a, t), fa_sigma(a, -t));
      CHECK(prof.value[i] <= oracle * (1 + 1e-9) + 1e-12);
      CHECK(prof.value[i] >= oracle * (1 - 1e-3));
    }
    for (std::size_t i = 1; i < prof.value.size(); ++i) CHECK(prof.value[i] <= prof.value[i - 1]);
  }
}

TEST_CASE("Hadamard-Levy integrand") {
  CHECK(nsift::hadamard_levy_integrand(nsift::parse_problem("n = 1\nF1 = x1\n"), 3) == doctest::Approx(1));
  const ProblemDef two = nsift::parse_problem("n = 2\nF1 = 2*x1\nF2 = 2*x2\n");
  for (double r : {0.5, 1.0, 7.0}) CHECK(nsift::hadamard_levy_integrand(two, r) == doctest::Approx(2));

  const ProblemDef fa0 = fixture("fa", {{"a", 0.0}});
  // Circle sampling oracle for the smooth case.
  double oracle = 1e300;
  for (int k = 0; k < 36000; ++k) {
    const double x = 2 * std::cos(2 * std::numbers::pi * k / 36000);
    oracle = std::min(oracle, sigma_min_2x2(1, 0, 3 * x * x, 1));
  }
  const double hl = nsift::hadamard_levy_integrand(fa0, 2);
  CHECK(hl == doctest::Approx(oracle).epsilon(1e-6));
  CHECK(hl == doctest::Approx(sigma_min_2x2(1, 0, 12, 1)).epsilon(1e-9));
}

TEST_CASE("Hadamard-Levy integrand of a singular map is zero") {
  CHECK(nsift::hadamard_levy_integrand(fixture("twowell"), 0) == 0);
  const ProblemDef p = nsift::parse_problem("n = 2\nF1 = x1 + x2\nF2 = x1 + x2\n");
  CHECK(nsift::hadamard_levy_integrand(p, 1) <= 1e-12);
}

TEST_CASE("surjection modulus of linear maps") {
  const auto id = nsift::ioffe_sur(nsift::parse_problem("n = 1\nF1 = x1\n"), vec({0.3}), 1);
  CHECK(id.value == doctest::Approx(1).epsilon(1e-12));
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = g(rng), b = g(rng), c = g(rng), d = g(rng);
    char buf[256];
    std::snprintf(buf, sizeof buf, "n = 2\nF1 = %.17g*x1 + %.17g*x2\nF2 = %.17g*x1 + %.17g*x2\n", a, b, c, d);
    const auto s = nsift::ioffe_sur(nsift::parse_problem(buf), vec({g(rng), g(rng)}), 1);
    // The image of the unit disc is an ellipse with minor semi-axis sigma_min.
    CHECK(std::abs(s.value - sigma_min_2x2(a, b, c, d)) <= s.resolution + 1e-12);
  }
}

TEST_CASE("surjection modulus needs n <= 2") {
  const ProblemDef p = nsift::parse_problem("n = 3\nF1 = x1\nF2 = x2\nF3 = x3\n");
  CHECK_THROWS_AS(nsift::ioffe_sur(p, vec({0, 0, 0}), 1), nsift::UnsupportedDimension);
}

TEST_CASE("surjection rate approaches sigma_min away from the kink") {
  for (double a : {-0.5, 0.5}) {
    const ProblemDef fa = fixture("fa", {{"a", a}});
    const auto l = nsift::liusternik_check(fa, vec({2, 1}));
    CHECK(l.smooth);
    CHECK(l.sigma_min == doctest::Approx(fa_sigma(a, 2)).epsilon(1e-12));
    CHECK(l.relative_error <= 0.05);
    CHECK(l.passed);
  }
}

TEST_CASE("comparison table for f_a separates the conditions") {
  for (double a : {-0.5, 0.5}) {
    const auto r = nsift::compare_conditions(fixture("fa", {{"a", a}}));
    CHECK(row(r, "maximal-rank").holds);
    CHECK(row(r, "coercivity").holds);
    CHECK(row(r, "hadamard-palais").holds);
    CHECK_FALSE(row(r, "pourciau").holds);
    CHECK(row(r, "pourciau").verdict == "converges-likely");
    CHECK(row(r, "inversion-audit").verdict == "unique");
    CHECK(r.rank.det_range.lo() == doctest::Approx(1 - std::abs(a)).epsilon(1e-9));
    const auto table = nsift::format_table(r);
    CHECK(table.find("hadamard-palais") != std::string::npos);
  }
}

TEST_CASE("comparison table for the identity") {
  const auto r = nsift::compare_conditions(nsift::parse_problem("n = 2\nF1 = x1\nF2 = x2\n"));
  for (const auto& x : r.rows) {
    INFO(x.name);
    CHECK(x.holds);
  }
}

TEST_CASE("comparison table for the cube records a rank failure next to a working inversion") {
  const auto r = nsift::compare_conditions(nsift::parse_problem("n = 1\nbox = [-2, 2]\nF1 = x1^3\n"));
  CHECK_FALSE(row(r, "maximal-rank").holds);
  CHECK(row(r, "maximal-rank").verdict == "rank-deficient-witness");
  CHECK_FALSE(row(r, "hadamard-palais").holds);
  CHECK(row(r, "inversion-audit").holds);
  for (const auto& s : r.inversions) {
    REQUIRE(s.roots.size() == 1);
    CHECK(std::pow(s.roots[0].x(0), 3) == doctest::Approx(s.y(0)).epsilon(1e-8));
  }
}
