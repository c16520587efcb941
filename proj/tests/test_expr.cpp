#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "nsift/detail/family.hpp"
#include "nsift/expr.hpp"

using nsift::Mat;
using nsift::ParseError;
using nsift::ProblemDef;
using nsift::Vec;
using testing::fixture;
using testing::vec;

TEST_CASE("identity-like map parses to a single subtraction") {
  const ProblemDef p = nsift::parse_problem("n=1 m=1; F1 = x1 - y1");
  CHECK(p.n == 1);
  CHECK(p.m == 1);
  REQUIRE(p.components.size() == 1);
  CHECK(p.nodes[p.components[0]].kind == nsift::NodeKind::kSub);
  CHECK(p.abs_count() == 0);
  CHECK(nsift::eval(p, vec({3}), vec({1}))(0) == doctest::Approx(2));
}

TEST_CASE("algebraic fixture carries A, xi and two abs nodes") {
  const ProblemDef p = fixture("example1");
  REQUIRE(p.A.has_value());
  CHECK((*p.A)(0, 0) == -2);
  CHECK((*p.A)(0, 1) == 1);
  CHECK((*p.A)(1, 0) == 4);
  CHECK((*p.A)(1, 1) == -3);
  REQUIRE(p.xi.has_value());
  CHECK(p.xi->norm() == 0);
  CHECK(p.abs_count() == 2);
  CHECK(p.components.size() == 2);
}

TEST_CASE("rational matrix entries are exact") {
  const ProblemDef p = fixture("example2");
  CHECK((*p.A)(0, 0) == -1.5);
  CHECK((*p.A)(1, 1) == doctest::Approx(-40.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("out-of-range variable is a dimension error") {
  try {
    nsift::parse_problem("n = 1\nm = 0\nF1 = x1 / x2\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::kDimension);
    CHECK(e.line() == 3);
  }
}

TEST_CASE("parse errors carry kind and position") {
  CHECK_THROWS_AS(nsift::parse_problem("n = 1\nF1 = x1 +\n"), ParseError);
  try {
    nsift::parse_problem("n = 1\nF1 = sin(x1)\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::kUnknownName);
  }
  try {
    nsift::parse_problem("n = 2\nF1 = x1\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.kind() == ParseError::Kind::kDimension);
  }
  CHECK_THROWS_AS(nsift::parse_problem("n = 1\nF1 = x1 $ 2\n"), ParseError);
}

TEST_CASE("parameters and overrides") {
  const ProblemDef p = fixture("fa", {{"a", 0.5}});
  CHECK(p.params.at("a") == 0.5);
  const Vec f = nsift::eval(p, vec({-2, 1}), Vec());
  CHECK(f(0) == doctest::Approx(-1));
  CHECK(f(1) == doctest::Approx(-7));

  const ProblemDef q = fixture("fa", {{"a", -0.25}});
  CHECK(nsift::eval(q, vec({4, 0}), Vec())(0) == doctest::Approx(3));
  CHECK_THROWS_AS(fixture("fa", {{"b", 1.0}}), ParseError);
}

TEST_CASE("evaluation by hand substitution") {
  const ProblemDef p = fixture("example1");
  const Vec z = nsift::eval(p, vec({0, 0}), Vec());
  CHECK(z.norm() == 0);
  const Vec one = nsift::eval(p, vec({1, 1}), Vec());
  CHECK(one(0) == doctest::Approx(2));
  CHECK(one(1) == doctest::Approx(6));
}

TEST_CASE("division by zero is reported at evaluation, not at parse") {
  const ProblemDef p = nsift::parse_problem("n = 1\nm = 1\nF1 = x1 / y1\n");
  CHECK(nsift::eval(p, vec({1}), vec({2}))(0) == doctest::Approx(0.5));
  try {
    nsift::eval(p, vec({1}), vec({0}));
    FAIL("expected EvalError");
  } catch (const nsift::EvalError& e) {
    CHECK(e.node() >= 0);
    CHECK(p.nodes[e.node()].kind == nsift::NodeKind::kDiv);
  }
}

TEST_CASE("min and max desugar to abs") {
  const ProblemDef p = nsift::parse_problem("n = 2\nF1 = max(x1, x2)\nF2 = min(x1, 2*x2)\n");
  CHECK(p.abs_count() == 2);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int i = 0; i < 200; ++i) {
    const Vec x = vec({u(rng), u(rng)});
    const Vec f = nsift::eval(p, x, Vec());
    CHECK(f(0) == doctest::Approx(std::max(x(0), x(1))).epsilon(1e-14));
    CHECK(f(1) == doctest::Approx(std::min(x(0), 2 * x(1))).epsilon(1e-14));
  }
}

TEST_CASE("selection Jacobian examples") {
  const ProblemDef absx = nsift::parse_problem("n = 1\nF1 = abs(x1)\n");
  const std::vector<int> plus{1};
  const std::vector<int> minus{-1};
  CHECK(nsift::eval_selection_jacobian(absx, vec({3}), Vec(), plus)(0, 0) == 1);
  CHECK(nsift::eval_selection_jacobian(absx, vec({3}), Vec(), minus)(0, 0) == -1);

  const ProblemDef ex1 = fixture("example1");
  const std::vector<int> signs{1, 1};
  const Mat J = nsift::eval_selection_jacobian(ex1, vec({1, 0}), Vec(), signs);
  CHECK(J(0, 0) == doctest::Approx(3));
  CHECK(J(0, 1) == doctest::Approx(1));
  CHECK(J(1, 0) == doctest::Approx(4));
  CHECK(J(1, 1) == doctest::Approx(1));
}

TEST_CASE("activity follows the tolerance exactly") {
  const ProblemDef fa = fixture("fa");
  auto at0 = nsift::activity(fa, vec({0, 3}), Vec(), 1e-12);
  REQUIRE(at0.size() == 1);
  CHECK(at0[0].active);
  auto at1 = nsift::activity(fa, vec({1, 3}), Vec(), 1e-12);
  CHECK_FALSE(at1[0].active);

  const ProblemDef ex1 = fixture("example1");
  for (const auto& r : nsift::activity(ex1, vec({5, 1e-13}), Vec(), 1e-12)) {
    CHECK(r.active == (std::abs(r.argument) <= 1e-12));
    CHECK(r.active);
  }

  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1e-11, 1e-11);
  for (int i = 0; i < 500; ++i) {
    const double eta = std::abs(u(rng));
    for (const auto& r : nsift::activity(fa, vec({u(rng), 0}), Vec(), eta))
      CHECK(r.active == (std::abs(r.argument) <= eta));
  }
}

TEST_CASE("printer round-trips random forests") {
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 1 + trial % 3;
    const int m = trial % 2;
    testing::ExprGen gen(n, m, 1000 + trial);
    const std::string text = gen.problem(4);
    const ProblemDef p = nsift::parse_problem(text);
    const ProblemDef q = nsift::parse_problem(nsift::print_problem(p));
    INFO(text);
    CHECK(nsift::structurally_equal(p, q));
    CHECK(q.components.size() == static_cast<std::size_t>(q.n));
  }
  for (const auto& name : nsift::fixture_names()) {
    const ProblemDef p = fixture(name);
    CHECK(nsift::structurally_equal(p, nsift::parse_problem(nsift::print_problem(p))));
  }
}

TEST_CASE("forest is ordered children-first and indices stay in range") {
  for (int trial = 0; trial < 100; ++trial) {
    testing::ExprGen gen(2, 1, 77 + trial);
    const ProblemDef p = nsift::parse_problem(gen.problem(5));
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
      const auto& nd = p.nodes[i];
      if (nd.lhs >= 0) CHECK(nd.lhs < static_cast<int>(i));
      if (nd.rhs >= 0) CHECK(nd.rhs < static_cast<int>(i));
      if (nd.kind == nsift::NodeKind::kVariable) {
        CHECK(nd.index >= 0);
        CHECK(nd.index < (nd.block == nsift::Block::kX ? p.n : p.m));
      }
    }
  }
}

TEST_CASE("selection Jacobian agrees with central differences off kinks") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-2, 2);
  int compared = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + trial % 3;
    testing::ExprGen gen(n, 1, 500 + trial, false);
    const ProblemDef p = nsift::parse_problem(gen.problem(3));
    for (int k = 0; k < 5; ++k) {
      Vec x(n);
      for (int i = 0; i < n; ++i) x(i) = u(rng);
      const Vec y = vec({u(rng)});
      bool near_kink = false;
      for (const auto& r : nsift::activity(p, x, y, 1e-3)) near_kink = near_kink || r.active;
      if (near_kink) continue;
      const auto signs = nsift::argument_signs(p, x, y);
      const Mat J = nsift::eval_selection_jacobian(p, x, y, signs);
      const double h = 1e-6;
      for (int j = 0; j < n; ++j) {
        Vec xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        const Vec fd = (nsift::eval(p, xp, y) - nsift::eval(p, xm, y)) / (2 * h);
        // Roundoff in the quotient grows with the size of F itself.
        const double noise = 1e-15 * (1 + nsift::eval(p, x, y).cwiseAbs().maxCoeff()) / h;
        for (int i = 0; i < n; ++i)
          CHECK(std::abs(fd(i) - J(i, j)) <= 1e-6 * std::max(1.0, std::abs(J(i, j))) + 10 * noise);
      }
      ++compared;
    }
  }
  CHECK(compared > 300);
}

TEST_CASE("difference quotients stay below the interval Lipschitz bound") {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + trial % 2;
    testing::ExprGen gen(n, 0, 900 + trial);
    const ProblemDef p = nsift::parse_problem(gen.problem(3));
    const nsift::Box box(static_cast<std::size_t>(n), nsift::Interval(-1, 1));
    const auto fam = nsift::detail::interval_family(p, box, nsift::FamilyMode::kOuterGlobal);
    const auto hull = nsift::detail::family_hull(fam);
    double bound2 = 0;
    for (const auto& e : hull.a) bound2 += e.mag() * e.mag();
    const double L = std::sqrt(bound2);
    for (int k = 0; k < 50; ++k) {
      Vec a(n), b(n);
      for (int i = 0; i < n; ++i) {
        a(i) = u(rng);
        b(i) = u(rng);
      }
      const double dist = (a - b).norm();
      if (dist < 1e-9) continue;
      const double q = (nsift::eval(p, a, Vec()) - nsift::eval(p, b, Vec())).norm() / dist;
      CHECK(q <= L * (1 + 1e-9) + 1e-12);
    }
  }
}

TEST_CASE("interval extension encloses point evaluations") {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 80; ++trial) {
    testing::ExprGen gen(2, 1, 3000 + trial);
    const ProblemDef p = nsift::parse_problem(gen.problem(4));
    const nsift::Box bx{nsift::Interval(-1, 0.5), nsift::Interval(0.25, 2)};
    const nsift::Box by{nsift::Interval(-0.5, 0.5)};
    const auto enc = nsift::eval_interval(p, bx, by);
    for (int k = 0; k < 40; ++k) {
      const Vec x = vec({-1 + 1.5 * u(rng), 0.25 + 1.75 * u(rng)});
      const Vec y = vec({-0.5 + u(rng)});
      const Vec f = nsift::eval(p, x, y);
      for (int i = 0; i < 2; ++i) CHECK(enc[i].contains(f(i)));
    }
  }
}

TEST_CASE("with_target and algebraic residual forms") {
  const ProblemDef fa = fixture("fa");
  const ProblemDef ft = nsift::with_target(fa);
  CHECK(ft.m == 2);
  const Vec r = nsift::eval(ft, vec({2, 1}), vec({3, 9}));
  CHECK(r.norm() == doctest::Approx(0).epsilon(1e-15));

  const ProblemDef ex1 = fixture("example1");
  const ProblemDef g = nsift::algebraic_residual(ex1, nsift::AlgebraicForm::kAxMinusF);
  const ProblemDef h = nsift::algebraic_residual(ex1, nsift::AlgebraicForm::kFMinusAx);
  const Vec x = vec({0.3, -1.2});
  const Vec xi = vec({0.5, 2});
  const Vec direct = (*ex1.A) * x - nsift::eval(ex1, x, Vec()) - xi;
  CHECK((nsift::eval(g, x, xi) - direct).norm() <= 1e-13);
  CHECK((nsift::eval(h, x, xi) + direct).norm() <= 1e-13);
}

TEST_CASE("phi value and gradient") {
  const ProblemDef tw = fixture("twowell");
  const auto v = nsift::eval_phi(tw, vec({0}), Vec());
  CHECK(v.value == doctest::Approx(0.5));
  REQUIRE(v.gradient.has_value());
  CHECK((*v.gradient)(0) == doctest::Approx(0));
  const ProblemDef absx = nsift::parse_problem("n = 1\nF1 = abs(x1)\n");
  CHECK_FALSE(nsift::eval_phi(absx, vec({0}), Vec()).gradient.has_value());
}
