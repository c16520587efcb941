#include "nsift/clarke.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <random>
#include <type_traits>

#include "nsift/detail/family.hpp"
#include "nsift/detail/forward.hpp"
#include "nsift/sampling.hpp"

namespace nsift {

namespace {

// Gradient that is affine in the family parameters: c + sum_p t_p d_p.
template <class S>
struct Affine {
  std::vector<S> c;
  std::vector<std::pair<int, std::vector<S>>> t;  // sorted by parameter id
};

template <class S>
struct FamilyValue {
  S v;
  Affine<S> g;
};

template <class S>
std::vector<S> axpby(const std::vector<S>& a, const S& alpha, const std::vector<S>& b, const S& beta) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * alpha + b[i] * beta;
  return out;
}

template <class S>
std::vector<S> scaled(const std::vector<S>& a, const S& alpha) {
  std::vector<S> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * alpha;
  return out;
}

// alpha * a + beta * b
template <class S>
Affine<S> combine(const Affine<S>& a, const S& alpha, const Affine<S>& b, const S& beta) {
  Affine<S> out;
  out.c = axpby(a.c, alpha, b.c, beta);
  std::size_t i = 0, j = 0;
  while (i < a.t.size() || j < b.t.size()) {
    if (j >= b.t.size() || (i < a.t.size() && a.t[i].first < b.t[j].first)) {
      out.t.emplace_back(a.t[i].first, scaled(a.t[i].second, alpha));
      ++i;
    } else if (i >= a.t.size() || b.t[j].first < a.t[i].first) {
      out.t.emplace_back(b.t[j].first, scaled(b.t[j].second, beta));
      ++j;
    } else {
      out.t.emplace_back(a.t[i].first, axpby(a.t[i].second, alpha, b.t[j].second, beta));
      ++i;
      ++j;
    }
  }
  return out;
}

template <class S>
Affine<S> scale(const Affine<S>& a, const S& alpha) {
  Affine<S> out;
  out.c = scaled(a.c, alpha);
  for (const auto& [id, d] : a.t) out.t.emplace_back(id, scaled(d, alpha));
  return out;
}

template <class S>
FamilyValue<S> operator+(const FamilyValue<S>& a, const FamilyValue<S>& b) {
  return {a.v + b.v, combine(a.g, S(1.0), b.g, S(1.0))};
}
template <class S>
FamilyValue<S> operator-(const FamilyValue<S>& a, const FamilyValue<S>& b) {
  return {a.v - b.v, combine(a.g, S(1.0), b.g, S(-1.0))};
}
template <class S>
FamilyValue<S> operator*(const FamilyValue<S>& a, const FamilyValue<S>& b) {
  return {a.v * b.v, combine(a.g, b.v, b.g, a.v)};
}
template <class S>
FamilyValue<S> operator-(const FamilyValue<S>& a) {
  return {-a.v, scale(a.g, S(-1.0))};
}

template <class S>
S spow(const S& a, int k) {
  if constexpr (std::is_same_v<S, double>) {
    double r = 1.0;
    for (int i = 0; i < k; ++i) r *= a;
    return r;
  } else {
    return pow(a, k);
  }
}

template <class S>
struct FamilyRules {
  int n = 0;
  FamilyMode mode = FamilyMode::kPointwise;
  double eta = 0.0;
  std::vector<int> source_abs;
  bool nested = false;
  std::vector<Vec> active_gradients;  // pointwise double mode only

  FamilyValue<S> constant(double v) const { return {S(v), {std::vector<S>(n, S(0.0)), {}}}; }

  FamilyValue<S> div(const FamilyValue<S>& a, const FamilyValue<S>& b, int node) const {
    bool zero;
    if constexpr (std::is_same_v<S, double>) {
      zero = b.v == 0.0;
    } else {
      zero = b.v.contains_zero();
    }
    if (zero) throw EvalError(node, "division by zero at node " + std::to_string(node));
    const S inv_b = S(1.0) / b.v;
    const S q = a.v * inv_b;
    // (a' - q b') / b
    return {q, combine(a.g, inv_b, b.g, -(q * inv_b))};
  }

  FamilyValue<S> pow(const FamilyValue<S>& a, int k) const {
    if (k == 0) return constant(1.0);
    return {spow(a.v, k), scale(a.g, S(static_cast<double>(k)) * spow(a.v, k - 1))};
  }

  static S magnitude(const S& v) {
    if constexpr (std::is_same_v<S, double>) {
      return std::abs(v);
    } else {
      return nsift::abs(v);
    }
  }

  FamilyValue<S> abs(const FamilyValue<S>& a, int abs_id, int) {
    bool active = mode == FamilyMode::kOuterGlobal;
    double sign = 1.0;
    if constexpr (std::is_same_v<S, double>) {
      if (std::abs(a.v) <= eta) active = true;
      sign = a.v < 0.0 ? -1.0 : 1.0;
    } else {
      if (a.v.contains_zero()) active = true;
      sign = a.v.hi() < 0.0 ? -1.0 : 1.0;
    }
    if (!active) return {magnitude(a.v), scale(a.g, S(sign))};
    // d|u| = t * du with t in [-1, 1]; a parameter already present in du
    // gets multiplied by t, which is again a value in [-1, 1] and is given a
    // fresh parameter (outer approximation).
    Affine<S> g;
    g.c.assign(n, S(0.0));
    g.t.emplace_back(static_cast<int>(source_abs.size()), a.g.c);
    source_abs.push_back(abs_id);
    for (const auto& term : a.g.t) {
      g.t.emplace_back(static_cast<int>(source_abs.size()), term.second);
      source_abs.push_back(abs_id);
      nested = true;
    }
    if constexpr (std::is_same_v<S, double>) {
      if (mode == FamilyMode::kPointwise) {
        active_gradients.push_back(Eigen::Map<const Vec>(a.g.c.data(), n));
      }
    }
    return {magnitude(a.v), g};
  }
};

template <class S>
std::vector<FamilyValue<S>> seed_inputs(const std::vector<S>& values, int n, bool is_x) {
  std::vector<FamilyValue<S>> out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    FamilyValue<S> fv{values[i], {std::vector<S>(n, S(0.0)), {}}};
    if (is_x) fv.g.c[i] = S(1.0);
    out.push_back(std::move(fv));
  }
  return out;
}

template <class S>
std::vector<FamilyValue<S>> run_family(const ProblemDef& p, const std::vector<S>& x, const std::vector<S>& y,
                                       FamilyRules<S>& rules) {
  const auto xs = seed_inputs(x, p.n, true);
  const auto ys = seed_inputs(y, p.n, false);
  return detail::forward<FamilyValue<S>>(p, std::span<const FamilyValue<S>>(xs),
                                         std::span<const FamilyValue<S>>(ys), rules);
}

}  // namespace

const char* to_string(FamilyMode mode) {
  return mode == FamilyMode::kPointwise ? "pointwise" : "outer-global";
}

Mat JacobianFamily::member(const Vec& t) const {
  Mat m = J0;
  for (std::size_t i = 0; i < E.size(); ++i) m += t[static_cast<Eigen::Index>(i)] * E[i];
  return m;
}

std::vector<Mat> JacobianFamily::vertices() const {
  const int k = parameters();
  if (k > 20) throw NumericError("family has too many parameters for vertex enumeration");
  std::vector<Mat> out;
  out.reserve(std::size_t{1} << k);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    Vec t(k);
    for (int i = 0; i < k; ++i) t[i] = (mask >> i) & 1 ? 1.0 : -1.0;
    out.push_back(member(t));
  }
  return out;
}

double JacobianFamily::min_vertex_sigma() const {
  double best = std::numeric_limits<double>::infinity();
  for (const Mat& v : vertices()) {
    Eigen::JacobiSVD<Mat> svd(v);
    best = std::min(best, svd.singularValues().minCoeff());
  }
  return best;
}

JacobianFamily jacobian_family(const ProblemDef& p, const Vec& x, const Vec& y, double eta, FamilyMode mode) {
  if (x.size() != p.n || y.size() != p.m) throw std::invalid_argument("jacobian_family: dimension mismatch");
  FamilyRules<double> rules;
  rules.n = p.n;
  rules.mode = mode;
  rules.eta = eta < 0.0 ? default_eta(x, y) : eta;
  const auto v = run_family(p, std::vector<double>(x.data(), x.data() + x.size()),
                            std::vector<double>(y.data(), y.data() + y.size()), rules);
  JacobianFamily fam;
  fam.x = x;
  fam.y = y;
  fam.mode = mode;
  fam.J0 = Mat::Zero(p.n, p.n);
  const int k = static_cast<int>(rules.source_abs.size());
  std::vector<Mat> dirs(k, Mat::Zero(p.n, p.n));
  for (int i = 0; i < p.n; ++i) {
    const auto& g = v[p.components[i]].g;
    for (int j = 0; j < p.n; ++j) fam.J0(i, j) = g.c[j];
    for (const auto& [id, d] : g.t) {
      for (int j = 0; j < p.n; ++j) dirs[id](i, j) = d[j];
    }
  }
  for (int id = 0; id < k; ++id) {
    if (dirs[id].isZero(0.0)) continue;
    fam.E.push_back(dirs[id]);
    fam.source_abs.push_back(rules.source_abs[id]);
  }
  fam.exact = (mode == FamilyMode::kPointwise && !rules.nested) || fam.E.empty();
  if (fam.exact && !rules.active_gradients.empty()) {
    Mat g(p.n, static_cast<Eigen::Index>(rules.active_gradients.size()));
    for (std::size_t i = 0; i < rules.active_gradients.size(); ++i) g.col(i) = rules.active_gradients[i];
    Eigen::FullPivLU<Mat> lu(g);
    lu.setThreshold(1e-12);
    if (lu.rank() < g.cols()) fam.exact = false;
  }
  return fam;
}

namespace detail {

IntervalFamily interval_family(const ProblemDef& p, const Box& xy, FamilyMode mode) {
  if (static_cast<int>(xy.size()) != p.n + p.m) throw std::invalid_argument("interval_family: box dimension");
  FamilyRules<Interval> rules;
  rules.n = p.n;
  rules.mode = mode;
  const std::vector<Interval> x(xy.begin(), xy.begin() + p.n);
  const std::vector<Interval> y(xy.begin() + p.n, xy.end());
  const auto v = run_family(p, x, y, rules);
  IntervalFamily fam;
  fam.J0 = IntervalMatrix(p.n);
  fam.E.assign(rules.source_abs.size(), IntervalMatrix(p.n));
  for (int i = 0; i < p.n; ++i) {
    const auto& g = v[p.components[i]].g;
    for (int j = 0; j < p.n; ++j) fam.J0(i, j) = g.c[j];
    for (const auto& [id, d] : g.t) {
      for (int j = 0; j < p.n; ++j) fam.E[id](i, j) = d[j];
    }
  }
  return fam;
}

IntervalMatrix family_hull(const IntervalFamily& f) {
  IntervalMatrix m = f.J0;
  const Interval unit(-1.0, 1.0);
  for (const auto& e : f.E) {
    for (std::size_t i = 0; i < m.a.size(); ++i) m.a[i] += unit * e.a[i];
  }
  return m;
}

Interval interval_det(const IntervalMatrix& m) {
  const int n = m.n;
  if (n == 0) return Interval(1.0);
  if (n == 1) return m(0, 0);
  if (n == 2) return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  if (n > 6) throw std::invalid_argument("interval determinant supports n <= 6");
  Interval det(0.0);
  for (int j = 0; j < n; ++j) {
    IntervalMatrix minor(n - 1);
    for (int r = 1; r < n; ++r) {
      for (int c = 0, cc = 0; c < n; ++c) {
        if (c == j) continue;
        minor(r - 1, cc++) = m(r, c);
      }
    }
    const Interval term = m(0, j) * interval_det(minor);
    det = (j % 2 == 0) ? det + term : det - term;
  }
  return det;
}

}  // namespace detail

Objective phi_objective(const ProblemDef& p, const Vec& y) {
  return shifted_phi_objective(p, y, Vec::Zero(p.n));
}

Objective shifted_phi_objective(const ProblemDef& p, const Vec& y, const Vec& shift) {
  auto owned = std::make_shared<const ProblemDef>(p);
  return Objective(
      p.n,
      [owned, y, shift](const Vec& x) {
        PhiValue v = eval_phi(*owned, x + shift, y);
        return Evaluation{v.value, std::move(v.gradient)};
      },
      [owned, y, shift](const Vec& x) { return 0.5 * eval(*owned, x + shift, y).squaredNorm(); });
}

GradientBundle sample_gradients(const Objective& f, const Vec& u, double radius, int k, std::uint64_t seed) {
  if (!(radius > 0.0)) throw std::invalid_argument("sample_gradients: radius must be positive");
  GradientBundle b;
  b.center = u;
  b.radius = radius;
  std::mt19937_64 rng(mix_seed(seed, 0));
  const int n = static_cast<int>(u.size());
  if (k <= 0) k = 2 * (n + 1);
  for (int i = 0; i < k; ++i) {
    bool ok = false;
    for (int attempt = 0; attempt <= 10 && !ok; ++attempt) {
      const Vec pt = u + radius * uniform_in_ball(rng, n);
      Evaluation e = f(pt);
      if (!e.gradient) continue;
      b.points.push_back(pt);
      b.gradients.push_back(std::move(*e.gradient));
      b.values.push_back(e.value);
      ok = true;
    }
    if (!ok) throw NumericError("gradient sampling kept hitting nonsmooth points");
  }
  return b;
}

StationarityMeasure min_norm_element(const std::vector<Vec>& points, double tol, int max_iterations) {
  if (points.empty()) throw std::invalid_argument("min_norm_element: empty bundle");
  const int k = static_cast<int>(points.size());
  const auto n = points.front().size();
  Mat P(n, k);
  for (int i = 0; i < k; ++i) P.col(i) = points[i];
  double scale = 0.0;
  for (int i = 0; i < k; ++i) scale = std::max(scale, points[i].squaredNorm());
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * std::max(scale, 1e-300);
  const double target = tol * tol + noise;

  // Wolfe's active-set method: S stays affinely independent, each minor
  // cycle moves to the affine-hull minimizer of S or drops a point.
  std::vector<int> S;
  std::vector<double> lambda;
  Eigen::Index start;
  P.colwise().squaredNorm().minCoeff(&start);
  S.push_back(static_cast<int>(start));
  lambda.push_back(1.0);
  Vec x = P.col(start);

  auto affine_min = [&](std::vector<double>& alpha) {
    const int s = static_cast<int>(S.size());
    Mat G(s, s);
    for (int a = 0; a < s; ++a) {
      for (int b = 0; b < s; ++b) G(a, b) = P.col(S[a]).dot(P.col(S[b])) + 1.0;
    }
    const Vec z = G.completeOrthogonalDecomposition().solve(Vec::Ones(s));
    const double sum = z.sum();
    alpha.assign(s, 0.0);
    for (int a = 0; a < s; ++a) alpha[a] = z[a] / sum;
  };

  StationarityMeasure out;
  bool done = false;
  int it = 0;
  int work = 0;
  for (; it < max_iterations && work < max_iterations; ++it) {
    const Vec dots = P.transpose() * x;
    Eigen::Index j;
    const double dmin = dots.minCoeff(&j);
    if (x.squaredNorm() - dmin <= target ||
        std::find(S.begin(), S.end(), static_cast<int>(j)) != S.end()) {
      done = true;
      break;
    }
    S.push_back(static_cast<int>(j));
    lambda.push_back(0.0);
    for (; work < max_iterations; ++work) {
      std::vector<double> alpha;
      affine_min(alpha);
      bool interior = true;
      for (double a : alpha) interior = interior && a > 0.0;
      if (interior) {
        lambda = alpha;
        break;
      }
      double theta = 1.0;
      for (std::size_t a = 0; a < S.size(); ++a) {
        if (alpha[a] <= 0.0) theta = std::min(theta, lambda[a] / (lambda[a] - alpha[a]));
      }
      for (std::size_t a = 0; a < S.size(); ++a) lambda[a] = (1.0 - theta) * lambda[a] + theta * alpha[a];
      std::vector<int> keepS;
      std::vector<double> keepL;
      for (std::size_t a = 0; a < S.size(); ++a) {
        if (lambda[a] > 1e-15) {
          keepS.push_back(S[a]);
          keepL.push_back(lambda[a]);
        }
      }
      if (keepS.size() == S.size()) {
        // Numerically stuck: drop the smallest weight.
        const auto m = std::min_element(keepL.begin(), keepL.end()) - keepL.begin();
        keepS.erase(keepS.begin() + m);
        keepL.erase(keepL.begin() + m);
      }
      S = keepS;
      lambda = keepL;
      const double sum = std::accumulate(lambda.begin(), lambda.end(), 0.0);
      for (double& l : lambda) l /= sum;
      if (S.size() == 1) {
        lambda = {1.0};
        break;
      }
    }
    Vec nx = Vec::Zero(n);
    for (std::size_t a = 0; a < S.size(); ++a) nx += lambda[a] * P.col(S[a]);
    if (nx.squaredNorm() >= x.squaredNorm() && it > 0) {
      // No progress possible at working precision.
      x = nx.squaredNorm() < x.squaredNorm() ? nx : x;
      done = true;
      break;
    }
    x = nx;
  }
  Vec w = Vec::Zero(k);
  for (std::size_t a = 0; a < S.size(); ++a) w[S[a]] += lambda[a];
  out.v = P * w;
  out.norm = out.v.norm();
  out.weights = w;
  out.iterations = it;
  out.converged = done;
  return out;
}

StationarityMeasure min_norm_element(const GradientBundle& b, double tol) {
  return min_norm_element(b.gradients, tol);
}

PhiSubgradients phi_subgradients(const ProblemDef& p, const Vec& x, const Vec& y, double tol, FamilyMode mode) {
  PhiSubgradients out;
  out.residual = eval(p, x, y);
  out.family = jacobian_family(p, x, y, -1.0, mode);
  for (const Mat& b : out.family.vertices()) out.vertex_images.push_back(b.transpose() * out.residual);
  out.min_norm = min_norm_element(out.vertex_images, std::min(tol, 1e-10));
  out.stationary = out.min_norm.norm <= tol;
  out.residual_zero = out.residual.norm() <= tol;
  out.rank_deficiency_implied = out.stationary && !out.residual_zero;
  out.min_vertex_sigma = out.family.min_vertex_sigma();
  return out;
}

}  // namespace nsift
