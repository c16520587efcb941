#include "nsift/solve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nsift/sampling.hpp"

namespace nsift {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double safe_value(const Objective& f, const Vec& x) {
  try {
    const double v = f.value(x);
    return std::isnan(v) ? kInf : v;
  } catch (const EvalError&) {
    return kInf;
  }
}

std::optional<Vec> safe_gradient(const Objective& f, const Vec& x) {
  try {
    return f(x).gradient;
  } catch (const EvalError&) {
    return std::nullopt;
  }
}

struct MinimizerState {
  Vec x;
  double fx = 0.0;
  std::optional<Vec> gx;
  Mat H;
  double radius = 0.0;
  double stationarity = kInf;
  int it = 0;
};

// Runs gradient-sampling iterations until the stationarity test passes at
// tolerance eps, the value target is hit, or the iteration budget is spent.
// Returns true on stationarity or target.
bool run_stage(const Objective& f, const MinimizeOptions& o, double eps, int budget, MinimizerState& s,
               MinimizeResult& out) {
  const int n = f.dim();
  const int k = o.samples > 0 ? o.samples : 2 * (n + 1);
  const int stop = s.it + budget;
  for (; s.it < stop; ++s.it) {
    if (s.fx <= o.value_target) {
      out.reached_target = true;
      return true;
    }
    GradientBundle b = sample_gradients(f, s.x, s.radius, k, mix_seed(o.seed, static_cast<std::uint64_t>(s.it)));
    std::vector<Vec> g = std::move(b.gradients);
    if (s.gx) g.push_back(*s.gx);
    const StationarityMeasure sm = min_norm_element(g);
    s.stationarity = sm.norm;
    if (sm.norm <= eps && s.radius <= eps) return true;

    // Min-norm element in the metric of H: with H = L L^T, minimize
    // |L^T v| over the hull.
    const Mat L = Eigen::LLT<Mat>(s.H).matrixL();
    std::vector<Vec> q;
    q.reserve(g.size());
    for (const Vec& gi : g) q.push_back(L.transpose() * gi);
    const StationarityMeasure smh = min_norm_element(q);
    Vec vh = Vec::Zero(n);
    for (std::size_t i = 0; i < g.size(); ++i) vh += smh.weights[static_cast<Eigen::Index>(i)] * g[i];
    const Vec d = -(s.H * vh);
    const double dec = smh.norm * smh.norm;

    if (sm.norm <= s.radius) s.radius *= 0.5;
    if (!(dec > 0.0)) continue;

    double t = 1.0;
    bool accepted = false;
    Vec xn;
    double fn = kInf;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      xn = s.x + t * d;
      fn = safe_value(f, xn);
      if (fn <= s.fx - o.armijo * t * dec) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      s.radius *= 0.5;
      s.H.setIdentity();
      if (s.radius < 1e-16 * (1.0 + s.x.norm())) return false;
      continue;
    }
    const std::optional<Vec> gn = safe_gradient(f, xn);
    if (o.quasi_newton && gn && s.gx) {
      const Vec sv = xn - s.x;
      const Vec yv = *gn - *s.gx;
      const double sy = sv.dot(yv);
      if (sy > 1e-12 * sv.norm() * yv.norm()) {
        const double rho = 1.0 / sy;
        const Mat I = Mat::Identity(n, n);
        s.H = (I - rho * sv * yv.transpose()) * s.H * (I - rho * yv * sv.transpose()) + rho * sv * sv.transpose();
        s.H = 0.5 * (s.H + s.H.transpose());
      }
    }
    s.x = xn;
    s.fx = fn;
    s.gx = gn;
    out.history.push_back(fn);
  }
  return false;
}

std::vector<Vec> start_points(const Box& region, int count, std::uint64_t seed) {
  const int n = static_cast<int>(region.size());
  std::vector<Vec> out;
  Vec c(n);
  for (int i = 0; i < n; ++i) c[i] = region[i].mid();
  out.push_back(c);
  HaltonSequence h(n, seed);
  for (int i = 1; i < count; ++i) {
    const Vec u = h.point(static_cast<std::uint64_t>(i - 1));
    Vec x(n);
    for (int j = 0; j < n; ++j) x[j] = region[j].lo() + u[j] * region[j].width();
    out.push_back(x);
  }
  return out;
}

AuditVerdict classify(const RootSet& s) {
  if (s.roots.empty()) return AuditVerdict::kNoneFound;
  if (s.roots.size() > 1) return AuditVerdict::kMultiple;
  return s.stationary_nonroots.empty() ? AuditVerdict::kUnique : AuditVerdict::kInconclusive;
}

std::string describe_roots(const RootSet& s) {
  std::string out;
  for (const auto& r : s.roots) {
    out += " (";
    for (Eigen::Index i = 0; i < r.x.size(); ++i) out += (i ? ", " : "") + std::to_string(r.x[i]);
    out += ")";
  }
  return out;
}

}  // namespace

MinimizeResult minimize_nonsmooth(const Objective& f, const Vec& x0, const MinimizeOptions& o) {
  const int n = f.dim();
  if (x0.size() != n || !x0.allFinite()) throw std::invalid_argument("minimize_nonsmooth: bad starting point");
  MinimizeResult out;
  MinimizerState s;
  s.x = x0;
  s.fx = safe_value(f, x0);
  if (!std::isfinite(s.fx)) throw NumericError("minimize_nonsmooth: objective undefined at the start");
  s.gx = safe_gradient(f, x0);
  s.H = Mat::Identity(n, n);
  s.radius = o.initial_radius > 0.0 ? o.initial_radius : 0.1 * (1.0 + x0.norm());
  out.history.push_back(s.fx);

  out.converged = run_stage(f, o, o.stationarity_tol, o.max_iterations, s, out);
  if (out.converged && !out.reached_target && o.polish && s.it < o.max_iterations) {
    const int budget = std::min(500, o.max_iterations - s.it);
    run_stage(f, o, o.stationarity_tol * 1e-6, budget, s, out);
  }
  out.x = s.x;
  out.value = s.fx;
  out.stationarity = out.reached_target && !std::isfinite(s.stationarity) ? 0.0 : s.stationarity;
  if (out.reached_target && s.gx) out.stationarity = std::min(out.stationarity, s.gx->norm());
  out.radius = s.radius;
  out.iterations = s.it;
  return out;
}

const char* to_string(AuditVerdict v) {
  switch (v) {
    case AuditVerdict::kUnique:
      return "unique";
    case AuditVerdict::kMultiple:
      return "multiple";
    case AuditVerdict::kNoneFound:
      return "none-found";
    case AuditVerdict::kInconclusive:
      return "inconclusive";
  }
  return "?";
}

double cluster_radius_at(const SolveOptions& opts, const Vec& x) {
  return opts.cluster_radius.value_or(1e-6 * (1.0 + x.norm()));
}

RootSet find_roots(const ProblemDef& p, const Vec& y, const SolveOptions& opts) {
  if (y.size() != p.m) throw std::invalid_argument("find_roots: y has the wrong dimension");
  if (!(opts.residual_tol > 0.0) || !(opts.stationarity_tol > 0.0) ||
      (opts.cluster_radius && !(*opts.cluster_radius > 0.0))) {
    throw std::invalid_argument("find_roots: tolerances must be positive");
  }
  const Box region = opts.start_region.value_or(p.x_box());
  if (static_cast<int>(region.size()) != p.n) throw std::invalid_argument("find_roots: start region dimension");
  const int count = opts.multistart > 0 ? opts.multistart : (p.n <= 2 ? 64 : 32 << p.n);
  const auto starts = start_points(region, count, mix_seed(opts.seed, 17));
  const Objective phi = phi_objective(p, y);

  MinimizeOptions mo;
  mo.stationarity_tol = opts.stationarity_tol;
  mo.value_target = 0.5 * (0.01 * opts.residual_tol) * (0.01 * opts.residual_tol);
  mo.max_iterations = opts.max_iterations;
  std::vector<std::optional<MinimizeResult>> results(starts.size());
  parallel_for(opts.exec, starts.size(), [&](std::size_t i) {
    MinimizeOptions local = mo;
    local.seed = mix_seed(opts.seed, 1000 + i);
    try {
      results[i] = minimize_nonsmooth(phi, starts[i], local);
    } catch (const NumericError&) {
      results[i].reset();
    }
  });

  RootSet set;
  set.y = y;
  set.starts = count;
  for (const auto& r : results) {
    if (!r) continue;
    const Vec fx = eval(p, r->x, y);
    const double residual = fx.norm();
    const bool is_root = residual <= opts.residual_tol;
    if (!is_root && !r->converged) continue;
    ++set.converged_starts;
    if (is_root) {
      auto it = std::find_if(set.roots.begin(), set.roots.end(), [&](const Root& c) {
        return (c.x - r->x).norm() <= cluster_radius_at(opts, c.x);
      });
      if (it != set.roots.end()) {
        ++it->basin_count;
      } else {
        set.roots.push_back({r->x, residual, r->stationarity, 1});
      }
    } else if (r->stationarity <= opts.stationarity_tol) {
      auto it = std::find_if(set.stationary_nonroots.begin(), set.stationary_nonroots.end(),
                             [&](const StationaryNonroot& c) {
                               return (c.x - r->x).norm() <= cluster_radius_at(opts, c.x);
                             });
      if (it != set.stationary_nonroots.end()) {
        ++it->basin_count;
      } else {
        StationaryNonroot s{r->x, residual, 0.5 * residual * residual, r->stationarity, 1, 0.0};
        try {
          s.min_vertex_sigma = jacobian_family(p, r->x, y).min_vertex_sigma();
        } catch (const std::exception&) {
          s.min_vertex_sigma = std::numeric_limits<double>::quiet_NaN();
        }
        set.stationary_nonroots.push_back(std::move(s));
      }
    }
  }
  set.audit = classify(set);
  return set;
}

Root implicit_eval(const ProblemDef& p, const Vec& y, const SolveOptions& opts) {
  RootSet set = find_roots(p, y, opts);
  switch (set.audit) {
    case AuditVerdict::kUnique:
      return set.roots.front();
    case AuditVerdict::kMultiple:
      throw MultipleRoots("multiple roots:" + describe_roots(set), std::move(set));
    case AuditVerdict::kNoneFound:
      throw NoRootFound("no root found (consider running the coercivity probe)", std::move(set));
    case AuditVerdict::kInconclusive:
      throw UniquenessNotAudited("one root found together with stationary non-roots", std::move(set));
  }
  throw std::logic_error("unreachable");
}

std::vector<Vec> y_segment(const Vec& from, const Vec& to, int samples) {
  if (from.size() != to.size() || samples < 1) throw std::invalid_argument("y_segment: bad arguments");
  std::vector<Vec> out;
  for (int i = 0; i < samples; ++i) {
    const double s = samples == 1 ? 0.0 : static_cast<double>(i) / (samples - 1);
    out.push_back(i == samples - 1 ? to : Vec(from + s * (to - from)));
  }
  return out;
}

Atlas implicit_atlas(const ProblemDef& p, const std::vector<Vec>& ys, const SolveOptions& opts) {
  Atlas atlas;
  if (ys.empty()) return atlas;
  AtlasEntry first;
  first.y = ys.front();
  first.root = implicit_eval(p, ys.front(), opts);
  first.audited = true;
  atlas.entries.push_back(first);
  for (std::size_t k = 1; k < ys.size(); ++k) {
    const AtlasEntry& prev = atlas.entries.back();
    AtlasEntry e;
    e.y = ys[k];
    const double step = (ys[k] - prev.y).norm();
    MinimizeOptions mo;
    mo.stationarity_tol = opts.stationarity_tol;
    mo.value_target = 0.5 * (0.01 * opts.residual_tol) * (0.01 * opts.residual_tol);
    mo.max_iterations = opts.max_iterations;
    mo.initial_radius = step > 0.0 ? 1e-3 * step : 1e-3;
    mo.seed = mix_seed(opts.seed, 500000 + k);
    std::optional<Root> warm;
    try {
      const MinimizeResult r = minimize_nonsmooth(phi_objective(p, e.y), prev.root.x, mo);
      const double residual = eval(p, r.x, e.y).norm();
      if (residual <= opts.residual_tol) warm = Root{r.x, residual, r.stationarity, 1};
    } catch (const NumericError&) {
    }
    if (k % 10 == 0 || !warm) {
      e.root = implicit_eval(p, e.y, opts);
      e.audited = true;
      if (warm && (warm->x - e.root.x).norm() > cluster_radius_at(opts, e.root.x)) e.break_flag = true;
    } else {
      e.root = *warm;
    }
    e.ratio = step > 0.0 ? (e.root.x - prev.root.x).norm() / step : 0.0;
    atlas.breaks += e.break_flag;
    atlas.entries.push_back(std::move(e));
  }
  return atlas;
}

Root invert(const ProblemDef& f, const Vec& target, const SolveOptions& opts) {
  if (f.m != 0) throw std::invalid_argument("invert: expects a pure map (m = 0)");
  if (target.size() != f.n) throw std::invalid_argument("invert: target has the wrong dimension");
  return implicit_eval(with_target(f), target, opts);
}

AlgebraicChecklist algebraic_checklist(const ProblemDef& p, const Vec& xi, const SolveOptions& opts,
                                       const AlgebraicOptions& aopts) {
  if (!p.A) throw std::invalid_argument("algebraic_checklist: problem has no matrix A");
  if (xi.size() != p.n) throw std::invalid_argument("algebraic_checklist: xi has the wrong dimension");
  AlgebraicChecklist c;
  c.spectral = spectral_report(*p.A);
  c.growth = growth_constants(p, {}, aopts.growth_samples, mix_seed(opts.seed, 1), opts.exec);

  const ProblemDef g = algebraic_residual(p, AlgebraicForm::kAxMinusF);
  Box region = p.x_box();
  for (int i = 0; i < p.n; ++i) region.emplace_back(xi[i]);
  RankOptions ro = aopts.rank;
  ro.exec = opts.exec;
  c.rank = rank_certificate(g, region, ro);
  auto coercive_obj = [&g, xi](const Vec& x) { return 0.5 * eval(g, x, xi).squaredNorm(); };
  c.coercivity = coercivity_probe(coercive_obj, p.n, {}, aopts.coercivity_samples, mix_seed(opts.seed, 2), opts.exec);

  const bool rank_ok = c.rank.verdict == RankVerdict::kMaximalRank;
  const bool a1 = c.spectral.a1_holds;
  c.small_growth = a1 && (c.growth.linear_upper_ok || c.growth.sublinear_ok) && rank_ok;
  c.large_growth = a1 && (c.growth.linear_lower_ok || c.growth.superlinear_ok) && rank_ok;
  c.corollary = c.coercivity.verdict == CoercivityVerdict::kCoerciveEvidence && rank_ok;
  c.route = c.small_growth ? "small-growth" : c.large_growth ? "large-growth" : c.corollary ? "corollary" : "none";
  return c;
}

AlgebraicResult solve_algebraic(const ProblemDef& p, const Vec& xi, const SolveOptions& opts,
                                const AlgebraicOptions& aopts) {
  AlgebraicResult res;
  res.checklist = algebraic_checklist(p, xi, opts, aopts);
  const AlgebraicChecklist& c = res.checklist;

  const AlgebraicForm form = c.route == "large-growth" ? AlgebraicForm::kFMinusAx : AlgebraicForm::kAxMinusF;
  SolveOptions so = opts;
  if (!so.start_region) so.start_region = p.x_box();
  res.roots = find_roots(algebraic_residual(p, form), xi, so);
  if (res.roots.audit == AuditVerdict::kUnique) {
    res.root = res.roots.roots.front();
    res.claim = c.route == "none" ? "audited only" : "theorem-evidenced";
  } else {
    res.claim = to_string(res.roots.audit);
  }
  return res;
}

}  // namespace nsift
