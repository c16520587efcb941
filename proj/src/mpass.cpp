#include "nsift/mpass.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

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

// Gradient where it exists, otherwise the min-norm element of a tiny
// gradient bundle (a Clarke-type descent direction).
Vec descent_gradient(const Objective& f, const Vec& x, std::uint64_t seed) {
  try {
    if (auto g = f(x).gradient) return *g;
    const double r = 1e-8 * (1.0 + x.norm());
    const GradientBundle b = sample_gradients(f, x, r, static_cast<int>(x.size()) + 1, seed);
    return min_norm_element(b).v;
  } catch (const EvalError&) {
    return Vec::Zero(x.size());
  }
}

std::vector<Vec> polyline_resample(const std::vector<Vec>& pts, int segments) {
  std::vector<double> s(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i) s[i] = s[i - 1] + (pts[i] - pts[i - 1]).norm();
  const double total = s.back();
  std::vector<Vec> out;
  out.reserve(segments + 1);
  out.push_back(pts.front());
  std::size_t seg = 1;
  for (int k = 1; k < segments; ++k) {
    const double target = total * k / segments;
    while (seg + 1 < pts.size() && s[seg] < target) ++seg;
    const double len = s[seg] - s[seg - 1];
    const double w = len > 0.0 ? (target - s[seg - 1]) / len : 0.0;
    out.push_back(pts[seg - 1] + std::clamp(w, 0.0, 1.0) * (pts[seg] - pts[seg - 1]));
  }
  out.push_back(pts.back());
  return out;
}

// Chords of a resampled zigzag can still be uneven; resampling again smooths
// the corners until every gap is within [1/2, 2] of the mean.
std::vector<Vec> reparametrize(std::vector<Vec> pts, int segments) {
  for (int pass = 0; pass < 50; ++pass) {
    pts = polyline_resample(pts, segments);
    double lo = kInf, hi = 0.0, total = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      const double gap = (pts[i] - pts[i - 1]).norm();
      lo = std::min(lo, gap);
      hi = std::max(hi, gap);
      total += gap;
    }
    const double mean = total / segments;
    if (lo >= 0.5 * mean && hi <= 2.0 * mean) break;
  }
  return pts;
}

double stationarity_at(const Objective& f, const Vec& v, double radius, std::uint64_t seed) {
  const int n = static_cast<int>(v.size());
  std::vector<Vec> grads;
  try {
    if (auto g = f(v).gradient) grads.push_back(*g);
    const GradientBundle b = sample_gradients(f, v, radius, 2 * (n + 1), seed);
    grads.insert(grads.end(), b.gradients.begin(), b.gradients.end());
  } catch (const NumericError&) {
    if (grads.empty()) return kInf;
  } catch (const EvalError&) {
    return kInf;
  }
  return min_norm_element(grads).norm;
}

class StringRelaxer {
 public:
  StringRelaxer(const Objective& f, const MountainPassOptions& o) : f_(f), o_(o) {}

  void evaluate(PathState& p) const {
    p.values.resize(p.beads.size());
    parallel_for(o_.exec, p.beads.size(), [&](std::size_t k) { p.values[k] = safe_value(f_, p.beads[k]); });
    p.refresh_max();
  }

  // Relaxes the interior beads; returns the number of accepted iterations.
  // Every accepted iteration has a path maximum no larger than the previous.
  int relax(PathState& p, int budget, double tol, std::vector<double>* max_history,
            std::vector<PathSample>* history) const {
    const int K = static_cast<int>(p.beads.size()) - 1;
    double h = -1.0;
    int accepted = 0;
    std::vector<Vec> perp(K + 1, Vec::Zero(p.beads.front().size()));
    for (int it = 0; it < budget; ++it) {
      double worst = 0.0;
      parallel_for(o_.exec, K - 1, [&](std::size_t j) {
        const int k = static_cast<int>(j) + 1;
        Vec tau = p.beads[k + 1] - p.beads[k - 1];
        const double tn = tau.norm();
        Vec g = descent_gradient(f_, p.beads[k], mix_seed(o_.seed, 7919ull * p.iteration + k));
        if (tn > 0.0) {
          tau /= tn;
          g -= g.dot(tau) * tau;
        }
        perp[k] = g;
      });
      for (int k = 1; k < K; ++k) worst = std::max(worst, perp[k].norm());
      if (worst <= tol) break;
      if (h < 0.0) {
        double spacing = 0.0;
        for (int k = 1; k <= K; ++k) spacing += (p.beads[k] - p.beads[k - 1]).norm();
        h = 0.5 * spacing / K / worst;
      }
      PathState trial = p;
      std::vector<char> full(K + 1, 1);
      parallel_for(o_.exec, K - 1, [&](std::size_t j) {
        const int k = static_cast<int>(j) + 1;
        const double g2 = perp[k].squaredNorm();
        if (g2 == 0.0) return;
        double step = h;
        for (int halving = 0; halving < 30; ++halving, step *= 0.5) {
          const Vec x = p.beads[k] - step * perp[k];
          const double v = safe_value(f_, x);
          if (v <= p.values[k] - 1e-4 * step * g2) {
            trial.beads[k] = x;
            full[k] = halving == 0;
            return;
          }
        }
        full[k] = 0;
      });
      trial.beads = reparametrize(trial.beads, K);
      evaluate(trial);
      if (!(trial.max_value <= p.max_value)) {
        h *= 0.5;
        if (h * worst < 1e-15 * (1.0 + p.beads[p.argmax].norm())) break;
        continue;
      }
      trial.iteration = p.iteration + 1;
      p = std::move(trial);
      ++accepted;
      if (max_history) max_history->push_back(p.max_value);
      if (history) {
        for (int k = 0; k <= K; ++k) history->push_back({p.iteration, k, p.beads[k], p.values[k]});
      }
      if (std::all_of(full.begin() + 1, full.end() - 1, [](char c) { return c != 0; })) h *= 2.0;
    }
    return accepted;
  }

 private:
  const Objective& f_;
  const MountainPassOptions& o_;
};

// Newton iteration on the gradient from a finite-difference Hessian. Only
// used where the objective is differentiable; stops on any non-improvement.
Vec newton_polish(const Objective& f, Vec v, double max_step, double tol) {
  const auto n = v.size();
  for (int it = 0; it < 30; ++it) {
    std::optional<Vec> g;
    try {
      g = f(v).gradient;
    } catch (const EvalError&) {
      return v;
    }
    if (!g || g->norm() <= tol) return v;
    const double d = 1e-5 * (1.0 + v.norm());
    Mat H(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      Vec e = Vec::Zero(n);
      e(j) = d;
      std::optional<Vec> gp, gm;
      try {
        gp = f(v + e).gradient;
        gm = f(v - e).gradient;
      } catch (const EvalError&) {
        return v;
      }
      if (!gp || !gm) return v;
      H.col(j) = (*gp - *gm) / (2.0 * d);
    }
    H = 0.5 * (H + H.transpose());
    const Vec step = H.completeOrthogonalDecomposition().solve(*g);
    if (!step.allFinite() || step.norm() > max_step) return v;
    const Vec next = v - step;
    std::optional<Vec> gn;
    try {
      gn = f(next).gradient;
    } catch (const EvalError&) {
      return v;
    }
    if (!gn || !(gn->norm() < g->norm())) return v;
    v = next;
  }
  return v;
}

}  // namespace

const char* to_string(SaddleVerdict v) {
  switch (v) {
    case SaddleVerdict::kSaddleFound:
      return "saddle-found";
    case SaddleVerdict::kDegenerate:
      return "degenerate";
    case SaddleVerdict::kBudgetExhausted:
      return "budget-exhausted";
  }
  return "?";
}

void PathState::refresh_max() {
  argmax = 0;
  for (std::size_t k = 1; k < values.size(); ++k) {
    if (values[k] > values[argmax]) argmax = static_cast<int>(k);
  }
  max_value = values.empty() ? 0.0 : values[argmax];
}

RingInfimum ring_infimum(const Objective& f, const Vec& center, double rho, int samples, std::uint64_t seed) {
  const int n = static_cast<int>(center.size());
  if (!(rho > 0.0)) throw std::invalid_argument("ring_infimum: radius must be positive");
  if (samples <= 0) samples = 16 * n;
  if (samples < 16 * n) throw std::invalid_argument("ring_infimum: need at least 16 n samples");
  const ScalarFn fn = [&f](const Vec& x) { return safe_value(f, x); };
  const SphereMin s = sphere_infimum(fn, center, rho, samples, seed);
  return {rho, s.value, center + rho * s.direction};
}

std::vector<double> default_ring_schedule(const Vec& u1, const Vec& u2) {
  const double e = (u2 - u1).norm();
  std::vector<double> out;
  for (int i = 0; i < 9; ++i) out.push_back(e * 0.05 * std::pow(0.95 / 0.05, i / 8.0));
  return out;
}

std::optional<RingInfimum> find_mountain_ring(const Objective& f, const Vec& u1, const Vec& u2,
                                              std::vector<double> schedule, int samples, std::uint64_t seed,
                                              double margin) {
  const double e = (u2 - u1).norm();
  if (!(e > 0.0)) throw std::invalid_argument("find_mountain_ring: endpoints coincide");
  if (schedule.empty()) schedule = default_ring_schedule(u1, u2);
  for (double r : schedule) {
    if (!(r > 0.0 && r < e)) throw std::invalid_argument("find_mountain_ring: radius outside (0, |u2 - u1|)");
  }
  const double level = std::max(safe_value(f, u1), safe_value(f, u2));
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    RingInfimum r = ring_infimum(f, u1, schedule[i], samples, mix_seed(seed, i));
    if (r.value > level + margin) return r;
  }
  return std::nullopt;
}

SaddleEstimate mountain_pass(const Objective& f, const Vec& u1, const Vec& u2, const MountainPassOptions& o) {
  if (o.beads < 8) throw std::invalid_argument("mountain_pass: need at least 8 beads");
  if (u1.size() != f.dim() || u2.size() != f.dim()) throw std::invalid_argument("mountain_pass: dimension mismatch");
  if (!((u2 - u1).norm() > 0.0)) throw std::invalid_argument("mountain_pass: endpoints coincide");
  const double j1 = safe_value(f, u1);
  const double j2 = safe_value(f, u2);
  if (!std::isfinite(j1) || !std::isfinite(j2)) throw std::invalid_argument("mountain_pass: endpoint value not finite");
  const double level = std::max(j1, j2);

  SaddleEstimate out;
  out.ring = find_mountain_ring(f, u1, u2, {}, 0, mix_seed(o.seed, 1));

  const StringRelaxer relaxer(f, o);
  PathState& path = out.path;
  path.beads = polyline_resample({u1, u2}, o.beads);
  relaxer.evaluate(path);
  out.max_history.push_back(path.max_value);
  if (o.record_history) {
    for (int k = 0; k <= o.beads; ++k) out.history.push_back({0, k, path.beads[k], path.values[k]});
  }

  int budget = o.max_iterations;
  budget -= relaxer.relax(path, budget, o.string_tol, &out.max_history, o.record_history ? &out.history : nullptr);
  out.iterations = path.iteration;

  auto radius_at = [&](const Vec& x) { return o.cluster_radius.value_or(1e-6 * (1.0 + x.norm())); };
  auto finish = [&](const Vec& v) {
    out.v = v;
    out.c = safe_value(f, v);
    const double dist = std::min((v - u1).norm(), (v - u2).norm());
    if (out.c <= level + 1e-12 || dist <= radius_at(v)) {
      out.verdict = SaddleVerdict::kDegenerate;
      return out;
    }
    out.stationarity = stationarity_at(f, v, o.stationarity_tol, mix_seed(o.seed, 2));
    out.verdict = out.stationarity <= o.stationarity_tol ? SaddleVerdict::kSaddleFound : SaddleVerdict::kBudgetExhausted;
    return out;
  };

  const int K = o.beads;
  if (path.argmax == 0 || path.argmax == K || path.max_value <= level + 1e-12) {
    return finish(path.beads[path.argmax]);
  }

  // Zoom: re-run the string between the neighbours of the current maximum,
  // so the spacing near the top shrinks geometrically.
  Vec v = path.beads[path.argmax];
  double spacing = (path.beads[path.argmax + 1] - path.beads[path.argmax - 1]).norm();
  std::vector<Vec> local = {path.beads[path.argmax - 1], v, path.beads[path.argmax + 1]};
  for (int level_no = 0; level_no < 12 && budget > 0; ++level_no) {
    v = newton_polish(f, v, spacing, 1e-2 * o.stationarity_tol);
    if (stationarity_at(f, v, o.stationarity_tol, mix_seed(o.seed, 2)) <= o.stationarity_tol) break;
    if (spacing <= 1e-13 * (1.0 + v.norm())) break;
    PathState sub;
    sub.beads = polyline_resample(local, K);
    relaxer.evaluate(sub);
    budget -= relaxer.relax(sub, budget, 1e-2 * o.stationarity_tol, nullptr, nullptr);
    if (sub.argmax == 0 || sub.argmax == K) {
      v = sub.beads[sub.argmax];
      break;
    }
    v = sub.beads[sub.argmax];
    local = {sub.beads[sub.argmax - 1], v, sub.beads[sub.argmax + 1]};
    spacing = (local[2] - local[0]).norm();
  }
  out.iterations = o.max_iterations - budget;
  return finish(v);
}

UniquenessProbe probe_uniqueness(const ProblemDef& p, const Vec& y, const SolveOptions& solve,
                                 const MountainPassOptions& mp, const RankOptions& rank) {
  UniquenessProbe out;
  out.roots = find_roots(p, y, solve);
  if (out.roots.roots.size() < 2) return out;
  const Vec x1 = out.roots.roots[0].x;
  const Vec x2 = out.roots.roots[1].x;
  out.x1 = x1;
  out.x2 = x2;
  const Objective psi = shifted_phi_objective(p, y, x2);
  SaddleEstimate s = mountain_pass(psi, Vec::Zero(p.n), x1 - x2, mp);
  out.ring = s.ring;
  s.v += x2;
  for (Vec& b : s.path.beads) b += x2;
  for (PathSample& h : s.history) h.x += x2;

  std::vector<Interval> region;
  for (int i = 0; i < p.n; ++i) {
    double lo = kInf, hi = -kInf;
    for (const Vec& b : s.path.beads) {
      lo = std::min(lo, b(i));
      hi = std::max(hi, b(i));
    }
    const double pad = 1e-9 * (1.0 + std::max(std::abs(lo), std::abs(hi)));
    region.emplace_back(lo - pad, hi + pad);
  }
  for (int j = 0; j < p.m; ++j) region.emplace_back(y(j), y(j));
  out.rank = rank_certificate(p, region, rank);
  out.contradiction = s.verdict == SaddleVerdict::kSaddleFound && s.c > 0.0 &&
                      out.rank->verdict == RankVerdict::kMaximalRank;
  out.saddle = std::move(s);
  return out;
}

}  // namespace nsift
