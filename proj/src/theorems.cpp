#include "nsift/theorems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "nsift/clarke.hpp"

namespace nsift {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double vertex_sigma(const ProblemDef& p, const Vec& x) {
  try {
    return jacobian_family(p, x, Vec(0)).min_vertex_sigma();
  } catch (const EvalError&) {
    return kInf;
  }
}

Vec ball_point(std::mt19937_64& rng, int n, double t) { return t * uniform_in_ball(rng, n); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void require_pure_map(const ProblemDef& p, const char* op) {
  if (p.m != 0) throw std::invalid_argument(std::string(op) + ": expects a pure map (m = 0)");
}

void require_increasing(const std::vector<double>& g, const char* op) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] >= 0.0) || (i && !(g[i] > g[i - 1]))) {
      throw std::invalid_argument(std::string(op) + ": grid must be nonnegative and increasing");
    }
  }
  if (g.size() < 2) throw std::invalid_argument(std::string(op) + ": grid needs at least 2 points");
}

}  // namespace

double matrix_lower_bound(const Mat& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("matrix_lower_bound: matrix must be square");
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(A);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

const char* to_string(ProfileVerdict v) {
  switch (v) {
    case ProfileVerdict::kDivergesLikely:
      return "diverges-likely";
    case ProfileVerdict::kConvergesLikely:
      return "converges-likely";
    case ProfileVerdict::kInconclusive:
      return "inconclusive";
  }
  return "?";
}

std::vector<double> default_profile_grid() {
  std::vector<double> g{0.0};
  for (int i = 0; i < 40; ++i) g.push_back(0.1 * std::pow(1000.0, i / 39.0));
  return g;
}

void finish_profile(ConditionProfile& prof, const DecayRule& rule) {
  const auto& t = prof.t;
  const auto& v = prof.value;
  prof.integral.assign(t.size(), 0.0);
  for (std::size_t i = 1; i < t.size(); ++i) {
    prof.integral[i] = prof.integral[i - 1] + 0.5 * (v[i] + v[i - 1]) * (t[i] - t[i - 1]);
  }
  prof.tail_from = rule.tail_fraction * t.back();
  std::vector<double> tt, vv;
  bool zero = false;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] <= 0.0 || t[i] < prof.tail_from) continue;
    tt.push_back(t[i]);
    vv.push_back(v[i]);
    zero = zero || !(v[i] > 0.0);
  }
  prof.verdict = ProfileVerdict::kInconclusive;
  if (zero) {
    prof.fit = {-kInf, 0.0, 0.0};
    prof.verdict = ProfileVerdict::kConvergesLikely;
    return;
  }
  if (tt.size() < 2) return;
  prof.fit = fit_power_law(tt, vv);
  if (prof.fit.residual > rule.max_residual) return;
  if (prof.fit.exponent >= -1.0 + rule.margin) prof.verdict = ProfileVerdict::kDivergesLikely;
  if (prof.fit.exponent <= -1.0 - rule.margin) prof.verdict = ProfileVerdict::kConvergesLikely;
}

ConditionProfile pourciau_m(const ProblemDef& p, std::vector<double> t_grid, const ProfileOptions& o) {
  require_pure_map(p, "pourciau_m");
  if (t_grid.empty()) t_grid = default_profile_grid();
  require_increasing(t_grid, "pourciau_m");
  const int n = p.n;
  const int samples = o.samples > 0 ? o.samples : 128 * n;
  ConditionProfile prof;
  prof.quantity = "m";
  prof.t = t_grid;
  std::vector<double> raw(t_grid.size(), kInf);
  const ScalarFn sigma = [&p](const Vec& x) { return vertex_sigma(p, x); };
  parallel_for(o.exec, t_grid.size(), [&](std::size_t i) {
    const double t = t_grid[i];
    const Vec origin = Vec::Zero(n);
    double best = vertex_sigma(p, origin);
    if (t > 0.0) {
      // Half the budget on the boundary, where the infimum usually sits.
      const auto dirs = sphere_directions(n, samples / 2, mix_seed(o.seed, 2 * i));
      Vec best_dir = dirs.front();
      double best_sphere = kInf;
      for (const Vec& d : dirs) {
        const double s = sigma(t * d);
        if (s < best_sphere) {
          best_sphere = s;
          best_dir = d;
        }
      }
      best = std::min({best, best_sphere, refine_on_sphere(sigma, origin, t, best_dir).value});
      std::mt19937_64 rng(mix_seed(o.seed, 2 * i + 1));
      for (int k = samples / 2; k < samples; ++k) best = std::min(best, sigma(ball_point(rng, n, t)));
    }
    raw[i] = best;
  });
  double running = kInf;
  for (double r : raw) {
    running = std::min(running, r);
    prof.value.push_back(running);
  }
  finish_profile(prof, o.rule);
  return prof;
}

double hadamard_levy_integrand(const ProblemDef& p, double r, int samples, std::uint64_t seed) {
  require_pure_map(p, "hadamard_levy_integrand");
  const int n = p.n;
  if (samples <= 0) samples = 128 * n;
  const Vec origin = Vec::Zero(n);
  const ScalarFn sigma = [&p](const Vec& x) { return vertex_sigma(p, x); };
  if (!(r > 0.0)) return sigma(origin);
  std::mt19937_64 rng(mix_seed(seed, 1));
  std::normal_distribution<double> normal;
  double best = kInf;
  Vec best_dir = Vec::Zero(n);
  for (const Vec& d0 : sphere_directions(n, samples, seed)) {
    Vec d = d0;
    double s = kInf;
    for (int attempt = 0; attempt <= 10; ++attempt) {
      try {
        const JacobianFamily fam = jacobian_family(p, r * d, Vec(0));
        if (fam.singleton() || attempt == 10) {
          s = fam.singleton() ? matrix_lower_bound(fam.J0) : fam.min_vertex_sigma();
          break;
        }
      } catch (const EvalError&) {
      }
      Vec kick(n);
      for (int j = 0; j < n; ++j) kick(j) = normal(rng);
      d = (d + 1e-6 * (attempt + 1) * kick).normalized();
    }
    if (s < best) {
      best = s;
      best_dir = d;
    }
  }
  if (best_dir.norm() == 0.0) return best;
  return std::min(best, refine_on_sphere(sigma, origin, r, best_dir).value);
}

ConditionProfile hadamard_levy_profile(const ProblemDef& p, std::vector<double> r_grid, const ProfileOptions& o) {
  require_pure_map(p, "hadamard_levy_profile");
  if (r_grid.empty()) r_grid = default_profile_grid();
  require_increasing(r_grid, "hadamard_levy_profile");
  ConditionProfile prof;
  prof.quantity = "hadamard-levy";
  prof.t = r_grid;
  prof.value.assign(r_grid.size(), 0.0);
  parallel_for(o.exec, r_grid.size(), [&](std::size_t i) {
    prof.value[i] = hadamard_levy_integrand(p, r_grid[i], o.samples, mix_seed(o.seed, i));
  });
  finish_profile(prof, o.rule);
  return prof;
}

SurEstimate ioffe_sur(const ProblemDef& p, const Vec& x, double t, int boundary_points) {
  require_pure_map(p, "ioffe_sur");
  if (p.n > 2) throw UnsupportedDimension("ioffe_sur: only n <= 2 is supported");
  if (!(t > 0.0)) throw std::invalid_argument("ioffe_sur: t must be positive");
  if (boundary_points < 8) throw std::invalid_argument("ioffe_sur: need at least 8 boundary points");
  const Vec empty(0);
  const Vec c = eval(p, x, empty);
  SurEstimate out;
  out.boundary_points = boundary_points;
  if (p.n == 1) {
    double lo = kInf, hi = -kInf, prev = 0.0;
    for (int k = 0; k < boundary_points; ++k) {
      const double s = -1.0 + 2.0 * k / (boundary_points - 1);
      Vec u = x;
      u(0) += s * t;
      const double v = eval(p, u, empty)(0);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      if (k) out.resolution = std::max(out.resolution, std::abs(v - prev));
      prev = v;
    }
    out.value = std::max(0.0, std::min(c(0) - lo, hi - c(0)));
    return out;
  }
  std::vector<Eigen::Vector2d> img(boundary_points);
  for (int k = 0; k < boundary_points; ++k) {
    const double th = 2.0 * std::numbers::pi * k / boundary_points;
    Vec u = x;
    u(0) += t * std::cos(th);
    u(1) += t * std::sin(th);
    const Vec fu = eval(p, u, empty);
    img[k] = Eigen::Vector2d(fu(0) - c(0), fu(1) - c(1));
  }
  double winding = 0.0;
  double dist = kInf;
  for (int k = 0; k < boundary_points; ++k) {
    const Eigen::Vector2d& a = img[k];
    const Eigen::Vector2d& b = img[(k + 1) % boundary_points];
    winding += std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    const double w = len2 > 0.0 ? std::clamp(-a.dot(ab) / len2, 0.0, 1.0) : 0.0;
    dist = std::min(dist, (a + w * ab).norm());
    out.resolution = std::max(out.resolution, std::sqrt(len2));
  }
  out.value = std::abs(winding) > std::numbers::pi ? dist : 0.0;
  return out;
}

LiusternikCheck liusternik_check(const ProblemDef& p, const Vec& x, std::vector<double> ts, double tolerance,
                                 int boundary_points) {
  if (ts.empty()) ts = {1e-1, 1e-2, 1e-3};
  LiusternikCheck out;
  out.x = x;
  out.t = ts;
  for (double t : ts) out.ratio.push_back(ioffe_sur(p, x, t, boundary_points).value / t);
  // Least-squares line ratio = alpha + beta t, read at t = 0.
  const auto k = static_cast<double>(ts.size());
  double st = 0, sr = 0, stt = 0, str = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sr += out.ratio[i];
    stt += ts[i] * ts[i];
    str += ts[i] * out.ratio[i];
  }
  const double den = k * stt - st * st;
  out.extrapolated = den != 0.0 ? (sr * stt - st * str) / den : sr / k;
  const JacobianFamily fam = jacobian_family(p, x, Vec(0));
  out.smooth = fam.singleton();
  out.sigma_min = out.smooth ? matrix_lower_bound(fam.J0) : fam.min_vertex_sigma();
  out.relative_error = std::abs(out.extrapolated - out.sigma_min) / std::max(out.sigma_min, 1e-300);
  out.passed = out.relative_error <= tolerance;
  return out;
}

ComparisonReport compare_conditions(const ProblemDef& p, const ComparisonOptions& o) {
  require_pure_map(p, "compare_conditions");
  const int n = p.n;
  ComparisonReport rep;
  const Box box = p.x_box();
  rep.rank = rank_certificate(p, box, o.rank);

  const HaltonSequence halton(n, mix_seed(o.seed, 11));
  auto in_box = [&](const Vec& u) {
    Vec z(n);
    for (int i = 0; i < n; ++i) z(i) = box[i].lo() + u(i) * (box[i].hi() - box[i].lo());
    return z;
  };
  for (int i = 0; i < o.y_samples; ++i) rep.targets.push_back(in_box(halton.point(i)));

  std::vector<double> schedule = o.coercivity_schedule;
  if (schedule.empty()) {
    for (int k = 0; k <= 8; ++k) schedule.push_back(std::pow(10.0, k));
  }
  const ProblemDef inverse = with_target(p);
  SolveOptions solve = o.solve;
  solve.exec = o.exec;
  for (std::size_t i = 0; i < rep.targets.size(); ++i) {
    const Vec y = rep.targets[i];
    const ScalarFn fn = [&p, y](const Vec& x) { return 0.5 * (eval(p, x, Vec(0)) - y).squaredNorm(); };
    rep.coercivity.push_back(coercivity_probe(fn, n, schedule, o.coercivity_samples, mix_seed(o.seed, 100 + i), o.exec));
    rep.inversions.push_back(find_roots(inverse, y, solve));
  }

  ProfileOptions prof;
  prof.samples = o.profile_samples;
  prof.seed = mix_seed(o.seed, 13);
  prof.exec = o.exec;
  rep.pourciau = pourciau_m(p, o.t_grid, prof);
  prof.seed = mix_seed(o.seed, 14);
  rep.hadamard_levy = hadamard_levy_profile(p, o.t_grid, prof);

  if (n <= 2) {
    std::optional<Vec> at = o.liusternik_point;
    const HaltonSequence spot(n, mix_seed(o.seed, 12));
    for (int i = 0; !at && i < 64; ++i) {
      const Vec z = in_box(spot.point(i));
      if (jacobian_family(p, z, Vec(0)).singleton()) at = z;
    }
    if (at) rep.liusternik = liusternik_check(p, *at);
  }

  const bool rank_ok = rep.rank.verdict == RankVerdict::kMaximalRank;
  int coercive = 0, unique = 0, one_root = 0, explained = 0, nonroots = 0;
  for (const auto& c : rep.coercivity) coercive += c.verdict == CoercivityVerdict::kCoerciveEvidence;
  for (const auto& s : rep.inversions) {
    unique += s.audit == AuditVerdict::kUnique;
    one_root += s.roots.size() == 1;
    for (const auto& nr : s.stationary_nonroots) {
      ++nonroots;
      explained += nr.min_vertex_sigma <= 1e-6;
    }
  }
  const int ny = static_cast<int>(rep.targets.size());
  auto count = [&](int k) { return std::to_string(k) + "/" + std::to_string(ny); };

  rep.rows.push_back({"maximal-rank", to_string(rep.rank.verdict), rank_ok,
                      "det in [" + fmt("%.6g", rep.rank.det_range.lo()) + ", " + fmt("%.6g", rep.rank.det_range.hi()) +
                          "] over the box, " + std::to_string(rep.rank.leaves.size()) + " leaves"});
  rep.rows.push_back({"coercivity", coercive == ny ? "coercive-evidence" : "not-established", coercive == ny,
                      count(coercive) + " targets coercive"});
  rep.rows.push_back({"hadamard-palais", rank_ok && coercive == ny ? "invertible" : "not-established",
                      rank_ok && coercive == ny, "maximal rank on the box and coercive least squares"});
  auto profile_row = [](const char* name, const ConditionProfile& pr) {
    return ConditionRow{name, to_string(pr.verdict), pr.verdict == ProfileVerdict::kDivergesLikely,
                        "decay exponent " + fmt("%.4g", pr.fit.exponent) + ", integral to " +
                            fmt("%.6g", pr.t.back()) + " = " + fmt("%.6g", pr.integral.back())};
  };
  rep.rows.push_back(profile_row("pourciau", rep.pourciau));
  rep.rows.push_back(profile_row("hadamard-levy", rep.hadamard_levy));
  if (rep.liusternik) {
    const auto& l = *rep.liusternik;
    std::ostringstream d;
    d << "sur/t -> " << fmt("%.6g", l.extrapolated) << " vs sigma_min " << fmt("%.6g", l.sigma_min) << " at (";
    for (Eigen::Index i = 0; i < l.x.size(); ++i) d << (i ? ", " : "") << fmt("%.6g", l.x(i));
    d << ")";
    rep.rows.push_back({"liusternik", l.passed ? "match" : "mismatch", l.passed, d.str()});
  }
  std::string inv_detail = count(one_root) + " targets with exactly one root";
  if (nonroots) {
    inv_detail += ", " + std::to_string(nonroots) + " stationary nonroots (" + std::to_string(explained) +
                  " at rank-deficient points)";
  }
  rep.rows.push_back({"inversion-audit", unique == ny ? "unique" : (one_root == ny ? "one-root" : "not-unique"),
                      one_root == ny, inv_detail});
  return rep;
}

std::string format_table(const ComparisonReport& r) {
  std::size_t w0 = 9, w1 = 7;
  for (const auto& row : r.rows) {
    w0 = std::max(w0, row.name.size());
    w1 = std::max(w1, row.verdict.size());
  }
  std::ostringstream out;
  auto line = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d) {
    out << a << std::string(w0 - a.size() + 2, ' ') << b << std::string(w1 - b.size() + 2, ' ') << c
        << std::string(7 - c.size(), ' ') << d << "\n";
  };
  line("condition", "verdict", "holds", "detail");
  line(std::string(w0, '-'), std::string(w1, '-'), "-----", "------");
  for (const auto& row : r.rows) line(row.name, row.verdict, row.holds ? "yes" : "no", row.detail);
  out << "\nnote: the sur lower bound by the integral of m is read with r the radius of the argument ball;"
         " it is sampled, not certified.\n";
  return out.str();
}

}  // namespace nsift
