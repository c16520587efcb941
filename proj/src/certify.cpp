#include "nsift/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nsift/detail/family.hpp"

namespace nsift {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kWitnessRelTol = 1e-12;

struct Witness {
  Vec x;
  Vec y;
  Vec t;
  double det = 0.0;
};

double row_scale(const Mat& m) {
  double s = 1.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) s *= std::max(m.row(i).norm(), 1e-300);
  return s;
}

bool tiny_det(const Mat& m, double det) { return std::abs(det) <= kWitnessRelTol * row_scale(m); }

Vec vertex_params(std::uint64_t mask, int k) {
  Vec t(k);
  for (int i = 0; i < k; ++i) t[i] = (mask >> i) & 1 ? 1.0 : -1.0;
  return t;
}

// A singular member of the family at a single point: a vertex with tiny
// determinant, or a zero of det along a parameter segment joining vertices
// of opposite sign.
std::optional<Witness> point_witness(const ProblemDef& p, const Vec& x, const Vec& y, FamilyMode mode) {
  const JacobianFamily fam = jacobian_family(p, x, y, -1.0, mode);
  const int k = fam.parameters();
  if (k > 16) return std::nullopt;
  std::optional<Vec> pos, neg;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << k); ++mask) {
    const Vec t = vertex_params(mask, k);
    const Mat m = fam.member(t);
    const double d = m.determinant();
    if (tiny_det(m, d)) return Witness{x, y, t, d};
    if (d > 0 && !pos) pos = t;
    if (d < 0 && !neg) neg = t;
  }
  if (!pos || !neg) return std::nullopt;
  double lo = 0.0, hi = 1.0;  // det > 0 at lo, < 0 at hi
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const Vec t = (1.0 - mid) * *pos + mid * *neg;
    const Mat m = fam.member(t);
    const double d = m.determinant();
    if (tiny_det(m, d)) return Witness{x, y, t, d};
    (d > 0 ? lo : hi) = mid;
  }
  return std::nullopt;
}

Vec box_center(const Box& b) {
  Vec c(static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < b.size(); ++i) c[static_cast<Eigen::Index>(i)] = b[i].mid();
  return c;
}

std::optional<Witness> point_witness_xy(const ProblemDef& p, const Vec& xy, FamilyMode mode) {
  try {
    return point_witness(p, xy.head(p.n), xy.tail(p.m), mode);
  } catch (const EvalError&) {
    return std::nullopt;
  }
}

// Deeper search inside an unresolved leaf: vertex checks at the center and
// corners, then bisection along segments where a fixed sign selection
// changes the sign of its determinant.
std::optional<Witness> leaf_witness(const ProblemDef& p, const Box& box, FamilyMode mode) {
  const int dim = static_cast<int>(box.size());
  std::vector<Vec> pts{box_center(box)};
  if (dim <= 6) {
    for (int mask = 0; mask < (1 << dim); ++mask) {
      Vec c(dim);
      for (int i = 0; i < dim; ++i) c[i] = (mask >> i) & 1 ? box[i].hi() : box[i].lo();
      pts.push_back(c);
    }
  }
  for (const Vec& pt : pts) {
    if (auto w = point_witness_xy(p, pt, mode)) return w;
  }
  const int K = p.abs_count();
  if (K > 10) return std::nullopt;
  for (int mask = 0; mask < (1 << K); ++mask) {
    std::vector<int> s(K);
    for (int i = 0; i < K; ++i) s[i] = (mask >> i) & 1 ? 1 : -1;
    auto det_at = [&](const Vec& xy) -> std::optional<std::pair<Mat, double>> {
      try {
        Mat m = eval_selection_jacobian(p, xy.head(p.n), xy.tail(p.m), s);
        const double d = m.determinant();
        return std::make_pair(m, d);
      } catch (const EvalError&) {
        return std::nullopt;
      }
    };
    const auto d0 = det_at(pts[0]);
    if (!d0) continue;
    for (std::size_t j = 1; j < pts.size(); ++j) {
      const auto dj = det_at(pts[j]);
      if (!dj || (d0->second > 0) == (dj->second > 0)) continue;
      Vec a = pts[0], b = pts[j];
      const bool a_pos = d0->second > 0;
      // Row norms can vanish together with det along the segment (e.g. a
      // 1x1 Jacobian), so tininess is judged against the bracketing ends.
      const double scale = std::max(row_scale(d0->first), row_scale(dj->first));
      for (int it = 0; it < 200; ++it) {
        const Vec mid = 0.5 * (a + b);
        const auto dm = det_at(mid);
        if (!dm) break;
        const Vec x = mid.head(p.n), y = mid.tail(p.m);
        if (std::abs(dm->second) <= kWitnessRelTol * std::max(scale, row_scale(dm->first))) {
          // In pointwise mode the selection must agree with every
          // inactive abs argument at the point.
          bool valid = true;
          if (mode == FamilyMode::kPointwise) {
            for (const auto& r : activity(p, x, y, default_eta(x, y))) {
              if (!r.active && (r.argument < 0 ? -1 : 1) != s[r.abs_id]) valid = false;
            }
          }
          if (valid) {
            Vec t(K);
            for (int i = 0; i < K; ++i) t[i] = s[i];
            return Witness{x, y, t, dm->second};
          }
          break;
        }
        ((dm->second > 0) == a_pos ? a : b) = mid;
      }
    }
  }
  return std::nullopt;
}

Interval leaf_det(const ProblemDef& p, const Box& box, FamilyMode mode) {
  try {
    return detail::interval_det(detail::family_hull(detail::interval_family(p, box, mode)));
  } catch (const EvalError&) {
    return Interval(-kInf, kInf);
  }
}

}  // namespace

const char* to_string(RankVerdict v) {
  switch (v) {
    case RankVerdict::kMaximalRank:
      return "maximal-rank";
    case RankVerdict::kRankDeficientWitness:
      return "rank-deficient-witness";
    case RankVerdict::kInconclusive:
      return "inconclusive";
  }
  return "?";
}

const char* to_string(CoercivityVerdict v) {
  switch (v) {
    case CoercivityVerdict::kCoerciveEvidence:
      return "coercive-evidence";
    case CoercivityVerdict::kNonCoerciveWitness:
      return "non-coercive-witness";
    case CoercivityVerdict::kInconclusive:
      return "inconclusive";
  }
  return "?";
}

Interval family_det_range(const ProblemDef& p, const Box& xy, FamilyMode mode) { return leaf_det(p, xy, mode); }

RankCertificate rank_certificate(const ProblemDef& p, const Box& region, const RankOptions& opts) {
  if (static_cast<int>(region.size()) != p.n + p.m) {
    throw std::invalid_argument("rank_certificate: region must have n + m factors");
  }
  if (p.n > 6) throw std::invalid_argument("rank_certificate: interval determinant supports n <= 6");
  for (const auto& f : region) {
    if (!std::isfinite(f.lo()) || !std::isfinite(f.hi())) {
      throw std::invalid_argument("rank_certificate: region must be bounded");
    }
  }
  RankCertificate cert;
  cert.region = region;
  cert.mode = opts.mode;

  std::vector<Box> level{region};
  std::vector<Box> unresolved;
  std::size_t total = 1;
  for (int depth = 0; !level.empty(); ++depth) {
    cert.depth = depth;
    const std::size_t count = level.size();
    std::vector<Interval> dets(count);
    std::vector<std::optional<Witness>> witnesses(count);
    parallel_for(opts.exec, count, [&](std::size_t i) {
      dets[i] = leaf_det(p, level[i], opts.mode);
      if (dets[i].contains_zero()) witnesses[i] = point_witness_xy(p, box_center(level[i]), opts.mode);
    });
    std::vector<Box> next;
    for (std::size_t i = 0; i < count; ++i) {
      if (!dets[i].contains_zero()) {
        cert.leaves.push_back({level[i], dets[i]});
        continue;
      }
      if (witnesses[i]) {
        cert.verdict = RankVerdict::kRankDeficientWitness;
        cert.witness_x = witnesses[i]->x;
        cert.witness_y = witnesses[i]->y;
        cert.witness_t = witnesses[i]->t;
        cert.witness_det = witnesses[i]->det;
        cert.leaves.push_back({level[i], dets[i]});
        // Leaves so far plus the whole current level cover the region.
        cert.det_range = dets.front();
        for (const auto& d : dets) cert.det_range = hull(cert.det_range, d);
        for (const auto& leaf : cert.leaves) cert.det_range = hull(cert.det_range, leaf.det);
        return cert;
      }
      // Split the widest factor relative to the region.
      int best = -1;
      double best_w = 0.0;
      for (std::size_t d = 0; d < region.size(); ++d) {
        if (region[d].width() <= 0.0) continue;
        const double w = level[i][d].width() / region[d].width();
        if (w > best_w) {
          best_w = w;
          best = static_cast<int>(d);
        }
      }
      if (best < 0 || depth >= opts.max_depth || total + 1 > opts.max_leaves ||
          level[i][best].mid() <= level[i][best].lo() || level[i][best].mid() >= level[i][best].hi()) {
        unresolved.push_back(level[i]);
        cert.leaves.push_back({level[i], dets[i]});
        continue;
      }
      auto [lo, hi] = level[i][best].bisect();
      Box a = level[i], b = level[i];
      a[best] = lo;
      b[best] = hi;
      next.push_back(std::move(a));
      next.push_back(std::move(b));
      ++cert.subdivisions;
      ++total;
    }
    level = std::move(next);
  }

  bool first = true;
  for (const auto& leaf : cert.leaves) {
    cert.det_range = first ? leaf.det : hull(cert.det_range, leaf.det);
    first = false;
  }
  if (unresolved.empty()) {
    cert.verdict = RankVerdict::kMaximalRank;
    cert.det_lower_bound = kInf;
    for (const auto& leaf : cert.leaves) cert.det_lower_bound = std::min(cert.det_lower_bound, leaf.det.mig());
    return cert;
  }
  std::vector<std::optional<Witness>> found(unresolved.size());
  parallel_for(opts.exec, unresolved.size(),
               [&](std::size_t i) { found[i] = leaf_witness(p, unresolved[i], opts.mode); });
  for (const auto& w : found) {
    if (w) {
      cert.verdict = RankVerdict::kRankDeficientWitness;
      cert.witness_x = w->x;
      cert.witness_y = w->y;
      cert.witness_t = w->t;
      cert.witness_det = w->det;
      return cert;
    }
  }
  cert.verdict = RankVerdict::kInconclusive;
  cert.offending_leaf = unresolved.front();
  return cert;
}

std::vector<double> default_radius_schedule() { return {1.0, 10.0, 1e2, 1e3, 1e4}; }

CoercivityReport coercivity_probe(const ScalarFn& objective, int n, std::vector<double> schedule, int samples,
                                  std::uint64_t seed, const ExecutionContext& exec) {
  if (schedule.empty()) schedule = default_radius_schedule();
  if (schedule.size() < 4) throw std::invalid_argument("coercivity_probe: schedule needs at least 4 radii");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] > 0.0) || (i && !(schedule[i] > schedule[i - 1]))) {
      throw std::invalid_argument("coercivity_probe: schedule must be positive and strictly increasing");
    }
  }
  if (schedule.back() < 1e3 * schedule.front()) {
    throw std::invalid_argument("coercivity_probe: schedule must span at least 3 decades");
  }
  CoercivityReport rep;
  rep.radii = schedule;
  rep.samples_per_sphere = samples > 0 ? samples : 64 * n;
  const std::size_t k = schedule.size();
  std::vector<SphereMin> mins(k);
  const Vec origin = Vec::Zero(n);
  parallel_for(exec, k, [&](std::size_t i) {
    mins[i] = sphere_infimum(objective, origin, schedule[i], rep.samples_per_sphere, mix_seed(seed, i));
  });
  for (const auto& m : mins) {
    rep.infima.push_back(m.value);
    rep.argmins.push_back(m.direction);
  }
  rep.fit = fit_power_law(rep.radii, rep.infima);
  const double first = rep.infima.front();
  const double last = rep.infima.back();
  // Growth among values at roundoff level (x1^2 along e2) is not evidence.
  const double floor = 1e-9 * std::max(1.0, std::abs(objective(origin)));
  if (rep.fit.exponent > 0.0 && last > floor && last > 10.0 * std::max(first, std::numeric_limits<double>::min())) {
    rep.verdict = CoercivityVerdict::kCoerciveEvidence;
    return rep;
  }
  const Vec d = rep.argmins.back();
  rep.witness_bound = 10.0 * std::max(objective(schedule.front() * d), first) + 1e-6;
  bool bounded = true;
  for (double r : schedule) {
    const double v = objective(r * d);
    rep.witness_values.push_back(v);
    if (!(v <= rep.witness_bound)) bounded = false;
  }
  if (bounded) {
    rep.verdict = CoercivityVerdict::kNonCoerciveWitness;
    rep.witness_direction = d;
  }
  return rep;
}

SpectralReport spectral_report(const Mat& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("spectral_report: A must be square");
  SpectralReport rep;
  rep.A = A;
  const auto N = A.rows();
  const Mat AtA = A.transpose() * A;
  rep.eigenvalues.resize(N);
  if (N == 2) {
    rep.det_A = A(0, 0) * A(1, 1) - A(0, 1) * A(1, 0);
    rep.det_AtA = rep.det_A * rep.det_A;
    const double p = AtA(0, 0), q = AtA(0, 1), r = AtA(1, 1);
    const double big = 0.5 * ((p + r) + std::hypot(p - r, 2.0 * q));
    rep.eigenvalues[1] = big;
    // Small root through the product, which stays accurate when it is tiny.
    rep.eigenvalues[0] = big > 0.0 ? rep.det_AtA / big : 0.0;
  } else {
    rep.det_A = N == 0 ? 1.0 : A.determinant();
    rep.det_AtA = rep.det_A * rep.det_A;
    if (N > 0) {
      Eigen::SelfAdjointEigenSolver<Mat> es(AtA);
      rep.eigenvalues = es.eigenvalues();
    }
  }
  if (N > 0) {
    const double l1 = rep.eigenvalues[0];
    const double lN = rep.eigenvalues[N - 1];
    rep.a1_holds = l1 > 1e-10 * lN;
    rep.sqrt_lambda1 = std::sqrt(std::max(l1, 0.0));
    rep.sqrt_lambdaN = std::sqrt(std::max(lN, 0.0));
  }
  return rep;
}

GrowthReport growth_constants(const ProblemDef& p, std::vector<double> schedule, int samples, std::uint64_t seed,
                              const ExecutionContext& exec) {
  if (p.m != 0) throw std::invalid_argument("growth_constants: expects a pure map (m = 0)");
  if (schedule.empty()) schedule = default_radius_schedule();
  const int n = p.n;
  const int per_sphere = samples > 0 ? samples : 64 * n;
  const Vec empty(0);
  auto norm_f = [&p, &empty](const Vec& x) { return eval(p, x, empty).norm(); };
  auto neg_norm_f = [&p, &empty](const Vec& x) { return -eval(p, x, empty).norm(); };
  GrowthReport rep;
  rep.radii = schedule;
  const std::size_t k = schedule.size();
  rep.sup_norm.resize(k);
  rep.inf_norm.resize(k);
  const Vec origin = Vec::Zero(n);
  parallel_for(exec, 2 * k, [&](std::size_t j) {
    const std::size_t i = j / 2;
    if (j % 2 == 0) {
      rep.inf_norm[i] = sphere_infimum(norm_f, origin, schedule[i], per_sphere, mix_seed(seed, 2 * i)).value;
    } else {
      rep.sup_norm[i] = -sphere_infimum(neg_norm_f, origin, schedule[i], per_sphere, mix_seed(seed, 2 * i + 1)).value;
    }
  });
  rep.a_est = rep.sup_norm.back() / schedule.back();
  rep.b_est = rep.inf_norm.back() / schedule.back();
  rep.gamma_fit = fit_power_law(rep.radii, rep.sup_norm).exponent;
  const bool positive = std::all_of(rep.inf_norm.begin(), rep.inf_norm.end(), [](double v) { return v > 0.0; });
  rep.theta_fit = positive ? fit_power_law(rep.radii, rep.inf_norm).exponent : 0.0;
  rep.sublinear_ok = rep.gamma_fit < 1.0;
  rep.superlinear_ok = rep.theta_fit > 1.0;
  if (p.A) {
    const SpectralReport s = spectral_report(*p.A);
    rep.sqrt_lambda1 = s.sqrt_lambda1;
    rep.sqrt_lambdaN = s.sqrt_lambdaN;
    rep.linear_upper_ok = s.a1_holds && rep.a_est < s.sqrt_lambda1;
    rep.linear_lower_ok = s.a1_holds && rep.b_est > s.sqrt_lambdaN;
  }
  return rep;
}

}  // namespace nsift
