#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsift/certify.hpp"
#include "nsift/parallel.hpp"
#include "nsift/sampling.hpp"
#include "nsift/solve.hpp"

namespace nsift {

/// [A] = min over unit u of |A u|, the smallest singular value.
double matrix_lower_bound(const Mat& A);

enum class ProfileVerdict { kDivergesLikely, kConvergesLikely, kInconclusive };
const char* to_string(ProfileVerdict v);

struct ConditionProfile {
  std::string quantity;  // "m", "hadamard-levy" or "sur"
  std::vector<double> t;
  std::vector<double> value;
  std::vector<double> integral;  // cumulative trapezoid from t.front()
  PowerFit fit;                  // over the tail t >= tail_from
  double tail_from = 0.0;
  ProfileVerdict verdict = ProfileVerdict::kInconclusive;
};

struct DecayRule {
  double margin = 0.1;
  double max_residual = 0.25;  // rms of the log-log fit
  double tail_fraction = 0.1;  // fit over t >= tail_fraction * t.back()
};

/// Fills integral, fit and verdict from t and value. A tail containing
/// zeros means the integral stops growing: converges-likely, exponent -inf.
void finish_profile(ConditionProfile& prof, const DecayRule& rule = {});

/// 0 followed by 40 log-spaced points in [0.1, 100].
std::vector<double> default_profile_grid();

struct ProfileOptions {
  int samples = 0;  // per t; <= 0 selects 128 n
  std::uint64_t seed = 0;
  DecayRule rule;
  ExecutionContext exec;
};

/// m(t) = inf over |z| <= t of the smallest singular value over the
/// vertices of the Jacobian family at z; kept nonincreasing in t.
ConditionProfile pourciau_m(const ProblemDef& p, std::vector<double> t_grid = {}, const ProfileOptions& opts = {});

/// min over the sphere |x| = r of the smallest singular value of f'(x).
/// Sample points on a kink are nudged off it; a singular Jacobian gives 0.
double hadamard_levy_integrand(const ProblemDef& p, double r, int samples = 0, std::uint64_t seed = 0);

ConditionProfile hadamard_levy_profile(const ProblemDef& p, std::vector<double> r_grid = {},
                                       const ProfileOptions& opts = {});

class UnsupportedDimension : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SurEstimate {
  double value = 0.0;
  double resolution = 0.0;  // one boundary bin in the image
  int boundary_points = 0;
};

/// Sur(f, x)(t): radius of the largest ball around f(x) covered by the image
/// of B(x, t). In 2-D the covered region is the set where the image of the
/// boundary circle winds around the point. n <= 2 only.
SurEstimate ioffe_sur(const ProblemDef& p, const Vec& x, double t, int boundary_points = 720);

struct LiusternikCheck {
  Vec x;
  std::vector<double> t;
  std::vector<double> ratio;  // Sur(f, x)(t) / t
  double extrapolated = 0.0;  // ratio at t -> 0 by a linear fit in t
  double sigma_min = 0.0;     // of f'(x)
  double relative_error = 0.0;
  bool smooth = true;         // false if x lies on a kink
  bool passed = false;        // relative_error <= tolerance
};

LiusternikCheck liusternik_check(const ProblemDef& p, const Vec& x, std::vector<double> ts = {},
                                 double tolerance = 0.05, int boundary_points = 720);

struct ConditionRow {
  std::string name;
  std::string verdict;
  bool holds = false;
  std::string detail;
};

struct ComparisonOptions {
  std::vector<double> t_grid;  // empty: default_profile_grid()
  int profile_samples = 0;
  int y_samples = 5;
  int coercivity_samples = 0;
  // Empty: 1, 10, ..., 1e8. Maps like (x, x^3 + y) only grow like r^(1/3)
  // along their valley, so short schedules are dominated by the target.
  std::vector<double> coercivity_schedule;
  RankOptions rank;
  SolveOptions solve;
  std::optional<Vec> liusternik_point;  // default: first smooth Halton point of the box
  std::uint64_t seed = 0;
  ExecutionContext exec;
};

struct ComparisonReport {
  RankCertificate rank;
  std::vector<Vec> targets;
  std::vector<CoercivityReport> coercivity;
  std::vector<RootSet> inversions;
  ConditionProfile pourciau;
  ConditionProfile hadamard_levy;
  std::optional<LiusternikCheck> liusternik;
  std::vector<ConditionRow> rows;
};

ComparisonReport compare_conditions(const ProblemDef& p, const ComparisonOptions& opts = {});

/// Fixed-width text table of the report rows.
std::string format_table(const ComparisonReport& r);

}  // namespace nsift
