#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsift/clarke.hpp"
#include "nsift/parallel.hpp"
#include "nsift/sampling.hpp"

namespace nsift {

enum class RankVerdict { kMaximalRank, kRankDeficientWitness, kInconclusive };
const char* to_string(RankVerdict v);

struct RankLeaf {
  Box box;
  Interval det;
};

struct RankOptions {
  FamilyMode mode = FamilyMode::kOuterGlobal;
  int max_depth = 16;
  std::size_t max_leaves = 1 << 16;
  ExecutionContext exec;
};

struct RankCertificate {
  Box region;
  FamilyMode mode = FamilyMode::kOuterGlobal;
  RankVerdict verdict = RankVerdict::kInconclusive;
  Interval det_range;        // hull of the leaf determinant enclosures
  double det_lower_bound = 0.0;  // min over leaves of min |det| (maximal-rank only)
  int subdivisions = 0;
  int depth = 0;
  std::vector<RankLeaf> leaves;
  // Rank-deficient witness: a member of the family at (x, y) with |det| tiny.
  std::optional<Vec> witness_x;
  std::optional<Vec> witness_y;
  std::optional<Vec> witness_t;
  double witness_det = 0.0;
  std::optional<Box> offending_leaf;
};

/// Enclosure of det over the family on the whole box (no subdivision).
Interval family_det_range(const ProblemDef& p, const Box& xy, FamilyMode mode);

/// Certifies that every member of the Jacobian family is nonsingular on
/// region (a box over (x, y)), or finds a singular member.
RankCertificate rank_certificate(const ProblemDef& p, const Box& region, const RankOptions& opts = {});

enum class CoercivityVerdict { kCoerciveEvidence, kNonCoerciveWitness, kInconclusive };
const char* to_string(CoercivityVerdict v);

struct CoercivityReport {
  std::vector<double> radii;
  std::vector<double> infima;
  std::vector<Vec> argmins;  // unit directions
  int samples_per_sphere = 0;
  PowerFit fit;
  CoercivityVerdict verdict = CoercivityVerdict::kInconclusive;
  std::optional<Vec> witness_direction;
  double witness_bound = 0.0;
  std::vector<double> witness_values;  // objective along the witness ray
};

std::vector<double> default_radius_schedule();

/// Sphere-infimum growth probe of a scalar objective on R^n. An empty
/// schedule selects {1, 10, ..., 1e4}; samples <= 0 selects 64 n.
CoercivityReport coercivity_probe(const ScalarFn& objective, int n, std::vector<double> schedule = {},
                                  int samples = 0, std::uint64_t seed = 0, const ExecutionContext& exec = {});

struct SpectralReport {
  Mat A;
  Vec eigenvalues;  // of A^T A, ascending
  bool a1_holds = false;
  double sqrt_lambda1 = 0.0;
  double sqrt_lambdaN = 0.0;
  double det_A = 0.0;
  double det_AtA = 0.0;
};

SpectralReport spectral_report(const Mat& A);

struct GrowthReport {
  std::vector<double> radii;
  std::vector<double> sup_norm;  // max ||F|| on each sphere
  std::vector<double> inf_norm;  // min ||F|| on each sphere
  double a_est = 0.0;
  double b_est = 0.0;
  double gamma_fit = 0.0;
  double theta_fit = 0.0;
  std::optional<double> sqrt_lambda1;
  std::optional<double> sqrt_lambdaN;
  bool linear_upper_ok = false;   // a_est < sqrt(lambda_1)
  bool sublinear_ok = false;      // gamma < 1
  bool linear_lower_ok = false;   // b_est > sqrt(lambda_N)
  bool superlinear_ok = false;    // theta > 1
};

/// Growth of ||F(x)|| for a pure map (m = 0) on the spheres of the schedule.
GrowthReport growth_constants(const ProblemDef& p, std::vector<double> schedule = {}, int samples = 0,
                              std::uint64_t seed = 0, const ExecutionContext& exec = {});

}  // namespace nsift
