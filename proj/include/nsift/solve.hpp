#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "nsift/certify.hpp"
#include "nsift/clarke.hpp"
#include "nsift/parallel.hpp"

namespace nsift {

struct MinimizeOptions {
  double stationarity_tol = 1e-8;
  // Stop as soon as the objective drops to this value (e.g. a root of a
  // least-squares functional); -inf disables.
  double value_target = -std::numeric_limits<double>::infinity();
  double initial_radius = 0.0;  // <= 0: 0.1 (1 + ||x0||)
  int samples = 0;              // <= 0: 2 (n + 1)
  int max_iterations = 3000;
  std::uint64_t seed = 0;
  double armijo = 1e-4;
  bool quasi_newton = true;
  // After stationarity is reached, continue with a much smaller tolerance
  // to tighten residuals at roots.
  bool polish = true;
};

struct MinimizeResult {
  Vec x;
  double value = 0.0;
  double stationarity = 0.0;  // min-norm of the last gradient bundle
  double radius = 0.0;
  int iterations = 0;
  bool converged = false;
  bool reached_target = false;
  std::vector<double> history;  // accepted objective values, nonincreasing
};

/// Gradient sampling with a BFGS metric and Armijo backtracking.
MinimizeResult minimize_nonsmooth(const Objective& f, const Vec& x0, const MinimizeOptions& opts = {});

struct SolveOptions {
  int multistart = 0;  // <= 0: 64 for n <= 2, else 32 * 2^n
  std::optional<Box> start_region;  // default: x-part of the problem box
  double residual_tol = 1e-9;
  double stationarity_tol = 1e-8;
  std::optional<double> cluster_radius;  // default 1e-6 (1 + ||x||)
  int max_iterations = 3000;
  std::uint64_t seed = 0;
  ExecutionContext exec;
};

struct Root {
  Vec x;
  double residual = 0.0;  // ||F(x, y)||
  double stationarity = 0.0;
  int basin_count = 0;
};

struct StationaryNonroot {
  Vec x;
  double residual = 0.0;   // ||F(x, y)||
  double objective = 0.0;  // 1/2 ||F(x, y)||^2
  double stationarity = 0.0;
  int basin_count = 0;
  double min_vertex_sigma = 0.0;  // of the pointwise Jacobian family at x
};

enum class AuditVerdict { kUnique, kMultiple, kNoneFound, kInconclusive };
const char* to_string(AuditVerdict v);

struct RootSet {
  Vec y;
  std::vector<Root> roots;
  std::vector<StationaryNonroot> stationary_nonroots;
  AuditVerdict audit = AuditVerdict::kNoneFound;
  int starts = 0;
  int converged_starts = 0;
};

class RootAuditError : public std::runtime_error {
 public:
  RootAuditError(const std::string& what, RootSet set) : std::runtime_error(what), set_(std::move(set)) {}
  const RootSet& roots() const { return set_; }

 private:
  RootSet set_;
};

class MultipleRoots : public RootAuditError {
 public:
  using RootAuditError::RootAuditError;
};
class NoRootFound : public RootAuditError {
 public:
  using RootAuditError::RootAuditError;
};
/// One root was found together with stationary points that are not roots.
class UniquenessNotAudited : public RootAuditError {
 public:
  using RootAuditError::RootAuditError;
};

double cluster_radius_at(const SolveOptions& opts, const Vec& x);

/// Multistart minimization of phi_y(x) = 1/2 ||F(x, y)||^2.
RootSet find_roots(const ProblemDef& p, const Vec& y, const SolveOptions& opts = {});

/// The unique root; throws a RootAuditError subclass otherwise.
Root implicit_eval(const ProblemDef& p, const Vec& y, const SolveOptions& opts = {});

struct AtlasEntry {
  Vec y;
  Root root;
  double ratio = 0.0;  // Lipschitz ratio to the previous entry (0 for the first)
  bool break_flag = false;
  bool audited = false;
};

struct Atlas {
  std::vector<AtlasEntry> entries;
  int breaks = 0;
};

/// Evenly spaced samples on the segment [from, to].
std::vector<Vec> y_segment(const Vec& from, const Vec& to, int samples);

Atlas implicit_atlas(const ProblemDef& p, const std::vector<Vec>& y_samples, const SolveOptions& opts = {});

/// Root of f(x) = target for a pure map f (m = 0).
Root invert(const ProblemDef& f, const Vec& target, const SolveOptions& opts = {});

struct AlgebraicChecklist {
  SpectralReport spectral;
  GrowthReport growth;
  RankCertificate rank;
  CoercivityReport coercivity;
  bool small_growth = false;   // A1, growth below sqrt(lambda_1) (or sublinear), rank
  bool large_growth = false;   // A1, growth above sqrt(lambda_N) (or superlinear), rank
  bool corollary = false;  // direct coercivity of A x - F(x), rank
  std::string route;       // "small-growth", "large-growth", "corollary" or "none"
};

struct AlgebraicResult {
  AlgebraicChecklist checklist;
  RootSet roots;
  std::optional<Root> root;  // set when the audit found a unique root
  std::string claim;         // "theorem-evidenced", "audited only" or the audit verdict
};

struct AlgebraicOptions {
  int growth_samples = 0;
  int coercivity_samples = 0;
  RankOptions rank;
};

/// Hypotheses for A x = F(x) + xi: A1, growth, rank of A - dF on the
/// x-box, coercivity of 1/2 |A x - F(x) - xi|^2.
AlgebraicChecklist algebraic_checklist(const ProblemDef& p, const Vec& xi, const SolveOptions& opts = {},
                                       const AlgebraicOptions& aopts = {});

/// Solves A x = F(x) + xi after running the hypothesis checklist.
AlgebraicResult solve_algebraic(const ProblemDef& p, const Vec& xi, const SolveOptions& opts = {},
                                const AlgebraicOptions& aopts = {});

}  // namespace nsift
