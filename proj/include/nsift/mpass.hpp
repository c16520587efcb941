#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nsift/certify.hpp"
#include "nsift/clarke.hpp"
#include "nsift/parallel.hpp"
#include "nsift/solve.hpp"

namespace nsift {

struct RingInfimum {
  double rho = 0.0;
  double value = 0.0;
  Vec point;  // minimizer found on the sphere
};

/// Sphere sampling around center followed by tangential pattern search.
/// samples <= 0 selects 16 n; fewer than 16 n is rejected.
RingInfimum ring_infimum(const Objective& f, const Vec& center, double rho, int samples = 0,
                         std::uint64_t seed = 0);

/// 9 radii, log-spaced in [0.05, 0.95] |u2 - u1|.
std::vector<double> default_ring_schedule(const Vec& u1, const Vec& u2);

/// First radius of the schedule whose ring around u1 stays above both
/// endpoint values by more than margin; nullopt if none does.
std::optional<RingInfimum> find_mountain_ring(const Objective& f, const Vec& u1, const Vec& u2,
                                              std::vector<double> schedule = {}, int samples = 0,
                                              std::uint64_t seed = 0, double margin = 1e-10);

struct PathState {
  std::vector<Vec> beads;  // beads.front() = u1, beads.back() = u2
  std::vector<double> values;
  double max_value = 0.0;
  int argmax = 0;
  int iteration = 0;

  void refresh_max();
};

/// One recorded bead for the optional path history.
struct PathSample {
  int iteration = 0;
  int bead = 0;
  Vec x;
  double value = 0.0;
};

enum class SaddleVerdict { kSaddleFound, kDegenerate, kBudgetExhausted };
const char* to_string(SaddleVerdict v);

struct SaddleEstimate {
  Vec v;
  double c = 0.0;
  double stationarity = 0.0;
  std::optional<RingInfimum> ring;
  SaddleVerdict verdict = SaddleVerdict::kBudgetExhausted;
  PathState path;
  std::vector<double> max_history;  // path max after every accepted iteration
  std::vector<PathSample> history;  // filled when record_history is set
  int iterations = 0;
};

struct MountainPassOptions {
  int beads = 32;
  int max_iterations = 2000;
  double stationarity_tol = 1e-8;
  double string_tol = 1e-6;  // perpendicular gradient at which the string phase stops
  std::optional<double> cluster_radius;  // default 1e-6 (1 + |x|)
  std::uint64_t seed = 0;
  bool record_history = false;
  ExecutionContext exec;
};

/// Elastic-string search for the min-max level between u1 and u2.
SaddleEstimate mountain_pass(const Objective& f, const Vec& u1, const Vec& u2,
                             const MountainPassOptions& opts = {});

/// Two-root probe on psi_y(x) = 1/2 |F(x + x2, y)|^2, the first two roots
/// of find_roots being x1 and x2. Coordinates in the result are unshifted.
struct UniquenessProbe {
  RootSet roots;
  std::optional<Vec> x1;
  std::optional<Vec> x2;
  std::optional<RingInfimum> ring;  // in shifted coordinates (center 0)
  std::optional<SaddleEstimate> saddle;
  std::optional<RankCertificate> rank;  // on the box spanned by the final path
  // A saddle with positive level next to two roots inside a certified
  // maximal-rank box: the uniqueness argument says this cannot happen.
  bool contradiction = false;
};

UniquenessProbe probe_uniqueness(const ProblemDef& p, const Vec& y, const SolveOptions& solve = {},
                                 const MountainPassOptions& mp = {}, const RankOptions& rank = {});

}  // namespace nsift
