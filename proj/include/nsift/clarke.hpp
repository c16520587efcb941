#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "nsift/expr.hpp"

namespace nsift {

/// Raised when a numeric procedure cannot produce a usable result
/// (e.g. gradient sampling keeps landing on kinks).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FamilyMode { kPointwise, kOuterGlobal };

const char* to_string(FamilyMode mode);

/// J0 + sum_i t_i E_i with every t_i in [-1, 1].
struct JacobianFamily {
  Mat J0;
  std::vector<Mat> E;
  std::vector<int> source_abs;  // abs_id that introduced each parameter
  Vec x;
  Vec y;
  FamilyMode mode = FamilyMode::kPointwise;
  // False when the family is only known to contain the Clarke Jacobian:
  // nested active abs nodes, active arguments with dependent gradients, or
  // outer-global mode.
  bool exact = true;

  int dim() const { return static_cast<int>(J0.rows()); }
  int parameters() const { return static_cast<int>(E.size()); }
  bool singleton() const { return E.empty(); }
  Mat member(const Vec& t) const;
  /// Members at t in {-1, 1}^k, k = parameters().
  std::vector<Mat> vertices() const;
  /// min over vertices of the smallest singular value.
  double min_vertex_sigma() const;
};

/// eta < 0 selects default_eta(x, y).
JacobianFamily jacobian_family(const ProblemDef& p, const Vec& x, const Vec& y, double eta = -1.0,
                               FamilyMode mode = FamilyMode::kPointwise);

/// Value of a scalar objective with the gradient of the active smooth
/// selection; the gradient is absent at points where it is undefined.
struct Evaluation {
  double value = 0.0;
  std::optional<Vec> gradient;
};

class Objective {
 public:
  using Fn = std::function<Evaluation(const Vec&)>;
  using ValueFn = std::function<double(const Vec&)>;

  Objective(int n, Fn fn, ValueFn value_fn = nullptr)
      : n_(n), fn_(std::move(fn)), value_fn_(std::move(value_fn)) {}

  int dim() const { return n_; }
  Evaluation operator()(const Vec& x) const { return fn_(x); }
  double value(const Vec& x) const { return value_fn_ ? value_fn_(x) : fn_(x).value; }

 private:
  int n_;
  Fn fn_;
  ValueFn value_fn_;
};

/// phi_y(x) = 1/2 ||F(x, y)||^2.
Objective phi_objective(const ProblemDef& p, const Vec& y);
/// psi(x) = 1/2 ||F(x + shift, y)||^2.
Objective shifted_phi_objective(const ProblemDef& p, const Vec& y, const Vec& shift);

struct GradientBundle {
  Vec center;
  double radius = 0.0;
  std::vector<Vec> points;
  std::vector<Vec> gradients;
  std::vector<double> values;
};

/// k gradients at uniform points of the ball B(u, radius); deterministic in
/// seed. A sample that hits a kink is redrawn up to 10 times. k <= 0 selects
/// 2 (n + 1).
GradientBundle sample_gradients(const Objective& f, const Vec& u, double radius, int k,
                                std::uint64_t seed);

struct StationarityMeasure {
  Vec v;
  double norm = 0.0;
  Vec weights;  // convex coefficients over the input points
  int iterations = 0;
  bool converged = true;
};

/// Nearest point to the origin in the convex hull of the points
/// (Wolfe's active-set method).
StationarityMeasure min_norm_element(const std::vector<Vec>& points, double tol = 1e-10,
                                     int max_iterations = 100000);
StationarityMeasure min_norm_element(const GradientBundle& b, double tol = 1e-10);

/// The set {B^T r : B in the family at (x, y)}, r = F(x, y), described by
/// its vertex images.
struct PhiSubgradients {
  Vec residual;
  JacobianFamily family;
  std::vector<Vec> vertex_images;
  StationarityMeasure min_norm;
  bool stationary = false;     // min-norm over the set <= tol
  bool residual_zero = false;  // ||r|| <= tol
  // Stationary with r != 0: only possible if the family is rank deficient.
  bool rank_deficiency_implied = false;
  double min_vertex_sigma = 0.0;
};

PhiSubgradients phi_subgradients(const ProblemDef& p, const Vec& x, const Vec& y, double tol = 1e-8,
                                 FamilyMode mode = FamilyMode::kPointwise);

}  // namespace nsift
