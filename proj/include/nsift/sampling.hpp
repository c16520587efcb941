#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace nsift {

using Vec = Eigen::VectorXd;
using ScalarFn = std::function<double(const Vec&)>;

/// splitmix64 finalizer applied to seed ^ f(stream); used to derive
/// independent per-task seeds from the single run seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

double radical_inverse(std::uint64_t index, int base);

/// Halton points in [0,1)^dim with a Cranley-Patterson rotation drawn from
/// the seed. Point i does not depend on how many points are requested.
class HaltonSequence {
 public:
  HaltonSequence(int dim, std::uint64_t seed);
  Vec point(std::uint64_t index) const;
  int dim() const { return static_cast<int>(shift_.size()); }

 private:
  std::vector<double> shift_;
  std::vector<int> bases_;
};

/// Unit directions in R^n. The first k directions of a request for count
/// directions are the same for every count >= k.
std::vector<Vec> sphere_directions(int n, int count, std::uint64_t seed);

/// Uniform point in the unit ball.
Vec uniform_in_ball(std::mt19937_64& rng, int n);

struct SphereMin {
  double value = 0.0;
  Vec direction;  // unit vector; the point is center + radius * direction
};

/// Deterministic pattern search over unit directions starting from d0.
SphereMin refine_on_sphere(const ScalarFn& f, const Vec& center, double radius, const Vec& d0,
                           int max_evals = 600);

/// Infimum estimate of f on the sphere |x - center| = radius: every sampled
/// direction is refined, and the minimum is taken over all of them, so
/// more samples never raise the estimate.
SphereMin sphere_infimum(const ScalarFn& f, const Vec& center, double radius, int samples,
                         std::uint64_t seed);

/// Least-squares fit log(v) = log(c) + p log(r) over the positive values.
struct PowerFit {
  double exponent = 0.0;
  double constant = 0.0;
  double residual = 0.0;
};
PowerFit fit_power_law(const std::vector<double>& r, const std::vector<double>& v);

}  // namespace nsift
