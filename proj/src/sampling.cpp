#include "nsift/sampling.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace nsift {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double to_unit(std::uint64_t z) { return static_cast<double>(z >> 11) * 0x1.0p-53; }

std::vector<int> first_primes(int count) {
  std::vector<int> out;
  for (int c = 2; static_cast<int>(out.size()) < count; ++c) {
    bool prime = true;
    for (int p : out) {
      if (p * p > c) break;
      if (c % p == 0) {
        prime = false;
        break;
      }
    }
    if (prime) out.push_back(c);
  }
  return out;
}

// Orthonormal basis of the tangent space at unit vector d.
Eigen::MatrixXd tangent_basis(const Vec& d) {
  const auto n = d.size();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(d);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  return q.rightCols(n - 1);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

double radical_inverse(std::uint64_t index, int base) {
  double inv = 1.0 / base;
  double f = inv;
  double r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

HaltonSequence::HaltonSequence(int dim, std::uint64_t seed) : bases_(first_primes(dim)) {
  for (int i = 0; i < dim; ++i) shift_.push_back(to_unit(mix_seed(seed, 1000 + i)));
}

Vec HaltonSequence::point(std::uint64_t index) const {
  Vec u(dim());
  for (int i = 0; i < dim(); ++i) {
    double v = radical_inverse(index + 1, bases_[i]) + shift_[i];
    u[i] = v - std::floor(v);
  }
  return u;
}

std::vector<Vec> sphere_directions(int n, int count, std::uint64_t seed) {
  std::vector<Vec> out;
  out.reserve(count);
  if (n == 1) {
    for (int i = 0; i < count; ++i) out.push_back(Vec::Constant(1, i % 2 == 0 ? 1.0 : -1.0));
    return out;
  }
  if (n == 2) {
    HaltonSequence h(1, seed);
    for (int i = 0; i < count; ++i) {
      const double a = 2.0 * std::numbers::pi * h.point(i)[0];
      out.push_back(Vec{{std::cos(a), std::sin(a)}});
    }
    return out;
  }
  // Box-Muller on Halton coordinates.
  const int pairs = (n + 1) / 2;
  HaltonSequence h(2 * pairs, seed);
  for (int i = 0; i < count; ++i) {
    const Vec u = h.point(i);
    Vec g(2 * pairs);
    for (int k = 0; k < pairs; ++k) {
      const double r = std::sqrt(-2.0 * std::log(std::max(u[2 * k], 1e-300)));
      const double a = 2.0 * std::numbers::pi * u[2 * k + 1];
      g[2 * k] = r * std::cos(a);
      g[2 * k + 1] = r * std::sin(a);
    }
    Vec d = g.head(n);
    const double norm = d.norm();
    out.push_back(norm > 0 ? Vec(d / norm) : Vec(Vec::Unit(n, 0)));
  }
  return out;
}

Vec uniform_in_ball(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Vec g(n);
  double norm = 0.0;
  while (norm == 0.0) {
    for (int i = 0; i < n; ++i) g[i] = normal(rng);
    norm = g.norm();
  }
  return g * (std::pow(uni(rng), 1.0 / n) / norm);
}

SphereMin refine_on_sphere(const ScalarFn& f, const Vec& center, double radius, const Vec& d0,
                           int max_evals) {
  SphereMin best{f(center + radius * d0), d0};
  const auto n = d0.size();
  if (n < 2) return best;
  int evals = 1;
  double h = 0.25;
  Eigen::MatrixXd basis = tangent_basis(best.direction);
  while (evals < max_evals && h > 1e-12) {
    bool moved = false;
    for (Eigen::Index j = 0; j < n - 1 && !moved; ++j) {
      for (double s : {1.0, -1.0}) {
        Vec d = best.direction * std::cos(h) + basis.col(j) * (s * std::sin(h));
        d.normalize();
        const double v = f(center + radius * d);
        ++evals;
        if (v < best.value) {
          best = {v, d};
          moved = true;
          break;
        }
        if (evals >= max_evals) break;
      }
    }
    if (moved) {
      basis = tangent_basis(best.direction);
      h = std::min(2.0 * h, 0.5);
    } else {
      h *= 0.5;
    }
  }
  return best;
}

SphereMin sphere_infimum(const ScalarFn& f, const Vec& center, double radius, int samples,
                         std::uint64_t seed) {
  const auto dirs = sphere_directions(static_cast<int>(center.size()), samples, seed);
  SphereMin best{std::numeric_limits<double>::infinity(), dirs.front()};
  for (const Vec& d : dirs) {
    const SphereMin s = refine_on_sphere(f, center, radius, d);
    if (s.value < best.value) best = s;
  }
  return best;
}

PowerFit fit_power_law(const std::vector<double>& r, const std::vector<double>& v) {
  // Nonpositive values have no logarithm and are left out of the fit.
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < r.size() && i < v.size(); ++i) {
    if (!(v[i] > 0.0) || !(r[i] > 0.0) || !std::isfinite(v[i])) continue;
    lx.push_back(std::log(r[i]));
    ly.push_back(std::log(v[i]));
  }
  const std::size_t k = lx.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < k; ++i) {
    sx += lx[i];
    sy += ly[i];
    sxx += lx[i] * lx[i];
    sxy += lx[i] * ly[i];
  }
  PowerFit fit;
  const double den = k * sxx - sx * sx;
  if (k < 2 || den == 0.0) return fit;
  fit.exponent = (k * sxy - sx * sy) / den;
  const double b = (sy - fit.exponent * sx) / k;
  fit.constant = std::exp(b);
  double ss = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double e = ly[i] - (b + fit.exponent * lx[i]);
    ss += e * e;
  }
  fit.residual = std::sqrt(ss / k);
  return fit;
}

}  // namespace nsift
