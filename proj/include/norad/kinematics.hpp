#pragma once
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "norad/vec3.hpp"

namespace norad {

/// Lorentz factor (1-|z|^2)^{-1/2}; requires |z| < 1.
inline double gamma(Vec3 z) {
  const double s = z.norm2();
  if (s >= 1.0) throw std::domain_error("gamma: velocity must satisfy |z| < 1");
  return 1.0 / std::sqrt(1.0 - s);
}

/// Relativistic velocity subtraction: the velocity of soliton a seen from the
/// rest frame of soliton b.  Reduces to (z_a - z_b)/(1 - z_a z_b) when the two
/// velocities are collinear.
inline Vec3 relative_speed(Vec3 za, Vec3 zb) {
  if (za.norm2() >= 1.0 || zb.norm2() >= 1.0)
    throw std::domain_error("relative_speed: velocities must satisfy |z| < 1");
  const double gb = gamma(zb);
  const double d = 1.0 - dot(za, zb);
  return (1.0 / d) * ((1.0 / gb) * za - zb + (gb / (1.0 + gb)) * dot(za, zb) * zb);
}

/// True if every velocity is a multiple of the first nonzero one.
inline bool collinear(const std::vector<Vec3>& zs) {
  Vec3 axis{};
  for (const auto& z : zs)
    if (z.norm2() > 0) { axis = z / z.norm(); break; }
  if (axis.norm2() == 0) return true;
  for (const auto& z : zs) {
    const Vec3 perp = z - dot(z, axis) * axis;
    if (perp.norm() > 1e-14 * (1.0 + z.norm())) return false;
  }
  return true;
}

/// Per-soliton data: velocity, scale, sign, and the modulation path
/// z_a^c(t) = z_a^{0,1} log t - z_a^{0,0} - sum_{i>=1,j>=0} z_a^{i,j} log^j t / t^i.
struct Soliton {
  Vec3 velocity{};                                  // z_a, |z_a| < 1
  double scale = 1.0;                               // lambda_a > 0
  int sign = +1;                                    // sigma_a
  Vec3 log_correction{};                            // z_a^{0,1}
  Vec3 center{};                                    // z_a^{0,0}
  std::map<std::pair<int, int>, Vec3> higher{};     // (i,j) -> z_a^{i,j}, i >= 1
};

struct SolitonConfig {
  std::vector<Soliton> solitons;

  std::size_t size() const { return solitons.size(); }
  const Soliton& operator[](std::size_t a) const { return solitons.at(a); }
  Soliton& operator[](std::size_t a) { return solitons.at(a); }

  /// Checks |z_a|<1, lambda_a>0, sigma_a=+-1, distinct velocities, and the
  /// normalization z_1 = 0, lambda_1 = 1, sigma_1 = +1.
  void validate() const {
    if (solitons.empty()) throw std::invalid_argument("SolitonConfig: no solitons");
    for (std::size_t a = 0; a < solitons.size(); ++a) {
      const auto& s = solitons[a];
      if (s.velocity.norm2() >= 1.0)
        throw std::invalid_argument("SolitonConfig: |z_a| must be < 1");
      if (!(s.scale > 0.0))
        throw std::invalid_argument("SolitonConfig: scale must be positive");
      if (s.sign != 1 && s.sign != -1)
        throw std::invalid_argument("SolitonConfig: sign must be +-1");
      for (std::size_t b = 0; b < a; ++b)
        if ((s.velocity - solitons[b].velocity).norm() == 0.0)
          throw std::invalid_argument("SolitonConfig: velocities must be distinct");
    }
    const auto& first = solitons.front();
    if (first.velocity.norm() != 0.0 || first.scale != 1.0 || first.sign != 1)
      throw std::invalid_argument(
          "SolitonConfig: convention requires z_1 = 0, lambda_1 = 1, sigma_1 = +1");
  }

  bool is_collinear() const {
    std::vector<Vec3> zs;
    for (const auto& s : solitons) zs.push_back(s.velocity);
    return collinear(zs);
  }
};

/// Boosted coordinates attached to one soliton.
struct LocalFrame {
  Vec3 y{};        // y_a = gamma_a (x - z_a t)
  double t = 0;    // t_a = gamma_a (t - z_a . x)
  Vec3 y_tilde{};  // y_a - z_a^{0,1} log t_a
  double gamma = 1;
};

inline LocalFrame local_coords(Vec3 x, double t, std::size_t a,
                               const SolitonConfig& cfg) {
  const Soliton& s = cfg[a];
  LocalFrame f;
  f.gamma = gamma(s.velocity);
  f.y = f.gamma * (x - t * s.velocity);
  f.t = f.gamma * (t - dot(s.velocity, x));
  if (f.t <= 1.0)
    throw std::domain_error("local_coords: t_a must exceed 1");
  f.y_tilde = f.y - std::log(f.t) * s.log_correction;
  return f;
}

/// Full modulated center z_a^c(t_a) and the recentered coordinate
/// y_a^c = y_a - z_a^c(t_a).
inline Vec3 modulated_center(const Soliton& s, double ta) {
  const double lt = std::log(ta);
  Vec3 c = lt * s.log_correction - s.center;
  for (const auto& [ij, v] : s.higher)
    c -= std::pow(lt, ij.second) * std::pow(ta, -ij.first) * v;
  return c;
}

/// Geometric separation constant
/// delta_4 = (1/(10 max(100,d))) min_{a != b} |z_a - z_b| min_a (1 - |z_a|).
inline double delta4(const SolitonConfig& cfg, double d = 100.0) {
  if (cfg.size() < 2)
    throw std::invalid_argument("delta4: needs at least two solitons");
  double min_sep = std::numeric_limits<double>::infinity();
  double min_gap = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < cfg.size(); ++a) {
    min_gap = std::min(min_gap, 1.0 - cfg[a].velocity.norm());
    for (std::size_t b = 0; b < a; ++b)
      min_sep = std::min(min_sep, (cfg[a].velocity - cfg[b].velocity).norm());
  }
  return min_sep * min_gap / (10.0 * std::max(100.0, d));
}

}  // namespace norad
