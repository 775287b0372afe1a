#pragma once
#include <array>
#include <cmath>
#include <ostream>

namespace norad {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return s * a; }
  friend Vec3 operator/(Vec3 a, double s) { return {a.x / s, a.y / s, a.z / s}; }
  Vec3& operator+=(Vec3 b) { x += b.x; y += b.y; z += b.z; return *this; }
  Vec3& operator-=(Vec3 b) { x -= b.x; y -= b.y; z -= b.z; return *this; }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double dot(Vec3 b) const { return x * b.x + y * b.y + z * b.z; }
  double norm2() const { return dot(*this); }
  double norm() const { return std::sqrt(norm2()); }
  std::array<double, 3> as_array() const { return {x, y, z}; }

  friend std::ostream& operator<<(std::ostream& os, Vec3 v) {
    return os << '(' << v.x << ',' << v.y << ',' << v.z << ')';
  }
};

inline double dot(Vec3 a, Vec3 b) { return a.dot(b); }

}  // namespace norad
