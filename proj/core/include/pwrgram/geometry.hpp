#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>

#include "pwrgram/error.hpp"

namespace pwrgram {

template <typename Real>
struct Vec3 {
  Real x = 0, y = 0, z = 0;

  constexpr Real operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  constexpr Real& operator[](int axis) { return axis == 0 ? x : (axis == 1 ? y : z); }

  friend constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend constexpr Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
  friend constexpr Vec3 operator*(Vec3 a, Real s) { return {a.x * s, a.y * s, a.z * s}; }
  friend constexpr Vec3 operator*(Real s, Vec3 a) { return {a.x * s, a.y * s, a.z * s}; }
  friend constexpr Vec3 operator/(Vec3 a, Real s) { return {a.x / s, a.y / s, a.z / s}; }
  friend constexpr bool operator==(Vec3 a, Vec3 b) = default;

  template <typename Other>
  constexpr Vec3<Other> cast() const {
    return {static_cast<Other>(x), static_cast<Other>(y), static_cast<Other>(z)};
  }
};

using Vec3d = Vec3<double>;
using Vec3f = Vec3<float>;

template <typename Real>
constexpr Real dot(Vec3<Real> a, Vec3<Real> b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

template <typename Real>
constexpr Vec3<Real> cross(Vec3<Real> a, Vec3<Real> b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

template <typename Real>
constexpr Real squared_norm(Vec3<Real> a) {
  return dot(a, a);
}

template <typename Real>
Real norm(Vec3<Real> a) {
  return std::sqrt(dot(a, a));
}

template <typename Real>
bool is_finite(Vec3<Real> a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

enum class PrecisionMode : std::uint8_t { single, double_ };

const char* to_string(PrecisionMode mode);

// A site of the power diagram. `weight` is in squared length units and may be
// negative. `id` is the index of the site in its owning array.
template <typename Real>
struct WeightedSite {
  Vec3<Real> position;
  Real weight = 0;
  std::uint32_t id = 0;

  template <typename Other>
  WeightedSite<Other> cast() const {
    return {position.template cast<Other>(), static_cast<Other>(weight), id};
  }
};

using Site = WeightedSite<double>;

// Axis-aligned box. The default-constructed box is empty (min > max).
template <typename Real>
struct Aabb {
  Vec3<Real> min_corner{std::numeric_limits<Real>::max(), std::numeric_limits<Real>::max(),
                        std::numeric_limits<Real>::max()};
  Vec3<Real> max_corner{std::numeric_limits<Real>::lowest(), std::numeric_limits<Real>::lowest(),
                        std::numeric_limits<Real>::lowest()};

  static Aabb point(Vec3<Real> p) { return {p, p}; }

  bool empty() const {
    return min_corner.x > max_corner.x || min_corner.y > max_corner.y ||
           min_corner.z > max_corner.z;
  }

  void expand(Vec3<Real> p) {
    min_corner = {std::min(min_corner.x, p.x), std::min(min_corner.y, p.y),
                  std::min(min_corner.z, p.z)};
    max_corner = {std::max(max_corner.x, p.x), std::max(max_corner.y, p.y),
                  std::max(max_corner.z, p.z)};
  }

  void expand(const Aabb& other) {
    expand(other.min_corner);
    expand(other.max_corner);
  }

  Vec3<Real> extent() const { return max_corner - min_corner; }
  Real diagonal() const { return empty() ? Real(0) : norm(extent()); }

  int longest_axis() const {
    const Vec3<Real> e = extent();
    if (e.x >= e.y && e.x >= e.z) return 0;
    return e.y >= e.z ? 1 : 2;
  }

  bool contains(Vec3<Real> p) const {
    return p.x >= min_corner.x && p.x <= max_corner.x && p.y >= min_corner.y &&
           p.y <= max_corner.y && p.z >= min_corner.z && p.z <= max_corner.z;
  }

  bool strictly_contains(Vec3<Real> p) const {
    return p.x > min_corner.x && p.x < max_corner.x && p.y > min_corner.y &&
           p.y < max_corner.y && p.z > min_corner.z && p.z < max_corner.z;
  }

  // Corner k takes max_corner on axis a iff bit a of k is set.
  Vec3<Real> corner(int k) const {
    return {(k & 1) ? max_corner.x : min_corner.x, (k & 2) ? max_corner.y : min_corner.y,
            (k & 4) ? max_corner.z : min_corner.z};
  }

  template <typename Other>
  Aabb<Other> cast() const {
    return {min_corner.template cast<Other>(), max_corner.template cast<Other>()};
  }
};

using Aabbd = Aabb<double>;

// Tag identifying where a half-space came from.
struct PlaneSource {
  enum class Kind : std::uint8_t { bisector, boundary };
  Kind kind = Kind::boundary;
  std::uint32_t index = 0;  // site id for bisectors, box face 0..5 for boundary planes

  static constexpr PlaneSource bisector(std::uint32_t site_id) { return {Kind::bisector, site_id}; }
  static constexpr PlaneSource boundary(std::uint32_t face) { return {Kind::boundary, face}; }
  constexpr bool is_bisector() const { return kind == Kind::bisector; }
  friend constexpr bool operator==(PlaneSource, PlaneSource) = default;
};

// {x : dot(normal, x) + offset >= 0}
template <typename Real>
struct HalfSpace {
  Vec3<Real> normal;
  Real offset = 0;
  PlaneSource source;

  Real evaluate(Vec3<Real> p) const { return dot(normal, p) + offset; }
};

// Scale-relative tolerances derived from the scene diagonal.
template <typename Real>
struct Tolerances {
  Real plane = 0;          // vertex classification band
  Real coincident_sq = 0;  // squared distance under which two positions coincide
  Real canonical = 0;      // band of the final order-independent rebuild

  static Tolerances for_scene(double scene_diagonal);
};

template <>
inline Tolerances<double> Tolerances<double>::for_scene(double diagonal) {
  return {1e-9 * diagonal, 1e-24 * diagonal * diagonal, 1e-13 * diagonal};
}

template <>
inline Tolerances<float> Tolerances<float>::for_scene(double diagonal) {
  // Float rounding leaves no room for a finer rebuild band.
  return {static_cast<float>(1e-7 * diagonal), static_cast<float>(1e-12 * diagonal * diagonal),
          static_cast<float>(1e-7 * diagonal)};
}

template <typename Real>
Real power_distance(Vec3<Real> x, const WeightedSite<Real>& s) {
  return squared_norm(x - s.position) - s.weight;
}

// Signed distance from s_i to the bisecting plane, measured toward s_j.
// Depends on the weights only through w_i - w_j.
template <typename Real>
Real bisector_distance(const WeightedSite<Real>& s_i, const WeightedSite<Real>& s_j,
                       Real coincident_sq = 0) {
  const Vec3<Real> diff = s_j.position - s_i.position;
  const Real len_sq = squared_norm(diff);
  if (!(len_sq > coincident_sq)) {
    throw Error(ErrorCode::coincident_sites, "bisector of coincident sites", s_j.id);
  }
  return (len_sq + (s_i.weight - s_j.weight)) / (Real(2) * std::sqrt(len_sq));
}

// Half-space of points at least as close (in power distance) to s_i as to
// s_j. The normal is unit length and points from s_j toward s_i.
template <typename Real>
HalfSpace<Real> bisector(const WeightedSite<Real>& s_i, const WeightedSite<Real>& s_j,
                         Real coincident_sq = 0) {
  const Real d = bisector_distance(s_i, s_j, coincident_sq);
  const Vec3<Real> diff = s_j.position - s_i.position;
  const Vec3<Real> u = diff / norm(diff);
  return {-u, d + dot(u, s_i.position), PlaneSource::bisector(s_j.id)};
}

template <typename Real>
Real aabb_min_squared_distance(Vec3<Real> x, const Aabb<Real>& b) {
  Real acc = 0;
  for (int a = 0; a < 3; ++a) {
    const Real lo = b.min_corner[a] - x[a];
    const Real hi = x[a] - b.max_corner[a];
    const Real gap = std::max({lo, hi, Real(0)});
    acc += gap * gap;
  }
  return acc;
}

template <typename Real>
Real aabb_min_distance(Vec3<Real> x, const Aabb<Real>& b) {
  return std::sqrt(aabb_min_squared_distance(x, b));
}

// Intersection point of three planes (Cramer's rule). Returns false when the
// planes are (numerically) not in general position.
template <typename Real>
bool intersect_planes(const HalfSpace<Real>& a, const HalfSpace<Real>& b, const HalfSpace<Real>& c,
                      Vec3<Real>& out) {
  const Vec3<Real> bc = cross(b.normal, c.normal);
  const Real det = dot(a.normal, bc);
  if (det == Real(0) || !std::isfinite(det)) return false;
  const Vec3<Real> ca = cross(c.normal, a.normal);
  const Vec3<Real> ab = cross(a.normal, b.normal);
  out = (bc * (-a.offset) + ca * (-b.offset) + ab * (-c.offset)) / det;
  return is_finite(out);
}

}  // namespace pwrgram
