#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pwrgram/geometry.hpp"

namespace pwrgram {

enum class ClipOutcome : std::uint8_t { unchanged, clipped, emptied };

// One polygonal face of a cell: the plane that carries it and its vertex loop,
// ordered counter-clockwise when seen from outside the cell.
template <typename Real>
struct CellFace {
  PlaneSource source;
  std::vector<Vec3<Real>> loop;
};

// Convex polytope of a single site, built by successive half-space clipping.
//
// Vertices are stored as triplets of plane indices (the three planes meeting
// at the vertex) with a cached position. Triplets are oriented so that the
// dual triangulation (nodes = planes, triangles = vertices) is a consistently
// oriented sphere; clipping cuts a disk out of that triangulation and fans the
// hole boundary around the new plane.
//
// Planes and vertex positions are stored relative to the site position so
// that clipping precision does not depend on where the scene lives. Accessors
// suffixed `_world` translate back.
template <typename Real>
class ConvexCell {
 public:
  using Triplet = std::array<std::uint32_t, 3>;
  static constexpr double compaction_threshold = 0.85;

  // Cell equal to `box`. Throws SiteOutsideBox unless the box strictly
  // contains the site. Faces thinner than `face_eps` (default eps_plane) are
  // not proper.
  static ConvexCell init(const WeightedSite<Real>& site, const Aabb<Real>& box, Real eps_plane,
                         Real face_eps = Real(-1));

  ClipOutcome clip(const HalfSpace<Real>& world_plane);
  ClipOutcome clip_bisector(const WeightedSite<Real>& other);

  // Drops planes that no vertex references and remaps triplets.
  void compact();
  // Compacts when the plane store reaches the occupancy threshold, growing
  // the capacity when compaction alone does not bring it back under.
  void maybe_compact();

  Real directional_radius(const Aabb<Real>& world_target) const;
  Real isotropic_radius() const;
  bool site_culled(const WeightedSite<Real>& candidate) const;
  bool site_culled_isotropic(const WeightedSite<Real>& candidate) const;

  const WeightedSite<Real>& site() const { return site_; }
  bool empty() const { return triplets_.empty(); }
  Real eps_plane() const { return eps_plane_; }
  Real face_eps() const { return face_eps_; }
  // True when the last clip found a vertex within the band or beyond it.
  bool last_clip_touched() const { return last_touched_; }

  // Site-relative storage.
  const std::vector<HalfSpace<Real>>& planes() const { return planes_; }
  const std::vector<Triplet>& triplets() const { return triplets_; }
  const std::vector<Vec3<Real>>& vertex_positions() const { return positions_; }
  const Aabb<Real>& local_aabb() const { return aabb_; }

  std::size_t vertex_count() const { return triplets_.size(); }
  std::size_t plane_count() const { return planes_.size(); }
  std::size_t plane_capacity() const { return capacity_; }
  std::size_t live_plane_count() const;

  Vec3<Real> vertex_world(std::size_t k) const { return positions_[k] + site_.position; }
  HalfSpace<Real> plane_world(std::size_t k) const;
  Aabb<Real> aabb_world() const;
  const std::array<Real, 8>& corner_dist() const { return corner_dist_; }

  // Faces with their ordered loops (site-relative). Planes whose vertices
  // collapse to a point or a segment still produce a face here.
  std::vector<CellFace<Real>> faces() const;
  // Faces thicker than face_eps, in world coordinates.
  std::vector<CellFace<Real>> proper_faces_world() const;
  // Ascending ids of bisector planes carrying a proper face.
  std::vector<std::uint32_t> neighbor_ids() const;
  bool touches_boundary() const;
  // Sum over faces of area * plane offset / 3.
  Real volume() const;

  static bool face_is_proper(const CellFace<Real>& face, Real eps_plane);

 private:
  ConvexCell() = default;

  ClipOutcome clip_local(const HalfSpace<Real>& plane);
  bool build_hole_boundary(std::size_t first_removed, std::uint32_t& first);
  void refresh_bounds();

  WeightedSite<Real> site_;
  Real eps_plane_ = 0;
  Real face_eps_ = 0;
  bool last_touched_ = false;
  std::size_t capacity_ = 0;
  std::vector<HalfSpace<Real>> planes_;
  std::vector<Triplet> triplets_;
  std::vector<Vec3<Real>> positions_;
  Aabb<Real> aabb_;
  std::array<Real, 8> corner_dist_{};
  std::vector<std::uint32_t> boundary_next_;  // scratch for the hole boundary
};

// Rebuilds a finished cell from the bisectors of `candidates`, clipped in
// ascending (bisector offset, id) order with band `eps_canonical`, so that the
// result does not depend on the order the candidates were found in. Faces
// thinner than `face_eps` are not proper. On TopologyCorruption the band is
// widened x100, up to face_eps; nullopt when every attempt fails.
template <typename Real>
std::optional<ConvexCell<Real>> canonical_cell(const WeightedSite<Real>& site, const Aabb<Real>& box,
                                               std::span<const WeightedSite<Real>> candidates,
                                               Real eps_canonical, Real face_eps);

extern template class ConvexCell<float>;
extern template class ConvexCell<double>;

}  // namespace pwrgram
