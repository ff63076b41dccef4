#include "pwrgram/convex_cell.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <utility>

namespace pwrgram {

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
constexpr std::uint32_t kLinkedSeen = kNone - 1;
constexpr std::size_t kInitialCapacity = 32;

template <typename Real>
Real triple(Vec3<Real> a, Vec3<Real> b, Vec3<Real> c) {
  return dot(a, cross(b, c));
}

template <typename Real>
Vec3<Real> newell_normal(const std::vector<Vec3<Real>>& loop) {
  // Relative to the first vertex, so that collapsed loops stay near zero.
  Vec3<Real> n{};
  for (std::size_t i = 1; i + 1 < loop.size(); ++i) {
    n = n + cross(loop[i] - loop[0], loop[i + 1] - loop[0]);
  }
  return n;
}

[[noreturn]] void corrupt(const char* what) {
  throw Error(ErrorCode::topology_corruption, std::string("clip: ") + what);
}

}  // namespace

template <typename Real>
ConvexCell<Real> ConvexCell<Real>::init(const WeightedSite<Real>& site, const Aabb<Real>& box,
                                        Real eps_plane, Real face_eps) {
  if (box.empty() || !box.strictly_contains(site.position)) {
    throw Error(ErrorCode::site_outside_box, "site is not strictly inside the initial box",
                site.id);
  }
  ConvexCell cell;
  cell.site_ = site;
  cell.eps_plane_ = eps_plane;
  cell.face_eps_ = face_eps < Real(0) ? eps_plane : face_eps;
  cell.capacity_ = kInitialCapacity;
  cell.planes_.reserve(kInitialCapacity);

  const Vec3<Real> lo = box.min_corner - site.position;
  const Vec3<Real> hi = box.max_corner - site.position;
  for (int axis = 0; axis < 3; ++axis) {
    Vec3<Real> n{};
    n[axis] = 1;
    cell.planes_.push_back({n, -lo[axis], PlaneSource::boundary(2 * axis)});
    cell.planes_.push_back({-n, hi[axis], PlaneSource::boundary(2 * axis + 1)});
  }

  const Aabb<Real> local{lo, hi};
  for (int k = 0; k < 8; ++k) {
    Triplet t{(k & 1) ? 1u : 0u, (k & 2) ? 3u : 2u, (k & 4) ? 5u : 4u};
    // Orient every dual triangle the same way: positive triple product of the
    // inward normals.
    if (triple(cell.planes_[t[0]].normal, cell.planes_[t[1]].normal,
               cell.planes_[t[2]].normal) < 0) {
      std::swap(t[1], t[2]);
    }
    cell.triplets_.push_back(t);
    cell.positions_.push_back(local.corner(k));
  }
  cell.boundary_next_.assign(cell.planes_.size(), kNone);
  cell.refresh_bounds();
  return cell;
}

template <typename Real>
HalfSpace<Real> ConvexCell<Real>::plane_world(std::size_t k) const {
  HalfSpace<Real> p = planes_[k];
  p.offset -= dot(p.normal, site_.position);
  return p;
}

template <typename Real>
Aabb<Real> ConvexCell<Real>::aabb_world() const {
  if (aabb_.empty()) return aabb_;
  return {aabb_.min_corner + site_.position, aabb_.max_corner + site_.position};
}

template <typename Real>
ClipOutcome ConvexCell<Real>::clip(const HalfSpace<Real>& world_plane) {
  HalfSpace<Real> local = world_plane;
  local.offset += dot(world_plane.normal, site_.position);
  return clip_local(local);
}

template <typename Real>
ClipOutcome ConvexCell<Real>::clip_bisector(const WeightedSite<Real>& other) {
  const Vec3<Real> diff = other.position - site_.position;
  const Real len_sq = squared_norm(diff);
  if (!(len_sq > Real(0))) {
    throw Error(ErrorCode::coincident_sites, "bisector of coincident sites", other.id);
  }
  const Real len = std::sqrt(len_sq);
  const Real dist = (len_sq + (site_.weight - other.weight)) / (Real(2) * len);
  return clip_local({-(diff / len), dist, PlaneSource::bisector(other.id)});
}

template <typename Real>
ClipOutcome ConvexCell<Real>::clip_local(const HalfSpace<Real>& plane) {
  last_touched_ = false;
  if (triplets_.empty()) return ClipOutcome::unchanged;

  // (1) classify: move vertices strictly outside the band to the tail.
  std::size_t keep_end = triplets_.size();
  for (std::size_t i = 0; i < keep_end;) {
    const Real e = plane.evaluate(positions_[i]);
    if (e < eps_plane_) last_touched_ = true;
    if (e < -eps_plane_) {
      --keep_end;
      std::swap(triplets_[i], triplets_[keep_end]);
      std::swap(positions_[i], positions_[keep_end]);
    } else {
      ++i;
    }
  }
  if (keep_end == triplets_.size()) return ClipOutcome::unchanged;
  if (keep_end == 0) {
    triplets_.clear();
    positions_.clear();
    refresh_bounds();
    return ClipOutcome::emptied;
  }

  // (2) grow the hole one removed vertex at a time. Steps 2 and 3 only
  // reorder the removed range and append, so a failure rolls back to the
  // cell as it was before this clip.
  const std::size_t removed_end = triplets_.size();
  const std::size_t plane_count_before = planes_.size();
  const auto rollback = [&](const char* what) {
    for (std::size_t r = keep_end; r < removed_end; ++r) {
      for (std::uint32_t p : triplets_[r]) boundary_next_[p] = kNone;
    }
    planes_.resize(plane_count_before);
    boundary_next_.resize(plane_count_before);
    triplets_.resize(removed_end);
    positions_.resize(removed_end);
    corrupt(what);
  };

  std::uint32_t first = kNone;
  if (!build_hole_boundary(keep_end, first)) rollback("hole boundary does not close");

  // (3) close the hole with a fan around the new plane.
  const auto new_plane = static_cast<std::uint32_t>(planes_.size());
  planes_.push_back(plane);

  std::size_t boundary_len = 0;
  std::uint32_t a = first;
  do {
    const std::uint32_t b = boundary_next_[a];
    if (b == kNone || ++boundary_len > planes_.size()) rollback("broken boundary cycle");
    Vec3<Real> p;
    if (!intersect_planes(planes_[new_plane], planes_[a], planes_[b], p)) {
      rollback("degenerate plane triple");
    }
    triplets_.push_back({new_plane, a, b});
    positions_.push_back(p);
    a = b;
  } while (a != first);

  // Every plane still linked must lie on the single cycle just walked.
  std::size_t linked = 0;
  for (std::size_t r = keep_end; r < removed_end; ++r) {
    for (std::uint32_t p : triplets_[r]) {
      if (boundary_next_[p] != kNone && boundary_next_[p] != kLinkedSeen) {
        ++linked;
        boundary_next_[p] = kLinkedSeen;
      }
    }
  }
  for (std::size_t r = keep_end; r < removed_end; ++r) {
    for (std::uint32_t p : triplets_[r]) boundary_next_[p] = kNone;
  }
  boundary_next_.push_back(kNone);
  if (linked != boundary_len) {
    boundary_next_.pop_back();
    planes_.pop_back();
    triplets_.resize(removed_end);
    positions_.resize(removed_end);
    corrupt("hole boundary has several cycles");
  }

  triplets_.erase(triplets_.begin() + static_cast<std::ptrdiff_t>(keep_end),
                  triplets_.begin() + static_cast<std::ptrdiff_t>(removed_end));
  positions_.erase(positions_.begin() + static_cast<std::ptrdiff_t>(keep_end),
                   positions_.begin() + static_cast<std::ptrdiff_t>(removed_end));
  refresh_bounds();
  return ClipOutcome::clipped;
}

// Removed vertices occupy [first_removed, size). On success the circular list
// boundary_next_ holds the hole boundary and `first` one of its planes; the
// removed triplets stay in place (reordered) so the caller can unlink them.
template <typename Real>
bool ConvexCell<Real>::build_hole_boundary(std::size_t first_removed, std::uint32_t& first) {
  auto& next = boundary_next_;
  std::size_t remaining = triplets_.size() - first_removed;
  std::size_t t = first_removed;
  std::size_t misses = 0;
  first = kNone;

  while (remaining > 0) {
    const std::size_t range_end = first_removed + remaining;
    const Triplet tri = triplets_[t];
    bool shared[3];
    bool on_boundary[3];
    for (int e = 0; e < 3; ++e) {
      shared[e] = next[tri[(e + 1) % 3]] == tri[e];
      on_boundary[e] = next[tri[e]] != kNone;
    }

    bool accept = true;
    if (first == kNone) {
      for (int e = 0; e < 3; ++e) next[tri[e]] = tri[(e + 1) % 3];
      first = tri[0];
    } else {
      if (shared[0] && shared[1] && shared[2]) return false;
      if (!shared[0] && !shared[1] && !shared[2]) accept = false;
      for (int e = 0; e < 3 && accept; ++e) {
        // The vertex between two unshared edges is already on the boundary:
        // accepting would pinch the hole.
        if (!shared[e] && !shared[(e + 1) % 3] && on_boundary[(e + 1) % 3]) accept = false;
      }
      if (accept) {
        for (int e = 0; e < 3; ++e) {
          if (!shared[e]) next[tri[e]] = tri[(e + 1) % 3];
        }
        for (int e = 0; e < 3; ++e) {
          if (shared[e] && shared[(e + 1) % 3]) {
            const std::uint32_t inner = tri[(e + 1) % 3];
            if (first == inner) first = next[inner];
            next[inner] = kNone;
          }
        }
      }
    }

    if (accept) {
      std::swap(triplets_[t], triplets_[range_end - 1]);
      std::swap(positions_[t], positions_[range_end - 1]);
      --remaining;
      t = first_removed;
      misses = 0;
    } else {
      if (++misses > remaining) return false;
      if (++t == range_end) t = first_removed;
    }
  }
  return first != kNone;
}

template <typename Real>
void ConvexCell<Real>::refresh_bounds() {
  aabb_ = Aabb<Real>{};
  for (const auto& p : positions_) aabb_.expand(p);
  if (positions_.empty()) {
    corner_dist_.fill(Real(0));
    return;
  }
  for (int k = 0; k < 8; ++k) corner_dist_[k] = norm(aabb_.corner(k));
}

template <typename Real>
std::size_t ConvexCell<Real>::live_plane_count() const {
  std::vector<char> used(planes_.size(), 0);
  for (const auto& t : triplets_) {
    for (std::uint32_t p : t) used[p] = 1;
  }
  return static_cast<std::size_t>(std::count(used.begin(), used.end(), 1));
}

template <typename Real>
void ConvexCell<Real>::compact() {
  std::vector<std::uint32_t> remap(planes_.size(), kNone);
  for (const auto& t : triplets_) {
    for (std::uint32_t p : t) remap[p] = 0;
  }
  std::uint32_t next_index = 0;
  for (std::size_t p = 0; p < planes_.size(); ++p) {
    if (remap[p] == kNone) continue;
    remap[p] = next_index;
    planes_[next_index++] = planes_[p];
  }
  if (next_index == planes_.size()) return;
  planes_.resize(next_index);
  for (auto& t : triplets_) {
    for (auto& p : t) p = remap[p];
  }
  boundary_next_.assign(planes_.size(), kNone);
}

template <typename Real>
void ConvexCell<Real>::maybe_compact() {
  const auto over = [this] {
    return static_cast<double>(planes_.size()) >=
           compaction_threshold * static_cast<double>(capacity_);
  };
  if (!over()) return;
  compact();
  while (over()) capacity_ *= 2;
}

template <typename Real>
Real ConvexCell<Real>::directional_radius(const Aabb<Real>& world_target) const {
  bool allow_pos[3];
  bool allow_neg[3];
  for (int a = 0; a < 3; ++a) {
    allow_pos[a] = world_target.max_corner[a] > site_.position[a];
    allow_neg[a] = world_target.min_corner[a] < site_.position[a] || !allow_pos[a];
  }
  Real r = 0;
  for (int k = 0; k < 8; ++k) {
    bool ok = true;
    for (int a = 0; a < 3 && ok; ++a) ok = (k >> a & 1) ? allow_pos[a] : allow_neg[a];
    if (ok) r = std::max(r, corner_dist_[k]);
  }
  return r;
}

template <typename Real>
Real ConvexCell<Real>::isotropic_radius() const {
  return *std::max_element(corner_dist_.begin(), corner_dist_.end());
}

template <typename Real>
bool ConvexCell<Real>::site_culled(const WeightedSite<Real>& candidate) const {
  const Vec3<Real> diff = candidate.position - site_.position;
  const Real len_sq = squared_norm(diff);
  if (!(len_sq > Real(0))) return false;
  const Real dist = (len_sq + (site_.weight - candidate.weight)) / (Real(2) * std::sqrt(len_sq));
  const int octant = (diff.x > 0 ? 1 : 0) | (diff.y > 0 ? 2 : 0) | (diff.z > 0 ? 4 : 0);
  return dist > corner_dist_[octant];
}

template <typename Real>
bool ConvexCell<Real>::site_culled_isotropic(const WeightedSite<Real>& candidate) const {
  const Vec3<Real> diff = candidate.position - site_.position;
  const Real len_sq = squared_norm(diff);
  if (!(len_sq > Real(0))) return false;
  const Real dist = (len_sq + (site_.weight - candidate.weight)) / (Real(2) * std::sqrt(len_sq));
  return dist > isotropic_radius();
}

template <typename Real>
std::vector<CellFace<Real>> ConvexCell<Real>::faces() const {
  struct Corner {
    std::uint32_t a, b, vertex;
  };
  // Bucket the rotated triplets by plane: (p, a, b) means that walking around
  // p, the vertex sits between neighbours a and b.
  std::vector<std::uint32_t> start(planes_.size() + 1, 0);
  for (const auto& t : triplets_) {
    for (std::uint32_t p : t) ++start[p + 1];
  }
  std::partial_sum(start.begin(), start.end(), start.begin());
  std::vector<Corner> corners(start.back());
  std::vector<std::uint32_t> fill(start.begin(), start.end() - 1);
  for (std::size_t v = 0; v < triplets_.size(); ++v) {
    const Triplet& t = triplets_[v];
    for (int r = 0; r < 3; ++r) {
      corners[fill[t[r]]++] = {t[(r + 1) % 3], t[(r + 2) % 3], static_cast<std::uint32_t>(v)};
    }
  }

  std::vector<CellFace<Real>> out;
  for (std::size_t p = 0; p < planes_.size(); ++p) {
    const std::uint32_t lo = start[p];
    const std::uint32_t hi = start[p + 1];
    if (lo == hi) continue;
    CellFace<Real> face{planes_[p].source, {}};
    std::uint32_t cur = lo;
    for (std::uint32_t step = 0; step < hi - lo; ++step) {
      face.loop.push_back(positions_[corners[cur].vertex]);
      const std::uint32_t want = corners[cur].b;
      std::uint32_t nxt = hi;
      for (std::uint32_t c = lo; c < hi; ++c) {
        if (corners[c].a == want) {
          nxt = c;
          break;
        }
      }
      if (nxt == hi || nxt == lo) break;
      cur = nxt;
    }
    // Outward is -normal.
    if (dot(newell_normal(face.loop), planes_[p].normal) > 0) {
      std::reverse(face.loop.begin(), face.loop.end());
    }
    out.push_back(std::move(face));
  }
  return out;
}

template <typename Real>
bool ConvexCell<Real>::face_is_proper(const CellFace<Real>& face, Real eps_plane) {
  if (face.loop.size() < 3) return false;
  Real perimeter = 0;
  for (std::size_t i = 0; i < face.loop.size(); ++i) {
    perimeter += norm(face.loop[(i + 1) % face.loop.size()] - face.loop[i]);
  }
  if (!(perimeter > 0)) return false;
  const Real area = norm(newell_normal(face.loop)) / 2;
  return Real(2) * area / perimeter > eps_plane;
}

template <typename Real>
std::vector<CellFace<Real>> ConvexCell<Real>::proper_faces_world() const {
  std::vector<CellFace<Real>> out;
  for (auto& face : faces()) {
    if (!face_is_proper(face, face_eps_)) continue;
    for (auto& v : face.loop) v = v + site_.position;
    out.push_back(std::move(face));
  }
  return out;
}

template <typename Real>
std::vector<std::uint32_t> ConvexCell<Real>::neighbor_ids() const {
  std::vector<std::uint32_t> ids;
  for (const auto& face : faces()) {
    if (face.source.is_bisector() && face_is_proper(face, face_eps_)) {
      ids.push_back(face.source.index);
    }
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

template <typename Real>
bool ConvexCell<Real>::touches_boundary() const {
  for (const auto& face : faces()) {
    if (!face.source.is_bisector() && face_is_proper(face, face_eps_)) return true;
  }
  return false;
}

template <typename Real>
Real ConvexCell<Real>::volume() const {
  Real v = 0;
  for (const auto& face : faces()) {
    if (face.loop.size() < 3) continue;
    v += dot(face.loop.front(), newell_normal(face.loop)) / 2;
  }
  return v / 3;
}

template <typename Real>
std::optional<ConvexCell<Real>> canonical_cell(const WeightedSite<Real>& site, const Aabb<Real>& box,
                                               std::span<const WeightedSite<Real>> candidates,
                                               Real eps_canonical, Real face_eps) {
  struct Keyed {
    Real offset;
    std::uint32_t slot;
  };
  std::vector<Keyed> order;
  order.reserve(candidates.size());
  for (std::uint32_t k = 0; k < candidates.size(); ++k) {
    const Vec3<Real> diff = candidates[k].position - site.position;
    const Real len_sq = squared_norm(diff);
    order.push_back({(len_sq + (site.weight - candidates[k].weight)) / (Real(2) * std::sqrt(len_sq)), k});
  }
  std::sort(order.begin(), order.end(), [&](const Keyed& a, const Keyed& b) {
    return a.offset < b.offset ||
           (a.offset == b.offset && candidates[a.slot].id < candidates[b.slot].id);
  });

  for (Real eps = eps_canonical;; eps = std::min(eps * Real(100), face_eps)) {
    ConvexCell<Real> cell = ConvexCell<Real>::init(site, box, eps, face_eps);
    try {
      for (const Keyed& k : order) {
        if (cell.clip_bisector(candidates[k.slot]) == ClipOutcome::emptied) break;
        cell.maybe_compact();
      }
      return cell;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::topology_corruption) throw;
      if (!(eps < face_eps)) return std::nullopt;
    }
  }
}

template class ConvexCell<float>;
template class ConvexCell<double>;
template std::optional<ConvexCell<float>> canonical_cell(const WeightedSite<float>&, const Aabb<float>&,
                                                         std::span<const WeightedSite<float>>, float,
                                                         float);
template std::optional<ConvexCell<double>> canonical_cell(const WeightedSite<double>&,
                                                          const Aabb<double>&,
                                                          std::span<const WeightedSite<double>>,
                                                          double, double);

}  // namespace pwrgram
