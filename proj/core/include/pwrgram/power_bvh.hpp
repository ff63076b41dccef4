#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "pwrgram/convex_cell.hpp"
#include "pwrgram/geometry.hpp"

namespace pwrgram {

enum class CullingMode : std::uint8_t { directional, isotropic };
enum class TraversalMode : std::uint8_t { best_first, depth_first };

const char* to_string(CullingMode mode);
const char* to_string(TraversalMode mode);

struct TraversalStats {
  std::uint64_t nodes_visited = 0;
  std::uint64_t leaves_visited = 0;
  std::uint64_t clip_calls = 0;
  std::uint64_t clip_unchanged = 0;
  std::uint64_t stack_high_water = 0;

  TraversalStats& operator+=(const TraversalStats& o) {
    nodes_visited += o.nodes_visited;
    leaves_visited += o.leaves_visited;
    clip_calls += o.clip_calls;
    clip_unchanged += o.clip_unchanged;
    stack_high_water = std::max(stack_high_water, o.stack_high_water);
    return *this;
  }
  friend bool operator==(const TraversalStats&, const TraversalStats&) = default;
};

template <typename Real>
struct BvhNode {
  Aabb<Real> bounds;
  Real max_weight = 0;
  // Internal: children at `first` and `first + 1`. Leaf: prim_order[first, first + count).
  std::uint32_t first = 0;
  std::uint32_t count = 0;

  bool is_leaf() const { return count > 0; }
  std::uint32_t left() const { return first; }
  std::uint32_t right() const { return first + 1; }
};

// Binary BVH over site positions, each node augmented with the maximum weight
// in its subtree. Immutable after construction; safe for concurrent queries.
template <typename Real>
class PowerBvh {
 public:
  static constexpr std::uint32_t default_leaf_size = 10;

  // Median split over the longest axis; ties broken toward the lower id.
  static PowerBvh build(std::span<const WeightedSite<Real>> sites,
                        std::uint32_t leaf_size = default_leaf_size);

  const std::vector<BvhNode<Real>>& nodes() const { return nodes_; }
  const BvhNode<Real>& root() const { return nodes_.front(); }
  const std::vector<std::uint32_t>& prim_order() const { return prim_order_; }
  // Sites permuted into prim_order, so that leaf members are contiguous.
  const std::vector<WeightedSite<Real>>& ordered_sites() const { return ordered_; }
  std::uint32_t leaf_size() const { return leaf_size_; }
  std::size_t site_count() const { return ordered_.size(); }

  // k nearest sites to `point` by Euclidean distance, nearest first, ties to
  // the lower id. `exclude` is skipped (pass a value >= site_count for none).
  std::vector<std::uint32_t> knn(Vec3<Real> point, std::size_t k,
                                 std::uint32_t exclude) const;
  // Ids of all sites with squared distance to `point` <= radius_sq, ascending.
  std::vector<std::uint32_t> within(Vec3<Real> point, Real radius_sq) const;

 private:
  std::vector<BvhNode<Real>> nodes_;
  std::vector<std::uint32_t> prim_order_;
  std::vector<WeightedSite<Real>> ordered_;
  std::uint32_t leaf_size_ = default_leaf_size;
};

// The k nearest other sites of site q.
template <typename Real>
std::vector<std::uint32_t> knn_warm_start(const PowerBvh<Real>& bvh,
                                          std::span<const WeightedSite<Real>> sites,
                                          std::uint32_t q, std::size_t k = 8);

// Lower bound on the bisector distance from the cell site to any site inside
// `bounds` whose weight is at most `max_weight`. Negative infinity when the
// site lies inside `bounds`.
template <typename Real>
Real node_lower_bound(const WeightedSite<Real>& site, const Aabb<Real>& bounds, Real max_weight);

template <typename Real>
bool node_culled(const ConvexCell<Real>& cell, const Aabb<Real>& bounds, Real node_max_weight,
                 CullingMode culling = CullingMode::directional);

struct TraversalOptions {
  CullingMode culling = CullingMode::directional;
  TraversalMode traversal = TraversalMode::best_first;
  // Optional per-site skip mask (indexed by site id): dominated duplicates.
  std::span<const std::uint8_t> skip;
  // When set, receives the ids of sites whose bisector cut or touched the cell.
  std::vector<std::uint32_t>* touched = nullptr;
};

// Clips `cell` by every site whose bisector can still reach it, walking the
// hierarchy nearest-penetration first. On return the cell is final.
template <typename Real>
TraversalStats best_first_clip(const PowerBvh<Real>& bvh, ConvexCell<Real>& cell,
                               const TraversalOptions& options = {});

extern template class PowerBvh<float>;
extern template class PowerBvh<double>;

}  // namespace pwrgram
