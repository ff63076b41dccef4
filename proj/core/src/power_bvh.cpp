#include "pwrgram/power_bvh.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>
#include <utility>

namespace pwrgram {

const char* to_string(CullingMode mode) {
  return mode == CullingMode::directional ? "directional" : "isotropic";
}

const char* to_string(TraversalMode mode) {
  return mode == TraversalMode::best_first ? "best_first" : "depth_first";
}

template <typename Real>
PowerBvh<Real> PowerBvh<Real>::build(std::span<const WeightedSite<Real>> sites,
                                     std::uint32_t leaf_size) {
  if (sites.empty()) throw Error(ErrorCode::empty_input, "cannot build a BVH over zero sites");
  if (leaf_size == 0) throw Error(ErrorCode::invalid_argument, "leaf_size must be >= 1");

  PowerBvh bvh;
  bvh.leaf_size_ = leaf_size;
  const auto n = static_cast<std::uint32_t>(sites.size());
  bvh.prim_order_.resize(n);
  std::iota(bvh.prim_order_.begin(), bvh.prim_order_.end(), 0u);
  bvh.nodes_.reserve(2 * (n / leaf_size + 1));
  bvh.nodes_.emplace_back();

  struct Task {
    std::uint32_t node, begin, end;
  };
  std::vector<Task> tasks{{0, 0, n}};
  auto& order = bvh.prim_order_;
  while (!tasks.empty()) {
    const Task task = tasks.back();
    tasks.pop_back();

    Aabb<Real> bounds;
    Real max_weight = std::numeric_limits<Real>::lowest();
    for (std::uint32_t i = task.begin; i < task.end; ++i) {
      bounds.expand(sites[order[i]].position);
      max_weight = std::max(max_weight, sites[order[i]].weight);
    }
    BvhNode<Real>& node = bvh.nodes_[task.node];
    node.bounds = bounds;
    node.max_weight = max_weight;

    const std::uint32_t count = task.end - task.begin;
    if (count <= leaf_size) {
      node.first = task.begin;
      node.count = count;
      continue;
    }
    const int axis = bounds.longest_axis();
    const std::uint32_t mid = task.begin + count / 2;
    std::nth_element(order.begin() + task.begin, order.begin() + mid, order.begin() + task.end,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const Real ca = sites[a].position[axis];
                       const Real cb = sites[b].position[axis];
                       return ca < cb || (ca == cb && a < b);
                     });
    const auto child = static_cast<std::uint32_t>(bvh.nodes_.size());
    node.first = child;
    node.count = 0;
    bvh.nodes_.emplace_back();
    bvh.nodes_.emplace_back();
    tasks.push_back({child + 1, mid, task.end});
    tasks.push_back({child, task.begin, mid});
  }

  bvh.ordered_.reserve(n);
  for (std::uint32_t id : order) bvh.ordered_.push_back(sites[id]);
  return bvh;
}

template <typename Real>
std::vector<std::uint32_t> PowerBvh<Real>::knn(Vec3<Real> point, std::size_t k,
                                               std::uint32_t exclude) const {
  std::vector<std::uint32_t> out;
  if (k == 0 || nodes_.empty()) return out;

  using Hit = std::pair<Real, std::uint32_t>;  // (squared distance, id)
  std::priority_queue<Hit> best;                // max-heap: worst on top
  using NodeKey = std::pair<Real, std::uint32_t>;
  std::priority_queue<NodeKey, std::vector<NodeKey>, std::greater<>> open;
  open.push({aabb_min_squared_distance(point, nodes_[0].bounds), 0});

  while (!open.empty()) {
    const auto [node_dist, index] = open.top();
    open.pop();
    if (best.size() == k && node_dist > best.top().first) break;
    const BvhNode<Real>& node = nodes_[index];
    if (node.is_leaf()) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        const WeightedSite<Real>& s = ordered_[i];
        if (s.id == exclude) continue;
        const Hit hit{squared_norm(s.position - point), s.id};
        if (best.size() < k) {
          best.push(hit);
        } else if (hit < best.top()) {
          best.pop();
          best.push(hit);
        }
      }
    } else {
      for (std::uint32_t c : {node.left(), node.right()}) {
        const Real d = aabb_min_squared_distance(point, nodes_[c].bounds);
        if (best.size() < k || d <= best.top().first) open.push({d, c});
      }
    }
  }

  out.resize(best.size());
  for (std::size_t i = out.size(); i-- > 0;) {
    out[i] = best.top().second;
    best.pop();
  }
  return out;
}

template <typename Real>
std::vector<std::uint32_t> PowerBvh<Real>::within(Vec3<Real> point, Real radius_sq) const {
  std::vector<std::uint32_t> out;
  std::vector<std::uint32_t> stack{0};
  while (!stack.empty()) {
    const BvhNode<Real>& node = nodes_[stack.back()];
    stack.pop_back();
    if (aabb_min_squared_distance(point, node.bounds) > radius_sq) continue;
    if (node.is_leaf()) {
      for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
        if (squared_norm(ordered_[i].position - point) <= radius_sq) out.push_back(ordered_[i].id);
      }
    } else {
      stack.push_back(node.left());
      stack.push_back(node.right());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

template <typename Real>
std::vector<std::uint32_t> knn_warm_start(const PowerBvh<Real>& bvh,
                                          std::span<const WeightedSite<Real>> sites,
                                          std::uint32_t q, std::size_t k) {
  return bvh.knn(sites[q].position, k, q);
}

template <typename Real>
Real node_lower_bound(const WeightedSite<Real>& site, const Aabb<Real>& bounds, Real max_weight) {
  const Real d = aabb_min_distance(site.position, bounds);
  if (!(d > Real(0))) return -std::numeric_limits<Real>::infinity();
  const Real weight_term = site.weight < max_weight ? (site.weight - max_weight) / (Real(2) * d)
                                                    : Real(0);
  return d / Real(2) + weight_term;
}

template <typename Real>
bool node_culled(const ConvexCell<Real>& cell, const Aabb<Real>& bounds, Real node_max_weight,
                 CullingMode culling) {
  const Real lb = node_lower_bound(cell.site(), bounds, node_max_weight);
  const Real r = culling == CullingMode::directional ? cell.directional_radius(bounds)
                                                     : cell.isotropic_radius();
  return lb > r;
}

template <typename Real>
TraversalStats best_first_clip(const PowerBvh<Real>& bvh, ConvexCell<Real>& cell,
                               const TraversalOptions& options) {
  TraversalStats stats;
  if (cell.empty()) return stats;

  const auto& nodes = bvh.nodes();
  const auto& sites = bvh.ordered_sites();
  const WeightedSite<Real>& self = cell.site();
  const bool directional = options.culling == CullingMode::directional;
  const bool best_first = options.traversal == TraversalMode::best_first;

  const auto radius = [&](const Aabb<Real>& bounds) {
    return directional ? cell.directional_radius(bounds) : cell.isotropic_radius();
  };

  struct Entry {
    std::uint32_t node;
    Real key;  // lower bound of the bisector distance, fixed per node
  };
  std::vector<Entry> stack;
  stack.reserve(64);

  struct Member {
    Real dist_sq;
    std::uint32_t slot;
  };
  std::vector<Member> members;
  members.reserve(bvh.leaf_size());

  // Returns false once the cell is empty.
  const auto process_leaf = [&](const BvhNode<Real>& leaf) {
    members.clear();
    for (std::uint32_t i = leaf.first; i < leaf.first + leaf.count; ++i) {
      members.push_back({squared_norm(sites[i].position - self.position), i});
    }
    std::sort(members.begin(), members.end(), [&](const Member& a, const Member& b) {
      return a.dist_sq < b.dist_sq || (a.dist_sq == b.dist_sq && sites[a.slot].id < sites[b.slot].id);
    });
    for (const Member& m : members) {
      const WeightedSite<Real>& other = sites[m.slot];
      if (other.id == self.id) continue;
      if (!options.skip.empty() && options.skip[other.id]) continue;
      if (directional ? cell.site_culled(other) : cell.site_culled_isotropic(other)) continue;
      ++stats.clip_calls;
      const ClipOutcome outcome = cell.clip_bisector(other);
      if (options.touched && cell.last_clip_touched()) options.touched->push_back(other.id);
      if (outcome == ClipOutcome::unchanged) {
        ++stats.clip_unchanged;
      } else if (outcome == ClipOutcome::emptied) {
        return false;
      } else {
        cell.maybe_compact();
      }
    }
    return true;
  };

  std::uint32_t node = 0;
  while (true) {
    bool reached_leaf = true;
    while (!nodes[node].is_leaf()) {
      ++stats.nodes_visited;
      const std::uint32_t c0 = nodes[node].left();
      const std::uint32_t c1 = nodes[node].right();
      const Real lb0 = node_lower_bound(self, nodes[c0].bounds, nodes[c0].max_weight);
      const Real lb1 = node_lower_bound(self, nodes[c1].bounds, nodes[c1].max_weight);
      const Real delta0 = lb0 - radius(nodes[c0].bounds);
      const Real delta1 = lb1 - radius(nodes[c1].bounds);
      if (std::min(delta0, delta1) > 0) {
        reached_leaf = false;
        break;
      }
      bool take_first;
      if (best_first) {
        take_first = delta0 < delta1;
      } else {
        // Nearer child by lower bound, among the unculled ones.
        take_first = delta0 <= 0 && (delta1 > 0 || lb0 <= lb1);
      }
      const std::uint32_t near = take_first ? c0 : c1;
      const std::uint32_t far = take_first ? c1 : c0;
      const Real far_delta = take_first ? delta1 : delta0;
      const Real far_key = take_first ? lb1 : lb0;
      if (far_delta <= 0) {
        stack.push_back({far, far_key});
        stats.stack_high_water = std::max<std::uint64_t>(stats.stack_high_water, stack.size());
      }
      node = near;
    }
    if (reached_leaf) {
      ++stats.nodes_visited;
      ++stats.leaves_visited;
      if (!process_leaf(nodes[node])) return stats;
    }

    bool resumed = false;
    while (!stack.empty()) {
      std::size_t pick = stack.size() - 1;
      if (best_first) {
        for (std::size_t i = 0; i + 1 < stack.size(); ++i) {
          if (stack[i].key < stack[pick].key) pick = i;
        }
      }
      const Entry entry = stack[pick];
      stack[pick] = stack.back();
      stack.pop_back();
      if (entry.key - radius(nodes[entry.node].bounds) <= 0) {
        node = entry.node;
        resumed = true;
        break;
      }
    }
    if (!resumed) return stats;
  }
}

template class PowerBvh<float>;
template class PowerBvh<double>;

#define PWRGRAM_INSTANTIATE(Real)                                                                 \
  template std::vector<std::uint32_t> knn_warm_start(const PowerBvh<Real>&,                       \
                                                     std::span<const WeightedSite<Real>>,         \
                                                     std::uint32_t, std::size_t);                 \
  template Real node_lower_bound(const WeightedSite<Real>&, const Aabb<Real>&, Real);             \
  template bool node_culled(const ConvexCell<Real>&, const Aabb<Real>&, Real, CullingMode);       \
  template TraversalStats best_first_clip(const PowerBvh<Real>&, ConvexCell<Real>&,               \
                                          const TraversalOptions&);

PWRGRAM_INSTANTIATE(float)
PWRGRAM_INSTANTIATE(double)

#undef PWRGRAM_INSTANTIATE

}  // namespace pwrgram
