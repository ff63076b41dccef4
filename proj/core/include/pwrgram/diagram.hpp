#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "pwrgram/convex_cell.hpp"
#include "pwrgram/geometry.hpp"
#include "pwrgram/power_bvh.hpp"

namespace pwrgram {

struct BuildConfig {
  PrecisionMode precision = PrecisionMode::double_;
  std::uint32_t leaf_size = PowerBvh<double>::default_leaf_size;
  bool warm_start = false;
  std::uint32_t warm_start_k = 8;
  double box_margin = 0.01;
  CullingMode culling = CullingMode::directional;
  TraversalMode traversal = TraversalMode::best_first;
  bool keep_geometry = false;
  unsigned thread_count = 0;  // 0 = hardware concurrency
  // Cooperative cancellation, checked between cells.
  std::optional<std::chrono::steady_clock::time_point> deadline;

  void validate() const;
};

namespace cell_flag {
inline constexpr std::uint8_t empty = 1u << 0;
inline constexpr std::uint8_t boundary = 1u << 1;
inline constexpr std::uint8_t degraded = 1u << 2;
}  // namespace cell_flag

struct CellGeometry {
  std::vector<CellFace<double>> faces;
};

struct BuildStats {
  TraversalStats traversal;
  double index_seconds = 0;  // BVH and duplicate detection
  double cells_seconds = 0;
  double total_seconds = 0;
  std::uint64_t degraded_cells = 0;
  std::uint64_t retried_cells = 0;
};

struct PowerDiagram {
  std::size_t site_count = 0;
  std::vector<std::uint64_t> offsets{0};  // CSR, length site_count + 1
  std::vector<std::uint32_t> neighbors;   // ascending within each row
  std::vector<std::uint8_t> flags;
  std::optional<std::vector<CellGeometry>> geometry;
  BuildStats stats;

  std::span<const std::uint32_t> neighbors_of(std::size_t i) const {
    return {neighbors.data() + offsets[i], static_cast<std::size_t>(offsets[i + 1] - offsets[i])};
  }
  bool is_empty(std::size_t i) const { return flags[i] & cell_flag::empty; }
  bool same_adjacency(const PowerDiagram& other) const {
    return site_count == other.site_count && offsets == other.offsets &&
           neighbors == other.neighbors;
  }
};

// Site AABB grown by margin * diagonal on every axis. Axes that would still
// have zero extent are grown by max(margin, 0.01) * max(diagonal, 1).
Aabbd global_box(std::span<const Site> sites, double margin = 0.01);

// Box every cell starts from: global_box, nudged outward when the margin is
// zero so that it strictly contains every site.
Aabbd construction_box(std::span<const Site> sites, double margin);

// Narrows a box to Real, rounding outward.
template <typename Real>
Aabb<Real> narrow_box(const Aabbd& box) {
  Aabb<Real> out = box.cast<Real>();
  for (int a = 0; a < 3; ++a) {
    out.min_corner[a] = std::nextafter(out.min_corner[a], -std::numeric_limits<Real>::infinity());
    out.max_corner[a] = std::nextafter(out.max_corner[a], std::numeric_limits<Real>::infinity());
  }
  return out;
}

// Throws NonFiniteInput naming the first offending site.
void check_sites(std::span<const Site> sites);

// Result of building one cell.
struct CellResult {
  std::vector<std::uint32_t> neighbors;
  std::uint8_t flags = 0;
  std::optional<CellGeometry> geometry;
  TraversalStats stats;
  bool retried = false;
};

// Shared, immutable state for building cells of one site set.
template <typename Real>
struct DiagramContext {
  std::vector<WeightedSite<Real>> sites;
  Aabb<Real> box;
  Tolerances<Real> tolerances;
  PowerBvh<Real> bvh;
  // 1 for sites whose cell is void because a coincident site dominates them.
  std::vector<std::uint8_t> dominated;

  static DiagramContext prepare(std::span<const Site> sites, const BuildConfig& config);
};

// Rebuilds a finished cell from the ids its traversal cut or touched, in an
// order that depends only on the sites. `touched` is sorted and deduplicated.
template <typename Real>
std::optional<ConvexCell<Real>> finalize_cell(std::span<const WeightedSite<Real>> sites,
                                              std::uint32_t id, const Aabb<Real>& box,
                                              Real eps_canonical, Real eps_plane,
                                              std::vector<std::uint32_t>& touched);

// Fills neighbours, flags and (optionally) geometry from a finished cell.
template <typename Real>
void extract_cell(const ConvexCell<Real>& cell, bool keep_geometry, CellResult& result);

template <typename Real>
CellResult build_cell(const DiagramContext<Real>& context, std::uint32_t id,
                      const BuildConfig& config);

PowerDiagram build_diagram(std::span<const Site> sites, const BuildConfig& config = {});

// Assembles a diagram from per-cell results in id order.
PowerDiagram assemble_diagram(std::vector<CellResult>&& cells, bool keep_geometry);

// Fraction of cells that are empty or have no neighbours.
double empty_ratio(const PowerDiagram& diagram);

// Number of directed entries j in adj(i) with i not in adj(j).
std::size_t asymmetric_pairs(const PowerDiagram& diagram);

// Shared duplicate rule: the heaviest of a coincident group owns it, equal
// weights go to the lowest id.
template <typename Real>
bool dominates(const WeightedSite<Real>& a, const WeightedSite<Real>& b) {
  return a.weight > b.weight || (a.weight == b.weight && a.id < b.id);
}

// `requested`, or the hardware concurrency when it is 0.
unsigned resolve_thread_count(unsigned requested);

extern template struct DiagramContext<float>;
extern template struct DiagramContext<double>;

}  // namespace pwrgram
