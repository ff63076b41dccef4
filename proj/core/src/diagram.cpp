#include "pwrgram/diagram.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <limits>
#include <string>
#include <thread>

#include "parallel.hpp"

namespace pwrgram {

namespace {

constexpr int kMaxTolerancePromotions = 2;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <typename Real>
CellGeometry to_geometry(const ConvexCell<Real>& cell) {
  CellGeometry geometry;
  for (auto& face : cell.proper_faces_world()) {
    CellFace<double> out{face.source, {}};
    out.loop.reserve(face.loop.size());
    for (const auto& v : face.loop) out.loop.push_back(v.template cast<double>());
    geometry.faces.push_back(std::move(out));
  }
  return geometry;
}

template <typename Real>
void run_cell(const DiagramContext<Real>& ctx, ConvexCell<Real>& cell, const BuildConfig& config,
              TraversalStats& stats, std::vector<std::uint32_t>& touched) {
  const WeightedSite<Real>& site = ctx.sites[cell.site().id];
  const bool directional = config.culling == CullingMode::directional;
  if (config.warm_start) {
    for (std::uint32_t j : ctx.bvh.knn(site.position, config.warm_start_k, site.id)) {
      if (ctx.dominated[j]) continue;
      const WeightedSite<Real>& other = ctx.sites[j];
      if (directional ? cell.site_culled(other) : cell.site_culled_isotropic(other)) continue;
      ++stats.clip_calls;
      const ClipOutcome outcome = cell.clip_bisector(other);
      if (cell.last_clip_touched()) touched.push_back(j);
      if (outcome == ClipOutcome::unchanged) ++stats.clip_unchanged;
      if (outcome == ClipOutcome::emptied) return;
      cell.maybe_compact();
    }
  }
  TraversalOptions options;
  options.culling = config.culling;
  options.traversal = config.traversal;
  options.skip = ctx.dominated;
  options.touched = &touched;
  stats += best_first_clip(ctx.bvh, cell, options);
}

}  // namespace

void BuildConfig::validate() const {
  if (leaf_size < 1) throw Error(ErrorCode::invalid_argument, "leaf_size must be >= 1");
  if (warm_start_k < 1) throw Error(ErrorCode::invalid_argument, "warm_start_k must be >= 1");
  if (!(box_margin >= 0) || !std::isfinite(box_margin)) {
    throw Error(ErrorCode::invalid_argument, "box_margin must be a finite value >= 0");
  }
}

Aabbd global_box(std::span<const Site> sites, double margin) {
  if (sites.empty()) throw Error(ErrorCode::empty_input, "global box of zero sites");
  Aabbd box;
  for (const Site& s : sites) box.expand(s.position);
  const double diagonal = box.diagonal();
  const double pad = margin * diagonal;
  const double fallback = std::max(margin, 0.01) * std::max(diagonal, 1.0);
  for (int a = 0; a < 3; ++a) {
    double p = pad;
    if (box.max_corner[a] - box.min_corner[a] + 2 * p <= 0) p = fallback;
    box.min_corner[a] -= p;
    box.max_corner[a] += p;
  }
  return box;
}

Aabbd construction_box(std::span<const Site> sites, double margin) {
  Aabbd box = global_box(sites, margin);
  if (!(margin > 0)) {
    const double grow = 1e-6 * std::max(box.diagonal(), 1.0);
    box.min_corner = box.min_corner - Vec3d{grow, grow, grow};
    box.max_corner = box.max_corner + Vec3d{grow, grow, grow};
  }
  return box;
}

void check_sites(std::span<const Site> sites) {
  if (sites.empty()) throw Error(ErrorCode::empty_input, "no sites");
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (!is_finite(sites[i].position) || !std::isfinite(sites[i].weight)) {
      throw Error(ErrorCode::non_finite_input, "site " + std::to_string(i) + " is not finite", i);
    }
  }
}

unsigned resolve_thread_count(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

template <typename Real>
DiagramContext<Real> DiagramContext<Real>::prepare(std::span<const Site> sites,
                                                   const BuildConfig& config) {
  check_sites(sites);
  config.validate();

  DiagramContext ctx;
  const Aabbd box = construction_box(sites, config.box_margin);
  ctx.box = narrow_box<Real>(box);
  ctx.tolerances = Tolerances<Real>::for_scene(box.diagonal());

  ctx.sites.reserve(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    WeightedSite<Real> s = sites[i].template cast<Real>();
    s.id = static_cast<std::uint32_t>(i);
    ctx.sites.push_back(s);
  }
  ctx.bvh = PowerBvh<Real>::build(ctx.sites, config.leaf_size);

  ctx.dominated.assign(sites.size(), 0);
  const unsigned threads = resolve_thread_count(config.thread_count);
  detail::parallel_for(sites.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const WeightedSite<Real>& s = ctx.sites[i];
      for (std::uint32_t j : ctx.bvh.within(s.position, ctx.tolerances.coincident_sq)) {
        if (j != i && dominates(ctx.sites[j], s)) {
          ctx.dominated[i] = 1;
          break;
        }
      }
    }
  });
  return ctx;
}

template <typename Real>
std::optional<ConvexCell<Real>> finalize_cell(std::span<const WeightedSite<Real>> sites,
                                              std::uint32_t id, const Aabb<Real>& box,
                                              Real eps_canonical, Real eps_plane,
                                              std::vector<std::uint32_t>& touched) {
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  std::vector<WeightedSite<Real>> candidates;
  candidates.reserve(touched.size());
  for (std::uint32_t j : touched) candidates.push_back(sites[j]);
  return canonical_cell(sites[id], box, std::span<const WeightedSite<Real>>(candidates),
                        std::min(eps_canonical, eps_plane), eps_plane);
}

template <typename Real>
void extract_cell(const ConvexCell<Real>& cell, bool keep_geometry, CellResult& result) {
  if (cell.empty()) {
    result.flags |= cell_flag::empty;
    return;
  }
  for (const auto& face : cell.faces()) {
    if (!ConvexCell<Real>::face_is_proper(face, cell.face_eps())) continue;
    if (face.source.is_bisector()) {
      result.neighbors.push_back(face.source.index);
    } else {
      result.flags |= cell_flag::boundary;
    }
  }
  std::sort(result.neighbors.begin(), result.neighbors.end());
  result.neighbors.erase(std::unique(result.neighbors.begin(), result.neighbors.end()),
                         result.neighbors.end());
  if (keep_geometry) result.geometry = to_geometry(cell);
}

template <typename Real>
CellResult build_cell(const DiagramContext<Real>& ctx, std::uint32_t id,
                      const BuildConfig& config) {
  CellResult result;
  if (ctx.dominated[id]) {
    result.flags = cell_flag::empty;
    return result;
  }

  Real eps = ctx.tolerances.plane;
  std::vector<std::uint32_t> touched;
  for (int attempt = 0;; ++attempt) {
    ConvexCell<Real> cell = ConvexCell<Real>::init(ctx.sites[id], ctx.box, eps);
    TraversalStats stats;
    touched.clear();
    try {
      run_cell(ctx, cell, config, stats, touched);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::topology_corruption) throw;
      result.retried = true;
      if (attempt < kMaxTolerancePromotions) {
        eps *= Real(10);
        continue;
      }
      // clip rolled back, so the cell is the last consistent state.
      result.flags |= cell_flag::degraded;
    }
    result.stats = stats;
    if (!cell.empty() && !(result.flags & cell_flag::degraded)) {
      if (auto canonical = finalize_cell(std::span<const WeightedSite<Real>>(ctx.sites), id, ctx.box, ctx.tolerances.canonical, eps, touched)) {
        cell = std::move(*canonical);
      }
    }
    extract_cell(cell, config.keep_geometry, result);
    return result;
  }
}

PowerDiagram assemble_diagram(std::vector<CellResult>&& cells, bool keep_geometry) {
  PowerDiagram d;
  d.site_count = cells.size();
  d.offsets.assign(cells.size() + 1, 0);
  d.flags.resize(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    d.offsets[i + 1] = d.offsets[i] + cells[i].neighbors.size();
    d.flags[i] = cells[i].flags;
  }
  d.neighbors.reserve(d.offsets.back());
  if (keep_geometry) d.geometry.emplace(cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    CellResult& c = cells[i];
    d.neighbors.insert(d.neighbors.end(), c.neighbors.begin(), c.neighbors.end());
    d.stats.traversal += c.stats;
    if (c.flags & cell_flag::degraded) ++d.stats.degraded_cells;
    if (c.retried) ++d.stats.retried_cells;
    if (keep_geometry && c.geometry) (*d.geometry)[i] = std::move(*c.geometry);
  }
  return d;
}

namespace {

template <typename Real>
PowerDiagram build_with(std::span<const Site> sites, const BuildConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  const DiagramContext<Real> ctx = DiagramContext<Real>::prepare(sites, config);
  const double index_seconds = seconds_since(start);

  const auto cells_start = std::chrono::steady_clock::now();
  std::vector<CellResult> cells(sites.size());
  const auto& order = ctx.bvh.prim_order();
  const unsigned threads = resolve_thread_count(config.thread_count);
  detail::parallel_for(order.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t slot = begin; slot < end; ++slot) {
      if (config.deadline && std::chrono::steady_clock::now() > *config.deadline) {
        throw Error(ErrorCode::timeout, "build exceeded its deadline");
      }
      const std::uint32_t id = order[slot];
      cells[id] = build_cell(ctx, id, config);
    }
  });
  const double cells_seconds = seconds_since(cells_start);

  PowerDiagram d = assemble_diagram(std::move(cells), config.keep_geometry);
  d.stats.index_seconds = index_seconds;
  d.stats.cells_seconds = cells_seconds;
  d.stats.total_seconds = seconds_since(start);
  return d;
}

}  // namespace

PowerDiagram build_diagram(std::span<const Site> sites, const BuildConfig& config) {
  if (config.precision == PrecisionMode::single) return build_with<float>(sites, config);
  return build_with<double>(sites, config);
}

double empty_ratio(const PowerDiagram& d) {
  if (d.site_count == 0) return 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < d.site_count; ++i) {
    if (d.is_empty(i) || d.offsets[i + 1] == d.offsets[i]) ++count;
  }
  return static_cast<double>(count) / static_cast<double>(d.site_count);
}

std::size_t asymmetric_pairs(const PowerDiagram& d) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < d.site_count; ++i) {
    for (std::uint32_t j : d.neighbors_of(i)) {
      const auto row = d.neighbors_of(j);
      if (!std::binary_search(row.begin(), row.end(), static_cast<std::uint32_t>(i))) ++count;
    }
  }
  return count;
}

template struct DiagramContext<float>;
template struct DiagramContext<double>;
template std::optional<ConvexCell<float>> finalize_cell(std::span<const WeightedSite<float>>,
                                                        std::uint32_t, const Aabb<float>&, float,
                                                        float, std::vector<std::uint32_t>&);
template std::optional<ConvexCell<double>> finalize_cell(std::span<const WeightedSite<double>>,
                                                         std::uint32_t, const Aabb<double>&, double,
                                                         double, std::vector<std::uint32_t>&);
template void extract_cell(const ConvexCell<float>&, bool, CellResult&);
template void extract_cell(const ConvexCell<double>&, bool, CellResult&);
template CellResult build_cell(const DiagramContext<float>&, std::uint32_t, const BuildConfig&);
template CellResult build_cell(const DiagramContext<double>&, std::uint32_t, const BuildConfig&);

}  // namespace pwrgram
