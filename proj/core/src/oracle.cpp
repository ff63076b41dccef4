#include "pwrgram/oracle.hpp"

#include <algorithm>
#include <iterator>
#include <numeric>

#include "parallel.hpp"

namespace pwrgram::oracle {

namespace {

constexpr int kMaxTolerancePromotions = 2;

template <typename Real>
CellResult run(const OracleContext& ctx, std::uint32_t id, bool keep_geometry,
               std::span<const std::uint32_t> order) {
  CellResult result;
  if (ctx.dominated[id]) {
    result.flags = cell_flag::empty;
    return result;
  }
  const WeightedSite<Real> site = ctx.sites[id].template cast<Real>();
  const Aabb<Real> box = narrow_box<Real>(ctx.box);
  const Tolerances<Real> tolerances = Tolerances<Real>::for_scene(ctx.scene_diagonal);
  Real eps = tolerances.plane;
  std::vector<WeightedSite<Real>> narrow;
  narrow.reserve(ctx.sites.size());
  for (const Site& s : ctx.sites) narrow.push_back(s.template cast<Real>());
  std::vector<std::uint32_t> touched;

  const auto clip_all = [&](ConvexCell<Real>& cell, std::uint32_t j) {
    if (j == id || ctx.dominated[j]) return true;
    ++result.stats.clip_calls;
    const ClipOutcome outcome = cell.clip_bisector(narrow[j]);
    if (cell.last_clip_touched()) touched.push_back(j);
    if (outcome == ClipOutcome::unchanged) ++result.stats.clip_unchanged;
    if (outcome == ClipOutcome::emptied) return false;
    cell.maybe_compact();
    return true;
  };

  for (int attempt = 0;; ++attempt) {
    ConvexCell<Real> cell = ConvexCell<Real>::init(site, box, eps);
    result.stats = {};
    touched.clear();
    try {
      if (order.empty()) {
        for (std::uint32_t j = 0; j < ctx.sites.size(); ++j) {
          if (!clip_all(cell, j)) break;
        }
      } else {
        for (std::uint32_t j : order) {
          if (!clip_all(cell, j)) break;
        }
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::topology_corruption) throw;
      result.retried = true;
      if (attempt < kMaxTolerancePromotions) {
        eps *= Real(10);
        continue;
      }
      result.flags |= cell_flag::degraded;
    }
    if (!cell.empty() && !(result.flags & cell_flag::degraded)) {
      if (auto canonical = finalize_cell(std::span<const WeightedSite<Real>>(narrow), id, box,
                                         tolerances.canonical, eps, touched)) {
        cell = std::move(*canonical);
      }
    }
    extract_cell(cell, keep_geometry, result);
    return result;
  }
}

}  // namespace

OracleContext OracleContext::prepare(std::span<const Site> sites, const Aabbd& box,
                                     PrecisionMode precision) {
  check_sites(sites);
  OracleContext ctx;
  ctx.sites.assign(sites.begin(), sites.end());
  for (std::size_t i = 0; i < ctx.sites.size(); ++i) ctx.sites[i].id = static_cast<std::uint32_t>(i);
  ctx.box = box;
  ctx.scene_diagonal = box.diagonal();
  ctx.precision = precision;

  // Exhaustive coincidence test under the same precision as the cells.
  ctx.dominated.assign(sites.size(), 0);
  const auto mark = [&]<typename Real>(Real coincident_sq) {
    std::vector<WeightedSite<Real>> narrow;
    narrow.reserve(ctx.sites.size());
    for (const Site& s : ctx.sites) narrow.push_back(s.template cast<Real>());
    for (std::size_t i = 0; i < narrow.size(); ++i) {
      for (std::size_t j = 0; j < narrow.size(); ++j) {
        if (i == j) continue;
        if (squared_norm(narrow[i].position - narrow[j].position) <= coincident_sq &&
            dominates(narrow[j], narrow[i])) {
          ctx.dominated[i] = 1;
          break;
        }
      }
    }
  };
  if (precision == PrecisionMode::single) {
    mark(Tolerances<float>::for_scene(ctx.scene_diagonal).coincident_sq);
  } else {
    mark(Tolerances<double>::for_scene(ctx.scene_diagonal).coincident_sq);
  }
  return ctx;
}

CellResult brute_force_cell(const OracleContext& ctx, std::uint32_t id, bool keep_geometry,
                            std::span<const std::uint32_t> order) {
  if (ctx.precision == PrecisionMode::single) return run<float>(ctx, id, keep_geometry, order);
  return run<double>(ctx, id, keep_geometry, order);
}

PowerDiagram brute_force_diagram(std::span<const Site> sites, const Aabbd& box,
                                 PrecisionMode precision, bool keep_geometry,
                                 unsigned thread_count) {
  const OracleContext ctx = OracleContext::prepare(sites, box, precision);
  std::vector<CellResult> cells(sites.size());
  detail::parallel_for(
      sites.size(), resolve_thread_count(thread_count),
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          cells[i] = brute_force_cell(ctx, static_cast<std::uint32_t>(i), keep_geometry);
        }
      },
      16);
  return assemble_diagram(std::move(cells), keep_geometry);
}

Aabbd builder_box(std::span<const Site> sites, const BuildConfig& config) {
  return construction_box(sites, config.box_margin);
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> undirected_pairs(const PowerDiagram& d) {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
  pairs.reserve(d.neighbors.size());
  for (std::size_t i = 0; i < d.site_count; ++i) {
    const auto a = static_cast<std::uint32_t>(i);
    for (std::uint32_t j : d.neighbors_of(i)) pairs.emplace_back(std::min(a, j), std::max(a, j));
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

DiagramDiff diff(const PowerDiagram& candidate, const PowerDiagram& reference) {
  if (candidate.site_count != reference.site_count) {
    throw Error(ErrorCode::size_mismatch, "diagrams have different site counts");
  }
  const auto cand = undirected_pairs(candidate);
  const auto ref = undirected_pairs(reference);
  DiagramDiff out;
  std::set_difference(ref.begin(), ref.end(), cand.begin(), cand.end(),
                      std::back_inserter(out.missing_pairs));
  std::set_difference(cand.begin(), cand.end(), ref.begin(), ref.end(),
                      std::back_inserter(out.extra_pairs));
  out.oracle_pairs = ref.size();
  out.mismatch_rate = static_cast<double>(out.missing_pairs.size() + out.extra_pairs.size()) /
                      static_cast<double>(std::max<std::size_t>(1, ref.size()));
  return out;
}

}  // namespace pwrgram::oracle
