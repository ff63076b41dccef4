#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "pwrgram/diagram.hpp"

namespace pwrgram::oracle {

// Brute-force reference: every cell is clipped by the bisector of every other
// site in ascending id order, with no culling and no hierarchy. O(N^2).

struct OracleContext {
  std::vector<Site> sites;
  Aabbd box;
  double scene_diagonal = 0;
  PrecisionMode precision = PrecisionMode::double_;
  // Computed by exhaustive pairwise comparison; independent of the BVH.
  std::vector<std::uint8_t> dominated;

  static OracleContext prepare(std::span<const Site> sites, const Aabbd& box,
                               PrecisionMode precision = PrecisionMode::double_);
};

// `order`, when given, is the clip order to use instead of ascending id.
CellResult brute_force_cell(const OracleContext& context, std::uint32_t id, bool keep_geometry,
                            std::span<const std::uint32_t> order = {});

PowerDiagram brute_force_diagram(std::span<const Site> sites, const Aabbd& box,
                                 PrecisionMode precision = PrecisionMode::double_,
                                 bool keep_geometry = false, unsigned thread_count = 0);

// The box build_diagram would use for these sites and config.
Aabbd builder_box(std::span<const Site> sites, const BuildConfig& config);

struct DiagramDiff {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> missing_pairs;  // in oracle only
  std::vector<std::pair<std::uint32_t, std::uint32_t>> extra_pairs;    // in candidate only
  std::size_t oracle_pairs = 0;
  double mismatch_rate = 0;

  bool identical() const { return missing_pairs.empty() && extra_pairs.empty(); }
};

// Symmetric difference of undirected adjacency pair sets (i < j).
DiagramDiff diff(const PowerDiagram& candidate, const PowerDiagram& reference);

// Undirected, sorted, deduplicated pair list of a diagram.
std::vector<std::pair<std::uint32_t, std::uint32_t>> undirected_pairs(const PowerDiagram& d);

}  // namespace pwrgram::oracle
