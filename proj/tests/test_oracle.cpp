#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "pwrgram/oracle.hpp"
#include "support/test_support.hpp"

using namespace pwrgram;

namespace {

Site site(double x, double y, double z, double w = 0, std::uint32_t id = 0) {
  return {{x, y, z}, w, id};
}

}  // namespace

TEST(BruteForce, TwoAndOneSites) {
  const std::vector<Site> two{site(0, 0, 0, 0, 0), site(3, 0, 0, 0, 1)};
  const auto d = oracle::brute_force_diagram(two, global_box(two));
  EXPECT_EQ(d.neighbors, (std::vector<std::uint32_t>{1, 0}));
  const std::vector<Site> one{site(0, 0, 0)};
  const auto e = oracle::brute_force_diagram(one, construction_box(one, 0.01));
  EXPECT_EQ(e.offsets, (std::vector<std::uint64_t>{0, 0}));
}

TEST(BruteForce, LatticeCentre) {
  const auto sites = fixtures::lattice(3);
  const auto ctx = oracle::OracleContext::prepare(sites, global_box(sites));
  const auto cell = oracle::brute_force_cell(ctx, 13, false);
  EXPECT_EQ(cell.neighbors, (std::vector<std::uint32_t>{4, 10, 12, 14, 16, 22}));
}

TEST(BruteForce, FourPointsFormCompleteGraph) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 20; ++t) {
    std::vector<Site> sites;
    for (std::uint32_t i = 0; i < 4; ++i) sites.push_back(site(u(rng), u(rng), u(rng), 0, i));
    const double vol = dot(sites[1].position - sites[0].position,
                           cross(sites[2].position - sites[0].position, sites[3].position - sites[0].position));
    if (std::abs(vol) < 1e-3) continue;
    // Every pair of a tetrahedron shares an unbounded face; a wide box keeps them all.
    const Aabbd wide{{-100, -100, -100}, {100, 100, 100}};
    const auto d = oracle::brute_force_diagram(sites, wide);
    EXPECT_EQ(oracle::undirected_pairs(d).size(), 6u);
  }
}

TEST(BruteForce, ClipOrderDoesNotMatter) {
  const auto sites = fixtures::random_sites(300, 31, 0.2);
  const auto ctx = oracle::OracleContext::prepare(sites, construction_box(sites, 0.01));
  std::mt19937_64 rng(2);
  for (std::uint32_t id = 0; id < sites.size(); id += 7) {
    std::vector<std::uint32_t> order(sites.size());
    std::iota(order.begin(), order.end(), 0u);
    std::shuffle(order.begin(), order.end(), rng);
    EXPECT_EQ(oracle::brute_force_cell(ctx, id, false, order).neighbors,
              oracle::brute_force_cell(ctx, id, false).neighbors);
  }
}

TEST(BruteForce, OracleProperties) {
  auto sites = fixtures::random_sites(300, 40, 0.2);
  const Aabbd box = construction_box(sites, 0.01);
  const auto base = oracle::brute_force_diagram(sites, box);
  EXPECT_EQ(asymmetric_pairs(base), 0u);
  auto shifted = sites;
  for (Site& s : shifted) s.weight += 5;
  EXPECT_TRUE(oracle::diff(oracle::brute_force_diagram(shifted, box), base).identical());
  auto zero = sites;
  auto constant = sites;
  for (Site& s : zero) s.weight = 0;
  for (Site& s : constant) s.weight = 2;
  EXPECT_TRUE(oracle::diff(oracle::brute_force_diagram(zero, box),
                           oracle::brute_force_diagram(constant, box))
                  .identical());
  EXPECT_TRUE(oracle::diff(oracle::brute_force_diagram(sites, box, PrecisionMode::double_, false, 1),
                           base)
                  .identical());
}

TEST(Diff, SelfAndRemovedPair) {
  const auto sites = fixtures::random_sites(200, 5);
  const auto d = build_diagram(sites);
  const auto self = oracle::diff(d, d);
  EXPECT_TRUE(self.identical());
  EXPECT_EQ(self.mismatch_rate, 0);

  const auto pairs = oracle::undirected_pairs(d);
  const auto [a, b] = pairs[pairs.size() / 2];
  std::vector<CellResult> cells(d.site_count);
  for (std::size_t i = 0; i < d.site_count; ++i) {
    for (std::uint32_t j : d.neighbors_of(i)) {
      if ((i == a && j == b) || (i == b && j == a)) continue;
      cells[i].neighbors.push_back(j);
    }
    cells[i].flags = d.flags[i];
  }
  const auto removed = assemble_diagram(std::move(cells), false);
  const auto diff = oracle::diff(removed, d);
  ASSERT_EQ(diff.missing_pairs.size(), 1u);
  EXPECT_EQ(diff.missing_pairs[0], std::make_pair(a, b));
  EXPECT_TRUE(diff.extra_pairs.empty());
  EXPECT_DOUBLE_EQ(diff.mismatch_rate, 1.0 / static_cast<double>(pairs.size()));
  EXPECT_EQ(oracle::diff(d, removed).extra_pairs.size(), 1u);
}

TEST(Diff, SizeMismatch) {
  const auto a = build_diagram(fixtures::lattice(2));
  const auto b = build_diagram(fixtures::lattice(3));
  try {
    oracle::diff(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::size_mismatch);
  }
}

TEST(Diff, CospherialCubeCornersReported) {
  std::vector<Site> sites;
  for (std::uint32_t k = 0; k < 8; ++k) sites.push_back(site(k & 1, (k >> 1) & 1, (k >> 2) & 1, 0, k));
  const auto fast = build_diagram(sites);
  const auto ref = oracle::brute_force_diagram(sites, oracle::builder_box(sites, {}));
  const auto diff = oracle::diff(fast, ref);
  // Each corner keeps exactly its three edge neighbours: diagonal contacts are
  // points or segments and do not count as faces.
  EXPECT_TRUE(diff.identical()) << diff.mismatch_rate;
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(fast.neighbors_of(i).size(), 3u);
}
