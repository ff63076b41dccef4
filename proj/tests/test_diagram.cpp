#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "pwrgram/io.hpp"
#include "pwrgram/oracle.hpp"
#include "support/test_support.hpp"

using namespace pwrgram;

namespace {

Site site(double x, double y, double z, double w = 0, std::uint32_t id = 0) {
  return {{x, y, z}, w, id};
}

PowerDiagram reference(const std::vector<Site>& sites, const BuildConfig& config = {}) {
  return oracle::brute_force_diagram(sites, oracle::builder_box(sites, config), config.precision);
}

}  // namespace

TEST(GlobalBox, Examples) {
  const std::vector<Site> two{site(0, 0, 0), site(1, 1, 1, 0, 1)};
  const Aabbd tight = global_box(two, 0);
  for (int a = 0; a < 3; ++a) {
    EXPECT_EQ(tight.min_corner[a], 0);
    EXPECT_EQ(tight.max_corner[a], 1);
  }
  const Aabbd padded = global_box(two, 0.01);
  const double pad = 0.01 * std::sqrt(3.0);
  for (int a = 0; a < 3; ++a) {
    EXPECT_NEAR(padded.min_corner[a], -pad, 1e-15);
    EXPECT_NEAR(padded.max_corner[a], 1 + pad, 1e-15);
  }
  const std::vector<Site> flat{site(0, 0, 0), site(3, 1, 0, 0, 1), site(1, 2, 0, 0, 2)};
  const Aabbd box = global_box(flat);
  EXPECT_GT(box.max_corner.z - box.min_corner.z, 0);
  for (double m : {0.0, 0.01}) {
    const Aabbd b = construction_box(flat, m);
    for (const Site& s : flat) EXPECT_TRUE(b.strictly_contains(s.position));
  }
  std::vector<Site> none;
  EXPECT_THROW(global_box(none), Error);
}

TEST(BuildCell, SingleSiteIsTheBox) {
  const std::vector<Site> one{site(1, 2, 3)};
  BuildConfig config;
  config.keep_geometry = true;
  const auto d = build_diagram(one, config);
  EXPECT_EQ(d.offsets, (std::vector<std::uint64_t>{0, 0}));
  EXPECT_TRUE(d.flags[0] & cell_flag::boundary);
  EXPECT_FALSE(d.flags[0] & cell_flag::empty);
  ASSERT_TRUE(d.geometry);
  EXPECT_EQ((*d.geometry)[0].faces.size(), 6u);
  for (const auto& f : (*d.geometry)[0].faces) EXPECT_EQ(f.loop.size(), 4u);
}

TEST(BuildCell, CoincidentDuplicates) {
  const std::vector<Site> equal{site(0, 0, 0, 0, 0), site(1, 0, 0, 0, 1), site(1, 0, 0, 0, 2)};
  const auto d = build_diagram(equal);
  EXPECT_FALSE(d.is_empty(1));
  EXPECT_TRUE(d.is_empty(2));
  EXPECT_TRUE(d.neighbors_of(2).empty());
  EXPECT_EQ(std::vector<std::uint32_t>(d.neighbors_of(0).begin(), d.neighbors_of(0).end()),
            std::vector<std::uint32_t>{1});
  EXPECT_TRUE(d.same_adjacency(reference(equal)));

  const std::vector<Site> heavy{site(0, 0, 0, 0, 0), site(1, 0, 0, 0, 1), site(1, 0, 0, 0.5, 2)};
  const auto h = build_diagram(heavy);
  EXPECT_TRUE(h.is_empty(1));
  EXPECT_FALSE(h.is_empty(2));
  EXPECT_TRUE(h.same_adjacency(reference(heavy)));
}

TEST(BuildDiagram, TwoSites) {
  const std::vector<Site> two{site(0, 0, 0, 0, 0), site(1, 0.5, 0, 0, 1)};
  const auto d = build_diagram(two);
  EXPECT_EQ(d.offsets, (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_EQ(d.neighbors, (std::vector<std::uint32_t>{1, 0}));
  EXPECT_TRUE(d.flags[0] & cell_flag::boundary);
  EXPECT_TRUE(d.flags[1] & cell_flag::boundary);
}

TEST(BuildDiagram, LatticeInteriorHasSixNeighbours) {
  const auto sites = fixtures::lattice(3);
  const auto d = build_diagram(sites);
  EXPECT_EQ(std::vector<std::uint32_t>(d.neighbors_of(13).begin(), d.neighbors_of(13).end()),
            (std::vector<std::uint32_t>{4, 10, 12, 14, 16, 22}));
  EXPECT_FALSE(d.flags[13] & cell_flag::boundary);
  EXPECT_TRUE(d.same_adjacency(reference(sites)));
  const auto big = fixtures::lattice(5);
  const auto db = build_diagram(big);
  EXPECT_TRUE(db.same_adjacency(reference(big)));
  for (std::size_t i = 0; i < big.size(); ++i) EXPECT_LE(db.neighbors_of(i).size(), 6u);
}

TEST(BuildDiagram, InputErrors) {
  std::vector<Site> none;
  try {
    build_diagram(none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::empty_input);
  }
  std::vector<Site> bad{site(0, 0, 0), site(1, 1, 1, 0, 1), site(2, 2, 2, 0, 2)};
  bad[2].weight = std::numeric_limits<double>::quiet_NaN();
  try {
    build_diagram(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::non_finite_input);
    EXPECT_EQ(e.index(), 2u);
  }
  BuildConfig config;
  config.warm_start_k = 0;
  EXPECT_THROW(build_diagram(fixtures::lattice(2), config), Error);
}

TEST(BuildDiagram, MatchesOracleWeighted) {
  for (auto kind : {datasets::Distribution::white_noise, datasets::Distribution::clustered,
                    datasets::Distribution::density_gradient}) {
    const auto sites = fixtures::random_sites(1000, 17, 0.1, kind);
    const auto d = build_diagram(sites);
    const auto diff = oracle::diff(d, reference(sites));
    EXPECT_TRUE(diff.identical()) << datasets::to_string(kind) << " rate " << diff.mismatch_rate;
    EXPECT_EQ(asymmetric_pairs(d), 0u);
    EXPECT_EQ(d.stats.degraded_cells, 0u);
  }
}

TEST(BuildDiagram, InvariantRowsValid) {
  const auto sites = fixtures::random_sites(600, 2, 0.5);
  const auto d = build_diagram(sites);
  ASSERT_EQ(d.offsets.size(), sites.size() + 1);
  for (std::size_t i = 0; i < sites.size(); ++i) {
    EXPECT_LE(d.offsets[i], d.offsets[i + 1]);
    const auto row = d.neighbors_of(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      EXPECT_LT(row[k], sites.size());
      EXPECT_NE(row[k], i);
      if (k > 0) EXPECT_LT(row[k - 1], row[k]);
    }
    if (d.is_empty(i)) EXPECT_TRUE(row.empty());
  }
}

TEST(EmptyRatio, Examples) {
  const auto sites = fixtures::random_sites(300, 9);
  EXPECT_EQ(empty_ratio(build_diagram(sites)), 0.0);

  auto heavy = fixtures::random_sites(100, 10);
  heavy[42].weight = 1e12;
  const auto d = build_diagram(heavy);
  // The survivor has no neighbours left, so it counts as well.
  EXPECT_EQ(empty_ratio(d), 1.0);
  EXPECT_FALSE(d.is_empty(42));
  EXPECT_TRUE(d.neighbors_of(42).empty());
  EXPECT_TRUE(d.flags[42] & cell_flag::boundary);
  EXPECT_TRUE(d.same_adjacency(reference(heavy)));
}

TEST(BuilderProperties, SymmetryAndWeightShift) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto sites = fixtures::random_sites(800, seed, 0.3);
    const auto base = build_diagram(sites);
    EXPECT_EQ(asymmetric_pairs(base), 0u);
    for (double c : {-3.5, 0.25, 1000.0}) {
      auto shifted = sites;
      for (Site& s : shifted) s.weight += c;
      EXPECT_EQ(io::encode_csr(build_diagram(shifted)), io::encode_csr(base)) << "shift " << c;
    }
  }
}

TEST(BuilderProperties, VoronoiEquivalence) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto sites = fixtures::random_sites(800, seed);
    const auto zero = io::encode_csr(build_diagram(sites));
    for (double c : {-2.0, 3.7, 1e6}) {
      for (Site& s : sites) s.weight = c;
      EXPECT_EQ(io::encode_csr(build_diagram(sites)), zero) << "weight " << c;
    }
  }
}

TEST(BuilderProperties, AblationAndWarmStartNeutral) {
  const auto sites = fixtures::random_sites(700, 12, 0.2, datasets::Distribution::clustered, 5);
  const auto base = build_diagram(sites);
  const auto expected = io::encode_csr(base);
  EXPECT_TRUE(oracle::diff(base, reference(sites)).identical());
  for (TraversalMode traversal : {TraversalMode::best_first, TraversalMode::depth_first}) {
    for (CullingMode culling : {CullingMode::directional, CullingMode::isotropic}) {
      for (bool warm : {false, true}) {
        BuildConfig config;
        config.traversal = traversal;
        config.culling = culling;
        config.warm_start = warm;
        const auto d = build_diagram(sites, config);
        EXPECT_EQ(io::encode_csr(d), expected);
        if (traversal == TraversalMode::depth_first) {
          EXPECT_GE(d.stats.traversal.clip_calls, base.stats.traversal.clip_calls);
        }
      }
    }
  }
  for (std::uint32_t leaf : {1u, 3u, 32u}) {
    BuildConfig config;
    config.leaf_size = leaf;
    EXPECT_EQ(io::encode_csr(build_diagram(sites, config)), expected);
  }
}

TEST(BuilderProperties, ThreadCountDeterminism) {
  const auto sites = fixtures::random_sites(1500, 4, 0.1);
  BuildConfig config;
  config.thread_count = 1;
  const auto one = build_diagram(sites, config);
  for (unsigned threads : {2u, 3u, 0u}) {
    config.thread_count = threads;
    const auto d = build_diagram(sites, config);
    EXPECT_EQ(io::encode_csr(d), io::encode_csr(one));
    EXPECT_EQ(d.stats.traversal.clip_calls, one.stats.traversal.clip_calls);
  }
}

TEST(BuilderProperties, OwnershipConsistency) {
  for (auto kind : {datasets::Distribution::white_noise, datasets::Distribution::clustered}) {
    const auto sites = fixtures::random_sites(500, 6, 0.1, kind);
    const auto d = build_diagram(sites);
    const auto result = fixtures::ownership_check(sites, d, 500, 1, 1e-9 * global_box(sites).diagonal());
    EXPECT_EQ(result.violations, 0u);
    EXPECT_GT(result.checked, 450u);
  }
}

TEST(BuilderGeometry, FacesPointAtMutualNeighbours) {
  const auto sites = fixtures::random_sites(300, 14, 0.2);
  BuildConfig config;
  config.keep_geometry = true;
  const auto d = build_diagram(sites, config);
  ASSERT_TRUE(d.geometry);
  for (std::size_t i = 0; i < sites.size(); ++i) {
    std::size_t bisector_faces = 0;
    for (const auto& face : (*d.geometry)[i].faces) {
      if (!face.source.is_bisector()) continue;
      ++bisector_faces;
      const auto row = d.neighbors_of(face.source.index);
      EXPECT_TRUE(std::binary_search(row.begin(), row.end(), static_cast<std::uint32_t>(i)));
    }
    EXPECT_EQ(bisector_faces, d.neighbors_of(i).size());
  }
  const auto plain = build_diagram(sites);
  EXPECT_FALSE(plain.geometry);
  EXPECT_TRUE(plain.same_adjacency(d));
}

TEST(BuilderDeadline, ExpiredDeadlineThrowsTimeout) {
  BuildConfig config;
  config.deadline = std::chrono::steady_clock::now() - std::chrono::seconds(1);
  try {
    build_diagram(fixtures::random_sites(100, 1), config);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::timeout);
  }
}

TEST(BuilderPrecision, SingleWithinAllowance) {
  for (auto kind : {datasets::Distribution::white_noise, datasets::Distribution::clustered}) {
    const auto sites = fixtures::random_sites(1000, 3, 0.1, kind);
    BuildConfig config;
    config.precision = PrecisionMode::single;
    const auto d = build_diagram(sites, config);
    const auto diff = oracle::diff(d, reference(sites));
    EXPECT_LE(diff.mismatch_rate, 0.002);
    EXPECT_LE(static_cast<double>(asymmetric_pairs(d)),
              0.002 * static_cast<double>(d.neighbors.size()));
  }
}
