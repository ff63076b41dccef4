// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pwrgram/bench.hpp"
#include "pwrgram/datasets.hpp"
#include "pwrgram/diagram.hpp"
#include "pwrgram/io.hpp"
#include "pwrgram/oracle.hpp"
#include "support/test_support.hpp"

using namespace pwrgram;
using datasets::Distribution;

namespace {

struct Dataset {
  const char* name;
  Distribution kind;
  std::uint32_t clusters;
};

const Dataset kDatasets[] = {
    {"white_noise", Distribution::white_noise, 10},
    {"clustered_k5", Distribution::clustered, 5},
    {"clustered_k10", Distribution::clustered, 10},
    {"density_gradient", Distribution::density_gradient, 10},
};
const double kRatios[] = {0.0, 1e-3, 1e-1};
const std::uint64_t kSeeds[] = {1, 2, 3};

std::vector<Site> make(const Dataset& ds, std::size_t n, std::uint64_t seed, double ratio = 0) {
  return fixtures::random_sites(n, seed, ratio, ds.kind, ds.clusters);
}

PowerDiagram reference(std::span<const Site> sites, const BuildConfig& config = {}) {
  return oracle::brute_force_diagram(sites, oracle::builder_box(sites, config));
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Collects failures; the first few are kept for the report line.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    ++total_;
    if (ok) return;
    ++failed_;
    if (notes_.size() < 3) notes_.push_back(what);
  }
  bool passed() const { return failed_ == 0 && total_ > 0; }
  std::string summary() const {
    std::ostringstream out;
    out << (total_ - failed_) << "/" << total_ << " checks";
    for (const auto& n : notes_) out << "; " << n;
    return out.str();
  }

 private:
  std::size_t total_ = 0;
  std::size_t failed_ = 0;
  std::vector<std::string> notes_;
};

std::string label(const Dataset& ds, std::size_t n, double ratio, std::uint64_t seed) {
  std::ostringstream out;
  out << ds.name << " n=" << n << " ratio=" << ratio << " seed=" << seed;
  return out.str();
}

// 1. Double-precision builder equals the oracle.
std::string oracle_equivalence(bool& ok) {
  Check check;
  for (const Dataset& ds : kDatasets) {
    for (std::size_t n : {50, 500, 2000}) {
      for (double ratio : kRatios) {
        for (std::uint64_t seed : kSeeds) {
          const auto sites = make(ds, n, seed, ratio);
          const auto diff = oracle::diff(build_diagram(sites), reference(sites));
          check.expect(diff.identical(), label(ds, n, ratio, seed) + " differs");
        }
      }
    }
  }
  ok = check.passed();
  return check.summary();
}

// 2. Single precision against the double oracle.
std::string single_precision(bool& ok) {
  Check check;
  double worst = 0;
  BuildConfig config;
  config.precision = PrecisionMode::single;
  for (const Dataset& ds : kDatasets) {
    for (double ratio : kRatios) {
      for (std::uint64_t seed : kSeeds) {
        const auto sites = make(ds, 2000, seed, ratio);
        const auto diff = oracle::diff(build_diagram(sites, config), reference(sites, config));
        worst = std::max(worst, diff.mismatch_rate);
        check.expect(diff.mismatch_rate <= 0.002,
                     label(ds, 2000, ratio, seed) + " rate " + std::to_string(diff.mismatch_rate));
      }
    }
  }
  ok = check.passed();
  return check.summary() + ", worst rate " + std::to_string(worst);
}

std::vector<std::uint32_t> subtree_members(const PowerBvh<double>& bvh, std::uint32_t node) {
  std::vector<std::uint32_t> out;
  std::vector<std::uint32_t> stack{node};
  while (!stack.empty()) {
    const auto& nd = bvh.nodes()[stack.back()];
    stack.pop_back();
    if (nd.is_leaf()) {
      for (std::uint32_t i = nd.first; i < nd.first + nd.count; ++i) out.push_back(bvh.prim_order()[i]);
    } else {
      stack.push_back(nd.left());
      stack.push_back(nd.right());
    }
  }
  return out;
}

// 3. Invariant suite on fixed-seed random inputs.
std::string invariants(bool& ok) {
  Check check;
  for (const Dataset& ds : kDatasets) {
    for (std::uint64_t seed : kSeeds) {
      const auto sites = make(ds, 1500, seed, 0.1);
      const std::string tag = label(ds, 1500, 0.1, seed);
      const auto base = build_diagram(sites);
      const auto csr = io::encode_csr(base);

      check.expect(asymmetric_pairs(base) == 0, tag + ": asymmetric");

      for (double c : {-3.5, 0.25, 1000.0}) {
        auto shifted = sites;
        for (Site& s : shifted) s.weight += c;
        check.expect(io::encode_csr(build_diagram(shifted)) == csr, tag + ": weight shift");
      }

      auto unweighted = sites;
      for (Site& s : unweighted) s.weight = 0;
      const auto voronoi = io::encode_csr(build_diagram(unweighted));
      for (double c : {-2.0, 3.7}) {
        auto flat = sites;
        for (Site& s : flat) s.weight = c;
        check.expect(io::encode_csr(build_diagram(flat)) == voronoi, tag + ": voronoi equivalence");
      }
      check.expect(io::encode_csr(reference(unweighted)) == voronoi, tag + ": voronoi vs oracle");

      BuildConfig warm;
      warm.warm_start = true;
      check.expect(io::encode_csr(build_diagram(sites, warm)) == csr, tag + ": warm start");
      for (unsigned threads : {1u, 2u, 3u, 8u}) {
        BuildConfig config;
        config.thread_count = threads;
        check.expect(io::encode_csr(build_diagram(sites, config)) == csr, tag + ": thread count");
      }

      // Per-cell properties on a sample of cells.
      const auto ctx = DiagramContext<double>::prepare(sites, {});
      for (std::uint32_t id = 0; id < sites.size(); id += 97) {
        const WeightedSite<double>& self = ctx.sites[id];
        auto cell = ConvexCell<double>::init(self, ctx.box, ctx.tolerances.plane);
        const auto order = ctx.bvh.knn(self.position, 48, id);
        for (std::size_t step = 0; step <= order.size() && !cell.empty(); step += 12) {
          // Clip safety: culled candidates leave the cell unchanged.
          for (std::uint32_t j = 0; j < sites.size(); ++j) {
            if (j == id) continue;
            for (bool directional : {true, false}) {
              const bool culled = directional ? cell.site_culled(ctx.sites[j])
                                              : cell.site_culled_isotropic(ctx.sites[j]);
              if (!culled) continue;
              auto copy = cell;
              check.expect(copy.clip_bisector(ctx.sites[j]) == ClipOutcome::unchanged,
                           tag + ": culled candidate clipped");
            }
          }
          // Cull soundness: culled subtrees leave the cell unchanged.
          for (std::uint32_t n = 0; n < ctx.bvh.nodes().size(); ++n) {
            const auto& node = ctx.bvh.nodes()[n];
            if (!node_culled(cell, node.bounds, node.max_weight, CullingMode::directional)) continue;
            auto copy = cell;
            bool unchanged = true;
            for (std::uint32_t m : subtree_members(ctx.bvh, n)) {
              if (m != id) unchanged &= copy.clip_bisector(ctx.sites[m]) == ClipOutcome::unchanged;
            }
            check.expect(unchanged, tag + ": culled subtree clipped");
          }
          for (std::size_t k = step; k < std::min(step + 12, order.size()); ++k) {
            cell.clip_bisector(ctx.sites[order[k]]);
          }
        }

        // Compaction transparency: compacting after every clip or never gives the same cell.
        auto eager = ConvexCell<double>::init(self, ctx.box, ctx.tolerances.plane);
        auto lazy = eager;
        for (std::uint32_t j : ctx.bvh.knn(self.position, 64, id)) {
          eager.clip_bisector(ctx.sites[j]);
          eager.compact();
          lazy.clip_bisector(ctx.sites[j]);
        }
        check.expect(eager.empty() == lazy.empty() && eager.neighbor_ids() == lazy.neighbor_ids() &&
                         std::abs(eager.volume() - lazy.volume()) <= 1e-12 * std::max(1.0, lazy.volume()),
                     tag + ": compaction changed the cell");

        // Idempotence: re-clipping a final cell by its own neighbours is a no-op.
        auto final_cell = ConvexCell<double>::init(self, ctx.box, ctx.tolerances.plane);
        TraversalOptions options;
        options.skip = ctx.dominated;
        best_first_clip(ctx.bvh, final_cell, options);
        const auto ids = final_cell.neighbor_ids();
        const auto row = base.neighbors_of(id);
        check.expect(std::equal(ids.begin(), ids.end(), row.begin(), row.end()), tag + ": cell vs diagram");
        for (std::uint32_t j : ids) {
          check.expect(final_cell.clip_bisector(ctx.sites[j]) == ClipOutcome::unchanged,
                       tag + ": re-clip changed the cell");
        }
        check.expect(final_cell.neighbor_ids() == ids, tag + ": re-clip changed neighbours");
      }
    }
  }
  ok = check.passed();
  return check.summary();
}

// 4. Ablation direction at 100k clustered sites.
std::string ablation_direction(bool& ok) {
  Check check;
  struct Config {
    const char* name;
    TraversalMode traversal;
    CullingMode culling;
  };
  const Config configs[] = {
      {"best_first/directional", TraversalMode::best_first, CullingMode::directional},
      {"best_first/isotropic", TraversalMode::best_first, CullingMode::isotropic},
      {"depth_first/directional", TraversalMode::depth_first, CullingMode::directional},
      {"depth_first/isotropic", TraversalMode::depth_first, CullingMode::isotropic},
  };
  std::vector<double> clips[4];
  std::vector<double> times[4];
  for (std::uint64_t seed : kSeeds) {
    const auto sites = make(kDatasets[2], 100000, seed);
    std::vector<std::uint8_t> first;
    for (int c = 0; c < 4; ++c) {
      BuildConfig config;
      config.traversal = configs[c].traversal;
      config.culling = configs[c].culling;
      const auto d = build_diagram(sites, config);
      clips[c].push_back(static_cast<double>(d.stats.traversal.clip_calls));
      times[c].push_back(d.stats.total_seconds);
      const auto csr = io::encode_csr(d);
      if (c == 0) first = csr;
      check.expect(csr == first, std::string(configs[c].name) + " CSR differs, seed " + std::to_string(seed));
    }
  }
  double m[4];
  for (int c = 0; c < 4; ++c) m[c] = bench::median(clips[c]);
  check.expect(m[0] <= m[2], "best_first > depth_first (directional)");
  check.expect(m[1] <= m[3], "best_first > depth_first (isotropic)");
  check.expect(m[0] <= m[1], "directional > isotropic (best_first)");
  check.expect(m[2] <= m[3], "directional > isotropic (depth_first)");
  ok = check.passed();
  std::ostringstream out;
  out << check.summary() << "; median clip_calls";
  for (int c = 0; c < 4; ++c) {
    out << " " << configs[c].name << "=" << static_cast<std::uint64_t>(m[c]) << " ("
        << bench::median(times[c]) << "s)";
  }
  return out.str();
}

// 5. Empty ratio against weight magnitude at 100k white noise.
std::string empty_ratio_monotone(bool& ok) {
  Check check;
  const auto sites = make(kDatasets[0], 100000, 1);
  const std::vector<double> ratios{0, 1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1};
  const std::vector<std::uint64_t> seeds(std::begin(kSeeds), std::end(kSeeds));
  const auto rows = bench::sweep_weights(sites, ratios, seeds, {});
  check.expect(rows.size() == ratios.size(), "row count");
  check.expect(!rows.empty() && rows[0].empty_ratio == 0, "ratio 0 has empty cells");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    check.expect(rows[r].empty_ratio >= rows[r - 1].empty_ratio,
                 "decrease at ratio " + std::to_string(rows[r].weight_ratio));
  }
  ok = check.passed();
  std::ostringstream out;
  out << check.summary() << "; empty ratios";
  for (const auto& row : rows) out << " " << row.weight_ratio << ":" << row.empty_ratio;
  return out.str();
}

// 6. 1M sites take at most 20 times as long as 100k.
std::string scaling(bool& ok) {
  const auto small = make(kDatasets[0], 100000, 1);
  const auto large = make(kDatasets[0], 1000000, 1);
  std::vector<double> small_times;
  for (int run = 0; run < 3; ++run) {
    const auto start = std::chrono::steady_clock::now();
    build_diagram(small);
    small_times.push_back(seconds_since(start));
  }
  const auto start = std::chrono::steady_clock::now();
  build_diagram(large);
  const double t_large = seconds_since(start);
  const double t_small = bench::median(small_times);
  const double ratio = t_large / t_small;
  ok = ratio <= 20;
  std::ostringstream out;
  out << "100k " << t_small << "s, 1M " << t_large << "s, ratio " << ratio << ", slope "
      << std::log10(ratio) << ", threads " << resolve_thread_count(0);
  return out.str();
}

// 7. Sampled points lie in exactly the cell of their owner.
std::string ownership(bool& ok) {
  Check check;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  for (const Dataset& ds : kDatasets) {
    for (double ratio : {0.0, 0.1}) {
      const auto sites = make(ds, 2000, 7, ratio);
      const auto d = build_diagram(sites);
      const auto r = fixtures::ownership_check(sites, d, 1000, 11, 1e-9 * global_box(sites).diagonal());
      checked += r.checked;
      skipped += r.skipped;
      check.expect(r.violations == 0,
                   label(ds, 2000, ratio, 7) + ": " + std::to_string(r.violations) + " violations");
      check.expect(r.checked >= 900, label(ds, 2000, ratio, 7) + ": too many skipped samples");
    }
  }
  ok = check.passed();
  return check.summary() + "; " + std::to_string(checked) + " samples checked, " +
         std::to_string(skipped) + " on a bisector";
}

// 8. File formats round-trip and CSR is canonical.
std::string round_trips(bool& ok) {
  Check check;
  const auto dir = std::filesystem::temp_directory_path() / "pwrgram_acceptance";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  for (const Dataset& ds : kDatasets) {
    const auto sites = make(ds, 5000, 4, 0.1);
    io::write_sites(dir / "sites.bin", sites);
    const auto back = io::read_sites(dir / "sites.bin");
    bool exact = back.size() == sites.size();
    for (std::size_t i = 0; exact && i < sites.size(); ++i) {
      exact = std::memcmp(&back[i].position, &sites[i].position, sizeof(Vec3d)) == 0 &&
              std::memcmp(&back[i].weight, &sites[i].weight, sizeof(double)) == 0;
    }
    check.expect(exact, std::string(ds.name) + ": site file");
    io::write_sites(dir / "single.bin", sites, PrecisionMode::single);
    const auto single = io::read_sites(dir / "single.bin");
    io::write_sites(dir / "single2.bin", single, PrecisionMode::single);
    check.expect(io::read_file(dir / "single.bin") == io::read_file(dir / "single2.bin"),
                 std::string(ds.name) + ": single site file");

    BuildConfig one;
    one.thread_count = 1;
    BuildConfig many;
    many.thread_count = 4;
    const auto d = build_diagram(back, one);
    io::write_adjacency_csr(dir / "a.csr", d);
    io::write_adjacency_csr(dir / "b.csr", build_diagram(io::read_sites(dir / "sites.bin"), many));
    check.expect(io::read_file(dir / "a.csr") == io::read_file(dir / "b.csr"),
                 std::string(ds.name) + ": CSR not canonical");
    const auto csr = io::read_adjacency_csr(dir / "a.csr");
    check.expect(csr.same_adjacency(d) && csr.flags == d.flags, std::string(ds.name) + ": CSR decode");
    check.expect(io::encode_csr(csr) == io::read_file(dir / "a.csr"), std::string(ds.name) + ": CSR re-encode");

    bench::BenchProtocol protocol;
    protocol.warmup_runs = 1;
    protocol.timed_runs = 2;
    const std::vector<std::string> axes{"culling=directional,isotropic"};
    auto report = bench::run_bench(sites, bench::expand_matrix(axes, {}), protocol, {});
    report.input = "sites.bin";
    report.machine = bench::machine_descriptor("acceptance");
    const auto diff = oracle::diff(d, reference(sites));
    report.verification = bench::Verification{diff.missing_pairs.size(), diff.extra_pairs.size(),
                                              diff.oracle_pairs, diff.mismatch_rate, 0, diff.identical()};
    io::write_stats_json(dir / "r.json", report);
    const auto parsed = io::read_stats_json(dir / "r.json");
    check.expect(parsed == report, std::string(ds.name) + ": stats JSON values");
    io::write_stats_json(dir / "r2.json", parsed);
    check.expect(io::read_file(dir / "r.json") == io::read_file(dir / "r2.json"),
                 std::string(ds.name) + ": stats JSON bytes");
  }
  std::filesystem::remove_all(dir);
  ok = check.passed();
  return check.summary();
}

struct Criterion {
  int id;
  const char* name;
  std::function<std::string(bool&)> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria{
      {1, "oracle equivalence", oracle_equivalence},
      {2, "single-precision mismatch bound", single_precision},
      {3, "invariant suite", invariants},
      {4, "ablation direction", ablation_direction},
      {5, "empty-ratio monotonicity", empty_ratio_monotone},
      {6, "scaling sanity", scaling},
      {7, "ownership consistency", ownership},
      {8, "format round-trips", round_trips},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
      detail = c.run(ok);
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("exception: ") + e.what();
    }
    failures += !ok;
    std::printf("criterion %d %-32s %s  [%.1fs] %s\n", c.id, c.name, ok ? "PASS" : "FAIL",
                seconds_since(start), detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
