#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pwrgram/diagram.hpp"

namespace pwrgram::bench {

inline constexpr int report_schema_version = 1;

struct BenchProtocol {
  std::uint32_t warmup_runs = 3;
  std::uint32_t timed_runs = 10;
  double timeout_seconds = 300;

  void validate() const;
  friend bool operator==(const BenchProtocol&, const BenchProtocol&) = default;
};

// One point of the ablation matrix.
struct ConfigCell {
  CullingMode culling = CullingMode::directional;
  TraversalMode traversal = TraversalMode::best_first;
  bool warm_start = false;
  std::uint32_t leaf_size = PowerBvh<double>::default_leaf_size;
  PrecisionMode precision = PrecisionMode::double_;

  BuildConfig apply(BuildConfig base) const;
  friend bool operator==(const ConfigCell&, const ConfigCell&) = default;
};

struct RunRecord {
  bool warmup = false;
  bool completed = true;  // false = DNF
  double seconds = 0;
  double index_seconds = 0;
  double cells_seconds = 0;
  TraversalStats stats;
  double empty_ratio = 0;

  friend bool operator==(const RunRecord&, const RunRecord&) = default;
};

struct CellReport {
  ConfigCell config;
  std::vector<RunRecord> runs;  // warm-ups first, then timed runs
  bool dnf = false;
  // Over completed timed runs only.
  std::optional<double> mean_seconds;
  std::optional<double> median_seconds;
  std::optional<double> min_seconds;
  std::optional<double> max_seconds;
  double index_fraction = 0;
  double cells_fraction = 0;
  // Median per completed timed run.
  TraversalStats median_stats;

  void summarize();
  friend bool operator==(const CellReport&, const CellReport&) = default;
};

struct Verification {
  std::uint64_t missing_pairs = 0;
  std::uint64_t extra_pairs = 0;
  std::uint64_t oracle_pairs = 0;
  double mismatch_rate = 0;
  double tolerance = 0;
  bool passed = true;

  friend bool operator==(const Verification&, const Verification&) = default;
};

struct BenchReport {
  int schema_version = report_schema_version;
  std::string command;
  std::string input;
  std::uint64_t site_count = 0;
  std::string machine;
  std::uint32_t threads = 0;
  double box_margin = 0.01;
  std::uint32_t warm_start_k = 8;
  BenchProtocol protocol;
  std::vector<CellReport> cells;
  std::optional<Verification> verification;

  friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

// "<label> (<n> cores)"; label defaults to "unspecified".
std::string machine_descriptor(std::string_view label = {});

// Expands "key=v1,v2" axes into their cross product. Keys: culling,
// traversal, warm_start, leaf_size, precision. Axes not given keep `base`.
std::vector<ConfigCell> expand_matrix(std::span<const std::string> axes, const ConfigCell& base);

CellReport run_cell(std::span<const Site> sites, const ConfigCell& cell,
                    const BenchProtocol& protocol, const BuildConfig& base);

BenchReport run_bench(std::span<const Site> sites, std::span<const ConfigCell> cells,
                      const BenchProtocol& protocol, const BuildConfig& base);

// Per-run rows; header is `csv_header()`.
std::string csv_header();
std::string to_csv(const BenchReport& report);

struct SweepRow {
  double weight_ratio = 0;
  double empty_ratio = 0;     // median over seeds
  double runtime_seconds = 0; // median over seeds
  std::vector<double> empty_ratios;  // per seed
  std::vector<double> runtimes;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

std::vector<SweepRow> sweep_weights(std::span<const Site> sites, std::span<const double> ratios,
                                    std::span<const std::uint64_t> seeds,
                                    const BuildConfig& config);

// "weight_ratio,empty_ratio,runtime_seconds" rows.
std::string sweep_table(std::span<const SweepRow> rows);

double median(std::vector<double> values);

}  // namespace pwrgram::bench
