#include "pwrgram/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <thread>

#include "pwrgram/datasets.hpp"

namespace pwrgram::bench {

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = text.find(sep, start);
    out.emplace_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

CullingMode parse_culling(const std::string& v) {
  if (v == "directional") return CullingMode::directional;
  if (v == "isotropic") return CullingMode::isotropic;
  throw Error(ErrorCode::invalid_argument, "culling: unknown value '" + v + "'");
}

TraversalMode parse_traversal(std::string v) {
  std::replace(v.begin(), v.end(), '-', '_');
  if (v == "best_first") return TraversalMode::best_first;
  if (v == "depth_first") return TraversalMode::depth_first;
  throw Error(ErrorCode::invalid_argument, "traversal: unknown value '" + v + "'");
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::invalid_argument, "warm_start: unknown value '" + v + "'");
}

std::uint32_t parse_leaf(const std::string& v) {
  std::size_t used = 0;
  unsigned long value = 0;
  try {
    value = std::stoul(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || value < 1 || value > 1'000'000) {
    throw Error(ErrorCode::invalid_argument, "leaf_size: bad value '" + v + "'");
  }
  return static_cast<std::uint32_t>(value);
}

PrecisionMode parse_precision(const std::string& v) {
  if (v == "single" || v == "float") return PrecisionMode::single;
  if (v == "double") return PrecisionMode::double_;
  throw Error(ErrorCode::invalid_argument, "precision: unknown value '" + v + "'");
}

std::uint64_t median_u64(std::vector<std::uint64_t> v) {
  if (v.empty()) return 0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  // Even counts average the middle pair, rounding down.
  return n % 2 ? v[n / 2] : v[n / 2 - 1] + (v[n / 2] - v[n / 2 - 1]) / 2;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void BenchProtocol::validate() const {
  if (timed_runs < 1) throw Error(ErrorCode::invalid_argument, "timed_runs must be >= 1");
  if (!(timeout_seconds > 0)) throw Error(ErrorCode::invalid_argument, "timeout must be > 0");
}

BuildConfig ConfigCell::apply(BuildConfig base) const {
  base.culling = culling;
  base.traversal = traversal;
  base.warm_start = warm_start;
  base.leaf_size = leaf_size;
  base.precision = precision;
  return base;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void CellReport::summarize() {
  std::vector<double> times;
  double index = 0;
  double cells_time = 0;
  std::vector<std::uint64_t> nodes, leaves, clips, unchanged, stack;
  for (const RunRecord& r : runs) {
    if (r.warmup || !r.completed) continue;
    times.push_back(r.seconds);
    index += r.index_seconds;
    cells_time += r.cells_seconds;
    nodes.push_back(r.stats.nodes_visited);
    leaves.push_back(r.stats.leaves_visited);
    clips.push_back(r.stats.clip_calls);
    unchanged.push_back(r.stats.clip_unchanged);
    stack.push_back(r.stats.stack_high_water);
  }
  mean_seconds.reset();
  median_seconds.reset();
  min_seconds.reset();
  max_seconds.reset();
  index_fraction = cells_fraction = 0;
  median_stats = {};
  if (times.empty()) return;
  const double total = std::accumulate(times.begin(), times.end(), 0.0);
  mean_seconds = total / static_cast<double>(times.size());
  median_seconds = median(times);
  min_seconds = *std::min_element(times.begin(), times.end());
  max_seconds = *std::max_element(times.begin(), times.end());
  if (total > 0) {
    index_fraction = index / total;
    cells_fraction = cells_time / total;
  }
  median_stats.nodes_visited = median_u64(nodes);
  median_stats.leaves_visited = median_u64(leaves);
  median_stats.clip_calls = median_u64(clips);
  median_stats.clip_unchanged = median_u64(unchanged);
  median_stats.stack_high_water = median_u64(stack);
}

std::string machine_descriptor(std::string_view label) {
  const unsigned cores = std::max(1u, std::thread::hardware_concurrency());
  std::string out = label.empty() ? std::string("unspecified") : std::string(label);
  return out + " (" + std::to_string(cores) + " cores)";
}

std::vector<ConfigCell> expand_matrix(std::span<const std::string> axes, const ConfigCell& base) {
  std::vector<ConfigCell> cells{base};
  for (const std::string& axis : axes) {
    const std::size_t eq = axis.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == axis.size()) {
      throw Error(ErrorCode::invalid_argument, "matrix axis '" + axis + "' is not key=v1,v2");
    }
    std::string key = axis.substr(0, eq);
    std::replace(key.begin(), key.end(), '-', '_');
    const auto values = split(std::string_view(axis).substr(eq + 1), ',');
    std::vector<ConfigCell> next;
    for (const ConfigCell& c : cells) {
      for (const std::string& v : values) {
        ConfigCell n = c;
        if (key == "culling") {
          n.culling = parse_culling(v);
        } else if (key == "traversal") {
          n.traversal = parse_traversal(v);
        } else if (key == "warm_start") {
          n.warm_start = parse_bool(v);
        } else if (key == "leaf_size") {
          n.leaf_size = parse_leaf(v);
        } else if (key == "precision") {
          n.precision = parse_precision(v);
        } else {
          throw Error(ErrorCode::invalid_argument, "matrix: unknown key '" + key + "'");
        }
        next.push_back(n);
      }
    }
    cells = std::move(next);
  }
  return cells;
}

CellReport run_cell(std::span<const Site> sites, const ConfigCell& cell,
                    const BenchProtocol& protocol, const BuildConfig& base) {
  protocol.validate();
  CellReport report;
  report.config = cell;
  const std::uint32_t total = protocol.warmup_runs + protocol.timed_runs;
  const auto budget = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(protocol.timeout_seconds));
  for (std::uint32_t run = 0; run < total; ++run) {
    RunRecord record;
    record.warmup = run < protocol.warmup_runs;
    BuildConfig config = cell.apply(base);
    config.keep_geometry = false;
    const auto start = std::chrono::steady_clock::now();
    config.deadline = start + budget;
    try {
      const PowerDiagram d = build_diagram(sites, config);
      record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      record.index_seconds = d.stats.index_seconds;
      record.cells_seconds = d.stats.cells_seconds;
      record.stats = d.stats.traversal;
      record.empty_ratio = empty_ratio(d);
      // Wall-clock check on top of the cooperative per-cell checks.
      if (record.seconds > protocol.timeout_seconds) record.completed = false;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::timeout) throw;
      record.completed = false;
      record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    report.runs.push_back(record);
    if (!record.completed) {
      report.dnf = true;
      break;
    }
  }
  report.summarize();
  return report;
}

BenchReport run_bench(std::span<const Site> sites, std::span<const ConfigCell> cells,
                      const BenchProtocol& protocol, const BuildConfig& base) {
  protocol.validate();
  BenchReport report;
  report.command = "bench";
  report.site_count = sites.size();
  report.threads = resolve_thread_count(base.thread_count);
  report.box_margin = base.box_margin;
  report.warm_start_k = base.warm_start_k;
  report.protocol = protocol;
  for (const ConfigCell& cell : cells) report.cells.push_back(run_cell(sites, cell, protocol, base));
  return report;
}

std::string csv_header() {
  return "config,culling,traversal,warm_start,leaf_size,precision,threads,run,warmup,status,"
         "seconds,index_seconds,cells_seconds,nodes_visited,leaves_visited,clip_calls,"
         "clip_unchanged,stack_high_water,empty_ratio";
}

std::string to_csv(const BenchReport& report) {
  std::ostringstream out;
  out << csv_header() << '\n';
  for (std::size_t c = 0; c < report.cells.size(); ++c) {
    const CellReport& cell = report.cells[c];
    for (std::size_t r = 0; r < cell.runs.size(); ++r) {
      const RunRecord& run = cell.runs[r];
      out << c << ',' << to_string(cell.config.culling) << ',' << to_string(cell.config.traversal)
          << ',' << (cell.config.warm_start ? 1 : 0) << ',' << cell.config.leaf_size << ','
          << to_string(cell.config.precision) << ',' << report.threads << ',' << r << ','
          << (run.warmup ? 1 : 0) << ',' << (run.completed ? "ok" : "dnf") << ','
          << fmt(run.seconds) << ',' << fmt(run.index_seconds) << ',' << fmt(run.cells_seconds)
          << ',' << run.stats.nodes_visited << ',' << run.stats.leaves_visited << ','
          << run.stats.clip_calls << ',' << run.stats.clip_unchanged << ','
          << run.stats.stack_high_water << ',' << fmt(run.empty_ratio) << '\n';
    }
  }
  return out.str();
}

std::vector<SweepRow> sweep_weights(std::span<const Site> sites, std::span<const double> ratios,
                                    std::span<const std::uint64_t> seeds,
                                    const BuildConfig& config) {
  if (seeds.empty()) throw Error(ErrorCode::invalid_argument, "sweep needs at least one seed");
  for (double r : ratios) {
    if (!(r >= 0) || !std::isfinite(r)) {
      throw Error(ErrorCode::invalid_argument, "weight ratios must be finite and >= 0");
    }
  }
  check_sites(sites);
  const double d_nn = sites.size() >= 2 ? datasets::median_nn_distance(sites) : 0.0;
  std::vector<SweepRow> rows;
  for (double ratio : ratios) {
    SweepRow row;
    row.weight_ratio = ratio;
    for (std::uint64_t seed : seeds) {
      const auto weights = datasets::sample_weights(sites.size(), d_nn, ratio, seed);
      const auto weighted = datasets::with_weights(sites, weights);
      const auto start = std::chrono::steady_clock::now();
      const PowerDiagram d = build_diagram(weighted, config);
      row.runtimes.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
      row.empty_ratios.push_back(empty_ratio(d));
    }
    row.empty_ratio = median(row.empty_ratios);
    row.runtime_seconds = median(row.runtimes);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string sweep_table(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "weight_ratio,empty_ratio,runtime_seconds\n";
  for (const SweepRow& row : rows) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%g,%.6f,%.6f\n", row.weight_ratio, row.empty_ratio,
                  row.runtime_seconds);
    out << buf;
  }
  return out.str();
}

}  // namespace pwrgram::bench
