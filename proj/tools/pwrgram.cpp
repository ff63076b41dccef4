#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pwrgram/bench.hpp"
#include "pwrgram/datasets.hpp"
#include "pwrgram/diagram.hpp"
#include "pwrgram/io.hpp"
#include "pwrgram/oracle.hpp"

namespace {

using namespace pwrgram;

constexpr int kExitUsage = 1;
constexpr int kExitInput = 2;
constexpr int kExitVerify = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BuildFlags {
  std::string culling = "directional";
  std::string traversal = "best_first";
  std::string threads;
  std::string precision = "double";
  bool warm_start = false;
  std::uint32_t warm_start_k = 8;
  std::uint32_t leaf_size = 10;
  double margin = 0.01;
  std::optional<double> weights_ratio;
  std::uint64_t weight_seed = 0;

  void add_to(CLI::App& app) {
    app.add_option("--culling", culling, "directional | isotropic")
        ->check(CLI::IsMember({"directional", "isotropic"}))
        ->capture_default_str();
    app.add_option("--traversal", traversal, "best_first | depth_first")
        ->transform([](std::string v) {
          std::replace(v.begin(), v.end(), '-', '_');
          return v;
        })
        ->check(CLI::IsMember({"best_first", "depth_first"}))
        ->capture_default_str();
    app.add_option("--threads", threads, "worker threads, or 'max' (default: PWRGRAM_THREADS, else max)");
    app.add_option("--precision", precision, "single | double")
        ->check(CLI::IsMember({"single", "double"}))
        ->capture_default_str();
    app.add_flag("--warm-start", warm_start, "seed each cell with its k nearest neighbours");
    app.add_option("--warm-start-k", warm_start_k, "neighbours used by --warm-start")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--leaf-size", leaf_size, "BVH leaf size")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    app.add_option("--margin", margin, "bounding box margin, fraction of the site diagonal")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    app.add_option("--weights-ratio", weights_ratio,
                   "replace weights by N(0, (R d_nn^2 / 3)^2) samples")
        ->check(CLI::NonNegativeNumber);
    app.add_option("--weight-seed", weight_seed, "seed for --weights-ratio")->capture_default_str();
  }

  BuildConfig config() const {
    BuildConfig c;
    c.culling = culling == "isotropic" ? CullingMode::isotropic : CullingMode::directional;
    c.traversal = traversal == "depth_first" ? TraversalMode::depth_first : TraversalMode::best_first;
    c.precision = precision == "single" ? PrecisionMode::single : PrecisionMode::double_;
    c.warm_start = warm_start;
    c.warm_start_k = warm_start_k;
    c.leaf_size = leaf_size;
    c.box_margin = margin;
    c.thread_count = thread_count();
    return c;
  }

  bench::ConfigCell cell() const {
    const BuildConfig c = config();
    return {c.culling, c.traversal, c.warm_start, c.leaf_size, c.precision};
  }

  unsigned thread_count() const {
    std::string value = threads;
    std::string source = "--threads";
    if (value.empty()) {
      const char* env = std::getenv("PWRGRAM_THREADS");
      if (env == nullptr || *env == '\0') return 0;
      value = env;
      source = "PWRGRAM_THREADS";
    }
    if (value == "max") return 0;
    std::size_t used = 0;
    long n = -1;
    try {
      n = std::stol(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || n < 1 || n > 4096) {
      throw UsageError(source + ": expected a positive integer or 'max', got '" + value + "'");
    }
    return static_cast<unsigned>(n);
  }

  std::vector<Site> load(const std::string& path) const {
    std::vector<Site> sites = io::read_sites(path);
    if (weights_ratio) {
      check_sites(sites);
      sites = datasets::with_weights(sites,
                                     datasets::sample_weights(sites, *weights_ratio, weight_seed));
    }
    return sites;
  }
};

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t pos = text.find(',', start);
    out.push_back(text.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& flag, const std::string& text, Parse parse) {
  std::vector<T> out;
  for (const std::string& item : split_list(text)) {
    std::size_t used = 0;
    T v{};
    try {
      v = parse(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size()) {
      throw UsageError(flag + ": cannot parse '" + item + "'");
    }
    out.push_back(v);
  }
  return out;
}

bench::RunRecord record_of(const PowerDiagram& d, double seconds) {
  bench::RunRecord r;
  r.seconds = seconds;
  r.index_seconds = d.stats.index_seconds;
  r.cells_seconds = d.stats.cells_seconds;
  r.stats = d.stats.traversal;
  r.empty_ratio = empty_ratio(d);
  return r;
}

bench::BenchReport single_run_report(const std::string& command, const std::string& input,
                                     const BuildFlags& flags, const BuildConfig& config,
                                     const PowerDiagram& d, double seconds) {
  bench::BenchReport report;
  report.command = command;
  report.input = input;
  report.site_count = d.site_count;
  report.machine = bench::machine_descriptor();
  report.threads = resolve_thread_count(config.thread_count);
  report.box_margin = config.box_margin;
  report.warm_start_k = config.warm_start_k;
  report.protocol = {0, 1, 0};
  bench::CellReport cell;
  cell.config = flags.cell();
  cell.runs.push_back(record_of(d, seconds));
  cell.summarize();
  report.cells.push_back(std::move(cell));
  return report;
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void print_diagram_summary(const PowerDiagram& d, double seconds) {
  std::printf("sites %zu  pairs %zu  empty_ratio %.6f  degraded %llu  seconds %.6f\n",
              d.site_count, static_cast<std::size_t>(d.neighbors.size() / 2), empty_ratio(d),
              static_cast<unsigned long long>(d.stats.degraded_cells), seconds);
  const TraversalStats& t = d.stats.traversal;
  std::printf("nodes_visited %llu  leaves_visited %llu  clip_calls %llu  clip_unchanged %llu\n",
              static_cast<unsigned long long>(t.nodes_visited),
              static_cast<unsigned long long>(t.leaves_visited),
              static_cast<unsigned long long>(t.clip_calls),
              static_cast<unsigned long long>(t.clip_unchanged));
}

int run(int argc, char** argv) {
  CLI::App app{"Power diagrams of weighted 3D point sets by per-cell clipping"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic site file");
  std::string gen_kind;
  datasets::GeneratorSpec spec;
  std::string gen_out;
  std::string gen_precision = "double";
  std::vector<double> gen_domain;
  gen->add_option("kind", gen_kind, "white-noise | clustered | density-gradient")->required();
  gen->add_option("--n", spec.n, "number of sites")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--seed", spec.seed, "generator seed")->capture_default_str();
  gen->add_option("--k", spec.cluster_count, "cluster count")->check(CLI::PositiveNumber)->capture_default_str();
  gen->add_option("--sigma", spec.cluster_sigma, "cluster standard deviation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  gen->add_option("--domain", gen_domain, "xmin ymin zmin xmax ymax zmax")->expected(6);
  gen->add_option("--precision", gen_precision, "file precision: single | double")
      ->check(CLI::IsMember({"single", "double"}))
      ->capture_default_str();
  gen->add_option("-o,--out", gen_out, "output site file")->required();

  // build
  auto* build = app.add_subcommand("build", "build a diagram and write its adjacency");
  BuildFlags build_flags;
  std::string build_in, build_csr, build_obj, build_stats;
  std::optional<double> build_timeout;
  build->add_option("input", build_in, "site file")->required();
  build->add_option("--csr", build_csr, "adjacency output (CSR)");
  build->add_option("--obj", build_obj, "cell mesh output (OBJ)");
  build->add_option("--stats", build_stats, "report output (JSON)");
  build->add_option("--timeout", build_timeout, "abort after this many seconds")->check(CLI::PositiveNumber);
  build_flags.add_to(*build);

  // verify
  auto* verify = app.add_subcommand("verify", "compare the builder with the brute-force oracle");
  BuildFlags verify_flags;
  std::string verify_in, verify_stats;
  std::size_t verify_cap = 5000;
  double verify_tolerance = 0;
  verify->add_option("input", verify_in, "site file")->required();
  verify->add_option("--cap", verify_cap, "refuse inputs larger than this")->capture_default_str();
  verify->add_option("--tolerance", verify_tolerance, "largest accepted mismatch rate")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  verify->add_option("--stats", verify_stats, "report output (JSON)");
  verify_flags.add_to(*verify);

  // bench
  auto* benchmark = app.add_subcommand("bench", "run the timing protocol over a config matrix");
  BuildFlags bench_flags;
  std::string bench_in, bench_csv, bench_json, bench_machine;
  std::vector<std::string> bench_matrix;
  bench::BenchProtocol protocol;
  benchmark->add_option("input", bench_in, "site file")->required();
  benchmark->add_option("--warmup", protocol.warmup_runs, "warm-up runs")->capture_default_str();
  benchmark->add_option("--runs", protocol.timed_runs, "timed runs")->check(CLI::PositiveNumber)->capture_default_str();
  benchmark->add_option("--timeout", protocol.timeout_seconds, "per-run timeout in seconds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  benchmark->add_option("--matrix", bench_matrix,
                        "axis key=v1,v2 (culling, traversal, warm_start, leaf_size, precision); repeatable");
  benchmark->add_option("--csv", bench_csv, "per-run rows (CSV)");
  benchmark->add_option("--json", bench_json, "report (JSON)");
  benchmark->add_option("--machine", bench_machine, "machine label for the report");
  bench_flags.add_to(*benchmark);

  // sweep-weights
  auto* sweep = app.add_subcommand("sweep-weights", "empty ratio and runtime against weight ratio");
  BuildFlags sweep_flags;
  std::string sweep_in, sweep_out;
  std::string sweep_ratios = "0,1e-6,1e-5,1e-4,1e-3,1e-2,1e-1";
  std::string sweep_seeds = "1,2,3";
  sweep->add_option("input", sweep_in, "site file")->required();
  sweep->add_option("--ratios", sweep_ratios, "comma-separated weight ratios")->capture_default_str();
  sweep->add_option("--seeds", sweep_seeds, "comma-separated weight seeds")->capture_default_str();
  sweep->add_option("-o,--out", sweep_out, "table output (CSV); stdout when omitted");
  sweep_flags.add_to(*sweep);

  // export
  auto* exporter = app.add_subcommand("export", "write cell geometry as an OBJ mesh");
  BuildFlags export_flags;
  std::string export_in, export_out;
  exporter->add_option("input", export_in, "site file")->required();
  exporter->add_option("-o,--out", export_out, "mesh output (OBJ)")->required();
  export_flags.add_to(*exporter);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (*gen) {
    try {
      spec.kind = datasets::parse_distribution(gen_kind);
    } catch (const Error& e) {
      throw UsageError(std::string("kind: ") + e.what());
    }
    if (!gen_domain.empty()) {
      spec.domain = Aabbd{{gen_domain[0], gen_domain[1], gen_domain[2]},
                          {gen_domain[3], gen_domain[4], gen_domain[5]}};
      for (int a = 0; a < 3; ++a) {
        if (!(spec.domain.min_corner[a] < spec.domain.max_corner[a])) {
          throw UsageError("--domain: min must be below max on every axis");
        }
      }
    }
    const auto sites = datasets::generate(spec);
    io::write_sites(gen_out, sites,
                    gen_precision == "single" ? PrecisionMode::single : PrecisionMode::double_);
    const double d_nn = sites.size() >= 2 ? datasets::median_nn_distance(sites) : 0.0;
    std::printf("wrote %zu sites to %s (d_nn %.9g)\n", sites.size(), gen_out.c_str(), d_nn);
    return 0;
  }

  if (*build) {
    const auto sites = build_flags.load(build_in);
    BuildConfig config = build_flags.config();
    config.keep_geometry = !build_obj.empty();
    const auto start = std::chrono::steady_clock::now();
    if (build_timeout) {
      config.deadline = start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                    std::chrono::duration<double>(*build_timeout));
    }
    const PowerDiagram d = build_diagram(sites, config);
    const double seconds = elapsed(start);
    if (build_timeout && seconds > *build_timeout) {
      throw Error(ErrorCode::timeout, "build exceeded its deadline");
    }
    print_diagram_summary(d, seconds);
    if (!build_csr.empty()) io::write_adjacency_csr(build_csr, d);
    if (!build_obj.empty()) io::export_cells_obj(build_obj, d);
    if (!build_stats.empty()) {
      io::write_stats_json(build_stats,
                           single_run_report("build", build_in, build_flags, config, d, seconds));
    }
    return 0;
  }

  if (*verify) {
    const auto sites = verify_flags.load(verify_in);
    if (sites.size() > verify_cap) {
      std::fprintf(stderr, "verify: %zu sites exceed --cap %zu; the oracle is O(N^2)\n",
                   sites.size(), verify_cap);
      return kExitInput;
    }
    const BuildConfig config = verify_flags.config();
    const auto start = std::chrono::steady_clock::now();
    const PowerDiagram fast = build_diagram(sites, config);
    const double seconds = elapsed(start);
    const PowerDiagram reference = oracle::brute_force_diagram(
        sites, oracle::builder_box(sites, config), PrecisionMode::double_, false, config.thread_count);
    const oracle::DiagramDiff diff = oracle::diff(fast, reference);
    const bool passed = diff.mismatch_rate <= verify_tolerance;
    std::printf("oracle_pairs %zu  missing %zu  extra %zu  mismatch_rate %.6g  tolerance %g  %s\n",
                diff.oracle_pairs, diff.missing_pairs.size(), diff.extra_pairs.size(),
                diff.mismatch_rate, verify_tolerance, passed ? "PASS" : "FAIL");
    constexpr std::size_t kShown = 10;
    for (std::size_t i = 0; i < std::min(kShown, diff.missing_pairs.size()); ++i) {
      std::printf("  missing %u %u\n", diff.missing_pairs[i].first, diff.missing_pairs[i].second);
    }
    for (std::size_t i = 0; i < std::min(kShown, diff.extra_pairs.size()); ++i) {
      std::printf("  extra %u %u\n", diff.extra_pairs[i].first, diff.extra_pairs[i].second);
    }
    if (!verify_stats.empty()) {
      auto report = single_run_report("verify", verify_in, verify_flags, config, fast, seconds);
      report.verification = bench::Verification{diff.missing_pairs.size(), diff.extra_pairs.size(),
                                                 diff.oracle_pairs,         diff.mismatch_rate,
                                                 verify_tolerance,          passed};
      io::write_stats_json(verify_stats, report);
    }
    return passed ? 0 : kExitVerify;
  }

  if (*benchmark) {
    const auto sites = bench_flags.load(bench_in);
    std::vector<bench::ConfigCell> cells;
    try {
      cells = bench::expand_matrix(bench_matrix, bench_flags.cell());
    } catch (const Error& e) {
      throw UsageError(std::string("--matrix: ") + e.what());
    }
    auto report = bench::run_bench(sites, cells, protocol, bench_flags.config());
    report.input = bench_in;
    report.machine = bench::machine_descriptor(bench_machine);
    for (std::size_t c = 0; c < report.cells.size(); ++c) {
      const auto& cell = report.cells[c];
      std::printf("[%zu] %s %s warm_start=%d leaf=%u %s: ", c, to_string(cell.config.culling),
                  to_string(cell.config.traversal), cell.config.warm_start ? 1 : 0,
                  cell.config.leaf_size, to_string(cell.config.precision));
      if (cell.median_seconds) {
        std::printf("median %.6fs mean %.6fs min %.6fs clip_calls %llu%s\n", *cell.median_seconds,
                    *cell.mean_seconds, *cell.min_seconds,
                    static_cast<unsigned long long>(cell.median_stats.clip_calls),
                    cell.dnf ? " (DNF in a later run)" : "");
      } else {
        std::printf("DNF\n");
      }
    }
    if (!bench_csv.empty()) io::write_file_atomic(bench_csv, bench::to_csv(report));
    if (!bench_json.empty()) io::write_stats_json(bench_json, report);
    return 0;
  }

  if (*sweep) {
    const auto ratios = parse_list<double>("--ratios", sweep_ratios,
                                           [](const std::string& s, std::size_t* used) { return std::stod(s, used); });
    const auto seeds = parse_list<std::uint64_t>(
        "--seeds", sweep_seeds,
        [](const std::string& s, std::size_t* used) { return std::stoull(s, used); });
    for (double r : ratios) {
      if (!(r >= 0)) throw UsageError("--ratios: ratios must be >= 0");
    }
    const auto sites = sweep_flags.load(sweep_in);
    const auto rows = bench::sweep_weights(sites, ratios, seeds, sweep_flags.config());
    const std::string table = bench::sweep_table(rows);
    if (sweep_out.empty()) {
      std::fputs(table.c_str(), stdout);
    } else {
      io::write_file_atomic(sweep_out, table);
      std::printf("wrote %zu rows to %s\n", rows.size(), sweep_out.c_str());
    }
    return 0;
  }

  if (*exporter) {
    const auto sites = export_flags.load(export_in);
    BuildConfig config = export_flags.config();
    config.keep_geometry = true;
    const PowerDiagram d = build_diagram(sites, config);
    io::export_cells_obj(export_out, d);
    std::printf("wrote %zu cells to %s\n", d.site_count, export_out.c_str());
    return 0;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const pwrgram::Error& e) {
    std::fprintf(stderr, "error: %s: %s\n", pwrgram::to_string(e.code()), e.what());
    return e.code() == ErrorCode::invalid_argument ? kExitUsage : kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitInput;
  }
}
