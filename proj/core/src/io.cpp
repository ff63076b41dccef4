#include "pwrgram/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unistd.h>

#include "json.hpp"

namespace pwrgram::io {

namespace {

using json = nlohmann::json;

constexpr char kSiteMagic[8] = {'P', 'W', 'R', 'G', 'R', 'A', 'M', '1'};
constexpr char kCsrMagic[8] = {'P', 'W', 'R', 'C', 'S', 'R', '0', '1'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
  }
}

template <typename T>
T get_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

void put_real(std::vector<std::uint8_t>& out, double value, PrecisionMode precision) {
  if (precision == PrecisionMode::single) {
    put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
  } else {
    put_le(out, std::bit_cast<std::uint64_t>(value));
  }
}

[[noreturn]] void truncated(const std::string& what, std::size_t offset) {
  throw Error(ErrorCode::truncated_payload, what + " at byte " + std::to_string(offset), offset);
}

json stats_to_json(const TraversalStats& s) {
  return {{"nodes_visited", s.nodes_visited},       {"leaves_visited", s.leaves_visited},
          {"clip_calls", s.clip_calls},             {"clip_unchanged", s.clip_unchanged},
          {"stack_high_water", s.stack_high_water}};
}

TraversalStats stats_from_json(const json& j) {
  TraversalStats s;
  s.nodes_visited = j.at("nodes_visited").get<std::uint64_t>();
  s.leaves_visited = j.at("leaves_visited").get<std::uint64_t>();
  s.clip_calls = j.at("clip_calls").get<std::uint64_t>();
  s.clip_unchanged = j.at("clip_unchanged").get<std::uint64_t>();
  s.stack_high_water = j.at("stack_high_water").get<std::uint64_t>();
  return s;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

template <typename Enum>
Enum enum_from(const json& j, std::initializer_list<Enum> values) {
  const std::string name = j.get<std::string>();
  for (Enum v : values) {
    if (name == to_string(v)) return v;
  }
  throw Error(ErrorCode::invalid_argument, "stats JSON: unknown enum value '" + name + "'");
}

}  // namespace

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::io_failure, "cannot read '" + path.string() + "'");
  return bytes;
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_failure, "cannot create '" + tmp.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      throw Error(ErrorCode::io_failure, "cannot write '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::io_failure, "cannot move output into '" + path.string() + "'");
  }
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> encode_sites(std::span<const Site> sites, PrecisionMode precision) {
  const std::size_t width = precision == PrecisionMode::single ? 4 : 8;
  std::vector<std::uint8_t> out;
  out.reserve(site_header_size + sites.size() * 4 * width);
  for (char c : kSiteMagic) out.push_back(static_cast<std::uint8_t>(c));
  out.push_back(static_cast<std::uint8_t>(width));
  put_le<std::uint64_t>(out, sites.size());
  for (int i = 0; i < 16; ++i) out.push_back(0);
  for (const Site& s : sites) {
    put_real(out, s.position.x, precision);
    put_real(out, s.position.y, precision);
    put_real(out, s.position.z, precision);
    put_real(out, s.weight, precision);
  }
  return out;
}

SiteFile decode_sites(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kSiteMagic ||
      std::memcmp(bytes.data(), kSiteMagic, sizeof kSiteMagic) != 0) {
    throw Error(ErrorCode::bad_magic, "not a site file (bad magic at byte 0)", 0);
  }
  if (bytes.size() < site_header_size) truncated("site header ends early", bytes.size());
  const std::uint8_t width = bytes[8];
  if (width != 4 && width != 8) {
    throw Error(ErrorCode::bad_magic, "unsupported precision byte " + std::to_string(width) +
                                          " at byte 8", 8);
  }
  for (std::size_t i = 17; i < site_header_size; ++i) {
    if (bytes[i] != 0) {
      throw Error(ErrorCode::bad_magic, "reserved header byte " + std::to_string(i) + " is not zero", i);
    }
  }
  const auto count = get_le<std::uint64_t>(bytes.data() + 9);
  const std::size_t payload = bytes.size() - site_header_size;
  const std::size_t record = 4u * width;
  if (count > payload / record || count * record != payload) {
    throw Error(ErrorCode::truncated_payload,
                "header declares " + std::to_string(count) + " sites but payload holds " +
                    std::to_string(payload) + " bytes",
                site_header_size + std::min<std::size_t>(payload, count * record));
  }

  SiteFile file;
  file.precision = width == 4 ? PrecisionMode::single : PrecisionMode::double_;
  file.sites.resize(count);
  const std::uint8_t* p = bytes.data() + site_header_size;
  for (std::size_t i = 0; i < count; ++i) {
    double v[4];
    for (double& c : v) {
      if (width == 4) {
        c = std::bit_cast<float>(get_le<std::uint32_t>(p));
      } else {
        c = std::bit_cast<double>(get_le<std::uint64_t>(p));
      }
      p += width;
    }
    for (double c : v) {
      if (!std::isfinite(c)) {
        throw Error(ErrorCode::non_finite_input, "site " + std::to_string(i) + " has a non-finite value", i);
      }
    }
    file.sites[i] = Site{{v[0], v[1], v[2]}, v[3], static_cast<std::uint32_t>(i)};
  }
  return file;
}

void write_sites(const std::filesystem::path& path, std::span<const Site> sites,
                 PrecisionMode precision) {
  write_file_atomic(path, encode_sites(sites, precision));
}

SiteFile read_site_file(const std::filesystem::path& path) { return decode_sites(read_file(path)); }

std::vector<Site> read_sites(const std::filesystem::path& path) {
  return read_site_file(path).sites;
}

std::vector<std::uint8_t> encode_csr(const PowerDiagram& d) {
  if (d.offsets.size() != d.site_count + 1 || d.flags.size() != d.site_count ||
      d.offsets.back() != d.neighbors.size()) {
    throw Error(ErrorCode::size_mismatch, "diagram CSR arrays are inconsistent");
  }
  std::vector<std::uint8_t> out;
  out.reserve(csr_header_size + 8 * d.offsets.size() + 4 * d.neighbors.size() + d.flags.size());
  for (char c : kCsrMagic) out.push_back(static_cast<std::uint8_t>(c));
  put_le<std::uint64_t>(out, d.site_count);
  for (std::uint64_t o : d.offsets) put_le(out, o);
  for (std::uint32_t n : d.neighbors) put_le(out, n);
  for (std::uint8_t f : d.flags) out.push_back(f);
  return out;
}

PowerDiagram decode_csr(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kCsrMagic || std::memcmp(bytes.data(), kCsrMagic, sizeof kCsrMagic) != 0) {
    throw Error(ErrorCode::bad_magic, "not a CSR file (bad magic at byte 0)", 0);
  }
  if (bytes.size() < csr_header_size) truncated("CSR header ends early", bytes.size());
  PowerDiagram d;
  d.site_count = get_le<std::uint64_t>(bytes.data() + 8);
  std::size_t pos = csr_header_size;
  const std::size_t remaining = bytes.size() - pos;
  if (d.site_count >= remaining / 8) truncated("CSR offsets run past the end", bytes.size());
  d.offsets.resize(d.site_count + 1);
  for (auto& o : d.offsets) {
    o = get_le<std::uint64_t>(bytes.data() + pos);
    pos += 8;
  }
  if (d.offsets.front() != 0) {
    throw Error(ErrorCode::truncated_payload, "CSR offsets do not start at zero", csr_header_size);
  }
  for (std::size_t i = 1; i < d.offsets.size(); ++i) {
    if (d.offsets[i] < d.offsets[i - 1]) {
      throw Error(ErrorCode::truncated_payload, "CSR offsets decrease at row " + std::to_string(i),
                  csr_header_size + 8 * i);
    }
  }
  const std::uint64_t edges = d.offsets.back();
  if (edges > (bytes.size() - pos) / 4 || bytes.size() - pos != edges * 4 + d.site_count) {
    truncated("CSR payload length disagrees with its offsets", bytes.size());
  }
  d.neighbors.resize(edges);
  for (auto& n : d.neighbors) {
    n = get_le<std::uint32_t>(bytes.data() + pos);
    if (n >= d.site_count) {
      throw Error(ErrorCode::truncated_payload, "CSR neighbour out of range", pos);
    }
    pos += 4;
  }
  d.flags.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.end());
  return d;
}

void write_adjacency_csr(const std::filesystem::path& path, const PowerDiagram& diagram) {
  write_file_atomic(path, encode_csr(diagram));
}

PowerDiagram read_adjacency_csr(const std::filesystem::path& path) {
  return decode_csr(read_file(path));
}

std::string cells_obj(const PowerDiagram& d, std::optional<double> dedupe_eps) {
  if (!d.geometry) throw Error(ErrorCode::missing_geometry, "diagram was built without geometry");
  const auto& cells = *d.geometry;
  double eps = 0;
  if (dedupe_eps) {
    eps = *dedupe_eps;
  } else {
    Aabbd bounds;
    for (const auto& cell : cells) {
      for (const auto& face : cell.faces) {
        for (const auto& v : face.loop) bounds.expand(v);
      }
    }
    eps = bounds.empty() ? 0 : 1e-9 * bounds.diagonal();
  }
  const double eps_sq = eps * eps;

  std::ostringstream out;
  out << "# pwrgram cells: " << d.site_count << "\n";
  std::size_t base = 1;
  std::vector<Vec3d> verts;
  std::vector<std::size_t> loop;
  char buf[128];
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (d.is_empty(i) || cells[i].faces.empty()) continue;
    verts.clear();
    std::ostringstream faces;
    for (const auto& face : cells[i].faces) {
      loop.clear();
      for (const Vec3d& v : face.loop) {
        std::size_t k = 0;
        while (k < verts.size() && squared_norm(verts[k] - v) > eps_sq) ++k;
        if (k == verts.size()) verts.push_back(v);
        if (loop.empty() || loop.back() != k) loop.push_back(k);
      }
      while (loop.size() > 1 && loop.front() == loop.back()) loop.pop_back();
      if (loop.size() < 3) continue;
      faces << 'f';
      for (std::size_t k : loop) faces << ' ' << base + k;
      faces << '\n';
    }
    out << "o cell_" << i << '\n';
    for (const Vec3d& v : verts) {
      std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
      out << buf;
    }
    out << faces.str();
    base += verts.size();
  }
  return out.str();
}

void export_cells_obj(const std::filesystem::path& path, const PowerDiagram& diagram,
                      std::optional<double> dedupe_eps) {
  write_file_atomic(path, cells_obj(diagram, dedupe_eps));
}

std::string stats_json(const bench::BenchReport& r) {
  json j;
  j["schema"] = "pwrgram-report";
  j["schema_version"] = r.schema_version;
  j["command"] = r.command;
  j["input"] = r.input;
  j["site_count"] = r.site_count;
  j["machine"] = r.machine;
  j["threads"] = r.threads;
  j["box_margin"] = r.box_margin;
  j["warm_start_k"] = r.warm_start_k;
  j["protocol"] = {{"warmup_runs", r.protocol.warmup_runs},
                   {"timed_runs", r.protocol.timed_runs},
                   {"timeout_seconds", r.protocol.timeout_seconds}};
  json configs = json::array();
  for (const bench::CellReport& c : r.cells) {
    json runs = json::array();
    for (const bench::RunRecord& run : c.runs) {
      runs.push_back({{"warmup", run.warmup},
                      {"status", run.completed ? "ok" : "dnf"},
                      {"seconds", run.seconds},
                      {"index_seconds", run.index_seconds},
                      {"cells_seconds", run.cells_seconds},
                      {"stats", stats_to_json(run.stats)},
                      {"empty_ratio", run.empty_ratio}});
    }
    configs.push_back({{"config",
                        {{"culling", to_string(c.config.culling)},
                         {"traversal", to_string(c.config.traversal)},
                         {"warm_start", c.config.warm_start},
                         {"leaf_size", c.config.leaf_size},
                         {"precision", to_string(c.config.precision)}}},
                       {"dnf", c.dnf},
                       {"summary",
                        {{"mean_seconds", optional_json(c.mean_seconds)},
                         {"median_seconds", optional_json(c.median_seconds)},
                         {"min_seconds", optional_json(c.min_seconds)},
                         {"max_seconds", optional_json(c.max_seconds)},
                         {"index_fraction", c.index_fraction},
                         {"cells_fraction", c.cells_fraction},
                         {"median_stats", stats_to_json(c.median_stats)}}},
                       {"runs", std::move(runs)}});
  }
  j["configs"] = std::move(configs);
  if (r.verification) {
    const auto& v = *r.verification;
    j["verification"] = {{"missing_pairs", v.missing_pairs}, {"extra_pairs", v.extra_pairs},
                         {"oracle_pairs", v.oracle_pairs},   {"mismatch_rate", v.mismatch_rate},
                         {"tolerance", v.tolerance},         {"passed", v.passed}};
  } else {
    j["verification"] = nullptr;
  }
  return j.dump(2) + "\n";
}

bench::BenchReport parse_stats_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("schema").get<std::string>() != "pwrgram-report") {
      throw Error(ErrorCode::invalid_argument, "stats JSON: unknown schema");
    }
    bench::BenchReport r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != bench::report_schema_version) {
      throw Error(ErrorCode::invalid_argument,
                  "stats JSON: unsupported schema_version " + std::to_string(r.schema_version));
    }
    r.command = j.at("command").get<std::string>();
    r.input = j.at("input").get<std::string>();
    r.site_count = j.at("site_count").get<std::uint64_t>();
    r.machine = j.at("machine").get<std::string>();
    r.threads = j.at("threads").get<std::uint32_t>();
    r.box_margin = j.at("box_margin").get<double>();
    r.warm_start_k = j.at("warm_start_k").get<std::uint32_t>();
    const json& p = j.at("protocol");
    r.protocol.warmup_runs = p.at("warmup_runs").get<std::uint32_t>();
    r.protocol.timed_runs = p.at("timed_runs").get<std::uint32_t>();
    r.protocol.timeout_seconds = p.at("timeout_seconds").get<double>();
    for (const json& c : j.at("configs")) {
      bench::CellReport cell;
      const json& cfg = c.at("config");
      cell.config.culling =
          enum_from(cfg.at("culling"), {CullingMode::directional, CullingMode::isotropic});
      cell.config.traversal =
          enum_from(cfg.at("traversal"), {TraversalMode::best_first, TraversalMode::depth_first});
      cell.config.warm_start = cfg.at("warm_start").get<bool>();
      cell.config.leaf_size = cfg.at("leaf_size").get<std::uint32_t>();
      cell.config.precision =
          enum_from(cfg.at("precision"), {PrecisionMode::single, PrecisionMode::double_});
      cell.dnf = c.at("dnf").get<bool>();
      const json& s = c.at("summary");
      cell.mean_seconds = optional_from(s.at("mean_seconds"));
      cell.median_seconds = optional_from(s.at("median_seconds"));
      cell.min_seconds = optional_from(s.at("min_seconds"));
      cell.max_seconds = optional_from(s.at("max_seconds"));
      cell.index_fraction = s.at("index_fraction").get<double>();
      cell.cells_fraction = s.at("cells_fraction").get<double>();
      cell.median_stats = stats_from_json(s.at("median_stats"));
      for (const json& run : c.at("runs")) {
        bench::RunRecord rec;
        rec.warmup = run.at("warmup").get<bool>();
        const std::string status = run.at("status").get<std::string>();
        if (status != "ok" && status != "dnf") {
          throw Error(ErrorCode::invalid_argument, "stats JSON: bad run status '" + status + "'");
        }
        rec.completed = status == "ok";
        rec.seconds = run.at("seconds").get<double>();
        rec.index_seconds = run.at("index_seconds").get<double>();
        rec.cells_seconds = run.at("cells_seconds").get<double>();
        rec.stats = stats_from_json(run.at("stats"));
        rec.empty_ratio = run.at("empty_ratio").get<double>();
        cell.runs.push_back(rec);
      }
      r.cells.push_back(std::move(cell));
    }
    const json& v = j.at("verification");
    if (!v.is_null()) {
      bench::Verification ver;
      ver.missing_pairs = v.at("missing_pairs").get<std::uint64_t>();
      ver.extra_pairs = v.at("extra_pairs").get<std::uint64_t>();
      ver.oracle_pairs = v.at("oracle_pairs").get<std::uint64_t>();
      ver.mismatch_rate = v.at("mismatch_rate").get<double>();
      ver.tolerance = v.at("tolerance").get<double>();
      ver.passed = v.at("passed").get<bool>();
      r.verification = ver;
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::invalid_argument, std::string("stats JSON: ") + e.what());
  }
}

void write_stats_json(const std::filesystem::path& path, const bench::BenchReport& report) {
  write_file_atomic(path, stats_json(report));
}

bench::BenchReport read_stats_json(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return parse_stats_json(std::string(bytes.begin(), bytes.end()));
}

}  // namespace pwrgram::io
