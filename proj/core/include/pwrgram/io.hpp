#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pwrgram/bench.hpp"
#include "pwrgram/diagram.hpp"

namespace pwrgram::io {

// Site file: "PWRGRAM1", precision byte (4 or 8), u64 count, 16 zero bytes,
// then count * (x, y, z, w) little-endian IEEE floats.
inline constexpr std::size_t site_header_size = 33;
// CSR file: "PWRCSR01", u64 site_count, (site_count + 1) u64 offsets,
// offsets.back() u32 neighbours, site_count flag bytes.
inline constexpr std::size_t csr_header_size = 16;

struct SiteFile {
  PrecisionMode precision = PrecisionMode::double_;
  std::vector<Site> sites;
};

std::vector<std::uint8_t> encode_sites(std::span<const Site> sites, PrecisionMode precision);
// Errors carry the byte offset (or site index for NonFiniteInput).
SiteFile decode_sites(std::span<const std::uint8_t> bytes);

void write_sites(const std::filesystem::path& path, std::span<const Site> sites,
                 PrecisionMode precision = PrecisionMode::double_);
SiteFile read_site_file(const std::filesystem::path& path);
std::vector<Site> read_sites(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_csr(const PowerDiagram& diagram);
PowerDiagram decode_csr(std::span<const std::uint8_t> bytes);
void write_adjacency_csr(const std::filesystem::path& path, const PowerDiagram& diagram);
PowerDiagram read_adjacency_csr(const std::filesystem::path& path);

// One object per nonempty cell. Vertices closer than `dedupe_eps` within a
// cell are merged; the default is 1e-9 times the geometry's bounding diagonal.
std::string cells_obj(const PowerDiagram& diagram, std::optional<double> dedupe_eps = {});
void export_cells_obj(const std::filesystem::path& path, const PowerDiagram& diagram,
                      std::optional<double> dedupe_eps = {});

std::string stats_json(const bench::BenchReport& report);
bench::BenchReport parse_stats_json(const std::string& text);
void write_stats_json(const std::filesystem::path& path, const bench::BenchReport& report);
bench::BenchReport read_stats_json(const std::filesystem::path& path);

// Writes to a sibling temporary and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

}  // namespace pwrgram::io
