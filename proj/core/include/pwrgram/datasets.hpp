#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "pwrgram/geometry.hpp"

namespace pwrgram::datasets {

// Counter-based generator: the n-th draw of a stream is
//   splitmix64_mix(key + (n + 1) * 0x9E3779B97F4A7C15)
// with key = splitmix64_mix(seed + stream * 0xD1B54A32D192ED03). Every dataset
// is therefore a pure function of (seed, stream, counter).
class CounterRng {
 public:
  enum Stream : std::uint64_t { positions = 1, centers = 2, cluster_noise = 3, weights = 4 };

  CounterRng(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t bits(std::uint64_t counter) const;
  // [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const;
  // Box-Muller cosine branch over draws 2c and 2c + 1.
  double normal(std::uint64_t counter) const;

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t key_;
};

enum class Distribution : std::uint8_t { white_noise, clustered, density_gradient };

const char* to_string(Distribution kind);
// Accepts "white_noise"/"white-noise" style names; throws InvalidArgument.
Distribution parse_distribution(std::string_view name);

struct GeneratorSpec {
  Distribution kind = Distribution::white_noise;
  std::size_t n = 1000;
  Aabbd domain{{-10, -10, -10}, {10, 10, 10}};
  std::uint32_t cluster_count = 10;
  double cluster_sigma = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

// All generators return zero-weight sites with id = index.
std::vector<Site> gen_white_noise(const GeneratorSpec& spec);
// K uniform centers; point i belongs to cluster i mod K; N(c, sigma^2 I)
// clamped to the domain.
std::vector<Site> gen_clustered(const GeneratorSpec& spec);
// x = a + (b - a) sqrt(u) over the domain's x extent; y, z uniform.
std::vector<Site> gen_density_gradient(const GeneratorSpec& spec);
std::vector<Site> generate(const GeneratorSpec& spec);

// Cluster centers used by gen_clustered for this spec.
std::vector<Vec3d> cluster_centers(const GeneratorSpec& spec);

// Lower median over sites of the distance to the nearest other site.
double median_nn_distance(std::span<const Site> sites);

// Normal weights, mean 0, standard deviation weight_ratio * d_nn^2 / 3.
std::vector<double> sample_weights(std::span<const Site> sites, double weight_ratio,
                                   std::uint64_t seed);
std::vector<double> sample_weights(std::size_t count, double d_nn, double weight_ratio,
                                   std::uint64_t seed);

std::vector<Site> with_weights(std::span<const Site> sites, std::span<const double> weights);

}  // namespace pwrgram::datasets
