#include "pwrgram/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pwrgram/power_bvh.hpp"

namespace pwrgram::datasets {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kStreamStride = 0xD1B54A32D192ED03ull;

double lerp(double lo, double hi, double u) { return lo + (hi - lo) * u; }

}  // namespace

std::uint64_t CounterRng::mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix(seed + stream * kStreamStride)) {}

std::uint64_t CounterRng::bits(std::uint64_t counter) const {
  return mix(key_ + (counter + 1) * kGamma);
}

double CounterRng::uniform(std::uint64_t counter) const {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t counter) const {
  const double u1 = 1.0 - uniform(2 * counter);  // (0, 1]
  const double u2 = uniform(2 * counter + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

const char* to_string(Distribution kind) {
  switch (kind) {
    case Distribution::white_noise: return "white_noise";
    case Distribution::clustered: return "clustered";
    case Distribution::density_gradient: return "density_gradient";
  }
  return "unknown";
}

Distribution parse_distribution(std::string_view name) {
  std::string key(name);
  std::replace(key.begin(), key.end(), '-', '_');
  if (key == "white_noise") return Distribution::white_noise;
  if (key == "clustered") return Distribution::clustered;
  if (key == "density_gradient") return Distribution::density_gradient;
  throw Error(ErrorCode::invalid_argument, "unknown distribution '" + std::string(name) + "'");
}

void GeneratorSpec::validate() const {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "n must be >= 1");
  if (domain.empty()) throw Error(ErrorCode::invalid_argument, "domain is empty");
  if (kind == Distribution::clustered) {
    if (cluster_count < 1) throw Error(ErrorCode::invalid_argument, "cluster count must be >= 1");
    if (!(cluster_sigma > 0)) throw Error(ErrorCode::invalid_argument, "sigma must be > 0");
  }
}

std::vector<Site> gen_white_noise(const GeneratorSpec& spec) {
  spec.validate();
  const CounterRng rng(spec.seed, CounterRng::positions);
  std::vector<Site> out(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (int a = 0; a < 3; ++a) {
      out[i].position[a] = lerp(spec.domain.min_corner[a], spec.domain.max_corner[a],
                                rng.uniform(3 * i + static_cast<std::uint64_t>(a)));
    }
    out[i].id = static_cast<std::uint32_t>(i);
  }
  return out;
}

std::vector<Vec3d> cluster_centers(const GeneratorSpec& spec) {
  const CounterRng rng(spec.seed, CounterRng::centers);
  std::vector<Vec3d> centers(spec.cluster_count);
  for (std::size_t j = 0; j < centers.size(); ++j) {
    for (int a = 0; a < 3; ++a) {
      centers[j][a] = lerp(spec.domain.min_corner[a], spec.domain.max_corner[a],
                           rng.uniform(3 * j + static_cast<std::uint64_t>(a)));
    }
  }
  return centers;
}

std::vector<Site> gen_clustered(const GeneratorSpec& spec) {
  spec.validate();
  const std::vector<Vec3d> centers = cluster_centers(spec);
  const CounterRng noise(spec.seed, CounterRng::cluster_noise);
  std::vector<Site> out(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const Vec3d& c = centers[i % centers.size()];
    for (int a = 0; a < 3; ++a) {
      const double v = c[a] + spec.cluster_sigma * noise.normal(3 * i + static_cast<std::uint64_t>(a));
      out[i].position[a] = std::clamp(v, spec.domain.min_corner[a], spec.domain.max_corner[a]);
    }
    out[i].id = static_cast<std::uint32_t>(i);
  }
  return out;
}

std::vector<Site> gen_density_gradient(const GeneratorSpec& spec) {
  spec.validate();
  const CounterRng rng(spec.seed, CounterRng::positions);
  std::vector<Site> out(spec.n);
  const double a = spec.domain.min_corner.x;
  const double b = spec.domain.max_corner.x;
  for (std::size_t i = 0; i < spec.n; ++i) {
    out[i].position.x = a + (b - a) * std::sqrt(rng.uniform(3 * i));
    out[i].position.y = lerp(spec.domain.min_corner.y, spec.domain.max_corner.y, rng.uniform(3 * i + 1));
    out[i].position.z = lerp(spec.domain.min_corner.z, spec.domain.max_corner.z, rng.uniform(3 * i + 2));
    out[i].id = static_cast<std::uint32_t>(i);
  }
  return out;
}

std::vector<Site> generate(const GeneratorSpec& spec) {
  switch (spec.kind) {
    case Distribution::white_noise: return gen_white_noise(spec);
    case Distribution::clustered: return gen_clustered(spec);
    case Distribution::density_gradient: return gen_density_gradient(spec);
  }
  throw Error(ErrorCode::invalid_argument, "unknown distribution");
}

double median_nn_distance(std::span<const Site> sites) {
  if (sites.size() < 2) {
    throw Error(ErrorCode::too_few_sites, "median nearest-neighbour distance needs >= 2 sites");
  }
  std::vector<Site> indexed(sites.begin(), sites.end());
  for (std::size_t i = 0; i < indexed.size(); ++i) indexed[i].id = static_cast<std::uint32_t>(i);
  const auto bvh = PowerBvh<double>::build(indexed);
  std::vector<double> dist(indexed.size());
  for (std::size_t i = 0; i < indexed.size(); ++i) {
    const auto nn = bvh.knn(indexed[i].position, 1, static_cast<std::uint32_t>(i));
    dist[i] = norm(indexed[nn.front()].position - indexed[i].position);
  }
  const auto mid = dist.begin() + static_cast<std::ptrdiff_t>((dist.size() - 1) / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  return *mid;
}

std::vector<double> sample_weights(std::size_t count, double d_nn, double weight_ratio,
                                   std::uint64_t seed) {
  if (!(weight_ratio >= 0)) throw Error(ErrorCode::invalid_argument, "weight ratio must be >= 0");
  std::vector<double> w(count, 0.0);
  if (weight_ratio == 0) return w;
  const double sigma = weight_ratio * d_nn * d_nn / 3.0;
  const CounterRng rng(seed, CounterRng::weights);
  for (std::size_t i = 0; i < count; ++i) w[i] = sigma * rng.normal(i);
  return w;
}

std::vector<double> sample_weights(std::span<const Site> sites, double weight_ratio,
                                   std::uint64_t seed) {
  if (weight_ratio == 0) return std::vector<double>(sites.size(), 0.0);
  return sample_weights(sites.size(), median_nn_distance(sites), weight_ratio, seed);
}

std::vector<Site> with_weights(std::span<const Site> sites, std::span<const double> weights) {
  if (sites.size() != weights.size()) {
    throw Error(ErrorCode::size_mismatch, "weights and sites differ in length");
  }
  std::vector<Site> out(sites.begin(), sites.end());
  for (std::size_t i = 0; i < out.size(); ++i) out[i].weight = weights[i];
  return out;
}

}  // namespace pwrgram::datasets
