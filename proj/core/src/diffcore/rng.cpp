#include "flowgrpo/diffcore/rng.hpp"

#include <cmath>
#include <numbers>

#include "flowgrpo/diffcore/errors.hpp"

namespace flowgrpo {

namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) noexcept {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream::RngStream(std::uint64_t seed, std::string label, std::uint64_t counter)
    : seed_(seed),
      label_(std::move(label)),
      key_(mix64(mix64(seed ^ kGolden) ^ fnv1a64(label_))),
      counter_(counter) {}

std::uint64_t RngStream::next_u64() noexcept {
  // Two rounds of the splitmix finalizer over (key, counter).
  const std::uint64_t n = counter_++;
  return mix64(mix64(key_ + n * kGolden) ^ n);
}

double RngStream::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() noexcept {
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

RngStream RngStream::split(std::string_view sublabel) const {
  std::string label = label_;
  label += '/';
  label += sublabel;
  return RngStream(seed_, std::move(label));
}

DenseArray gaussian_draw(RngStream& rng, const DenseArray& mu, const DenseArray& sigma) {
  require_same_shape(mu, sigma, "gaussian_draw");
  DenseArray out(mu.shape());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!(sigma[i] > 0.0)) {
      throw DomainError("gaussian_draw: sigma must be positive (index " + std::to_string(i) + ")");
    }
    out[i] = mu[i] + sigma[i] * rng.normal();
  }
  return out;
}

DenseArray standard_normal(RngStream& rng, std::vector<std::size_t> shape) {
  DenseArray out(std::move(shape));
  for (double& v : out.data()) v = rng.normal();
  return out;
}

}  // namespace flowgrpo
