#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "flowgrpo/diffcore/dense_array.hpp"

namespace flowgrpo {

// Counter-based random stream. Draw n of stream (seed, label) is a pure function of
// (seed, label, n), so streams can be split by label and replayed in any order.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::string label, std::uint64_t counter = 0);

  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1).
  double uniform() noexcept;
  // Standard normal via Box-Muller; consumes two counters per draw.
  double normal() noexcept;

  // Fresh stream whose label is this label + "/" + sublabel, counter reset.
  RngStream split(std::string_view sublabel) const;

  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& label() const noexcept { return label_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::string label_;
  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept;

// mu + sigma * z with z ~ N(0, 1) drawn from rng; sigma must be > 0 everywhere.
DenseArray gaussian_draw(RngStream& rng, const DenseArray& mu, const DenseArray& sigma);

DenseArray standard_normal(RngStream& rng, std::vector<std::size_t> shape);

}  // namespace flowgrpo
