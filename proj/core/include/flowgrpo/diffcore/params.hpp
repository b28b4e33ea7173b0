#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowgrpo/diffcore/dense_array.hpp"

namespace flowgrpo {

struct Param {
  std::string name;
  DenseArray value;
  DenseArray grad;  // same shape as value
};

// Named trainable arrays with gradient accumulators. The version counter advances on
// every mutation made through mark_mutated(), which is how stale tapes are detected.
class ParamSet {
 public:
  Param& add(std::string name, DenseArray init);

  Param& get(std::string_view name);
  const Param& get(std::string_view name) const;
  bool contains(std::string_view name) const noexcept;

  std::span<Param> entries() noexcept { return entries_; }
  std::span<const Param> entries() const noexcept { return entries_; }

  void zero_grad() noexcept;
  // Adds scale * other's gradients into ours; layouts must match.
  void accumulate_grad(const ParamSet& other, double scale = 1.0);
  void scale_grad(double factor) noexcept;

  std::size_t parameter_count() const noexcept;
  bool same_layout(const ParamSet& other) const noexcept;

  std::uint64_t version() const noexcept { return version_; }
  void mark_mutated() noexcept { ++version_; }

  // FNV-1a over names, shapes and the raw bytes of every value.
  std::uint64_t value_hash() const noexcept;

  // Values only; gradients and version are not compared.
  bool values_equal(const ParamSet& other) const noexcept;

 private:
  std::vector<Param> entries_;
  std::uint64_t version_ = 0;
};

}  // namespace flowgrpo
