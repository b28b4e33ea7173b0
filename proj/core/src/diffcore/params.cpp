#include "flowgrpo/diffcore/params.hpp"

#include <algorithm>
#include <cstring>

#include "flowgrpo/diffcore/errors.hpp"
#include "flowgrpo/diffcore/rng.hpp"

namespace flowgrpo {

Param& ParamSet::add(std::string name, DenseArray init) {
  if (contains(name)) throw ContractError("ParamSet: duplicate parameter name '" + name + "'");
  DenseArray grad(init.shape());
  entries_.push_back(Param{std::move(name), std::move(init), std::move(grad)});
  ++version_;
  return entries_.back();
}

Param& ParamSet::get(std::string_view name) {
  auto it = std::find_if(entries_.begin(), entries_.end(),
                         [&](const Param& p) { return p.name == name; });
  if (it == entries_.end()) throw ContractError("ParamSet: no parameter named '" + std::string(name) + "'");
  return *it;
}

const Param& ParamSet::get(std::string_view name) const {
  return const_cast<ParamSet*>(this)->get(name);
}

bool ParamSet::contains(std::string_view name) const noexcept {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Param& p) { return p.name == name; });
}

void ParamSet::zero_grad() noexcept {
  for (Param& p : entries_) p.grad.fill(0.0);
}

void ParamSet::accumulate_grad(const ParamSet& other, double scale) {
  if (!same_layout(other)) throw DimensionError("ParamSet::accumulate_grad: layout mismatch");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto dst = entries_[i].grad.data();
    auto src = other.entries_[i].grad.data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
  }
}

void ParamSet::scale_grad(double factor) noexcept {
  for (Param& p : entries_) {
    for (double& g : p.grad.data()) g *= factor;
  }
}

std::size_t ParamSet::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const Param& p : entries_) n += p.value.size();
  return n;
}

bool ParamSet::same_layout(const ParamSet& other) const noexcept {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name != other.entries_[i].name) return false;
    if (!entries_[i].value.same_shape(other.entries_[i].value)) return false;
  }
  return true;
}

std::uint64_t ParamSet::value_hash() const noexcept {
  std::uint64_t h = fnv1a64("");
  for (const Param& p : entries_) {
    h = fnv1a64(p.name, h);
    for (std::size_t e : p.value.shape()) {
      h = fnv1a64(std::string_view(reinterpret_cast<const char*>(&e), sizeof e), h);
    }
    auto values = p.value.data();
    h = fnv1a64(std::string_view(reinterpret_cast<const char*>(values.data()),
                                 values.size() * sizeof(double)),
                h);
  }
  return h;
}

bool ParamSet::values_equal(const ParamSet& other) const noexcept {
  if (!same_layout(other)) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto a = entries_[i].value.data();
    auto b = other.entries_[i].value.data();
    if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

}  // namespace flowgrpo
