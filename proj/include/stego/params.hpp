#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "stego/error.hpp"
#include "stego/tensor.hpp"

namespace stego {

/// Ordered registry of named tensors. Registration order is the iteration
/// order, which fixes checkpoint layout and optimizer update order.
template <class T>
class BasicParameterSet {
 public:
  using TensorT = BasicTensor<T>;
  using Entry = std::pair<std::string, TensorT>;

  TensorT& add(std::string name, TensorT tensor) {
    if (index_.contains(name)) fail(ErrorKind::invalid_argument, "duplicate parameter '" + name + "'");
    index_.emplace(name, entries_.size());
    entries_.emplace_back(std::move(name), std::move(tensor));
    return entries_.back().second;
  }

  bool contains(std::string_view name) const { return index_.contains(std::string(name)); }

  const TensorT* find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &entries_[it->second].second;
  }
  TensorT* find(std::string_view name) {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &entries_[it->second].second;
  }

  const TensorT& at(std::string_view name) const {
    if (const TensorT* t = find(name)) return *t;
    fail(ErrorKind::invalid_argument, "unknown parameter '" + std::string(name) + "'");
  }
  TensorT& at(std::string_view name) {
    if (TensorT* t = find(name)) return *t;
    fail(ErrorKind::invalid_argument, "unknown parameter '" + std::string(name) + "'");
  }

  std::span<const Entry> entries() const { return entries_; }
  std::span<Entry> entries() { return entries_; }
  std::size_t tensor_count() const { return entries_.size(); }

  std::size_t total_count() const { return count_with_prefix(""); }

  std::size_t count_with_prefix(std::string_view prefix) const {
    std::size_t n = 0;
    for (const auto& [name, t] : entries_) {
      if (name.starts_with(prefix)) n += t.size();
    }
    return n;
  }

  void merge(const BasicParameterSet& other) {
    for (const auto& [name, t] : other.entries_) add(name, t);
  }

  BasicParameterSet zeros_like() const {
    BasicParameterSet out;
    for (const auto& [name, t] : entries_) out.add(name, TensorT(t.shape()));
    return out;
  }

  void set_zero() {
    for (auto& [name, t] : entries_) t.fill(T(0));
  }

  template <class U>
  BasicParameterSet<U> cast() const {
    BasicParameterSet<U> out;
    for (const auto& [name, t] : entries_) out.add(name, t.template cast<U>());
    return out;
  }

  bool operator==(const BasicParameterSet& other) const { return entries_ == other.entries_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

using ParameterSet = BasicParameterSet<float>;

}  // namespace stego
