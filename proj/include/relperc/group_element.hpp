#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "relperc/hash.hpp"

namespace relperc {

/// A vertex identity: the canonical symbol sequence of an element in some
/// group model. The encoding is model-specific; two elements of the same
/// model are equal iff their normal forms are equal.
struct GroupElement {
  std::vector<std::int32_t> normal_form;

  GroupElement() = default;
  explicit GroupElement(std::vector<std::int32_t> nf) : normal_form(std::move(nf)) {}

  std::uint64_t hash() const noexcept { return hash_symbols(normal_form); }

  friend bool operator==(const GroupElement&, const GroupElement&) = default;
  friend std::strong_ordering operator<=>(const GroupElement& a, const GroupElement& b) {
    return a.normal_form <=> b.normal_form;
  }
};

/// Key of the undirected edge {a, b}: endpoints sorted lexicographically by
/// normal form, so the key does not depend on traversal direction or radius.
inline std::uint64_t edge_key(const GroupElement& a, const GroupElement& b) noexcept {
  const bool a_first = a.normal_form <= b.normal_form;
  const GroupElement& lo = a_first ? a : b;
  const GroupElement& hi = a_first ? b : a;
  return hash_combine(lo.hash(), hi.hash());
}

}  // namespace relperc

template <>
struct std::hash<relperc::GroupElement> {
  std::size_t operator()(const relperc::GroupElement& g) const noexcept {
    return static_cast<std::size_t>(g.hash());
  }
};
